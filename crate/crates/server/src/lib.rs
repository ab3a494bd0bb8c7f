//! Process-level pieces of the `segames` binary: network transports around
//! the core server and the offline batch commands.

pub mod batch;
pub mod net;
