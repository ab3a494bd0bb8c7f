//! Server-authoritative engine for two self-explanation reading games:
//! MiBoard, a 3 to 4 player turn-taking board game, and Showdown, a
//! 2-player scored duel. Also contains the wire codec, matchmaking, the
//! event log and a simulated-time bot harness.

pub mod config;
pub mod content;
pub mod evaluator;
pub mod event_log;
pub mod game;
pub mod harness;
pub mod lobby;
pub mod miboard;
pub mod protocol;
pub mod replay;
pub mod rng;
pub mod server;
pub mod showdown;
pub mod types;
