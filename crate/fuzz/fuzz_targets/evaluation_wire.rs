#![no_main]

use libfuzzer_sys::fuzz_target;
use segames_core::evaluator::Evaluation;

fuzz_target!(|data: &[u8]| {
    let Ok(wire) = std::str::from_utf8(data) else { return };
    if let Ok(e) = Evaluation::from_wire(wire) {
        assert!(e.score <= 3);
        assert_eq!(Evaluation::from_wire(&e.to_wire()).expect("re-parse"), e);
    }
});
