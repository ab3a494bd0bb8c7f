#![no_main]

use libfuzzer_sys::fuzz_target;
use segames_core::content::{parse_event_cards, MAX_EVENT_DELTA};

fuzz_target!(|data: &[u8]| {
    let Ok(body) = std::str::from_utf8(data) else { return };
    if let Ok(cards) = parse_event_cards(body) {
        assert!(cards.iter().all(|c| c.delta != 0 && c.delta.abs() <= MAX_EVENT_DELTA));
    }
});
