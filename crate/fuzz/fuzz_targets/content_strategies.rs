#![no_main]

use libfuzzer_sys::fuzz_target;
use segames_core::content::parse_strategies;

fuzz_target!(|data: &[u8]| {
    let Ok(body) = std::str::from_utf8(data) else { return };
    if let Ok(strategies) = parse_strategies(body) {
        assert!(!strategies.is_empty());
        assert!(strategies.iter().all(|s| !s.reasons.is_empty()));
    }
});
