#![no_main]

use libfuzzer_sys::fuzz_target;
use segames_core::content::{parse_text, prior_text};

fuzz_target!(|data: &[u8]| {
    let Ok(body) = std::str::from_utf8(data) else { return };
    if let Ok(text) = parse_text("fuzz.toml", body) {
        for &t in &text.targets {
            text.sentence(t).expect("validated target index");
            prior_text(&text, t).expect("validated target has prior text");
        }
        text.sentence(text.bonus_sentence_index())
            .expect("bonus sentence exists");
    }
});
