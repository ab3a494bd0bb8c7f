#![no_main]

use libfuzzer_sys::fuzz_target;
use segames_core::protocol::{decode_frame, encode};

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(msg) = decode_frame(line) {
        let frame = encode(&msg).expect("decoded message re-encodes");
        assert_eq!(decode_frame(frame.as_str()).as_ref(), Ok(&msg));
        // The decoder also takes chat whose text opens with the control
        // prefix without the guard space; only that case may change bytes.
        if frame.as_str() != line {
            let (sender, text) = line.split_once('>').expect("chat frame");
            assert_eq!(frame.as_str(), format!("{sender}> {text}"));
        }
    }
});
