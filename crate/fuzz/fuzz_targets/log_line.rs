#![no_main]

use libfuzzer_sys::fuzz_target;
use segames_core::event_log::LogRecord;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(record) = LogRecord::parse_line(line) {
        let again = LogRecord::parse_line(&record.to_line()).expect("serialized record parses");
        assert_eq!(again, record);
        let _ = record.message();
    }
});
