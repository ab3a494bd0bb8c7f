#![no_main]

use libfuzzer_sys::fuzz_target;
use segames_core::config::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = Config::from_toml_str(text) {
        config.validate().expect("a parsed config is valid");
    }
});
