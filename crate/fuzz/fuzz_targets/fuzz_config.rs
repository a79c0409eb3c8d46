#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // The config parser must reject arbitrary bytes without panicking.
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = waa::config::parse_config(text);
    }
});
