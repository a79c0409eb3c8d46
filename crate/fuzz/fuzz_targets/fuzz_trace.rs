#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Parsing never panics; anything accepted survives the replay checks
    // and renders back to the same rows.
    if let Ok(rows) = waa::trace::parse_trace(text) {
        let _ = waa::trace::replay_checks(&rows);
        let rendered = waa::trace::render_trace(&rows);
        let back = waa::trace::parse_trace(&rendered).expect("rendered trace must reparse");
        assert_eq!(back, rows);
    }
});
