#![no_main]

use libfuzzer_sys::fuzz_target;
use waa::DiscreteMeasure;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Anything the wire format accepts is a canonical probability measure:
    // positive masses summing to one, sorted merged support, stable under
    // re-canonicalization and JSON round-trips.
    if let Ok(m) = serde_json::from_str::<DiscreteMeasure>(text) {
        assert!((m.total_mass() - 1.0).abs() <= 1e-12);
        assert!(m.atoms().iter().all(|(_, mass)| *mass > 0.0));
        let again = DiscreteMeasure::new(m.atoms().to_vec()).expect("canonical form");
        assert_eq!(again, m);
        let json = serde_json::to_string(&m).expect("serialize");
        let back: DiscreteMeasure = serde_json::from_str(&json).expect("round trip");
        assert_eq!(back, m);
    }
});
