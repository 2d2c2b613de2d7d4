#![no_main]

use libfuzzer_sys::fuzz_target;
use splitband::config::SweepAxis;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(axis) = text.parse::<SweepAxis>() {
        assert!(!axis.field.is_empty());
        assert!(axis.values.iter().all(|v| v.is_finite()));
    }
});
