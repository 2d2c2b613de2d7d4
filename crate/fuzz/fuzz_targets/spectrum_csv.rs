#![no_main]

use libfuzzer_sys::fuzz_target;
use splitband::SpectrumGrid;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = SpectrumGrid::read_csv(data) {
        s.validate().expect("parsed spectrum is valid");
        let _ = s.integral();
    }
});
