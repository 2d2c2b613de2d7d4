#![no_main]

use libfuzzer_sys::fuzz_target;
use splitband::trajectory_io::Trajectory;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = Trajectory::decode(data) {
        let bytes = t.encode().expect("decoded trajectory encodes");
        assert_eq!(Trajectory::decode(&bytes).expect("round trip"), t);
    }
});
