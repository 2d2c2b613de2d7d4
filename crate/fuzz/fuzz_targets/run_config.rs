#![no_main]

use libfuzzer_sys::fuzz_target;
use splitband::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_json(text) {
        let _ = cfg.validate();
        if let Ok(json) = cfg.to_json() {
            let back = RunConfig::from_json(&json).expect("serialized config parses");
            assert_eq!(back.hash(), cfg.hash());
        }
    }
});
