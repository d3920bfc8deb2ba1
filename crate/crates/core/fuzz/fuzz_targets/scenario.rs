#![no_main]
use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = mdistinct::io::ScenarioConfig::parse(data, Path::new("fuzz")) {
        let _ = cfg.check();
    }
});
