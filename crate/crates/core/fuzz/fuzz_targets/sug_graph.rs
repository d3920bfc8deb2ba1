#![no_main]
use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    if let Ok((sug, _)) = mdistinct::io::load_sug_graph(data, Path::new("fuzz")) {
        let _ = mdistinct::sug::prune(&sug);
    }
});
