#![no_main]
use libfuzzer_sys::fuzz_target;
use std::path::Path;

const SCHEMA: &str = include_str!("../../tests/fixtures/schema.csv");

// Release body and counterfeit statistics, split at the first NUL byte.
fuzz_target!(|data: &[u8]| {
    let p = Path::new("fuzz");
    let schema = mdistinct::io::parse_schema(SCHEMA.as_bytes(), p).unwrap();
    match data.iter().position(|&b| b == 0) {
        Some(i) => {
            let _ = mdistinct::io::read_release(&data[..i], p, &schema, 1, Some((&data[i + 1..], p)));
        }
        None => {
            let _ = mdistinct::io::read_release::<_, &[u8]>(data, p, &schema, 1, None);
        }
    }
});
