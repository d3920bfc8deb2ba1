#![no_main]
use libfuzzer_sys::fuzz_target;
use std::path::Path;

const SCHEMA: &str = include_str!("../../tests/fixtures/schema.csv");

fuzz_target!(|data: &[u8]| {
    let p = Path::new("fuzz");
    let schema = mdistinct::io::parse_schema(SCHEMA.as_bytes(), p).unwrap();
    let _ = mdistinct::io::parse_microdata(data, p, &schema);
});
