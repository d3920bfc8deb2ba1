//! Replays the fuzz seeds, plus truncated and bit-flipped variants, through
//! every parser. Errors are fine; panics are not.

use std::fs;
use std::path::{Path, PathBuf};

use mdistinct::io::{load_sug_graph, parse_microdata, parse_schema, parse_update_model, read_release, ScenarioConfig};
use mdistinct::model::Schema;
use mdistinct::sug::prune;

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds for {target}");
    files.iter().map(|f| fs::read(f).unwrap()).collect()
}

fn variants(seed: &[u8]) -> Vec<Vec<u8>> {
    let mut out = vec![seed.to_vec()];
    for cut in (0..seed.len()).step_by(7) {
        out.push(seed[..cut].to_vec());
    }
    for i in (0..seed.len()).step_by(5) {
        for bit in [0x01u8, 0x20, 0x80] {
            let mut v = seed.to_vec();
            v[i] ^= bit;
            out.push(v);
        }
    }
    out
}

fn schema() -> Schema {
    let raw = fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/schema.csv")).unwrap();
    parse_schema(raw.as_slice(), Path::new("schema.csv")).unwrap()
}

fn each(target: &str, f: impl Fn(&[u8])) {
    for seed in corpus(target) {
        for v in variants(&seed) {
            f(&v);
        }
    }
}

const P: &str = "fuzz";

#[test]
fn schema_parser_never_panics() {
    each("schema", |d| {
        let _ = parse_schema(d, Path::new(P));
    });
}

#[test]
fn microdata_parser_never_panics() {
    let s = schema();
    each("microdata", |d| {
        let _ = parse_microdata(d, Path::new(P), &s);
    });
}

#[test]
fn model_parser_never_panics() {
    let s = schema();
    each("update_model", |d| {
        let _ = parse_update_model(d, Path::new(P), &s);
    });
}

#[test]
fn release_reader_never_panics() {
    let s = schema();
    let p = Path::new(P);
    each("release", |d| match d.iter().position(|&b| b == 0) {
        Some(i) => {
            let _ = read_release(&d[..i], p, &s, 1, Some((&d[i + 1..], p)));
        }
        None => {
            let _ = read_release::<_, &[u8]>(d, p, &s, 1, None);
        }
    });
}

#[test]
fn scenario_parser_never_panics() {
    each("scenario", |d| {
        if let Ok(cfg) = ScenarioConfig::parse(d, Path::new(P)) {
            let _ = cfg.check();
        }
    });
}

#[test]
fn graph_loader_never_panics() {
    each("sug_graph", |d| {
        if let Ok((sug, _)) = load_sug_graph(d, Path::new(P)) {
            let _ = prune(&sug);
        }
    });
}

#[test]
fn seeds_parse_cleanly() {
    let s = schema();
    let p = Path::new(P);
    assert!(parse_schema(corpus("schema")[0].as_slice(), p).is_ok());
    assert!(parse_microdata(corpus("microdata")[0].as_slice(), p, &s).is_ok());
    assert!(parse_update_model(corpus("update_model")[0].as_slice(), p, &s).is_ok());
    assert!(ScenarioConfig::parse(corpus("scenario")[0].as_slice(), p).unwrap().check().is_ok());
    assert!(load_sug_graph(corpus("sug_graph")[0].as_slice(), p).is_ok());
}
