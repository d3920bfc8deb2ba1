//! CSV file formats, the on-disk history store and synthetic workloads.

mod graph;
mod history;
mod scenario;
mod synth;
mod tables;

use std::fs::File;
use std::path::Path;

pub use graph::load_sug_graph;
pub use history::{HistoryLock, HistoryMeta, HistoryStore};
pub use scenario::{Publisher, ScenarioConfig};
pub use synth::{
    external_updates, generate_initial, synthesize_internal_updates, table7_model, table7_rules, table7_schema,
    AttrRule, UpdateSpec,
};
pub use tables::{
    load_et, load_microdata, load_release, load_schema, load_update_model, parse_microdata, parse_schema,
    parse_update_model, read_release, write_counterfeits, write_et, write_microdata, write_release, write_risks,
    write_schema, write_update_model,
};

use crate::error::{Error, Result};

pub(crate) fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok(reader_from(file))
}

pub(crate) fn reader_from<R: std::io::Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(r)
}

pub(crate) fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// Wraps a csv error with the file and line it came from.
pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::parse(path, line, e.to_string())
}

pub(crate) fn expect_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got: Vec<&str> = got.iter().collect();
    if got != want {
        return Err(Error::parse(
            path,
            1,
            format!("expected header {:?}, found {:?}", want.join(","), got.join(",")),
        ));
    }
    Ok(())
}
