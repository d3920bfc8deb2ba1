use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{csv_err, expect_header, line_of, load_release, load_schema, open_csv, write_counterfeits, write_release, write_schema};
use crate::model::{PublishedRelease, Schema};

/// Contents of `meta.csv`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistoryMeta {
    pub publisher: String,
    pub m: usize,
    pub seed: u64,
    pub releases: u32,
    pub invalidated_total: u64,
}

impl HistoryMeta {
    fn to_rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("publisher", self.publisher.clone()),
            ("m", self.m.to_string()),
            ("seed", self.seed.to_string()),
            ("releases", self.releases.to_string()),
            ("invalidated_total", self.invalidated_total.to_string()),
        ]
    }
}

/// A directory holding `schema.csv`, `meta.csv` and one
/// `release_<i>.csv` / `counterfeits_<i>.csv` pair per release.
#[derive(Clone, Debug)]
pub struct HistoryStore {
    dir: PathBuf,
}

/// Held while writing; removes the lock file on drop.
#[derive(Debug)]
pub struct HistoryLock {
    path: PathBuf,
}

impl Drop for HistoryLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

impl HistoryStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        HistoryStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn exists(&self) -> bool {
        self.dir.join("meta.csv").is_file()
    }

    pub fn lock(&self) -> Result<HistoryLock> {
        fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(HistoryLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(self.dir.clone())),
            Err(e) => Err(e.into()),
        }
    }

    pub fn release_path(&self, i: u32) -> PathBuf {
        self.dir.join(format!("release_{i}.csv"))
    }

    pub fn counterfeits_path(&self, i: u32) -> PathBuf {
        self.dir.join(format!("counterfeits_{i}.csv"))
    }

    /// Creates the directory with its schema and initial meta.
    pub fn init(&self, schema: &Schema, meta: &HistoryMeta) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        write_schema(File::create(self.dir.join("schema.csv"))?, schema)?;
        self.write_meta(meta)
    }

    pub fn write_meta(&self, meta: &HistoryMeta) -> Result<()> {
        let mut w = csv::Writer::from_writer(File::create(self.dir.join("meta.csv"))?);
        w.write_record(["key", "value"])?;
        for (k, v) in meta.to_rows() {
            w.write_record([k, v.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_meta(&self) -> Result<HistoryMeta> {
        let path = self.dir.join("meta.csv");
        let mut rdr = open_csv(&path)?;
        let header = rdr.headers().map_err(|e| csv_err(&path, e))?.clone();
        expect_header(&path, &header, &["key", "value"])?;
        let mut kv = BTreeMap::new();
        for row in rdr.records() {
            let row = row.map_err(|e| csv_err(&path, e))?;
            kv.insert(row[0].to_string(), (row[1].to_string(), line_of(&row)));
        }
        let get = |k: &str| {
            kv.get(k)
                .map(|(v, _)| v.clone())
                .ok_or_else(|| Error::parse(&path, 0, format!("missing key {k:?}")))
        };
        let num = |k: &str| -> Result<u64> {
            let v = get(k)?;
            v.parse()
                .map_err(|_| Error::parse(&path, kv[k].1, format!("bad {k} value {v:?}")))
        };
        Ok(HistoryMeta {
            publisher: get("publisher")?,
            m: num("m")? as usize,
            seed: num("seed")?,
            releases: num("releases")? as u32,
            invalidated_total: num("invalidated_total")?,
        })
    }

    pub fn load_schema(&self) -> Result<Schema> {
        load_schema(&self.dir.join("schema.csv"))
    }

    pub fn load_releases(&self, schema: &Schema) -> Result<Vec<PublishedRelease>> {
        let meta = self.read_meta()?;
        (1..=meta.releases)
            .map(|i| {
                let stats = self.counterfeits_path(i);
                load_release(&self.release_path(i), stats.is_file().then_some(stats.as_path()), schema, i)
            })
            .collect()
    }

    /// Writes the next release and bumps the meta.
    pub fn append(&self, release: &PublishedRelease, schema: &Schema, meta: &HistoryMeta) -> Result<()> {
        let i = release.release_index;
        write_release(File::create(self.release_path(i))?, release, schema)?;
        write_counterfeits(File::create(self.counterfeits_path(i))?, release)?;
        self.write_meta(meta)
    }
}
