use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{csv_err, expect_header, line_of, reader_from};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Publisher {
    MDistinct,
    MDistinctStar,
    LDiversity,
    MInvariance,
}

impl Publisher {
    pub fn as_str(&self) -> &'static str {
        match self {
            Publisher::MDistinct => "m_distinct",
            Publisher::MDistinctStar => "m_distinct_star",
            Publisher::LDiversity => "l_diversity",
            Publisher::MInvariance => "m_invariance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Publisher::MDistinct,
            Publisher::MDistinctStar,
            Publisher::LDiversity,
            Publisher::MInvariance,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
    }
}

/// One simulated run on the synthetic workload.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub publisher: Publisher,
    /// m for the m-family publishers, l for l-diversity.
    pub m: usize,
    /// Size of every sensitive value's candidate update set.
    pub d: usize,
    pub releases: u32,
    pub initial: usize,
    pub inserts: usize,
    pub deletes: usize,
    pub sensitive_updates: usize,
    pub queries: usize,
    pub thetas: Vec<f64>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            publisher: Publisher::MDistinct,
            m: 2,
            d: 10,
            releases: 10,
            initial: 2000,
            inserts: 500,
            deletes: 200,
            sensitive_updates: 500,
            queries: 1000,
            thetas: vec![0.25, 0.5, 0.75],
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    /// Reads `key,value` rows over the defaults. `thetas` is a `;`-separated list.
    pub fn parse<R: Read>(input: R, path: &Path) -> Result<Self> {
        let mut rdr = reader_from(input);
        let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
        expect_header(path, &header, &["key", "value"])?;
        let mut cfg = ScenarioConfig::default();
        let mut seen = BTreeMap::new();
        for row in rdr.records() {
            let row = row.map_err(|e| csv_err(path, e))?;
            let line = line_of(&row);
            let (k, v) = (&row[0], &row[1]);
            if seen.insert(k.to_string(), ()).is_some() {
                return Err(Error::parse(path, line, format!("key {k:?} repeated")));
            }
            let bad = || Error::parse(path, line, format!("bad value {v:?} for {k}"));
            let int = || v.parse::<usize>().map_err(|_| bad());
            match k {
                "publisher" => cfg.publisher = Publisher::parse(v).ok_or_else(bad)?,
                "m" | "l" => cfg.m = int()?,
                "d" => cfg.d = int()?,
                "releases" => cfg.releases = v.parse().map_err(|_| bad())?,
                "initial" => cfg.initial = int()?,
                "inserts" => cfg.inserts = int()?,
                "deletes" => cfg.deletes = int()?,
                "sensitive_updates" => cfg.sensitive_updates = int()?,
                "queries" => cfg.queries = int()?,
                "seed" => cfg.seed = v.parse().map_err(|_| bad())?,
                "thetas" => {
                    cfg.thetas = v
                        .split(';')
                        .map(|t| t.trim().parse::<f64>().ok().filter(|t| *t > 0.0 && *t <= 1.0))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(bad)?;
                }
                _ => return Err(Error::parse(path, line, format!("unknown key {k:?}"))),
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::Validation("m must be at least 1".into()));
        }
        if self.d < 1 {
            return Err(Error::Validation("d must be at least 1".into()));
        }
        if self.thetas.is_empty() {
            return Err(Error::Validation("at least one theta is required".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::parse(path, 0, e.to_string()))?;
        Self::parse(file, path)
    }
}
