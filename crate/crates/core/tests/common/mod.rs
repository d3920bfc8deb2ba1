#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mdistinct::sug::{build_sug, enumerate_paths, prune, FeasibleSubSug};
use mdistinct::updates::Transitions;
use mdistinct::Error;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mdistinct"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Lays out a history directory from fixture release files.
pub fn history_from(dir: &Path, releases: &[(&str, Option<&str>)]) {
    fs::create_dir_all(dir).unwrap();
    fs::copy(fixture("schema.csv"), dir.join("schema.csv")).unwrap();
    for (i, (rel, stats)) in releases.iter().enumerate() {
        let i = i + 1;
        fs::copy(fixture(rel), dir.join(format!("release_{i}.csv"))).unwrap();
        match stats {
            Some(s) => {
                fs::copy(fixture(s), dir.join(format!("counterfeits_{i}.csv"))).unwrap();
            }
            None => fs::write(dir.join(format!("counterfeits_{i}.csv")), "gid,count\n").unwrap(),
        }
    }
    fs::write(
        dir.join("meta.csv"),
        format!(
            "key,value\npublisher,l_diversity\nm,2\nseed,0\nreleases,{}\ninvalidated_total,0\n",
            releases.len()
        ),
    )
    .unwrap();
}

/// `id,version,num,den` rows of a risks file.
pub fn read_risks(path: &Path) -> Vec<(String, u32, BigRational)> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            let num: BigInt = r[2].parse().unwrap();
            let den: BigInt = r[3].parse().unwrap();
            (r[0].to_string(), r[1].parse().unwrap(), BigRational::new(num, den))
        })
        .collect()
}

pub fn frac(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// A transition table with a few successors per value.
#[derive(Clone, Debug)]
pub struct SparseModel {
    rows: Vec<Vec<Option<BigRational>>>,
}

impl SparseModel {
    pub fn random<R: Rng>(domain: usize, rng: &mut R) -> Self {
        let mut rows = vec![vec![None; domain]; domain];
        for row in rows.iter_mut() {
            let k = rng.gen_range(1..=3.min(domain));
            let mut succ: Vec<usize> = (0..domain).collect();
            succ.shuffle(rng);
            let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
            let total: i64 = weights.iter().sum();
            for (s, w) in succ.into_iter().take(k).zip(weights) {
                row[s] = Some(frac(w, total));
            }
        }
        SparseModel { rows }
    }
}

impl Transitions for SparseModel {
    fn domain_size(&self) -> usize {
        self.rows.len()
    }

    fn p_trans(&self, from: u32, to: u32) -> Option<&BigRational> {
        self.rows.get(from as usize)?.get(to as usize)?.as_ref()
    }
}

pub fn random_history<R: Rng>(domain: usize, max_layers: usize, max_values: usize, rng: &mut R) -> Vec<Vec<u32>> {
    let layers = rng.gen_range(1..=max_layers);
    (0..layers)
        .map(|_| {
            let n = rng.gen_range(1..=max_values);
            (0..n).map(|_| rng.gen_range(0..domain as u32)).collect()
        })
        .collect()
}

/// A random history with a feasible path under `model`, plus one such path
/// drawn uniformly. `None` when pruning empties a layer.
pub fn feasible_instance<R: Rng, T: Transitions>(
    model: &T,
    history: &[Vec<u32>],
    rng: &mut R,
) -> Option<(FeasibleSubSug, Vec<u32>)> {
    let sug = build_sug(history, model).unwrap();
    let fs = match prune(&sug) {
        Ok(fs) => fs,
        Err(Error::InconsistentHistory(_)) => return None,
        Err(e) => panic!("{e}"),
    };
    let paths = enumerate_paths(&fs, 1_000_000).unwrap();
    let (path, _) = paths.choose(rng)?.clone();
    Some((fs, path))
}
