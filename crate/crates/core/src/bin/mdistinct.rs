use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::{One, Zero};

use mdistinct::baselines::{publish_l_diversity, publish_m_invariance, MInvarianceState};
use mdistinct::engine::{publish, release_rng, verify_m_distinct, EngineState, Mode};
use mdistinct::eval::{run_experiment, write_report_csv, write_timing_csv};
use mdistinct::io::{
    load_et, load_microdata, load_schema, load_update_model, write_et, write_risks, write_update_model, HistoryMeta, HistoryStore,
    ScenarioConfig,
};
use mdistinct::model::{ExternalKnowledgeTable, PublishedRelease, Record, Schema};
use mdistinct::sug::attack_release_sequence;
use mdistinct::updates::format_rational;
use mdistinct::{Error, Result};

#[derive(Parser)]
#[command(name = "mdistinct", version, about = "Re-publication of fully dynamic microdata")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Append the next m-Distinct release to a history directory.
    Publish {
        #[arg(long)]
        microdata: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        m: usize,
        /// Also keep the candidate update sets of every group disjoint.
        #[arg(long)]
        star: bool,
        #[arg(long)]
        seed: u64,
        /// Schema file; required when the history is new.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Directory to receive et_<i>.csv for the release.
        #[arg(long)]
        et_out: Option<PathBuf>,
    },
    /// Run the linking attack over every release in a history.
    Attack {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Directory of et_<i>.csv files.
        #[arg(long)]
        et: Option<PathBuf>,
        /// Output file, default <history>/risks.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check m-uniqueness and legal updates across a history.
    Verify {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        m: usize,
    },
    /// Run a synthetic scenario end to end.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append a baseline release to a history directory.
    Baseline {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        microdata: PathBuf,
        #[arg(long)]
        history: PathBuf,
        /// l for l-diversity, m for m-invariance.
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        et_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ldiv,
    Minv,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Publish {
            microdata,
            model,
            history,
            m,
            star,
            seed,
            schema,
            et_out,
        } => {
            let mode = if star { Mode::MDistinctStar } else { Mode::MDistinct };
            let store = HistoryStore::new(&history);
            let _lock = store.lock()?;
            let (schema, meta, releases) = open_history(&store, schema.as_deref(), mode.as_str(), m, seed)?;
            let model = load_update_model(&model, &schema)?;
            let records = load_microdata(&microdata, &schema)?;
            let mut state = EngineState::new(m, mode, seed);
            for r in &releases {
                state.observe(r);
            }
            state.releases = meta.releases;
            let (release, _, stats) = publish(&records, &state, &model, &schema)?;
            finish_append(&store, &schema, meta, &release, &records, et_out.as_deref())?;
            println!(
                "release {}: {} groups, {} records, {} counterfeits, {} buckets",
                release.release_index,
                release.groups.len(),
                release.real_count(),
                stats.counterfeits,
                stats.buckets
            );
            Ok(0)
        }
        Cmd::Baseline {
            kind,
            microdata,
            history,
            m,
            seed,
            schema,
            et_out,
        } => {
            let name = match kind {
                Kind::Ldiv => "l_diversity",
                Kind::Minv => "m_invariance",
            };
            let store = HistoryStore::new(&history);
            let _lock = store.lock()?;
            let (schema, mut meta, releases) = open_history(&store, schema.as_deref(), name, m, seed)?;
            let records = load_microdata(&microdata, &schema)?;
            let index = meta.releases + 1;
            let release = match kind {
                Kind::Ldiv => publish_l_diversity(&records, m, &schema, index, &mut release_rng(seed, index))?,
                Kind::Minv => {
                    let mut state = MInvarianceState::new(m, seed);
                    let mut replay = EngineState::new(m, Mode::MDistinct, seed);
                    for r in &releases {
                        replay.observe(r);
                    }
                    state.signature = replay.last_group;
                    state.releases = meta.releases;
                    state.invalidated_total = meta.invalidated_total;
                    let (release, next, invalid) = publish_m_invariance(&records, &state, &schema)?;
                    meta.invalidated_total = next.invalidated_total;
                    println!("invalidated {} (total {})", invalid.len(), next.invalidated_total);
                    release
                }
            };
            finish_append(&store, &schema, meta, &release, &records, et_out.as_deref())?;
            println!(
                "release {}: {} groups, {} records, {} counterfeits",
                release.release_index,
                release.groups.len(),
                release.real_count(),
                release.counterfeit_total()
            );
            Ok(0)
        }
        Cmd::Attack { history, model, et, out } => {
            let store = HistoryStore::new(&history);
            let schema = store.load_schema()?;
            let model = load_update_model(&model, &schema)?;
            let releases = store.load_releases(&schema)?;
            let mut tables = Vec::new();
            if let Some(dir) = et {
                for r in &releases {
                    let p = dir.join(format!("et_{}.csv", r.release_index));
                    if p.is_file() {
                        tables.push(load_et(&p, &schema, r.release_index)?);
                    }
                }
            }
            let risks = attack_release_sequence(&releases, &tables, &model, &schema)?;
            let out = out.unwrap_or_else(|| history.join("risks.csv"));
            write_risks(File::create(&out)?, &risks)?;
            let all = risks.iter().flat_map(|r| r.report.risks.iter());
            let max = all.clone().max().cloned().unwrap_or_else(Zero::zero);
            let vulnerable = all.filter(|x| x.is_one()).count();
            println!("records {}", risks.len());
            println!("max_risk {}", format_rational(&max));
            println!("vulnerable {vulnerable}");
            Ok(0)
        }
        Cmd::Verify { history, model, m } => {
            let store = HistoryStore::new(&history);
            let schema = store.load_schema()?;
            let model = load_update_model(&model, &schema)?;
            let releases = store.load_releases(&schema)?;
            let violations = verify_m_distinct(&releases, &model, m);
            for v in &violations {
                eprintln!("{v}");
            }
            if violations.is_empty() {
                println!("ok: {} releases satisfy m-distinct with m = {m}", releases.len());
                Ok(0)
            } else {
                Err(Error::Validation(format!("{} violations", violations.len())))
            }
        }
        Cmd::Simulate { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let run = run_experiment(&cfg)?;
            let store = HistoryStore::new(out.join("history"));
            let meta = HistoryMeta {
                publisher: cfg.publisher.as_str().to_string(),
                m: cfg.m,
                seed: cfg.seed,
                releases: run.releases.len() as u32,
                invalidated_total: run.invalidated_total,
            };
            store.init(&run.schema, &meta)?;
            for r in &run.releases {
                store.append(r, &run.schema, &meta)?;
            }
            let et_dir = out.join("et");
            fs::create_dir_all(&et_dir)?;
            for t in &run.et {
                write_et(File::create(et_dir.join(format!("et_{}.csv", t.release_index)))?, t, &run.schema)?;
            }
            write_update_model(File::create(out.join("model.csv"))?, &run.model, &run.schema)?;
            write_report_csv(File::create(out.join("report.csv"))?, &run.report)?;
            write_timing_csv(File::create(out.join("timing.csv"))?, &run.report)?;
            for r in &run.report.rows {
                println!(
                    "release {}: groups {} vulnerable {} invalidated {} max_risk {} seconds {:.2}",
                    r.release,
                    r.groups,
                    r.vulnerable,
                    r.invalidated,
                    format_rational(&r.max_risk),
                    r.seconds
                );
            }
            Ok(0)
        }
    }
}

/// Loads an existing history, or creates one from `schema`. Flags must
/// agree with what the history was started with.
fn open_history(
    store: &HistoryStore,
    schema: Option<&Path>,
    publisher: &str,
    m: usize,
    seed: u64,
) -> Result<(Schema, HistoryMeta, Vec<PublishedRelease>)> {
    if !store.exists() {
        let path = schema.ok_or_else(|| Error::Usage("--schema is required for a new history".into()))?;
        let schema = load_schema(path)?;
        let meta = HistoryMeta {
            publisher: publisher.to_string(),
            m,
            seed,
            releases: 0,
            invalidated_total: 0,
        };
        store.init(&schema, &meta)?;
        return Ok((schema, meta, Vec::new()));
    }
    let meta = store.read_meta()?;
    if meta.publisher != publisher || meta.m != m || meta.seed != seed {
        return Err(Error::Validation(format!(
            "history was started with publisher {} m {} seed {}",
            meta.publisher, meta.m, meta.seed
        )));
    }
    let schema = store.load_schema()?;
    let releases = store.load_releases(&schema)?;
    Ok((schema, meta, releases))
}

fn finish_append(
    store: &HistoryStore,
    schema: &Schema,
    mut meta: HistoryMeta,
    release: &PublishedRelease,
    records: &[Record],
    et_out: Option<&Path>,
) -> Result<()> {
    meta.releases = release.release_index;
    store.append(release, schema, &meta)?;
    if let Some(dir) = et_out {
        fs::create_dir_all(dir)?;
        let et = ExternalKnowledgeTable::from_records(release.release_index, records);
        write_et(File::create(dir.join(format!("et_{}.csv", release.release_index)))?, &et, schema)?;
    }
    Ok(())
}
