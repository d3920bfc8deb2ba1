//! Query accuracy, counterfeit statistics and the simulated experiment loop.

use std::collections::HashMap;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{publish_l_diversity, publish_m_invariance, MInvarianceState};
use crate::engine::{publish, release_rng, EngineState, Mode};
use crate::error::{Error, Result};
use crate::io::{
    external_updates, generate_initial, synthesize_internal_updates, table7_model, table7_rules, table7_schema,
    Publisher, ScenarioConfig,
};
use crate::model::{ExternalKnowledgeTable, PublishedRelease, Record, Schema};
use crate::sug::attack_release_sequence;
use crate::updates::{format_decimal, format_rational, UpdateModel};

/// A COUNT(*) query with one inclusive index range per qi attribute and one
/// over the sensitive domain. Categorical ranges run over leaf positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregateQuery {
    pub ranges: Vec<(u32, u32)>,
    pub sensitive: (u32, u32),
}

fn width(theta: f64, dom: u64) -> u64 {
    ((theta * dom as f64).round() as u64).clamp(1, dom)
}

impl AggregateQuery {
    /// A random query whose ranges each span `theta` of their domain.
    pub fn random<R: Rng>(schema: &Schema, theta: f64, rng: &mut R) -> Self {
        let mut pick = |dom: u64| {
            let w = width(theta, dom);
            let start = rng.gen_range(0..=dom - w) as u32;
            (start, start + w as u32 - 1)
        };
        let ranges = schema.qi.iter().map(|a| pick(a.domain_size())).collect();
        let sensitive = pick(schema.sensitive.len() as u64);
        AggregateQuery { ranges, sensitive }
    }

    pub fn whole(schema: &Schema) -> Self {
        AggregateQuery {
            ranges: schema.qi.iter().map(|a| (0, a.domain_size() as u32 - 1)).collect(),
            sensitive: (0, schema.sensitive.len() as u32 - 1),
        }
    }

    pub fn matches(&self, record: &Record, schema: &Schema) -> bool {
        let (lo, hi) = self.sensitive;
        (lo..=hi).contains(&record.sensitive)
            && record
                .qi
                .iter()
                .zip(&schema.qi)
                .zip(&self.ranges)
                .all(|((v, a), (lo, hi))| (*lo..=*hi).contains(&a.index_of(*v)))
    }
}

/// Expected answer from the release under a uniform spread of each group
/// over its region. Counterfeits are excluded.
pub fn estimate_count(release: &PublishedRelease, schema: &Schema, query: &AggregateQuery) -> BigRational {
    // exact sum, grouped by denominator to avoid a rational add per group
    let mut by_den: HashMap<u128, u128> = HashMap::new();
    let mut slow = BigRational::zero();
    let (slo, shi) = query.sensitive;
    'groups: for g in &release.groups {
        let hits = g
            .members
            .iter()
            .filter(|m| !m.is_counterfeit() && (slo..=shi).contains(&m.sensitive))
            .count() as u128;
        if hits == 0 {
            continue;
        }
        let mut num = hits;
        let mut den = 1u128;
        for ((e, a), (lo, hi)) in g.region.extents.iter().zip(&schema.qi).zip(&query.ranges) {
            let o = a.overlap(*e, *lo, *hi) as u128;
            if o == 0 {
                continue 'groups;
            }
            let size = a.extent_size(*e) as u128;
            match (num.checked_mul(o), den.checked_mul(size)) {
                (Some(n), Some(d)) => {
                    num = n;
                    den = d;
                }
                _ => {
                    slow += big_term(g.region.extents.as_slice(), schema, query, hits);
                    continue 'groups;
                }
            }
        }
        let slot = by_den.entry(den).or_insert(0);
        match slot.checked_add(num) {
            Some(s) => *slot = s,
            None => slow += BigRational::new(BigInt::from(num), BigInt::from(den)),
        }
    }
    let mut dens: Vec<(u128, u128)> = by_den.into_iter().collect();
    dens.sort_unstable();
    dens.into_iter()
        .fold(slow, |acc, (d, n)| acc + BigRational::new(BigInt::from(n), BigInt::from(d)))
}

fn big_term(
    extents: &[crate::model::Extent],
    schema: &Schema,
    query: &AggregateQuery,
    hits: u128,
) -> BigRational {
    let mut t = BigRational::from_integer(BigInt::from(hits));
    for ((e, a), (lo, hi)) in extents.iter().zip(&schema.qi).zip(&query.ranges) {
        t *= BigRational::new(BigInt::from(a.overlap(*e, *lo, *hi)), BigInt::from(a.extent_size(*e)));
    }
    t
}

pub fn exact_count(records: &[Record], schema: &Schema, query: &AggregateQuery) -> u64 {
    records.iter().filter(|r| query.matches(r, schema)).count() as u64
}

/// `|R* - R| / R*`, or `None` when the estimate `R*` is zero.
pub fn query_error(records: &[Record], release: &PublishedRelease, schema: &Schema, query: &AggregateQuery) -> Option<BigRational> {
    let est = estimate_count(release, schema, query);
    if est.is_zero() {
        return None;
    }
    let exact = BigRational::from_integer(BigInt::from(exact_count(records, schema, query)));
    Some((&est - exact).abs() / est)
}

/// Median relative error over `count` random queries with nonzero estimate.
/// Gives up after `10 * count` draws; `None` if nothing was scored.
pub fn median_error<R: Rng>(
    records: &[Record],
    release: &PublishedRelease,
    schema: &Schema,
    theta: f64,
    count: usize,
    rng: &mut R,
) -> Option<BigRational> {
    let mut errors = Vec::with_capacity(count);
    let mut draws = 0;
    while errors.len() < count && draws < 10 * count {
        draws += 1;
        let q = AggregateQuery::random(schema, theta, rng);
        if let Some(e) = query_error(records, release, schema, &q) {
            errors.push(e);
        }
    }
    if errors.is_empty() {
        return None;
    }
    errors.sort();
    let n = errors.len();
    Some(if n % 2 == 1 {
        errors[n / 2].clone()
    } else {
        (&errors[n / 2 - 1] + &errors[n / 2]) / BigRational::from_integer(2.into())
    })
}

/// Average counterfeits per group.
pub fn cnt_g(release: &PublishedRelease) -> BigRational {
    if release.groups.is_empty() {
        return BigRational::zero();
    }
    BigRational::new(
        BigInt::from(release.counterfeit_total()),
        BigInt::from(release.groups.len()),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReleaseReport {
    pub release: u32,
    pub records: usize,
    pub groups: usize,
    pub counterfeits: u64,
    pub cnt_g: BigRational,
    /// (record, version) pairs with risk 1 over all releases so far.
    pub vulnerable: u64,
    pub invalidated: u64,
    pub max_risk: BigRational,
    /// Attack-graph nodes removed by pruning, summed over records.
    pub pruned_nodes: u64,
    /// Smallest surviving layer over all records' attack graphs.
    pub min_layer: usize,
    /// Median error per configured theta.
    pub median_error: Vec<Option<BigRational>>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub rows: Vec<ReleaseReport>,
}

/// Everything a run produced, for writing out.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub schema: Schema,
    pub model: UpdateModel,
    pub releases: Vec<PublishedRelease>,
    pub et: Vec<ExternalKnowledgeTable>,
    pub invalidated_total: u64,
}

enum PubState {
    Engine(EngineState),
    Invariance(MInvarianceState),
    Diversity,
}

/// Runs the chosen publisher over the synthetic workload, attacking and
/// querying after each release.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.check()?;
    let schema = table7_schema();
    if cfg.d > schema.sensitive.len() {
        return Err(Error::Validation(format!("d = {} exceeds the sensitive domain", cfg.d)));
    }
    let model = table7_model(cfg.d);
    let spec = table7_rules(cfg.sensitive_updates);
    let mut state = match cfg.publisher {
        Publisher::MDistinct => PubState::Engine(EngineState::new(cfg.m, Mode::MDistinct, cfg.seed)),
        Publisher::MDistinctStar => PubState::Engine(EngineState::new(cfg.m, Mode::MDistinctStar, cfg.seed)),
        Publisher::MInvariance => PubState::Invariance(MInvarianceState::new(cfg.m, cfg.seed)),
        Publisher::LDiversity => PubState::Diversity,
    };
    let mut table = generate_initial(cfg.initial, &schema, cfg.seed);
    let mut next_id = cfg.initial as u64;
    let mut releases = Vec::new();
    let mut et = Vec::new();
    let mut rows = Vec::new();
    let mut invalidated = 0u64;
    for i in 1..=cfg.releases {
        let start = Instant::now();
        if i > 1 {
            let updated = synthesize_internal_updates(&table, i, &spec, &model, &schema, cfg.seed)?;
            table = external_updates(updated, cfg.deletes, cfg.inserts, &mut next_id, &schema, i, cfg.seed);
        }
        let release = match &mut state {
            PubState::Engine(st) => {
                let (rel, next, _) = publish(&table, st, &model, &schema)?;
                *st = next;
                rel
            }
            PubState::Invariance(st) => {
                let (rel, next, _) = publish_m_invariance(&table, st, &schema)?;
                invalidated = next.invalidated_total;
                *st = next;
                rel
            }
            PubState::Diversity => {
                let mut rng = release_rng(cfg.seed, i);
                publish_l_diversity(&table, cfg.m, &schema, i, &mut rng)?
            }
        };
        releases.push(release);
        et.push(ExternalKnowledgeTable::from_records(i, &table));
        let release = releases.last().expect("just pushed");

        let risks = attack_release_sequence(&releases, &et, &model, &schema)?;
        let mut vulnerable = 0u64;
        let mut max_risk = BigRational::zero();
        let mut pruned = 0u64;
        let mut min_layer = usize::MAX;
        for r in &risks {
            vulnerable += r.report.risks.iter().filter(|x| x.is_one()).count() as u64;
            let m = r.report.max_risk();
            if m > max_risk {
                max_risk = m;
            }
            pruned += r.removed_nodes as u64;
            min_layer = min_layer.min(r.layer_sizes.iter().copied().min().unwrap_or(0));
        }
        let mut qrng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
        qrng.set_stream(i as u64);
        let median = cfg
            .thetas
            .iter()
            .map(|&t| median_error(&table, release, &schema, t, cfg.queries, &mut qrng))
            .collect();
        rows.push(ReleaseReport {
            release: i,
            records: table.len(),
            groups: release.groups.len(),
            counterfeits: release.counterfeit_total(),
            cnt_g: cnt_g(release),
            vulnerable,
            invalidated,
            max_risk,
            pruned_nodes: pruned,
            min_layer: if risks.is_empty() { 0 } else { min_layer },
            median_error: median,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(RunOutput {
        report: RunReport {
            config: cfg.clone(),
            rows,
        },
        schema,
        model,
        releases,
        et,
        invalidated_total: invalidated,
    })
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// One row per release. Wall-clock time is left out so the file is
/// reproducible; see [`write_timing_csv`].
pub fn write_report_csv<W: std::io::Write>(out: W, report: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "release",
        "records",
        "groups",
        "counterfeits",
        "cnt_g",
        "vulnerable",
        "invalidated",
        "max_risk",
        "pruned_nodes",
        "min_layer",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(report.config.thetas.iter().map(|t| format!("median_error_{t}")));
    w.write_record(&header)?;
    for r in &report.rows {
        let mut row = vec![
            r.release.to_string(),
            r.records.to_string(),
            r.groups.to_string(),
            r.counterfeits.to_string(),
            format_decimal(&r.cnt_g, 6),
            r.vulnerable.to_string(),
            r.invalidated.to_string(),
            format_rational(&r.max_risk),
            r.pruned_nodes.to_string(),
            r.min_layer.to_string(),
        ];
        row.extend(
            r.median_error
                .iter()
                .map(|e| e.as_ref().map_or_else(|| "NA".to_string(), |e| format_decimal(e, 6))),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing_csv<W: std::io::Write>(out: W, report: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["release", "seconds"])?;
    for r in &report.rows {
        w.write_record([r.release.to_string(), format!("{:.3}", r.seconds)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generalize, AttributeSchema, Placed, SensitiveAttribute};

    fn schema() -> Schema {
        Schema::new(
            vec![AttributeSchema::numeric("A", 20, 29).unwrap()],
            SensitiveAttribute::new("S", vec!["x".into(), "y".into()]).unwrap(),
        )
        .unwrap()
    }

    fn r(id: &str, a: i64, s: u32) -> Record {
        Record {
            id: id.into(),
            qi: vec![a],
            sensitive: s,
        }
    }

    fn frac(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn uniform_overlap() {
        let s = schema();
        let recs = [r("a", 20, 0), r("b", 23, 1)];
        let rel = generalize(&[vec![Placed::Real(&recs[0]), Placed::Real(&recs[1])]], &s, 1).unwrap();
        let q = AggregateQuery {
            ranges: vec![(2, 3)],
            sensitive: (0, 1),
        };
        assert_eq!(estimate_count(&rel, &s, &q), frac(1, 1));
        assert_eq!(estimate_count(&rel, &s, &AggregateQuery::whole(&s)), frac(2, 1));
        assert_eq!(exact_count(&recs, &s, &q), 1);
        assert_eq!(query_error(&recs, &rel, &s, &q), Some(frac(0, 1)));
    }

    #[test]
    fn counterfeits_are_not_counted() {
        let s = schema();
        let recs = [r("a", 21, 0)];
        let rel = generalize(&[vec![Placed::Real(&recs[0]), Placed::Counterfeit(1)]], &s, 1).unwrap();
        assert_eq!(estimate_count(&rel, &s, &AggregateQuery::whole(&s)), frac(1, 1));
        assert_eq!(cnt_g(&rel), frac(1, 1));
    }

    #[test]
    fn error_formula() {
        let s = schema();
        let recs = [r("a", 20, 0), r("b", 21, 0), r("c", 22, 0), r("d", 23, 0), r("e", 29, 1)];
        let rel = generalize(
            &[
                vec![Placed::Real(&recs[0]), Placed::Real(&recs[1]), Placed::Real(&recs[2])],
                vec![Placed::Real(&recs[3]), Placed::Real(&recs[4])],
            ],
            &s,
            1,
        )
        .unwrap();
        // group 1 spans 20..22, group 2 spans 23..29; query 20..25 on value x
        let q = AggregateQuery {
            ranges: vec![(0, 5)],
            sensitive: (0, 0),
        };
        // R* = 3 + 1 * 3/7 = 24/7, R = 4
        assert_eq!(estimate_count(&rel, &s, &q), frac(24, 7));
        assert_eq!(query_error(&recs, &rel, &s, &q), Some(frac(1, 6)));
        let off = AggregateQuery {
            ranges: vec![(9, 9)],
            sensitive: (0, 0),
        };
        assert_eq!(query_error(&recs, &rel, &s, &off), Some(frac(1, 1)));
        let none = AggregateQuery {
            ranges: vec![(0, 2)],
            sensitive: (1, 1),
        };
        assert_eq!(query_error(&recs, &rel, &s, &none), None);
    }

    #[test]
    fn query_widths() {
        let s = schema();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for theta in [0.05, 0.25, 0.5, 1.0] {
            let q = AggregateQuery::random(&s, theta, &mut rng);
            let (lo, hi) = q.ranges[0];
            assert_eq!((hi - lo + 1) as u64, width(theta, 10));
            assert!(hi < 10);
        }
    }

    #[test]
    fn zero_release_scenario_is_empty() {
        let cfg = ScenarioConfig {
            releases: 0,
            ..Default::default()
        };
        assert!(run_experiment(&cfg).unwrap().report.rows.is_empty());
    }
}
