use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{AttrKind, AttributeSchema, Hierarchy, Record, Schema, SensitiveAttribute};
use crate::updates::UpdateModel;

const MARITAL: [(&str, Option<&str>); 9] = [
    ("marital", None),
    ("unpartnered", Some("marital")),
    ("never-married", Some("unpartnered")),
    ("separated", Some("unpartnered")),
    ("divorced", Some("unpartnered")),
    ("widowed", Some("unpartnered")),
    ("partnered", Some("marital")),
    ("married", Some("partnered")),
    ("spouse-absent", Some("partnered")),
];

// by leaf position: never-married, separated, divorced, widowed, married, spouse-absent
const MARITAL_NEXT: [&[i64]; 6] = [&[0, 4], &[1, 2, 4], &[2, 4], &[3, 4], &[4, 2, 1, 3], &[5, 4, 2, 1]];

/// Age 1..100, Gender, Marital status, Education, and 50 occupations as the
/// sensitive attribute.
pub fn table7_schema() -> Schema {
    let marital: Vec<(String, Option<String>)> = MARITAL
        .iter()
        .map(|(n, p)| (n.to_string(), p.map(str::to_string)))
        .collect();
    let mut edu = vec![("education".to_string(), None)];
    for (band, range) in [("basic", 1..=6), ("secondary", 7..=12), ("higher", 13..=17)] {
        edu.push((band.to_string(), Some("education".to_string())));
        edu.extend(range.map(|i| (format!("edu-{i:02}"), Some(band.to_string()))));
    }
    Schema::new(
        vec![
            AttributeSchema::numeric("Age", 1, 100).expect("valid range"),
            AttributeSchema::categorical("Gender", Hierarchy::flat("gender", &["F", "M"])),
            AttributeSchema::categorical("Marital", Hierarchy::new(&marital).expect("valid tree")),
            AttributeSchema::categorical("Education", Hierarchy::new(&edu).expect("valid tree")),
        ],
        SensitiveAttribute::new("Occupation", (1..=50).map(|i| format!("occ-{i:02}")).collect()).expect("distinct"),
    )
    .expect("distinct names")
}

/// Occupations move within consecutive blocks of `d` values, uniformly.
pub fn table7_model(d: usize) -> UpdateModel {
    UpdateModel::blocks(50, d)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttrRule {
    /// Numeric value grows by one per release, stopping at the domain max.
    IncrementCapped,
    Frozen,
    /// With probability `rate_per_mille`/1000 the value moves to a uniformly
    /// chosen entry of its successor list. Lists are indexed by, and hold,
    /// positions in the attribute's domain.
    Monotone {
        successors: Vec<Vec<i64>>,
        rate_per_mille: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateSpec {
    pub rules: Vec<AttrRule>,
    /// Records whose sensitive value is redrawn each release.
    pub sensitive_updates: usize,
}

pub fn table7_rules(sensitive_updates: usize) -> UpdateSpec {
    let edu = (0..17).map(|i| if i < 16 { vec![i, i + 1] } else { vec![i] }).collect();
    UpdateSpec {
        rules: vec![
            AttrRule::IncrementCapped,
            AttrRule::Frozen,
            AttrRule::Monotone {
                successors: MARITAL_NEXT.iter().map(|s| s.to_vec()).collect(),
                rate_per_mille: 100,
            },
            AttrRule::Monotone {
                successors: edu,
                rate_per_mille: 100,
            },
        ],
        sensitive_updates,
    }
}

fn stream(seed: u64, release_index: u32, salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(release_index as u64);
    rng
}

fn random_record<R: Rng>(id: String, schema: &Schema, rng: &mut R) -> Record {
    let qi = schema
        .qi
        .iter()
        .map(|a| match &a.kind {
            AttrKind::Numeric { lo, hi } => rng.gen_range(*lo..=*hi),
            AttrKind::Categorical(h) => rng.gen_range(0..h.leaf_count() as i64),
        })
        .collect();
    Record {
        id,
        qi,
        sensitive: rng.gen_range(0..schema.sensitive.len() as u32),
    }
}

/// `n` uniformly drawn records with ids `r00001..`.
pub fn generate_initial(n: usize, schema: &Schema, seed: u64) -> Vec<Record> {
    let mut rng = stream(seed, 0, 0x1a17);
    (1..=n).map(|i| random_record(format!("r{i:05}"), schema, &mut rng)).collect()
}

/// Applies one release's worth of internal updates to a copy of `table`.
pub fn synthesize_internal_updates(
    table: &[Record],
    release_index: u32,
    spec: &UpdateSpec,
    model: &UpdateModel,
    schema: &Schema,
    seed: u64,
) -> Result<Vec<Record>> {
    if spec.rules.len() != schema.qi.len() || model.domain() != schema.sensitive.len() {
        return Err(Error::Validation("update rules do not match the schema".into()));
    }
    for (rule, a) in spec.rules.iter().zip(&schema.qi) {
        let ok = match (rule, &a.kind) {
            (AttrRule::IncrementCapped, AttrKind::Numeric { .. }) | (AttrRule::Frozen, _) => true,
            (AttrRule::Monotone { successors, .. }, _) => {
                successors.len() as u64 == a.domain_size()
                    && successors.iter().flatten().all(|&v| v >= 0 && (v as u64) < a.domain_size())
            }
            _ => false,
        };
        if !ok {
            return Err(Error::Validation(format!("update rule does not fit attribute {}", a.name)));
        }
    }
    let mut rng = stream(seed, release_index, 0x0bad);
    let mut out = table.to_vec();
    for r in &mut out {
        for ((rule, a), v) in spec.rules.iter().zip(&schema.qi).zip(r.qi.iter_mut()) {
            match rule {
                AttrRule::IncrementCapped => {
                    if let AttrKind::Numeric { hi, .. } = a.kind {
                        *v = (*v + 1).min(hi);
                    }
                }
                AttrRule::Frozen => {}
                AttrRule::Monotone {
                    successors,
                    rate_per_mille,
                } => {
                    let idx = a.index_of(*v) as usize;
                    if rng.gen_range(0..1000) < *rate_per_mille {
                        let next = &successors[idx];
                        let to = next[rng.gen_range(0..next.len())];
                        *v = match a.kind {
                            AttrKind::Numeric { lo, .. } => lo + to,
                            AttrKind::Categorical(_) => to,
                        };
                    }
                }
            }
        }
    }
    let k = spec.sensitive_updates.min(out.len());
    let mut chosen = sample(&mut rng, out.len(), k).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        let cus: Vec<u32> = model.cus(out[i].sensitive).iter().collect();
        out[i].sensitive = cus[rng.gen_range(0..cus.len())];
    }
    Ok(out)
}

/// Deletes `deletes` random records and appends `inserts` fresh ones, with
/// ids continuing from `next_id`.
pub fn external_updates(
    table: Vec<Record>,
    deletes: usize,
    inserts: usize,
    next_id: &mut u64,
    schema: &Schema,
    release_index: u32,
    seed: u64,
) -> Vec<Record> {
    let mut rng = stream(seed, release_index, 0xe7e7);
    let k = deletes.min(table.len());
    let mut gone = vec![false; table.len()];
    for i in sample(&mut rng, table.len(), k) {
        gone[i] = true;
    }
    let mut out: Vec<Record> = table.into_iter().zip(gone).filter(|(_, g)| !g).map(|(r, _)| r).collect();
    for _ in 0..inserts {
        *next_id += 1;
        out.push(random_record(format!("r{:05}", *next_id), schema, &mut rng));
    }
    out
}
