//! The m-Distinct publisher.

mod bucket;
mod partition;
mod split;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use bucket::{
    assignment_score, balance_counterfeits, can_join, cnt_buc, phase1_create_buckets, phase2_assign,
    AssignmentScore, Bucket, Item,
};
pub use partition::{static_partition, Keys};
pub use split::{phase3_split, split_score, PICK_CAP};

use crate::error::{Error, Result};
use crate::model::{generalize, Placed, PublishedRelease, Record, Schema};
use crate::updates::{cus_disjointness, is_legal_update_instance, uss_of, UpdateModel, Uss};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    MDistinct,
    MDistinctStar,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::MDistinct => "m_distinct",
            Mode::MDistinctStar => "m_distinct_star",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "m_distinct" => Some(Mode::MDistinct),
            "m_distinct_star" => Some(Mode::MDistinctStar),
            _ => None,
        }
    }
}

/// Publisher state carried between releases.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineState {
    pub m: usize,
    pub mode: Mode,
    pub seed: u64,
    pub releases: u32,
    /// Sorted sensitive values of the group that last held each record.
    pub last_group: BTreeMap<String, Vec<u32>>,
}

impl EngineState {
    pub fn new(m: usize, mode: Mode, seed: u64) -> Self {
        EngineState {
            m,
            mode,
            seed,
            releases: 0,
            last_group: BTreeMap::new(),
        }
    }

    /// Folds a published release into the state.
    pub fn observe(&mut self, release: &PublishedRelease) {
        for g in &release.groups {
            let mut values = g.values();
            values.sort_unstable();
            for m in &g.members {
                if let Some(id) = m.id() {
                    self.last_group.insert(id.to_string(), values.clone());
                }
            }
        }
        self.releases = self.releases.max(release.release_index);
    }
}

/// Generator for one release, derived from the run seed and release index.
pub fn release_rng(seed: u64, release_index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(release_index as u64);
    rng
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PublishStats {
    pub buckets: usize,
    pub intersection_buckets: usize,
    pub filled_buckets: usize,
    pub first_timer_records: usize,
    pub counterfeits: u64,
}

pub(crate) fn check_microdata(records: &[Record], schema: &Schema) -> Result<()> {
    let mut ids = HashSet::new();
    for r in records {
        if !r.conforms(schema) {
            return Err(Error::Validation(format!("record {} does not conform to the schema", r.id)));
        }
        if !ids.insert(r.id.as_str()) {
            return Err(Error::Validation(format!("duplicate record id {}", r.id)));
        }
    }
    Ok(())
}

/// Publishes the next release: buckets from previous signatures, scored
/// assignment, counterfeit padding, balanced splitting, generalization.
pub fn publish(
    records: &[Record],
    state: &EngineState,
    model: &UpdateModel,
    schema: &Schema,
) -> Result<(PublishedRelease, EngineState, PublishStats)> {
    check_microdata(records, schema)?;
    if model.domain() != schema.sensitive.len() {
        return Err(Error::Validation("model and schema disagree on the sensitive domain".into()));
    }
    if state.m < 1 {
        return Err(Error::Validation("m must be at least 1".into()));
    }
    let release_index = state.releases + 1;
    let star = state.mode == Mode::MDistinctStar;
    let mut rng = release_rng(state.seed, release_index);

    let mut interned: HashMap<&[u32], Uss> = HashMap::new();
    for r in records {
        if let Some(values) = state.last_group.get(&r.id) {
            if !interned.contains_key(values.as_slice()) {
                interned.insert(values.as_slice(), uss_of(values, model)?);
            }
        }
    }
    let pre: Vec<Option<&Uss>> = records
        .iter()
        .map(|r| state.last_group.get(&r.id).map(|v| &interned[v.as_slice()]))
        .collect();

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].id.cmp(&records[b].id));
    let originals = order.iter().filter_map(|&i| pre[i]).collect::<HashSet<_>>().len();
    let buckets = phase1_create_buckets(order.iter().filter_map(|&i| pre[i]));
    let mut stats = PublishStats {
        buckets: buckets.len(),
        intersection_buckets: buckets.len() - originals,
        ..Default::default()
    };
    let (mut buckets, leftovers) = phase2_assign(records, &pre, buckets, schema, star)?;

    let mut groups: Vec<Vec<Placed<'_>>> = Vec::new();
    for b in buckets.iter_mut().filter(|b| !b.is_empty()) {
        stats.filled_buckets += 1;
        balance_counterfeits(b);
        groups.extend(phase3_split(b, records, schema, &mut rng)?);
    }
    stats.first_timer_records = leftovers.len();
    if !leftovers.is_empty() {
        let keys = if star {
            Keys::components(model.cus_components())
        } else {
            Keys::values(model.domain())
        };
        let mut fresh: Vec<&Record> = leftovers.iter().map(|&i| &records[i]).collect();
        fresh.sort_by(|a, b| a.id.cmp(&b.id));
        groups.extend(static_partition(&fresh, state.m, &keys, schema, true, &mut rng)?);
    }
    let release = generalize(&groups, schema, release_index)?;
    stats.counterfeits = release.counterfeit_total();

    // Never hand out a release that the checker would reject.
    let position: HashMap<&str, usize> = records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    for g in &release.groups {
        if let Some(problem) = group_problem(&g.values(), state.m) {
            return Err(Error::Integrity(format!("group {} {problem}", g.gid)));
        }
        for m in &g.members {
            if let Some(u) = m.id().and_then(|id| position.get(id)).and_then(|&i| pre[i]) {
                if !is_legal_update_instance(&g.values(), u) {
                    return Err(Error::Integrity(format!(
                        "group {} is not a legal update for {}",
                        g.gid,
                        m.id().unwrap()
                    )));
                }
            }
        }
    }
    let mut next = state.clone();
    next.observe(&release);
    next.releases = release_index;
    Ok((release, next, stats))
}

fn group_problem(values: &[u32], m: usize) -> Option<String> {
    if values.len() < m {
        return Some(format!("has {} members, fewer than {m}", values.len()));
    }
    let distinct: HashSet<u32> = values.iter().copied().collect();
    if distinct.len() != values.len() {
        return Some("repeats a sensitive value".into());
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyViolation {
    pub release_index: u32,
    pub gid: u32,
    pub record: Option<String>,
    pub message: String,
}

impl fmt::Display for VerifyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.record {
            Some(id) => write!(
                f,
                "release {} group {} record {}: {}",
                self.release_index, self.gid, id, self.message
            ),
            None => write!(f, "release {} group {}: {}", self.release_index, self.gid, self.message),
        }
    }
}

/// Checks that every group is m-unique and that each record's new group is a
/// legal update instance of the signature of the group that last held it.
pub fn verify_m_distinct(releases: &[PublishedRelease], model: &UpdateModel, m: usize) -> Vec<VerifyViolation> {
    let mut out = Vec::new();
    let mut last: HashMap<&str, Vec<u32>> = HashMap::new();
    for rel in releases {
        for g in &rel.groups {
            let values = g.values();
            if values.iter().any(|&v| v as usize >= model.domain()) {
                out.push(VerifyViolation {
                    release_index: rel.release_index,
                    gid: g.gid,
                    record: None,
                    message: "sensitive value outside the model domain".into(),
                });
                continue;
            }
            if let Some(problem) = group_problem(&values, m) {
                out.push(VerifyViolation {
                    release_index: rel.release_index,
                    gid: g.gid,
                    record: None,
                    message: format!("not {m}-unique: {problem}"),
                });
            }
            for mem in &g.members {
                let Some(id) = mem.id() else { continue };
                if let Some(prev) = last.get(id) {
                    let uss = uss_of(prev, model).expect("checked domain");
                    if !is_legal_update_instance(&values, &uss) {
                        out.push(VerifyViolation {
                            release_index: rel.release_index,
                            gid: g.gid,
                            record: Some(id.to_string()),
                            message: "candidate values are not a legal update of the previous signature".into(),
                        });
                    }
                }
            }
        }
        for g in &rel.groups {
            let values = g.values();
            for mem in &g.members {
                if let Some(id) = mem.id() {
                    last.insert(id, values.clone());
                }
            }
        }
    }
    out
}

/// Groups whose members' candidate sets overlap.
pub fn verify_cus_disjoint(releases: &[PublishedRelease], model: &UpdateModel) -> Vec<VerifyViolation> {
    let mut out = Vec::new();
    for rel in releases {
        for g in &rel.groups {
            let values = g.values();
            if values.iter().all(|&v| (v as usize) < model.domain()) && !cus_disjointness(&values, model) {
                out.push(VerifyViolation {
                    release_index: rel.release_index,
                    gid: g.gid,
                    record: None,
                    message: "candidate update sets of members overlap".into(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
