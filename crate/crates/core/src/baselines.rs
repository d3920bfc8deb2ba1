//! Reference publishers: distinct l-diversity and a simplified m-invariance.

use std::collections::{BTreeMap, HashSet};

use num_traits::One;
use rand::Rng;

use crate::engine::{balance_counterfeits, check_microdata, phase3_split, release_rng, static_partition, Bucket, Keys};
use crate::error::{Error, Result};
use crate::model::{generalize, ExternalKnowledgeTable, Placed, PublishedRelease, Record, Schema};
use crate::sug::attack_release_sequence;
use crate::updates::{Transitions, Uss, ValueSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    LDiversity(usize),
    MInvariance(usize),
}

impl BaselineKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BaselineKind::LDiversity(n) | BaselineKind::MInvariance(n) if n < 2 => {
                Err(Error::Validation(format!("baseline parameter must be at least 2, got {n}")))
            }
            _ => Ok(()),
        }
    }
}

/// Anonymizes one table on its own: groups of at least `l` members with
/// pairwise distinct sensitive values, no counterfeits.
pub fn publish_l_diversity<R: Rng>(
    records: &[Record],
    l: usize,
    schema: &Schema,
    release_index: u32,
    rng: &mut R,
) -> Result<PublishedRelease> {
    BaselineKind::LDiversity(l).validate()?;
    check_microdata(records, schema)?;
    let mut refs: Vec<&Record> = records.iter().collect();
    refs.sort_by(|a, b| a.id.cmp(&b.id));
    let keys = Keys::values(schema.sensitive.len());
    let groups = static_partition(&refs, l, &keys, schema, false, rng)?;
    generalize(&groups, schema, release_index)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MInvarianceState {
    pub m: usize,
    pub seed: u64,
    pub releases: u32,
    /// Sorted sensitive values of each record's last group.
    pub signature: BTreeMap<String, Vec<u32>>,
    /// Invalidated records over all releases so far.
    pub invalidated_total: u64,
}

impl MInvarianceState {
    pub fn new(m: usize, seed: u64) -> Self {
        MInvarianceState {
            m,
            seed,
            releases: 0,
            signature: BTreeMap::new(),
            invalidated_total: 0,
        }
    }
}

/// Publishes the next release keeping each returning record's group on its
/// previous signature. A returning record whose value left its signature is
/// invalidated and regrouped with the new records.
pub fn publish_m_invariance(
    records: &[Record],
    state: &MInvarianceState,
    schema: &Schema,
) -> Result<(PublishedRelease, MInvarianceState, Vec<String>)> {
    BaselineKind::MInvariance(state.m).validate()?;
    check_microdata(records, schema)?;
    let domain = schema.sensitive.len();
    let release_index = state.releases + 1;
    let mut rng = release_rng(state.seed, release_index);

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].id.cmp(&records[b].id));
    let mut buckets: Vec<Bucket> = Vec::new();
    let mut bucket_of: BTreeMap<&[u32], usize> = BTreeMap::new();
    let mut fresh: Vec<&Record> = Vec::new();
    let mut invalidated = Vec::new();
    for idx in order {
        let r = &records[idx];
        match state.signature.get(&r.id) {
            Some(sig) if sig.contains(&r.sensitive) => {
                let bi = *bucket_of.entry(sig.as_slice()).or_insert_with(|| {
                    let entries = sig.iter().map(|&v| ValueSet::from_values(domain, [v])).collect();
                    buckets.push(Bucket::new(Uss::new(entries)));
                    buckets.len() - 1
                });
                let b = &mut buckets[bi];
                let entry = b.entries_covering(r.sensitive).next().expect("value is in the signature");
                b.push(entry, idx, r, schema);
            }
            Some(_) => {
                invalidated.push(r.id.clone());
                fresh.push(r);
            }
            None => fresh.push(r),
        }
    }
    let mut groups: Vec<Vec<Placed<'_>>> = Vec::new();
    for b in &mut buckets {
        balance_counterfeits(b);
        groups.extend(phase3_split(b, records, schema, &mut rng)?);
    }
    let keys = Keys::values(domain);
    groups.extend(static_partition(&fresh, state.m, &keys, schema, true, &mut rng)?);
    let release = generalize(&groups, schema, release_index)?;

    let mut next = state.clone();
    next.releases = release_index;
    next.invalidated_total += invalidated.len() as u64;
    for g in &release.groups {
        let mut values = g.values();
        values.sort_unstable();
        for mem in &g.members {
            if let Some(id) = mem.id() {
                next.signature.insert(id.to_string(), values.clone());
            }
        }
    }
    Ok((release, next, invalidated))
}

/// Number of (record, version) pairs whose value the attack pins down.
pub fn count_vulnerable<T: Transitions + ?Sized>(
    releases: &[PublishedRelease],
    et: &[ExternalKnowledgeTable],
    model: &T,
    schema: &Schema,
) -> Result<u64> {
    let risks = attack_release_sequence(releases, et, model, schema)?;
    Ok(risks
        .iter()
        .flat_map(|r| r.report.risks.iter())
        .filter(|x| x.is_one())
        .count() as u64)
}

/// Distinct sensitive values of every group, for quick diversity checks.
pub fn min_diversity(release: &PublishedRelease) -> usize {
    release
        .groups
        .iter()
        .map(|g| g.values().into_iter().collect::<HashSet<_>>().len())
        .min()
        .unwrap_or(0)
}
