use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::error::{Error, Result};
use crate::model::{Record, Region, Schema};
use crate::updates::{implies, intersect, Uss};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Item {
    /// Index into the current microdata.
    Real(usize),
    Counterfeit,
}

/// Records grouped under one signature, one list per signature entry.
#[derive(Clone, Debug)]
pub struct Bucket {
    pub signature: Uss,
    pub entries: Vec<Vec<Item>>,
    counts: HashMap<u32, usize>,
    region: Option<Region>,
    disjoint: bool,
}

impl Bucket {
    pub fn new(signature: Uss) -> Self {
        let n = signature.len();
        let disjoint = signature.pairwise_disjoint();
        Bucket {
            signature,
            entries: vec![Vec::new(); n],
            counts: HashMap::new(),
            region: None,
            disjoint,
        }
    }

    pub fn real_count(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(|e| e.is_empty())
    }

    /// Largest multiplicity of a sensitive value among real records.
    pub fn f_max(&self) -> usize {
        self.counts.values().copied().max().unwrap_or(0)
    }

    pub fn frequency(&self, value: u32) -> usize {
        self.counts.get(&value).copied().unwrap_or(0)
    }

    /// Target entry size: the largest of the top frequency and every entry size.
    pub fn delta(&self) -> usize {
        self.entries.iter().map(|e| e.len()).max().unwrap_or(0).max(self.f_max())
    }

    pub fn region(&self) -> Option<&Region> {
        self.region.as_ref()
    }

    /// Signature entries are pairwise disjoint.
    pub fn is_disjoint(&self) -> bool {
        self.disjoint
    }

    /// Entries whose candidate set holds `value`.
    pub fn entries_covering(&self, value: u32) -> impl Iterator<Item = usize> + '_ {
        self.signature
            .entries()
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.contains(value))
            .map(|(i, _)| i)
    }

    pub fn push(&mut self, entry: usize, idx: usize, record: &Record, schema: &Schema) {
        self.entries[entry].push(Item::Real(idx));
        *self.counts.entry(record.sensitive).or_default() += 1;
        match &mut self.region {
            Some(r) => r.include(schema, &record.qi),
            None => self.region = Some(Region::point(schema, &record.qi)),
        }
    }
}

/// One bucket per distinct signature, in first-seen order, followed by the
/// best pairwise intersection of every two of them when it is new.
pub fn phase1_create_buckets<'a>(signatures: impl IntoIterator<Item = &'a Uss>) -> Vec<Bucket> {
    let mut seen: HashMap<&Uss, ()> = HashMap::new();
    let mut originals: Vec<&Uss> = Vec::new();
    for s in signatures {
        if seen.insert(s, ()).is_none() {
            originals.push(s);
        }
    }
    let mut known: std::collections::HashSet<Uss> = originals.iter().map(|s| (*s).clone()).collect();
    let mut extra = Vec::new();
    for i in 0..originals.len() {
        for j in i + 1..originals.len() {
            if let Some(plan) = intersect(originals[i], originals[j]) {
                if known.insert(plan.result.clone()) {
                    extra.push(plan.result);
                }
            }
        }
    }
    originals
        .into_iter()
        .cloned()
        .chain(extra)
        .map(Bucket::new)
        .collect()
}

/// Whether a record may join the bucket. A returning record needs its previous
/// signature to imply the bucket's; every record needs its value covered.
pub fn can_join(record: &Record, pre: Option<&Uss>, bucket: &Bucket, star: bool) -> bool {
    if bucket.entries_covering(record.sensitive).next().is_none() {
        return false;
    }
    match pre {
        Some(u) => implies(u, &bucket.signature),
        None => !star || bucket.is_disjoint(),
    }
}

/// Number of buckets the record can be assigned to.
pub fn cnt_buc(record: &Record, pre: Option<&Uss>, buckets: &[Bucket], star: bool) -> usize {
    buckets.iter().filter(|b| can_join(record, pre, b, star)).count()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentScore {
    pub epsilon: i8,
    pub lambda: BigRational,
    pub value: BigRational,
}

/// Score of placing the record into an entry: `1/λ` when the placement does
/// not collide with the current target size, `-λ` when it does, with `λ` the
/// growth factor of the bucket's region.
pub fn assignment_score(bucket: &Bucket, record: &Record, entry: usize, schema: &Schema) -> Result<AssignmentScore> {
    let set = bucket
        .signature
        .entries()
        .get(entry)
        .ok_or_else(|| Error::Validation(format!("entry {entry} out of range")))?;
    if !set.contains(record.sensitive) {
        return Err(Error::Validation(format!(
            "record {} cannot enter entry {entry}",
            record.id
        )));
    }
    let delta = bucket.delta();
    let collides =
        delta > 0 && (bucket.frequency(record.sensitive) == delta || bucket.entries[entry].len() == delta);
    let lambda = match &bucket.region {
        None => BigRational::one(),
        Some(before) => {
            let mut num = BigInt::one();
            let mut den = BigInt::one();
            for ((e, a), v) in before.extents.iter().zip(&schema.qi).zip(&record.qi) {
                den *= a.extent_size(*e);
                num *= a.extent_size(a.merge(*e, a.point(*v)));
            }
            BigRational::new(num, den)
        }
    };
    let (epsilon, value) = if collides {
        (-1, -lambda.clone())
    } else {
        (1, lambda.recip())
    };
    Ok(AssignmentScore {
        epsilon,
        lambda,
        value,
    })
}

/// Assigns records in increasing order of how many buckets accept them,
/// each to the best scoring entry. Records no bucket accepts are returned.
pub fn phase2_assign(
    records: &[Record],
    pre: &[Option<&Uss>],
    mut buckets: Vec<Bucket>,
    schema: &Schema,
    star: bool,
) -> Result<(Vec<Bucket>, Vec<usize>)> {
    // Eligibility depends only on (previous signature, bucket), so cache it.
    let mut implied: HashMap<(&Uss, usize), bool> = HashMap::new();
    let mut eligible: Vec<Vec<usize>> = Vec::with_capacity(records.len());
    for (idx, rec) in records.iter().enumerate() {
        let mut list = Vec::new();
        for (bi, b) in buckets.iter().enumerate() {
            if b.entries_covering(rec.sensitive).next().is_none() {
                continue;
            }
            let ok = match pre[idx] {
                Some(u) => *implied
                    .entry((u, bi))
                    .or_insert_with(|| implies(u, &b.signature)),
                None => !star || b.is_disjoint(),
            };
            if ok {
                list.push(bi);
            }
        }
        eligible.push(list);
    }
    let mut leftovers = Vec::new();
    let mut order = Vec::new();
    for (idx, list) in eligible.iter().enumerate() {
        if list.is_empty() {
            if pre[idx].is_some() {
                return Err(Error::Validation(format!(
                    "record {} moved to a value its previous group cannot explain",
                    records[idx].id
                )));
            }
            leftovers.push(idx);
        } else {
            order.push(idx);
        }
    }
    order.sort_by(|&a, &b| {
        eligible[a]
            .len()
            .cmp(&eligible[b].len())
            .then_with(|| records[a].id.cmp(&records[b].id))
    });
    for idx in order {
        let rec = &records[idx];
        let mut best: Option<(BigRational, usize, usize)> = None;
        for &bi in &eligible[idx] {
            let b = &buckets[bi];
            let mut local: Option<(BigRational, usize, usize)> = None;
            for ei in b.entries_covering(rec.sensitive) {
                let s = assignment_score(b, rec, ei, schema)?.value;
                let size = b.entries[ei].len();
                let better = match &local {
                    None => true,
                    Some((ls, lsize, _)) => s > *ls || (s == *ls && size < *lsize),
                };
                if better {
                    local = Some((s, size, ei));
                }
            }
            if let Some((s, _, ei)) = local {
                if best.as_ref().is_none_or(|(bs, _, _)| s > *bs) {
                    best = Some((s, bi, ei));
                }
            }
        }
        let (_, bi, ei) = best.expect("eligible record has a covering entry");
        buckets[bi].push(ei, idx, rec, schema);
    }
    Ok((buckets, leftovers))
}

/// Pads every entry to the target size with counterfeit placeholders.
pub fn balance_counterfeits(bucket: &mut Bucket) -> usize {
    let delta = bucket.delta();
    let mut added = 0;
    for e in &mut bucket.entries {
        while e.len() < delta {
            e.push(Item::Counterfeit);
            added += 1;
        }
    }
    added
}
