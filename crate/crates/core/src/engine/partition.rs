use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::engine::split::Extents;
use crate::error::{Error, Result};
use crate::model::{Placed, Record, Schema};

/// What must differ between members of a group: each sensitive value maps to
/// a key, and no two members may share one.
#[derive(Clone, Debug)]
pub struct Keys {
    of_value: Vec<u32>,
    count: usize,
}

impl Keys {
    /// Members need distinct values.
    pub fn values(domain: usize) -> Self {
        Keys {
            of_value: (0..domain as u32).collect(),
            count: domain,
        }
    }

    /// Members need distinct components.
    pub fn components(of_value: Vec<u32>) -> Self {
        let count = of_value.iter().map(|c| *c as usize + 1).max().unwrap_or(0);
        Keys { of_value, count }
    }

    pub fn key(&self, value: u32) -> u32 {
        self.of_value[value as usize]
    }

    pub fn distinct(&self) -> usize {
        self.count
    }
}

fn eligible(counts: &BTreeMap<u32, usize>, size: usize, m: usize) -> bool {
    size >= m && counts.values().all(|&c| c * m <= size)
}

/// Partitions records into groups of at least `m` members with distinct
/// keys. Cuts are taken top-down, median first, while both halves stay
/// eligible; each leaf is dealt round-robin. When the whole set is not
/// eligible and counterfeits are allowed, groups are padded with counterfeit
/// values whose keys the group lacks.
pub fn static_partition<'a, R: Rng>(
    records: &[&'a Record],
    m: usize,
    keys: &Keys,
    schema: &Schema,
    allow_counterfeits: bool,
    rng: &mut R,
) -> Result<Vec<Vec<Placed<'a>>>> {
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let m = m.max(1);
    if keys.distinct() < m {
        return Err(Error::Infeasible(format!(
            "only {} distinct sensitive classes available, {m} required",
            keys.distinct()
        )));
    }
    let counts = key_counts(records, keys);
    if eligible(&counts, records.len(), m) {
        let mut leaves = Vec::new();
        mondrian(records.to_vec(), m, keys, schema, &mut leaves);
        let mut out = Vec::new();
        for leaf in leaves {
            out.extend(deal(&leaf, leaf.len() / m, keys).into_iter().map(|g| g.into_iter().map(Placed::Real).collect()));
        }
        return Ok(out);
    }
    if !allow_counterfeits {
        return Err(Error::Infeasible(format!(
            "{} records cannot form groups of {m} distinct sensitive values",
            records.len()
        )));
    }
    let f_max = counts.values().copied().max().unwrap_or(0);
    let g = f_max.max(records.len() / m).max(1);
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.qi.cmp(&b.qi).then_with(|| a.id.cmp(&b.id)));
    let groups = deal(&sorted, g, keys);
    let mut out = Vec::with_capacity(groups.len());
    for group in groups {
        let mut present: HashSet<u32> = group.iter().map(|r| keys.key(r.sensitive)).collect();
        let mut placed: Vec<Placed<'a>> = group.into_iter().map(Placed::Real).collect();
        if placed.len() < m {
            let mut pool: Vec<u32> = (0..keys.of_value.len() as u32).collect();
            pool.shuffle(rng);
            for v in pool {
                if placed.len() >= m {
                    break;
                }
                if present.insert(keys.key(v)) {
                    placed.push(Placed::Counterfeit(v));
                }
            }
        }
        out.push(placed);
    }
    Ok(out)
}

fn key_counts(records: &[&Record], keys: &Keys) -> BTreeMap<u32, usize> {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(keys.key(r.sensitive)).or_insert(0) += 1;
    }
    counts
}

/// Deals records into `g` groups so that records sharing a key land in
/// different groups, provided no key occurs more than `g` times.
fn deal<'a>(records: &[&'a Record], g: usize, keys: &Keys) -> Vec<Vec<&'a Record>> {
    let g = g.max(1);
    let counts = key_counts(records, keys);
    let mut order = records.to_vec();
    // rarest keys first, each key's records contiguous
    order.sort_by(|a, b| {
        let (ka, kb) = (keys.key(a.sensitive), keys.key(b.sensitive));
        counts[&ka]
            .cmp(&counts[&kb])
            .then(ka.cmp(&kb))
            .then_with(|| a.qi.cmp(&b.qi))
            .then_with(|| a.id.cmp(&b.id))
    });
    let mut out = vec![Vec::new(); g];
    for (i, r) in order.into_iter().enumerate() {
        out[i % g].push(r);
    }
    out
}

fn mondrian<'a>(records: Vec<&'a Record>, m: usize, keys: &Keys, schema: &Schema, leaves: &mut Vec<Vec<&'a Record>>) {
    let n = records.len();
    if n < 2 * m {
        leaves.push(records);
        return;
    }
    let total = key_counts(&records, keys);
    let mut best: Option<(num_rational::Ratio<u128>, Vec<&'a Record>, usize)> = None;
    for j in 0..schema.qi.len() {
        let mut sorted = records.clone();
        sorted.sort_by(|a, b| a.qi[j].cmp(&b.qi[j]).then_with(|| a.id.cmp(&b.id)));
        let Some(cut) = median_cut(&sorted, j, m, keys, &total) else {
            continue;
        };
        let left = Extents::of(schema, sorted[..cut].iter().map(|r| r.qi.as_slice()));
        let right = Extents::of(schema, sorted[cut..].iter().map(|r| r.qi.as_slice()));
        let mut whole = left.clone();
        whole.merge(schema, &right);
        let mut score = num_rational::Ratio::<u128>::from_integer(0);
        for e in [&left, &right] {
            for jj in 0..schema.qi.len() {
                score += num_rational::Ratio::new(
                    e.count as u128 * e.size(schema, jj) as u128,
                    whole.size(schema, jj).max(1) as u128,
                );
            }
        }
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, sorted, cut));
        }
    }
    match best {
        None => leaves.push(records),
        Some((_, mut sorted, cut)) => {
            let right = sorted.split_off(cut);
            mondrian(sorted, m, keys, schema, leaves);
            mondrian(right, m, keys, schema, leaves);
        }
    }
}

/// Cut position nearest the middle, between distinct attribute values, with
/// both sides eligible.
fn median_cut(sorted: &[&Record], j: usize, m: usize, keys: &Keys, total: &BTreeMap<u32, usize>) -> Option<usize> {
    let n = sorted.len();
    let mut left: BTreeMap<u32, usize> = BTreeMap::new();
    let mut left_max = 0usize;
    // histogram of right-side key counts to track its maximum as it shrinks
    let mut right_counts = total.clone();
    let mut hist = vec![0usize; n + 1];
    for c in right_counts.values() {
        hist[*c] += 1;
    }
    let mut right_max = right_counts.values().copied().max().unwrap_or(0);
    let mut best: Option<usize> = None;
    for p in 1..n {
        let k = keys.key(sorted[p - 1].sensitive);
        let l = left.entry(k).or_insert(0);
        *l += 1;
        left_max = left_max.max(*l);
        let r = right_counts.get_mut(&k).unwrap();
        hist[*r] -= 1;
        *r -= 1;
        hist[*r] += 1;
        while right_max > 0 && hist[right_max] == 0 {
            right_max -= 1;
        }
        if sorted[p - 1].qi[j] == sorted[p].qi[j] {
            continue;
        }
        let (ln, rn) = (p, n - p);
        if ln >= m && rn >= m && left_max * m <= ln && right_max * m <= rn {
            let dist = |x: usize| (2 * x).abs_diff(n);
            if best.is_none_or(|b| dist(p) < dist(b)) {
                best = Some(p);
            }
        }
    }
    best
}
