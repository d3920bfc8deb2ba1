use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::engine::bucket::{Bucket, Item};
use crate::error::{Error, Result};
use crate::model::{Extent, Placed, Record, Schema};
use crate::updates::{perfect_matching, ValueSet};

pub const PICK_CAP: u64 = 1_000_000;

/// Locality cost of splitting into two children: each child's real size times
/// the sum over attributes of its extent relative to the parent's extent.
pub fn split_score(schema: &Schema, child_a: &[&[i64]], child_b: &[&[i64]]) -> Result<BigRational> {
    if child_a.is_empty() || child_b.is_empty() {
        return Err(Error::Validation("split child is empty".into()));
    }
    let a = Extents::of(schema, child_a.iter().copied());
    let b = Extents::of(schema, child_b.iter().copied());
    let mut whole = a.clone();
    whole.merge(schema, &b);
    let mut total = BigRational::from_integer(0.into());
    for child in [&a, &b] {
        for j in 0..schema.qi.len() {
            total += BigRational::new(
                BigInt::from(child.count) * BigInt::from(child.size(schema, j)),
                BigInt::from(whole.size(schema, j)),
            );
        }
    }
    Ok(total)
}

/// Running bounding extents of a set of real records.
#[derive(Clone, Debug)]
pub(crate) struct Extents {
    ext: Vec<Option<Extent>>,
    pub count: usize,
}

impl Extents {
    pub fn new(schema: &Schema) -> Self {
        Extents {
            ext: vec![None; schema.qi.len()],
            count: 0,
        }
    }

    pub fn of<'a>(schema: &Schema, points: impl Iterator<Item = &'a [i64]>) -> Self {
        let mut e = Extents::new(schema);
        for p in points {
            e.add(schema, p);
        }
        e
    }

    pub fn add(&mut self, schema: &Schema, qi: &[i64]) {
        for ((slot, a), v) in self.ext.iter_mut().zip(&schema.qi).zip(qi) {
            let p = a.point(*v);
            *slot = Some(match slot {
                Some(e) => a.merge(*e, p),
                None => p,
            });
        }
        self.count += 1;
    }

    pub fn merge(&mut self, schema: &Schema, other: &Extents) {
        for ((slot, a), o) in self.ext.iter_mut().zip(&schema.qi).zip(&other.ext) {
            if let Some(o) = o {
                *slot = Some(match slot {
                    Some(e) => a.merge(*e, *o),
                    None => *o,
                });
            }
        }
        self.count += other.count;
    }

    pub fn size(&self, schema: &Schema, j: usize) -> u64 {
        self.ext[j].map_or(0, |e| schema.qi[j].extent_size(e))
    }
}

pub(crate) struct SplitCtx<'a, 'b> {
    pub records: &'a [Record],
    pub schema: &'b Schema,
    pub sets: &'b [ValueSet],
}

impl SplitCtx<'_, '_> {
    fn value(&self, item: Item) -> Option<u32> {
        match item {
            Item::Real(i) => Some(self.records[i].sensitive),
            Item::Counterfeit => None,
        }
    }

    fn extents<'b>(&self, items: impl Iterator<Item = &'b Item>) -> Extents {
        let mut e = Extents::new(self.schema);
        for it in items {
            if let Item::Real(i) = it {
                e.add(self.schema, &self.records[*i].qi);
            }
        }
        e
    }
}

/// Splits a balanced bucket into groups holding one item per entry with
/// pairwise distinct real values, then gives every counterfeit a value from
/// its entry's set that the group does not already hold.
pub fn phase3_split<'a, R: Rng>(
    bucket: &Bucket,
    records: &'a [Record],
    schema: &Schema,
    rng: &mut R,
) -> Result<Vec<Vec<Placed<'a>>>> {
    let ctx = SplitCtx {
        records,
        schema,
        sets: bucket.signature.entries(),
    };
    let groups = split_items(&ctx, bucket.entries.clone());
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        if g.iter().all(|it| *it == Item::Counterfeit) {
            continue;
        }
        out.push(fill_counterfeits(&ctx, &g, rng)?);
    }
    Ok(out)
}

/// Same as [`phase3_split`] but returns item positions per group, for callers
/// that need the raw decomposition.
pub(crate) fn split_items(ctx: &SplitCtx<'_, '_>, entries: Vec<Vec<Item>>) -> Vec<Vec<Item>> {
    let mut out = Vec::new();
    split_rec(ctx, entries, &mut out);
    out
}

fn split_rec(ctx: &SplitCtx<'_, '_>, entries: Vec<Vec<Item>>, out: &mut Vec<Vec<Item>>) {
    let delta = entries.first().map_or(0, |e| e.len());
    if delta == 0 {
        return;
    }
    if delta == 1 {
        out.push(entries.into_iter().map(|e| e[0]).collect());
        return;
    }
    match best_split(ctx, &entries) {
        Some((a, b)) => {
            split_rec(ctx, a, out);
            split_rec(ctx, b, out);
        }
        None => out.extend(colour_groups(ctx, &entries)),
    }
}

type Children = (Vec<Vec<Item>>, Vec<Vec<Item>>);

fn best_split(ctx: &SplitCtx<'_, '_>, entries: &[Vec<Item>]) -> Option<Children> {
    let delta = entries[0].len();
    let whole = ctx.extents(entries.iter().flatten());
    if whole.count == 0 {
        return None;
    }
    let d = ctx.schema.qi.len();
    let widths: Vec<u128> = (0..d).map(|j| whole.size(ctx.schema, j).max(1) as u128).collect();
    let prod: u128 = widths.iter().product();
    // split score scaled by the product of parent widths, kept integral
    let cost = |e: &Extents| -> u128 {
        (0..d)
            .map(|j| e.count as u128 * e.size(ctx.schema, j) as u128 * (prod / widths[j]))
            .sum()
    };
    let mut counts_all: HashMap<u32, usize> = HashMap::new();
    for it in entries.iter().flatten() {
        if let Some(v) = ctx.value(*it) {
            *counts_all.entry(v).or_default() += 1;
        }
    }
    // (score, attribute, tuples in child A)
    let mut best: Option<(u128, usize, usize)> = None;
    for j in 0..d {
        let tuples = pick_tuples(ctx, entries, j, delta - 1);
        if tuples.is_empty() {
            continue;
        }
        let mut used: Vec<Vec<bool>> = entries.iter().map(|e| vec![false; e.len()]).collect();
        for t in &tuples {
            for (e, &p) in t.iter().enumerate() {
                used[e][p] = true;
            }
        }
        let leftover = ctx.extents(
            entries
                .iter()
                .enumerate()
                .flat_map(|(e, items)| items.iter().enumerate().filter(|(p, _)| !used[e][*p]).map(|(_, it)| it).collect::<Vec<_>>()),
        );
        // suffix[t]: tuples[t..] plus every item outside the tuples
        let mut suffix = vec![leftover; tuples.len() + 1];
        for t in (0..tuples.len()).rev() {
            let mut acc = suffix[t + 1].clone();
            acc.merge(ctx.schema, &ctx.extents(tuples[t].iter().enumerate().map(|(e, &p)| &entries[e][p])));
            suffix[t] = acc;
        }
        let mut counts = counts_all.clone();
        let mut prefix = Extents::new(ctx.schema);
        for (t, tuple) in tuples.iter().enumerate() {
            for (e, &p) in tuple.iter().enumerate() {
                if let Item::Real(i) = entries[e][p] {
                    *counts.get_mut(&ctx.records[i].sensitive).unwrap() -= 1;
                    prefix.add(ctx.schema, &ctx.records[i].qi);
                }
            }
            let delta_a = t + 1;
            if counts.values().copied().max().unwrap_or(0) > delta - delta_a {
                continue;
            }
            let score = cost(&prefix) + cost(&suffix[t + 1]);
            if best.is_none_or(|(s, _, _)| score < s) {
                best = Some((score, j, delta_a));
            }
        }
    }
    let (_, j, delta_a) = best?;
    let tuples = pick_tuples(ctx, entries, j, delta_a);
    let mut in_a: Vec<Vec<bool>> = entries.iter().map(|e| vec![false; e.len()]).collect();
    let mut a: Vec<Vec<Item>> = vec![Vec::with_capacity(delta_a); entries.len()];
    for t in &tuples {
        for (e, &p) in t.iter().enumerate() {
            in_a[e][p] = true;
            a[e].push(entries[e][p]);
        }
    }
    let b: Vec<Vec<Item>> = entries
        .iter()
        .enumerate()
        .map(|(e, items)| {
            items
                .iter()
                .enumerate()
                .filter(|(p, _)| !in_a[e][*p])
                .map(|(_, it)| *it)
                .collect()
        })
        .collect();
    Some((a, b))
}

/// Sort key on attribute `j`; counterfeits sort last.
fn key(ctx: &SplitCtx<'_, '_>, it: Item, j: usize) -> (u8, i64, usize) {
    match it {
        Item::Real(i) => (0, ctx.records[i].qi[j], i),
        Item::Counterfeit => (1, 0, usize::MAX),
    }
}

/// Forms up to `limit` tuples (one position per entry, distinct real values)
/// from the head of the order on attribute `j`.
fn pick_tuples(ctx: &SplitCtx<'_, '_>, entries: &[Vec<Item>], j: usize, limit: usize) -> Vec<Vec<usize>> {
    let k = entries.len();
    let order: Vec<Vec<usize>> = entries
        .iter()
        .map(|items| {
            let mut idx: Vec<usize> = (0..items.len()).collect();
            idx.sort_by_key(|&p| key(ctx, items[p], j));
            idx
        })
        .collect();
    let mut used: Vec<Vec<bool>> = entries.iter().map(|e| vec![false; e.len()]).collect();
    let mut out = Vec::new();
    let mut budget = PICK_CAP;
    while out.len() < limit {
        // head: smallest unused item across entries
        let head = (0..k)
            .filter_map(|e| {
                order[e]
                    .iter()
                    .find(|&&p| !used[e][p])
                    .map(|&p| (key(ctx, entries[e][p], j), e, p))
            })
            .min();
        let Some((_, he, hp)) = head else { break };
        let mut tuple = vec![usize::MAX; k];
        tuple[he] = hp;
        let mut values: Vec<u32> = ctx.value(entries[he][hp]).into_iter().collect();
        let rest: Vec<usize> = (0..k).filter(|&e| e != he).collect();
        if !fill(ctx, entries, &order, &used, &rest, 0, &mut tuple, &mut values, &mut budget) {
            break;
        }
        for (e, &p) in tuple.iter().enumerate() {
            used[e][p] = true;
        }
        out.push(tuple);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn fill(
    ctx: &SplitCtx<'_, '_>,
    entries: &[Vec<Item>],
    order: &[Vec<usize>],
    used: &[Vec<bool>],
    rest: &[usize],
    i: usize,
    tuple: &mut [usize],
    values: &mut Vec<u32>,
    budget: &mut u64,
) -> bool {
    if i == rest.len() {
        return true;
    }
    let e = rest[i];
    let mut tried_fake = false;
    for &p in &order[e] {
        if used[e][p] {
            continue;
        }
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let it = entries[e][p];
        match ctx.value(it) {
            Some(v) if values.contains(&v) => continue,
            Some(v) => {
                tuple[e] = p;
                values.push(v);
                if fill(ctx, entries, order, used, rest, i + 1, tuple, values, budget) {
                    return true;
                }
                values.pop();
            }
            None => {
                // counterfeits are interchangeable; trying one is enough
                if tried_fake {
                    continue;
                }
                tried_fake = true;
                tuple[e] = p;
                if fill(ctx, entries, order, used, rest, i + 1, tuple, values, budget) {
                    return true;
                }
            }
        }
    }
    false
}

/// Decomposes a balanced bucket into one-per-entry groups by properly edge
/// colouring the entry/value multigraph with `delta` colours. Counterfeits are
/// edges to private value nodes. Always succeeds when no real value occurs
/// more than `delta` times.
pub(crate) fn colour_groups(ctx: &SplitCtx<'_, '_>, entries: &[Vec<Item>]) -> Vec<Vec<Item>> {
    let delta = entries[0].len();
    let k = entries.len();
    let mut value_node: HashMap<u32, usize> = HashMap::new();
    let mut right_count = 0usize;
    // (entry, right node, item); sorted on the first attribute for a stable walk
    let mut edges: Vec<(usize, usize, Item)> = Vec::new();
    for (e, items) in entries.iter().enumerate() {
        let mut sorted = items.clone();
        sorted.sort_by_key(|it| key(ctx, *it, 0));
        for it in sorted {
            let r = match ctx.value(it) {
                Some(v) => *value_node.entry(v).or_insert_with(|| {
                    right_count += 1;
                    right_count - 1
                }),
                None => {
                    right_count += 1;
                    right_count - 1
                }
            };
            edges.push((e, r, it));
        }
    }
    const NONE: usize = usize::MAX;
    let mut left = vec![vec![NONE; delta]; k];
    let mut right = vec![vec![NONE; delta]; right_count];
    let mut colour = vec![NONE; edges.len()];
    for ei in 0..edges.len() {
        let (u, v, _) = edges[ei];
        let a = (0..delta).find(|&c| left[u][c] == NONE).expect("entry degree is delta");
        let b = (0..delta).find(|&c| right[v][c] == NONE).expect("value degree at most delta");
        if right[v][a] != NONE {
            // swap colours a and b along the alternating path leaving v on a
            let mut path = Vec::new();
            let mut node_is_right = true;
            let mut node = v;
            let mut c = a;
            loop {
                let next = if node_is_right { right[node][c] } else { left[node][c] };
                if next == NONE {
                    break;
                }
                path.push(next);
                let (eu, ev, _) = edges[next];
                node = if node_is_right { eu } else { ev };
                node_is_right = !node_is_right;
                c = if c == a { b } else { a };
            }
            for &pe in &path {
                let (pu, pv, _) = edges[pe];
                let pc = colour[pe];
                left[pu][pc] = NONE;
                right[pv][pc] = NONE;
            }
            for &pe in &path {
                let (pu, pv, _) = edges[pe];
                let nc = if colour[pe] == a { b } else { a };
                colour[pe] = nc;
                left[pu][nc] = pe;
                right[pv][nc] = pe;
            }
        }
        colour[ei] = a;
        left[u][a] = ei;
        right[v][a] = ei;
    }
    (0..delta)
        .map(|c| (0..k).map(|u| edges[left[u][c]].2).collect())
        .collect()
}

fn fill_counterfeits<'a, R: Rng>(ctx: &SplitCtx<'a, '_>, group: &[Item], rng: &mut R) -> Result<Vec<Placed<'a>>> {
    let present: Vec<u32> = group.iter().filter_map(|it| ctx.value(*it)).collect();
    let slots: Vec<usize> = (0..group.len()).filter(|&e| group[e] == Item::Counterfeit).collect();
    let mut values: Vec<u32> = Vec::new();
    let mut adj = Vec::with_capacity(slots.len());
    for &e in &slots {
        let mut cands: Vec<u32> = ctx.sets[e].iter().filter(|v| !present.contains(v)).collect();
        cands.shuffle(rng);
        let mut list = Vec::with_capacity(cands.len());
        for v in cands {
            let pos = match values.iter().position(|x| *x == v) {
                Some(p) => p,
                None => {
                    values.push(v);
                    values.len() - 1
                }
            };
            list.push(pos);
        }
        adj.push(list);
    }
    let matched = perfect_matching(&adj, values.len()).ok_or_else(|| Error::CounterfeitExhaustion {
        entry: slots.first().copied().unwrap_or(0),
    })?;
    let records: &'a [Record] = ctx.records;
    let mut fake = slots.iter().zip(matched).map(|(_, m)| values[m]);
    Ok(group
        .iter()
        .map(|it| match it {
            Item::Real(i) => Placed::Real(&records[*i]),
            Item::Counterfeit => Placed::Counterfeit(fake.next().unwrap()),
        })
        .collect())
}
