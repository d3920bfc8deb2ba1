//! The adversary: update graphs over a record's candidate sensitive values,
//! dead-end pruning, feasible paths and exact disclosure risks.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{CheckedAdd, CheckedMul, One, Signed, Zero};

use crate::error::{Error, Result};
use crate::model::{ExternalKnowledgeTable, PublishedRelease, Schema};
use crate::updates::Transitions;

pub const DEFAULT_PATH_CAP: u64 = 10_000_000;
pub const DEFAULT_ORACLE_CAP: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SugNode {
    pub value: u32,
    pub weight: BigRational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SugEdge {
    pub from: usize,
    pub to: usize,
    pub weight: BigRational,
}

/// Layered graph; `edges[i]` connects `layers[i]` to `layers[i + 1]` by node
/// position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sug {
    pub layers: Vec<Vec<SugNode>>,
    pub edges: Vec<Vec<SugEdge>>,
}

impl Sug {
    /// Assembles a graph from explicit nodes and edges, checking its shape.
    pub fn from_parts(layers: Vec<Vec<SugNode>>, edges: Vec<Vec<SugEdge>>) -> Result<Self> {
        if layers.is_empty() || layers.iter().any(|l| l.is_empty()) {
            return Err(Error::Validation("graph needs non-empty layers".into()));
        }
        if edges.len() + 1 != layers.len() {
            return Err(Error::Validation("edge lists must connect consecutive layers".into()));
        }
        for layer in &layers {
            let mut seen = std::collections::HashSet::new();
            for n in layer {
                if !seen.insert(n.value) {
                    return Err(Error::Validation(format!("value {} repeated in a layer", n.value)));
                }
                if !n.weight.is_positive() || n.weight > BigRational::one() {
                    return Err(Error::Validation("node weight outside (0, 1]".into()));
                }
            }
        }
        for (i, es) in edges.iter().enumerate() {
            let mut seen = std::collections::HashSet::new();
            for e in es {
                if e.from >= layers[i].len() || e.to >= layers[i + 1].len() {
                    return Err(Error::Validation(format!("edge out of range after layer {}", i + 1)));
                }
                if !seen.insert((e.from, e.to)) {
                    return Err(Error::Validation("duplicate edge".into()));
                }
                if !e.weight.is_positive() || e.weight > BigRational::one() {
                    return Err(Error::Validation("edge weight outside (0, 1]".into()));
                }
            }
        }
        Ok(Sug { layers, edges })
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn node_count(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(|e| e.len()).sum()
    }
}

/// Builds the graph with each distinct value weighted by its share of the
/// candidate multiset.
pub fn build_sug<T: Transitions + ?Sized>(history: &[Vec<u32>], model: &T) -> Result<Sug> {
    let priors: Vec<Vec<(u32, BigRational)>> = history
        .iter()
        .map(|c| {
            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for &v in c {
                *counts.entry(v).or_default() += 1;
            }
            let n = BigInt::from(c.len());
            counts
                .into_iter()
                .map(|(v, k)| (v, BigRational::new(BigInt::from(k), n.clone())))
                .collect()
        })
        .collect();
    build_sug_with_priors(&priors, model)
}

/// Builds the graph from explicit per-layer priors, which must be positive
/// and sum to one within each layer.
pub fn build_sug_with_priors<T: Transitions + ?Sized>(
    history: &[Vec<(u32, BigRational)>],
    model: &T,
) -> Result<Sug> {
    if history.is_empty() {
        return Err(Error::Validation("empty history".into()));
    }
    let mut layers = Vec::with_capacity(history.len());
    for layer in history {
        if layer.is_empty() {
            return Err(Error::Validation("empty candidate set".into()));
        }
        let mut total = BigRational::zero();
        for (v, w) in layer {
            if *v as usize >= model.domain_size() {
                return Err(Error::Validation(format!("value {v} outside the model domain")));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(Error::Validation(format!("layer priors sum to {total}")));
        }
        layers.push(
            layer
                .iter()
                .map(|(v, w)| SugNode {
                    value: *v,
                    weight: w.clone(),
                })
                .collect::<Vec<_>>(),
        );
    }
    let mut edges = Vec::with_capacity(layers.len().saturating_sub(1));
    for w in layers.windows(2) {
        let mut es = Vec::new();
        for (i, a) in w[0].iter().enumerate() {
            for (j, b) in w[1].iter().enumerate() {
                if let Some(p) = model.p_trans(a.value, b.value) {
                    es.push(SugEdge {
                        from: i,
                        to: j,
                        weight: p.clone(),
                    });
                }
            }
        }
        edges.push(es);
    }
    Sug::from_parts(layers, edges)
}

/// Graph left after dead-end removal reaches a fixed point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeasibleSubSug {
    pub graph: Sug,
    pub removed_nodes: usize,
    pub removed_edges: usize,
}

/// Repeatedly removes first-layer nodes without successors, last-layer nodes
/// without predecessors, and interior nodes missing either.
pub fn prune(sug: &Sug) -> Result<FeasibleSubSug> {
    let n = sug.layers.len();
    let mut alive: Vec<Vec<bool>> = sug.layers.iter().map(|l| vec![true; l.len()]).collect();
    if n > 1 {
        let mut out_deg: Vec<Vec<usize>> = sug.layers.iter().map(|l| vec![0; l.len()]).collect();
        let mut in_deg = out_deg.clone();
        let mut succ: Vec<Vec<Vec<usize>>> = sug.layers.iter().map(|l| vec![Vec::new(); l.len()]).collect();
        let mut pred = succ.clone();
        for (i, es) in sug.edges.iter().enumerate() {
            for e in es {
                out_deg[i][e.from] += 1;
                in_deg[i + 1][e.to] += 1;
                succ[i][e.from].push(e.to);
                pred[i + 1][e.to].push(e.from);
            }
        }
        let dead = |i: usize, j: usize, in_deg: &Vec<Vec<usize>>, out_deg: &Vec<Vec<usize>>| {
            (i > 0 && in_deg[i][j] == 0) || (i + 1 < n && out_deg[i][j] == 0)
        };
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for i in 0..n {
            for j in 0..sug.layers[i].len() {
                if dead(i, j, &in_deg, &out_deg) {
                    alive[i][j] = false;
                    stack.push((i, j));
                }
            }
        }
        while let Some((i, j)) = stack.pop() {
            if i + 1 < n {
                for &k in &succ[i][j] {
                    in_deg[i + 1][k] -= 1;
                    if alive[i + 1][k] && dead(i + 1, k, &in_deg, &out_deg) {
                        alive[i + 1][k] = false;
                        stack.push((i + 1, k));
                    }
                }
            }
            if i > 0 {
                for &k in &pred[i][j] {
                    out_deg[i - 1][k] -= 1;
                    if alive[i - 1][k] && dead(i - 1, k, &in_deg, &out_deg) {
                        alive[i - 1][k] = false;
                        stack.push((i - 1, k));
                    }
                }
            }
        }
    }
    let mut remap: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut layers = Vec::with_capacity(n);
    for (i, layer) in sug.layers.iter().enumerate() {
        let mut map = vec![usize::MAX; layer.len()];
        let mut kept = Vec::new();
        for (j, node) in layer.iter().enumerate() {
            if alive[i][j] {
                map[j] = kept.len();
                kept.push(node.clone());
            }
        }
        if kept.is_empty() {
            return Err(Error::InconsistentHistory(format!(
                "no feasible value remains in layer {}",
                i + 1
            )));
        }
        remap.push(map);
        layers.push(kept);
    }
    let edges: Vec<Vec<SugEdge>> = sug
        .edges
        .iter()
        .enumerate()
        .map(|(i, es)| {
            es.iter()
                .filter(|e| alive[i][e.from] && alive[i + 1][e.to])
                .map(|e| SugEdge {
                    from: remap[i][e.from],
                    to: remap[i + 1][e.to],
                    weight: e.weight.clone(),
                })
                .collect()
        })
        .collect();
    let graph = Sug { layers, edges };
    Ok(FeasibleSubSug {
        removed_nodes: sug.node_count() - graph.node_count(),
        removed_edges: sug.edge_count() - graph.edge_count(),
        graph,
    })
}

/// A first-to-last layer path as node values, with its weight.
pub type WeightedPath = (Vec<u32>, BigRational);

/// Materializes every feasible path. The weight of a path is the product of
/// the weights of all nodes and edges it traverses.
pub fn enumerate_paths(fs: &FeasibleSubSug, cap: u64) -> Result<Vec<WeightedPath>> {
    let g = &fs.graph;
    if count_paths(g) > BigUint::from(cap) {
        return Err(Error::CapExceeded {
            what: "path count",
            cap,
        });
    }
    let succ = successor_lists(g);
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::with_capacity(g.layers.len());
    fn walk(
        g: &Sug,
        succ: &[Vec<Vec<(usize, usize)>>],
        stack: &mut Vec<usize>,
        weight: BigRational,
        out: &mut Vec<WeightedPath>,
    ) {
        let i = stack.len() - 1;
        let j = stack[i];
        if i + 1 == g.layers.len() {
            let values = stack.iter().enumerate().map(|(l, &k)| g.layers[l][k].value).collect();
            out.push((values, weight));
            return;
        }
        for &(to, e) in &succ[i][j] {
            let w = &weight * &g.edges[i][e].weight * &g.layers[i + 1][to].weight;
            stack.push(to);
            walk(g, succ, stack, w, out);
            stack.pop();
        }
    }
    for (j, node) in g.layers[0].iter().enumerate() {
        stack.push(j);
        walk(g, &succ, &mut stack, node.weight.clone(), &mut out);
        stack.pop();
    }
    Ok(out)
}

fn successor_lists(g: &Sug) -> Vec<Vec<Vec<(usize, usize)>>> {
    let mut succ: Vec<Vec<Vec<(usize, usize)>>> = g.layers.iter().map(|l| vec![Vec::new(); l.len()]).collect();
    for (i, es) in g.edges.iter().enumerate() {
        for (k, e) in es.iter().enumerate() {
            succ[i][e.from].push((e.to, k));
        }
    }
    for layer in &mut succ {
        for s in layer {
            s.sort_unstable();
        }
    }
    succ
}

/// Number of first-to-last layer paths.
pub fn count_paths(g: &Sug) -> BigUint {
    let ones_nodes: Vec<Vec<BigUint>> = g.layers.iter().map(|l| vec![BigUint::one(); l.len()]).collect();
    let ones_edges: Vec<Vec<(usize, usize, BigUint)>> = g
        .edges
        .iter()
        .map(|es| es.iter().map(|e| (e.from, e.to, BigUint::one())).collect())
        .collect();
    forward(&ones_nodes, &ones_edges).last().unwrap().iter().sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RiskReport {
    pub id: String,
    /// Release index of each version.
    pub versions: Vec<u32>,
    pub risks: Vec<BigRational>,
    /// Feasible path count.
    pub paths: BigUint,
    /// Versions whose actual value is absent from the pruned layer.
    pub flagged: Vec<usize>,
}

impl RiskReport {
    pub fn max_risk(&self) -> BigRational {
        self.risks.iter().max().cloned().unwrap_or_else(BigRational::zero)
    }
}

/// Exact risk per version: mass of feasible paths through the node holding the
/// actual value, over the mass of all feasible paths.
pub fn disclosure_risks(fs: &FeasibleSubSug, actual: &[u32]) -> Result<RiskReport> {
    let g = &fs.graph;
    if g.layers.is_empty() || g.layers.iter().any(|l| l.is_empty()) {
        return Err(Error::Validation("empty feasible graph".into()));
    }
    if actual.len() != g.layers.len() {
        return Err(Error::Validation(format!(
            "{} actual values for {} layers",
            actual.len(),
            g.layers.len()
        )));
    }
    let (nodes, edges) = scaled_weights(g);
    let through = match narrow(&nodes, &edges) {
        Some((n, e)) => through_mass(&n, &e).map(|(t, tot)| {
            (
                t.into_iter().map(|l| l.into_iter().map(BigInt::from).collect()).collect(),
                BigInt::from(tot),
            )
        }),
        None => None,
    };
    let (through, total) = through.unwrap_or_else(|| {
        let (t, tot) = through_mass(&nodes, &edges).expect("big integers never overflow");
        (
            t.into_iter().map(|l| l.into_iter().map(BigInt::from).collect()).collect::<Vec<Vec<BigInt>>>(),
            BigInt::from(tot),
        )
    });
    let mut risks = Vec::with_capacity(actual.len());
    let mut flagged = Vec::new();
    for (i, &a) in actual.iter().enumerate() {
        match g.layers[i].iter().position(|n| n.value == a) {
            Some(j) => risks.push(BigRational::new(through[i][j].clone(), total.clone())),
            None => {
                flagged.push(i);
                risks.push(BigRational::zero());
            }
        }
    }
    Ok(RiskReport {
        id: String::new(),
        versions: (1..=actual.len() as u32).collect(),
        risks,
        paths: count_paths(g),
        flagged,
    })
}

type ScaledEdges<T> = Vec<Vec<(usize, usize, T)>>;

// Every node weight of a layer is multiplied by the layer's common
// denominator, every edge weight by the step's; each path gains the same
// factor, which cancels in the ratios.
fn scaled_weights(g: &Sug) -> (Vec<Vec<BigUint>>, ScaledEdges<BigUint>) {
    fn lcm_of<'a>(it: impl Iterator<Item = &'a BigRational>) -> BigInt {
        it.fold(BigInt::one(), |acc, w| acc.lcm(w.denom()))
    }
    fn scale(w: &BigRational, l: &BigInt) -> BigUint {
        (w.numer() * (l / w.denom())).to_biguint().expect("weights are positive")
    }
    let nodes = g
        .layers
        .iter()
        .map(|layer| {
            let l = lcm_of(layer.iter().map(|n| &n.weight));
            layer.iter().map(|n| scale(&n.weight, &l)).collect()
        })
        .collect();
    let edges = g
        .edges
        .iter()
        .map(|es| {
            let l = lcm_of(es.iter().map(|e| &e.weight));
            es.iter().map(|e| (e.from, e.to, scale(&e.weight, &l))).collect()
        })
        .collect();
    (nodes, edges)
}

fn narrow(nodes: &[Vec<BigUint>], edges: &ScaledEdges<BigUint>) -> Option<(Vec<Vec<u128>>, ScaledEdges<u128>)> {
    let n = nodes
        .iter()
        .map(|l| l.iter().map(|x| u128::try_from(x).ok()).collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>()?;
    let e = edges
        .iter()
        .map(|es| {
            es.iter()
                .map(|(a, b, x)| u128::try_from(x).ok().map(|x| (*a, *b, x)))
                .collect::<Option<Vec<_>>>()
        })
        .collect::<Option<Vec<_>>>()?;
    Some((n, e))
}

trait Mass: Clone + Zero + One + CheckedAdd + CheckedMul {}
impl<T: Clone + Zero + One + CheckedAdd + CheckedMul> Mass for T {}

fn forward<T: Mass>(nodes: &[Vec<T>], edges: &ScaledEdges<T>) -> Vec<Vec<T>> {
    try_forward(nodes, edges).expect("forward mass overflow")
}

fn try_forward<T: Mass>(nodes: &[Vec<T>], edges: &ScaledEdges<T>) -> Option<Vec<Vec<T>>> {
    let mut f: Vec<Vec<T>> = Vec::with_capacity(nodes.len());
    f.push(nodes[0].clone());
    for i in 1..nodes.len() {
        let mut acc = vec![T::zero(); nodes[i].len()];
        for (a, b, w) in &edges[i - 1] {
            acc[*b] = acc[*b].checked_add(&f[i - 1][*a].checked_mul(w)?)?;
        }
        for (x, n) in acc.iter_mut().zip(&nodes[i]) {
            *x = x.checked_mul(n)?;
        }
        f.push(acc);
    }
    Some(f)
}

/// Mass of all paths through each node, and the total mass.
fn through_mass<T: Mass>(nodes: &[Vec<T>], edges: &ScaledEdges<T>) -> Option<(Vec<Vec<T>>, T)> {
    let f = try_forward(nodes, edges)?;
    let last = nodes.len() - 1;
    let mut b: Vec<Vec<T>> = vec![Vec::new(); nodes.len()];
    b[last] = vec![T::one(); nodes[last].len()];
    for i in (0..last).rev() {
        let mut acc = vec![T::zero(); nodes[i].len()];
        for (a, c, w) in &edges[i] {
            let step = w.checked_mul(&nodes[i + 1][*c])?.checked_mul(&b[i + 1][*c])?;
            acc[*a] = acc[*a].checked_add(&step)?;
        }
        b[i] = acc;
    }
    let mut total = T::zero();
    for x in &f[last] {
        total = total.checked_add(x)?;
    }
    let mut through = Vec::with_capacity(nodes.len());
    for (fl, bl) in f.iter().zip(&b) {
        let mut row = Vec::with_capacity(fl.len());
        for (x, y) in fl.iter().zip(bl) {
            row.push(x.checked_mul(y)?);
        }
        through.push(row);
    }
    Some((through, total))
}

/// Sum of the weights of all feasible paths, exactly.
pub fn total_path_mass(g: &Sug) -> BigRational {
    let (nodes, edges) = scaled_weights(g);
    let f = forward(&nodes, &edges);
    let total: BigUint = f.last().unwrap().iter().sum();
    let mut scale = BigInt::one();
    for layer in &g.layers {
        scale *= layer.iter().fold(BigInt::one(), |acc, n| acc.lcm(n.weight.denom()));
    }
    for es in &g.edges {
        scale *= es.iter().fold(BigInt::one(), |acc, e| acc.lcm(e.weight.denom()));
    }
    BigRational::new(BigInt::from(total), scale)
}

/// Brute-force risks: enumerates every joint assignment of one value per
/// layer and weights it by priors and transition probabilities.
pub fn risks_by_joint_oracle<T: Transitions + ?Sized>(
    history: &[Vec<u32>],
    model: &T,
    actual: &[u32],
    cap: u64,
) -> Result<RiskReport> {
    if history.is_empty() || history.len() != actual.len() {
        return Err(Error::Validation("history and actual values must align".into()));
    }
    let mut layers: Vec<Vec<(u32, BigRational)>> = Vec::new();
    let mut size: u128 = 1;
    for c in history {
        if c.is_empty() {
            return Err(Error::Validation("empty candidate set".into()));
        }
        let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
        for &v in c {
            if v as usize >= model.domain_size() {
                return Err(Error::Validation(format!("value {v} outside the model domain")));
            }
            *counts.entry(v).or_default() += 1;
        }
        size = size.saturating_mul(counts.len() as u128);
        let n = c.len() as u64;
        layers.push(
            counts
                .into_iter()
                .map(|(v, k)| (v, BigRational::new(k.into(), n.into())))
                .collect(),
        );
    }
    if size > cap as u128 {
        return Err(Error::CapExceeded {
            what: "joint assignment count",
            cap,
        });
    }
    let mut total = BigRational::zero();
    let mut hits = vec![BigRational::zero(); layers.len()];
    let mut feasible = BigUint::zero();
    let mut idx = vec![0usize; layers.len()];
    'outer: loop {
        let mut w = BigRational::one();
        for (i, &k) in idx.iter().enumerate() {
            w *= &layers[i][k].1;
            if i > 0 {
                match model.p_trans(layers[i - 1][idx[i - 1]].0, layers[i][k].0) {
                    Some(p) => w *= p,
                    None => {
                        w = BigRational::zero();
                        break;
                    }
                }
            }
        }
        if !w.is_zero() {
            feasible += 1u8;
            for (i, &k) in idx.iter().enumerate() {
                if layers[i][k].0 == actual[i] {
                    hits[i] += &w;
                }
            }
            total += w;
        }
        for i in (0..idx.len()).rev() {
            idx[i] += 1;
            if idx[i] < layers[i].len() {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    if total.is_zero() {
        return Err(Error::InconsistentHistory("no feasible joint assignment".into()));
    }
    let flagged = (0..layers.len())
        .filter(|&i| !layers[i].iter().any(|(v, _)| *v == actual[i]))
        .collect();
    Ok(RiskReport {
        id: String::new(),
        versions: (1..=actual.len() as u32).collect(),
        risks: hits.into_iter().map(|h| h / &total).collect(),
        paths: feasible,
        flagged,
    })
}

/// Risks of one record plus what pruning did to its graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordRisk {
    pub report: RiskReport,
    pub removed_nodes: usize,
    pub removed_edges: usize,
    /// Surviving node count per layer.
    pub layer_sizes: Vec<usize>,
}

/// Attacks every real record that appears in at least one release. The
/// adversary links a record to the group holding it; when external knowledge
/// for a release is supplied the record's exact qi must fall in that group's
/// region.
pub fn attack_release_sequence<T: Transitions + ?Sized>(
    releases: &[PublishedRelease],
    et: &[ExternalKnowledgeTable],
    model: &T,
    schema: &Schema,
) -> Result<Vec<RecordRisk>> {
    let et_by_release: HashMap<u32, &ExternalKnowledgeTable> = et.iter().map(|e| (e.release_index, e)).collect();
    // id -> (release position, group position, own value)
    let mut seen: BTreeMap<&str, Vec<(usize, usize, u32)>> = BTreeMap::new();
    for (ri, rel) in releases.iter().enumerate() {
        for (gi, g) in rel.groups.iter().enumerate() {
            for m in &g.members {
                if let Some(id) = m.id() {
                    seen.entry(id).or_default().push((ri, gi, m.sensitive));
                }
            }
        }
    }
    let values: Vec<Vec<Vec<u32>>> = releases
        .iter()
        .map(|r| r.groups.iter().map(|g| g.values()).collect())
        .collect();
    let mut out = Vec::with_capacity(seen.len());
    for (id, appearances) in seen {
        let mut history = Vec::with_capacity(appearances.len());
        let mut actual = Vec::with_capacity(appearances.len());
        let mut versions = Vec::with_capacity(appearances.len());
        for &(ri, gi, v) in &appearances {
            let rel = &releases[ri];
            if let Some(table) = et_by_release.get(&rel.release_index) {
                let qi = table.rows.get(id).ok_or_else(|| {
                    Error::Integrity(format!(
                        "record {id} missing from external knowledge of release {}",
                        rel.release_index
                    ))
                })?;
                if !rel.groups[gi].region.covers(schema, qi) {
                    return Err(Error::Integrity(format!(
                        "record {id} lies outside its group {} in release {}",
                        rel.groups[gi].gid, rel.release_index
                    )));
                }
            }
            history.push(values[ri][gi].clone());
            actual.push(v);
            versions.push(rel.release_index);
        }
        let sug = build_sug(&history, model)?;
        let fs = prune(&sug).map_err(|e| match e {
            Error::InconsistentHistory(msg) => Error::InconsistentHistory(format!("record {id}: {msg}")),
            other => other,
        })?;
        let mut report = disclosure_risks(&fs, &actual)?;
        report.id = id.to_string();
        report.versions = versions;
        out.push(RecordRisk {
            layer_sizes: fs.graph.layers.iter().map(|l| l.len()).collect(),
            removed_nodes: fs.removed_nodes,
            removed_edges: fs.removed_edges,
            report,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::updates::{UpdateModel, ValueSet};

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    // Dyspepsia 0, Pneumonia 1, Lung Cancer 2, Flu 3
    fn disease() -> UpdateModel {
        let dig = ValueSet::from_values(4, [0]);
        let resp = ValueSet::from_values(4, [1, 2, 3]);
        UpdateModel::uniform(vec![dig, resp.clone(), resp.clone(), resp])
    }

    #[test]
    fn julia_graph_and_risks() {
        let m = disease();
        let g = build_sug(&[vec![0, 1], vec![2, 1]], &m).unwrap();
        assert_eq!(g.layers[0].len(), 2);
        assert!(g.layers.iter().flatten().all(|n| n.weight == r(1, 2)));
        assert_eq!(g.edges[0].len(), 2);
        assert!(g.edges[0].iter().all(|e| g.layers[0][e.from].value == 1 && e.weight == r(1, 3)));
        let fs = prune(&g).unwrap();
        assert_eq!(fs.removed_nodes, 1);
        assert_eq!(fs.graph.layers[0].len(), 1);
        assert_eq!(fs.graph.layers[1].len(), 2);
        let rep = disclosure_risks(&fs, &[1, 2]).unwrap();
        assert_eq!(rep.risks, vec![r(1, 1), r(1, 2)]);
        let oracle = risks_by_joint_oracle(&[vec![0, 1], vec![2, 1]], &m, &[1, 2], DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(oracle.risks, rep.risks);
        assert_eq!(oracle.paths, rep.paths);
    }

    #[test]
    fn julia_paths_with_half_edges() {
        // Same topology with edges of weight 1/2, as in the illustration.
        let half = ValueSet::from_values(3, [1, 2]);
        let m = UpdateModel::uniform(vec![ValueSet::from_values(3, [0]), half.clone(), half]);
        let g = build_sug(&[vec![0, 1], vec![2, 1]], &m).unwrap();
        let fs = prune(&g).unwrap();
        let paths = enumerate_paths(&fs, DEFAULT_PATH_CAP).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|(_, w)| *w == r(1, 8)));
    }

    #[test]
    fn single_node() {
        let m = UpdateModel::identity(2);
        let g = build_sug(&[vec![1]], &m).unwrap();
        assert!(g.edges.is_empty());
        let fs = prune(&g).unwrap();
        let paths = enumerate_paths(&fs, DEFAULT_PATH_CAP).unwrap();
        assert_eq!(paths, vec![(vec![1], r(1, 1))]);
        assert_eq!(disclosure_risks(&fs, &[1]).unwrap().risks, vec![r(1, 1)]);
    }

    #[test]
    fn identity_model_gives_parallel_edges() {
        let m = UpdateModel::identity(2);
        let g = build_sug(&[vec![0, 1], vec![0, 1]], &m).unwrap();
        let pairs: Vec<(u32, u32)> = g.edges[0]
            .iter()
            .map(|e| (g.layers[0][e.from].value, g.layers[1][e.to].value))
            .collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
        let fs = prune(&g).unwrap();
        assert_eq!(fs.removed_nodes, 0);
        assert_eq!(total_path_mass(&fs.graph), r(1, 2));
    }

    #[test]
    fn fully_connected_is_unchanged() {
        let m = UpdateModel::fully_mixing(3);
        let g = build_sug(&[vec![0, 1], vec![1, 2], vec![0, 2]], &m).unwrap();
        let fs = prune(&g).unwrap();
        assert_eq!(fs.graph, g);
        assert_eq!((fs.removed_nodes, fs.removed_edges), (0, 0));
    }

    #[test]
    fn cascade_removes_middle_node() {
        // 0 -> 1 -> 2 chain plus 0 -> 3 whose only successor 4 is missing.
        let m = UpdateModel::uniform(vec![
            ValueSet::from_values(5, [1, 3]),
            ValueSet::from_values(5, [2]),
            ValueSet::from_values(5, [2]),
            ValueSet::from_values(5, [4]),
            ValueSet::from_values(5, [4]),
        ]);
        let g = build_sug(&[vec![0], vec![1, 3], vec![2]], &m).unwrap();
        let fs = prune(&g).unwrap();
        let mid: Vec<u32> = fs.graph.layers[1].iter().map(|n| n.value).collect();
        assert_eq!(mid, vec![1]);
        assert_eq!(fs.removed_edges, 1);
    }

    #[test]
    fn emptied_layer_is_inconsistent() {
        let m = UpdateModel::identity(3);
        let g = build_sug(&[vec![0], vec![1]], &m).unwrap();
        assert!(matches!(prune(&g), Err(Error::InconsistentHistory(_))));
    }

    #[test]
    fn path_cap_is_enforced() {
        let m = UpdateModel::fully_mixing(4);
        let g = build_sug(&vec![vec![0, 1, 2, 3]; 6], &m).unwrap();
        let fs = prune(&g).unwrap();
        assert_eq!(count_paths(&fs.graph), BigUint::from(4096u32));
        assert!(matches!(enumerate_paths(&fs, 100), Err(Error::CapExceeded { .. })));
        assert_eq!(enumerate_paths(&fs, 4096).unwrap().len(), 4096);
    }

    #[test]
    fn oracle_cap_is_enforced() {
        let m = UpdateModel::fully_mixing(4);
        let h = vec![vec![0, 1, 2, 3]; 6];
        assert!(matches!(
            risks_by_joint_oracle(&h, &m, &[0; 6], 1000),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn fully_mixing_risk_is_inverse_layer_size() {
        let m = UpdateModel::fully_mixing(5);
        let h = vec![vec![0, 1], vec![1, 2, 3], vec![4, 0, 2, 3]];
        let rep = risks_by_joint_oracle(&h, &m, &[0, 3, 4], DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(rep.risks, vec![r(1, 2), r(1, 3), r(1, 4)]);
    }

    #[test]
    fn duplicates_collapse_with_multiplicity_prior() {
        let m = UpdateModel::identity(2);
        let g = build_sug(&[vec![0, 0, 1]], &m).unwrap();
        assert_eq!(g.layers[0].len(), 2);
        assert_eq!(g.layers[0][0].weight, r(2, 3));
        let fs = prune(&g).unwrap();
        assert_eq!(disclosure_risks(&fs, &[0]).unwrap().risks, vec![r(2, 3)]);
    }

    #[test]
    fn absent_actual_value_is_flagged() {
        let m = UpdateModel::identity(3);
        let fs = prune(&build_sug(&[vec![0, 1]], &m).unwrap()).unwrap();
        let rep = disclosure_risks(&fs, &[2]).unwrap();
        assert_eq!(rep.risks, vec![BigRational::zero()]);
        assert_eq!(rep.flagged, vec![0]);
    }
}
