//! Candidate update sets, transition probabilities and update set signatures.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Fixed-width bitset over sensitive value indices.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueSet {
    words: Vec<u64>,
}

impl ValueSet {
    pub fn empty(domain: usize) -> Self {
        ValueSet {
            words: vec![0; domain.div_ceil(64).max(1)],
        }
    }

    pub fn from_values(domain: usize, values: impl IntoIterator<Item = u32>) -> Self {
        let mut s = ValueSet::empty(domain);
        for v in values {
            s.insert(v);
        }
        s
    }

    pub fn full(domain: usize) -> Self {
        ValueSet::from_values(domain, 0..domain as u32)
    }

    pub fn insert(&mut self, v: u32) {
        self.words[(v / 64) as usize] |= 1 << (v % 64);
    }

    pub fn contains(&self, v: u32) -> bool {
        self.words
            .get((v / 64) as usize)
            .is_some_and(|w| w & (1 << (v % 64)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn intersection(&self, other: &ValueSet) -> ValueSet {
        ValueSet {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    pub fn intersection_len(&self, other: &ValueSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_subset(&self, other: &ValueSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &ValueSet) -> bool {
        self.intersection_len(other) == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64u32).filter(move |b| w & (1 << b) != 0).map(move |b| wi as u32 * 64 + b)
        })
    }
}

impl fmt::Debug for ValueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Anything that yields a one-step transition probability between values.
pub trait Transitions {
    fn domain_size(&self) -> usize;
    /// `None` stands for probability zero.
    fn p_trans(&self, from: u32, to: u32) -> Option<&BigRational>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateModel {
    domain: usize,
    cus: Vec<ValueSet>,
    /// Successors with probabilities, sorted by successor.
    probs: Vec<Vec<(u32, BigRational)>>,
}

impl UpdateModel {
    /// Builds a model from `(value, successor, probability)` rows. Rows whose
    /// probability is `None` share the mass left over by the explicit rows of
    /// the same value equally.
    pub fn from_rows(domain: usize, rows: &[(u32, u32, Option<BigRational>)]) -> Result<Self> {
        let mut probs: Vec<Vec<(u32, Option<BigRational>)>> = vec![Vec::new(); domain];
        for (a, b, p) in rows {
            if *a as usize >= domain || *b as usize >= domain {
                return Err(Error::Validation(format!("transition {a}->{b} outside domain")));
            }
            if probs[*a as usize].iter().any(|(s, _)| s == b) {
                return Err(Error::Validation(format!("duplicate transition {a}->{b}")));
            }
            probs[*a as usize].push((*b, p.clone()));
        }
        let mut out = Vec::with_capacity(domain);
        for (a, mut row) in probs.into_iter().enumerate() {
            row.sort_by_key(|(s, _)| *s);
            let given: BigRational = row.iter().filter_map(|(_, p)| p.clone()).sum();
            let blanks = row.iter().filter(|(_, p)| p.is_none()).count();
            let share = if blanks > 0 {
                let rest = BigRational::one() - given;
                if !rest.is_positive() {
                    return Err(Error::Validation(format!(
                        "value {a}: no probability mass left for unspecified successors"
                    )));
                }
                rest / BigRational::from_integer(BigInt::from(blanks))
            } else {
                BigRational::zero()
            };
            out.push(
                row.into_iter()
                    .map(|(s, p)| (s, p.unwrap_or_else(|| share.clone())))
                    .collect::<Vec<_>>(),
            );
        }
        Ok(Self::from_probs(domain, out))
    }

    fn from_probs(domain: usize, probs: Vec<Vec<(u32, BigRational)>>) -> Self {
        let cus = probs
            .iter()
            .map(|row| {
                ValueSet::from_values(domain, row.iter().filter(|(_, p)| !p.is_zero()).map(|(s, _)| *s))
            })
            .collect();
        UpdateModel { domain, cus, probs }
    }

    /// Uniform probabilities over each given candidate set.
    pub fn uniform(cus: Vec<ValueSet>) -> Self {
        let domain = cus.len();
        let probs = cus
            .iter()
            .map(|set| {
                let n = set.len().max(1);
                let p = BigRational::new(BigInt::one(), BigInt::from(n));
                set.iter().map(|s| (s, p.clone())).collect()
            })
            .collect();
        UpdateModel {
            domain,
            cus,
            probs,
        }
    }

    /// Every value can only stay as it is.
    pub fn identity(domain: usize) -> Self {
        Self::uniform((0..domain as u32).map(|v| ValueSet::from_values(domain, [v])).collect())
    }

    /// Every value can become any value with equal probability.
    pub fn fully_mixing(domain: usize) -> Self {
        Self::uniform(vec![ValueSet::full(domain); domain])
    }

    /// Consecutive blocks of `width` values; each value may move anywhere in its
    /// block. The last block is shorter when `width` does not divide the domain.
    pub fn blocks(domain: usize, width: usize) -> Self {
        let width = width.max(1);
        Self::uniform(
            (0..domain)
                .map(|v| {
                    let start = v / width * width;
                    let end = (start + width).min(domain);
                    ValueSet::from_values(domain, start as u32..end as u32)
                })
                .collect(),
        )
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn cus(&self, v: u32) -> &ValueSet {
        &self.cus[v as usize]
    }

    pub fn successors(&self, v: u32) -> &[(u32, BigRational)] {
        &self.probs[v as usize]
    }

    /// Component id per value, where values are linked when their candidate
    /// sets overlap. Values in different components have disjoint sets.
    pub fn cus_components(&self) -> Vec<u32> {
        let n = self.domain;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for a in 0..n {
            for b in self.cus[a].iter() {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b as usize));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut ids = vec![u32::MAX; n];
        let mut next = 0;
        let mut out = Vec::with_capacity(n);
        for v in 0..n {
            let r = find(&mut parent, v);
            if ids[r] == u32::MAX {
                ids[r] = next;
                next += 1;
            }
            out.push(ids[r]);
        }
        out
    }
}

impl Transitions for UpdateModel {
    fn domain_size(&self) -> usize {
        self.domain
    }

    fn p_trans(&self, from: u32, to: u32) -> Option<&BigRational> {
        let row = self.probs.get(from as usize)?;
        row.binary_search_by_key(&to, |(s, _)| *s)
            .ok()
            .map(|i| &row[i].1)
            .filter(|p| !p.is_zero())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptyCus { value: u32 },
    NonPositive { from: u32, to: u32 },
    ProbabilitySum { value: u32, sum: BigRational },
    Closure { value: u32, successor: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyCus { value } => write!(f, "value {value} has no successors"),
            Violation::NonPositive { from, to } => {
                write!(f, "transition {from}->{to} has non-positive probability")
            }
            Violation::ProbabilitySum { value, sum } => {
                write!(f, "probabilities of value {value} sum to {sum}, not 1")
            }
            Violation::Closure { value, successor } => write!(
                f,
                "successor {successor} of value {value} can reach values outside the candidate set of {value}"
            ),
        }
    }
}

/// Every invariant violation of the model; empty means valid.
pub fn validate_update_model(model: &UpdateModel) -> Vec<Violation> {
    let mut out = Vec::new();
    for a in 0..model.domain as u32 {
        let row = model.successors(a);
        if row.is_empty() {
            out.push(Violation::EmptyCus { value: a });
            continue;
        }
        let mut sum = BigRational::zero();
        for (b, p) in row {
            if !p.is_positive() {
                out.push(Violation::NonPositive { from: a, to: *b });
            }
            sum += p;
        }
        if !sum.is_one() {
            out.push(Violation::ProbabilitySum { value: a, sum });
        }
        let cus_a = model.cus(a);
        for b in cus_a.iter() {
            if !model.cus(b).is_subset(cus_a) {
                out.push(Violation::Closure {
                    value: a,
                    successor: b,
                });
            }
        }
    }
    out
}

/// Multiset of candidate sets, kept sorted so equal signatures compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Uss {
    entries: Vec<ValueSet>,
}

impl Uss {
    pub fn new(mut entries: Vec<ValueSet>) -> Self {
        entries.sort();
        Uss { entries }
    }

    pub fn entries(&self) -> &[ValueSet] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pairwise_disjoint(&self) -> bool {
        self.entries
            .iter()
            .enumerate()
            .all(|(i, a)| self.entries[i + 1..].iter().all(|b| a.is_disjoint(b)))
    }
}

pub fn uss_of(values: &[u32], model: &UpdateModel) -> Result<Uss> {
    let mut entries = Vec::with_capacity(values.len());
    for &v in values {
        if v as usize >= model.domain() {
            return Err(Error::Validation(format!("sensitive value {v} outside the model domain")));
        }
        entries.push(model.cus(v).clone());
    }
    Ok(Uss::new(entries))
}

/// Same size, every value lies in some entry, every entry holds some value.
pub fn is_legal_update_instance(values: &[u32], uss: &Uss) -> bool {
    values.len() == uss.len()
        && values.iter().all(|v| uss.entries.iter().any(|e| e.contains(*v)))
        && uss.entries.iter().all(|e| values.iter().any(|v| e.contains(*v)))
}

/// Kuhn's augmenting-path matching. `adj[l]` lists right vertices usable by
/// left vertex `l`. Returns the right vertex matched to each left one.
pub(crate) fn perfect_matching(adj: &[Vec<usize>], right: usize) -> Option<Vec<usize>> {
    fn augment(l: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [usize]) -> bool {
        for &r in &adj[l] {
            if !seen[r] {
                seen[r] = true;
                if owner[r] == usize::MAX || augment(owner[r], adj, seen, owner) {
                    owner[r] = l;
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![usize::MAX; right];
    for l in 0..adj.len() {
        let mut seen = vec![false; right];
        if !augment(l, adj, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut out = vec![usize::MAX; adj.len()];
    for (r, &l) in owner.iter().enumerate() {
        if l != usize::MAX {
            out[l] = r;
        }
    }
    Some(out)
}

/// `a` implies `b`: equal size and each entry of `b` pairs with a distinct
/// superset entry of `a`.
pub fn implies(a: &Uss, b: &Uss) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let adj: Vec<Vec<usize>> = b
        .entries
        .iter()
        .map(|y| (0..a.len()).filter(|&i| y.is_subset(&a.entries[i])).collect())
        .collect();
    perfect_matching(&adj, a.len()).is_some()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntersectionPlan {
    /// `pairing[i]` is the entry of the second signature paired with entry `i`
    /// of the first.
    pub pairing: Vec<usize>,
    pub result: Uss,
    pub score: BigRational,
}

const EXHAUSTIVE_LIMIT: usize = 8;

/// Best bijection between the entries of `a` and `b` with every paired
/// intersection non-empty, scored by total overlap over total union.
pub fn intersect(a: &Uss, b: &Uss) -> Option<IntersectionPlan> {
    if a.len() != b.len() {
        return None;
    }
    let n = a.len();
    let overlap: Vec<Vec<usize>> = a
        .entries
        .iter()
        .map(|x| b.entries.iter().map(|y| x.intersection_len(y)).collect())
        .collect();
    let pairing = if n <= EXHAUSTIVE_LIMIT {
        exhaustive_pairing(&overlap)?
    } else {
        greedy_pairing(&overlap)?
    };
    let inter: usize = pairing.iter().enumerate().map(|(i, &j)| overlap[i][j]).sum();
    let total: usize = a.entries.iter().chain(&b.entries).map(|e| e.len()).sum();
    let union = total - inter;
    let result = Uss::new(
        pairing
            .iter()
            .enumerate()
            .map(|(i, &j)| a.entries[i].intersection(&b.entries[j]))
            .collect(),
    );
    Some(IntersectionPlan {
        pairing,
        result,
        score: BigRational::new(BigInt::from(inter), BigInt::from(union)),
    })
}

// With both sides fixed, total union falls as total overlap rises, so the
// best plan is the one with the largest total overlap.
fn exhaustive_pairing(overlap: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = overlap.len();
    let row_max: Vec<usize> = overlap.iter().map(|r| r.iter().copied().max().unwrap_or(0)).collect();
    let mut suffix = vec![0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + row_max[i];
    }
    struct Search<'a> {
        overlap: &'a [Vec<usize>],
        suffix: Vec<usize>,
        used: Vec<bool>,
        cur: Vec<usize>,
        best: Option<(usize, Vec<usize>)>,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, acc: usize) {
            if let Some((best, _)) = &self.best {
                if acc + self.suffix[i] <= *best {
                    return;
                }
            }
            if i == self.overlap.len() {
                self.best = Some((acc, self.cur.clone()));
                return;
            }
            for j in 0..self.overlap.len() {
                let o = self.overlap[i][j];
                if self.used[j] || o == 0 {
                    continue;
                }
                self.used[j] = true;
                self.cur.push(j);
                self.go(i + 1, acc + o);
                self.cur.pop();
                self.used[j] = false;
            }
        }
    }
    let mut s = Search {
        overlap,
        suffix,
        used: vec![false; n],
        cur: Vec::with_capacity(n),
        best: None,
    };
    s.go(0, 0);
    s.best.map(|(_, p)| p)
}

fn greedy_pairing(overlap: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = overlap.len();
    let mut used = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for row in overlap {
        let pick = (0..n)
            .filter(|&j| !used[j] && row[j] > 0)
            .max_by(|&x, &y| row[x].cmp(&row[y]).then(y.cmp(&x)));
        match pick {
            Some(j) => {
                used[j] = true;
                out.push(j);
            }
            None => {
                let adj: Vec<Vec<usize>> =
                    overlap.iter().map(|r| (0..n).filter(|&j| r[j] > 0).collect()).collect();
                return perfect_matching(&adj, n);
            }
        }
    }
    Some(out)
}

/// Candidate sets of the values are pairwise disjoint.
pub fn cus_disjointness(values: &[u32], model: &UpdateModel) -> bool {
    values.iter().enumerate().all(|(i, &a)| {
        values[i + 1..]
            .iter()
            .all(|&b| model.cus(a).is_disjoint(model.cus(b)))
    })
}

/// Parses `p/q`, an integer, or a finite decimal into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num: BigInt = digits.parse().ok()?;
    let den = num_traits::pow(BigInt::from(10u8), frac.len());
    let r = BigRational::new(num, den);
    Some(if neg { -r } else { r })
}

/// Formats as `p/q`, or `p` when the denominator is one.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Decimal rendering with a fixed number of places, rounded half up.
pub fn format_decimal(r: &BigRational, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10u8), places);
    let neg = r.is_negative();
    let abs = r.abs();
    let scaled = (abs * BigRational::from_integer(scale.clone()) + BigRational::new(1.into(), 2.into())).floor();
    let n = scaled.to_integer();
    let int = &n / &scale;
    let frac = &n % &scale;
    let sign = if neg && !n.is_zero() { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{:0>width$}", frac.to_string(), width = places)
    }
}
