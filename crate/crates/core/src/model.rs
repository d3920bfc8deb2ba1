//! Schemas, records, generalized regions and published releases.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HierarchyNode {
    pub name: String,
    pub parent: Option<usize>,
    pub depth: u32,
    /// Sorted leaf positions covered by this node.
    pub leaves: Vec<u32>,
}

/// Rooted generalization tree over an ordered list of leaf values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hierarchy {
    nodes: Vec<HierarchyNode>,
    leaf_nodes: Vec<usize>,
    by_name: HashMap<String, usize>,
    root: usize,
}

impl Hierarchy {
    /// Builds a tree from `(name, parent)` pairs. Leaves are the nodes without
    /// children, ordered by their position in `defs`.
    pub fn new(defs: &[(String, Option<String>)]) -> Result<Self> {
        let mut by_name = HashMap::new();
        for (i, (name, _)) in defs.iter().enumerate() {
            if by_name.insert(name.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate hierarchy node {name:?}")));
            }
        }
        let mut parents = Vec::with_capacity(defs.len());
        let mut roots = Vec::new();
        for (i, (name, parent)) in defs.iter().enumerate() {
            match parent {
                None => {
                    roots.push(i);
                    parents.push(None);
                }
                Some(p) => {
                    let pi = *by_name.get(p).ok_or_else(|| {
                        Error::Validation(format!("node {name:?} has unknown parent {p:?}"))
                    })?;
                    parents.push(Some(pi));
                }
            }
        }
        if roots.len() != 1 {
            return Err(Error::Validation(format!(
                "hierarchy needs exactly one root, found {}",
                roots.len()
            )));
        }
        let n = defs.len();
        let mut depth = vec![0u32; n];
        for i in 0..n {
            let mut d = 0u32;
            let mut cur = i;
            while let Some(p) = parents[cur] {
                d += 1;
                if d as usize > n {
                    return Err(Error::Validation("hierarchy contains a cycle".into()));
                }
                cur = p;
            }
            depth[i] = d;
        }
        let mut has_child = vec![false; n];
        for p in parents.iter().flatten() {
            has_child[*p] = true;
        }
        let leaf_nodes: Vec<usize> = (0..n).filter(|&i| !has_child[i]).collect();
        let mut leaves = vec![Vec::new(); n];
        for (pos, &leaf) in leaf_nodes.iter().enumerate() {
            let mut cur = Some(leaf);
            while let Some(c) = cur {
                leaves[c].push(pos as u32);
                cur = parents[c];
            }
        }
        let nodes = defs
            .iter()
            .zip(parents)
            .zip(depth)
            .zip(leaves)
            .map(|((((name, _), parent), depth), leaves)| HierarchyNode {
                name: name.clone(),
                parent,
                depth,
                leaves,
            })
            .collect();
        Ok(Hierarchy {
            nodes,
            leaf_nodes,
            by_name,
            root: roots[0],
        })
    }

    /// One root directly above every leaf.
    pub fn flat(root: &str, leaves: &[&str]) -> Self {
        let mut defs = vec![(root.to_string(), None)];
        defs.extend(leaves.iter().map(|l| (l.to_string(), Some(root.to_string()))));
        Hierarchy::new(&defs).expect("flat hierarchy is well formed")
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_nodes.len()
    }

    pub fn nodes(&self) -> &[HierarchyNode] {
        &self.nodes
    }

    pub fn leaf_node(&self, pos: u32) -> usize {
        self.leaf_nodes[pos as usize]
    }

    pub fn leaf_name(&self, pos: u32) -> &str {
        &self.nodes[self.leaf_nodes[pos as usize]].name
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn node_name(&self, node: usize) -> &str {
        &self.nodes[node].name
    }

    pub fn leaf_position(&self, name: &str) -> Option<u32> {
        let node = self.node(name)?;
        let leaves = &self.nodes[node].leaves;
        (leaves.len() == 1 && self.leaf_nodes[leaves[0] as usize] == node).then_some(leaves[0])
    }

    pub fn covered(&self, node: usize) -> &[u32] {
        &self.nodes[node].leaves
    }

    pub fn covers_leaf(&self, node: usize, pos: u32) -> bool {
        self.nodes[node].leaves.binary_search(&pos).is_ok()
    }

    /// Number of covered leaves whose position falls in `[lo, hi]`.
    pub fn overlap(&self, node: usize, lo: u32, hi: u32) -> usize {
        let leaves = &self.nodes[node].leaves;
        let a = leaves.partition_point(|&p| p < lo);
        let b = leaves.partition_point(|&p| p <= hi);
        b.saturating_sub(a)
    }

    pub fn lca(&self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (a, b);
        while self.nodes[a].depth > self.nodes[b].depth {
            a = self.nodes[a].parent.unwrap();
        }
        while self.nodes[b].depth > self.nodes[a].depth {
            b = self.nodes[b].parent.unwrap();
        }
        while a != b {
            a = self.nodes[a].parent.unwrap();
            b = self.nodes[b].parent.unwrap();
        }
        a
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttrKind {
    Numeric { lo: i64, hi: i64 },
    Categorical(Hierarchy),
}

/// A quasi-identifier attribute. Numeric values are stored as themselves,
/// categorical values as leaf positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeSchema {
    pub name: String,
    pub kind: AttrKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Extent {
    Interval(i64, i64),
    Node(usize),
}

impl AttributeSchema {
    pub fn numeric(name: &str, lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::Validation(format!("attribute {name}: lo {lo} > hi {hi}")));
        }
        Ok(AttributeSchema {
            name: name.to_string(),
            kind: AttrKind::Numeric { lo, hi },
        })
    }

    pub fn categorical(name: &str, hierarchy: Hierarchy) -> Self {
        AttributeSchema {
            name: name.to_string(),
            kind: AttrKind::Categorical(hierarchy),
        }
    }

    pub fn domain_size(&self) -> u64 {
        match &self.kind {
            AttrKind::Numeric { lo, hi } => (hi - lo + 1) as u64,
            AttrKind::Categorical(h) => h.leaf_count() as u64,
        }
    }

    /// Position of a value in index space, `0..domain_size`.
    pub fn index_of(&self, v: i64) -> u32 {
        match &self.kind {
            AttrKind::Numeric { lo, .. } => (v - lo) as u32,
            AttrKind::Categorical(_) => v as u32,
        }
    }

    pub fn contains(&self, v: i64) -> bool {
        match &self.kind {
            AttrKind::Numeric { lo, hi } => *lo <= v && v <= *hi,
            AttrKind::Categorical(h) => v >= 0 && (v as usize) < h.leaf_count(),
        }
    }

    pub fn parse_value(&self, s: &str) -> Option<i64> {
        match &self.kind {
            AttrKind::Numeric { .. } => s.trim().parse::<i64>().ok().filter(|v| self.contains(*v)),
            AttrKind::Categorical(h) => h.leaf_position(s.trim()).map(i64::from),
        }
    }

    pub fn format_value(&self, v: i64) -> String {
        match &self.kind {
            AttrKind::Numeric { .. } => v.to_string(),
            AttrKind::Categorical(h) => h.leaf_name(v as u32).to_string(),
        }
    }

    pub fn point(&self, v: i64) -> Extent {
        match &self.kind {
            AttrKind::Numeric { .. } => Extent::Interval(v, v),
            AttrKind::Categorical(h) => Extent::Node(h.leaf_node(v as u32)),
        }
    }

    pub fn merge(&self, a: Extent, b: Extent) -> Extent {
        match (&self.kind, a, b) {
            (_, Extent::Interval(a0, a1), Extent::Interval(b0, b1)) => {
                Extent::Interval(a0.min(b0), a1.max(b1))
            }
            (AttrKind::Categorical(h), Extent::Node(x), Extent::Node(y)) => Extent::Node(h.lca(x, y)),
            _ => panic!("extent kind mismatch on attribute {}", self.name),
        }
    }

    /// Count of domain points the extent covers.
    pub fn extent_size(&self, e: Extent) -> u64 {
        match (&self.kind, e) {
            (_, Extent::Interval(a, b)) => (b - a + 1) as u64,
            (AttrKind::Categorical(h), Extent::Node(n)) => h.covered(n).len() as u64,
            _ => panic!("extent kind mismatch on attribute {}", self.name),
        }
    }

    pub fn extent_contains(&self, e: Extent, v: i64) -> bool {
        match (&self.kind, e) {
            (_, Extent::Interval(a, b)) => a <= v && v <= b,
            (AttrKind::Categorical(h), Extent::Node(n)) => v >= 0 && h.covers_leaf(n, v as u32),
            _ => false,
        }
    }

    pub fn extent_is_valid(&self, e: Extent) -> bool {
        match (&self.kind, e) {
            (AttrKind::Numeric { lo, hi }, Extent::Interval(a, b)) => *lo <= a && a <= b && b <= *hi,
            (AttrKind::Categorical(h), Extent::Node(n)) => n < h.nodes().len(),
            _ => false,
        }
    }

    pub fn format_extent(&self, e: Extent) -> String {
        match (&self.kind, e) {
            (_, Extent::Interval(a, b)) => format!("{a}..{b}"),
            (AttrKind::Categorical(h), Extent::Node(n)) => h.node_name(n).to_string(),
            _ => panic!("extent kind mismatch on attribute {}", self.name),
        }
    }

    pub fn parse_extent(&self, s: &str) -> Option<Extent> {
        let s = s.trim();
        let e = match &self.kind {
            AttrKind::Numeric { .. } => {
                let (a, b) = s.split_once("..")?;
                Extent::Interval(a.trim().parse().ok()?, b.trim().parse().ok()?)
            }
            AttrKind::Categorical(h) => Extent::Node(h.node(s)?),
        };
        self.extent_is_valid(e).then_some(e)
    }

    pub fn full_extent(&self) -> Extent {
        match &self.kind {
            AttrKind::Numeric { lo, hi } => Extent::Interval(*lo, *hi),
            AttrKind::Categorical(h) => Extent::Node(h.root()),
        }
    }

    /// Index-space interval `[lo, hi]` intersected with the extent: number of
    /// covered points.
    pub fn overlap(&self, e: Extent, lo: u32, hi: u32) -> u64 {
        match (&self.kind, e) {
            (AttrKind::Numeric { lo: dlo, .. }, Extent::Interval(a, b)) => {
                let a = (a - dlo).max(lo as i64);
                let b = (b - dlo).min(hi as i64);
                if a > b {
                    0
                } else {
                    (b - a + 1) as u64
                }
            }
            (AttrKind::Categorical(h), Extent::Node(n)) => h.overlap(n, lo, hi) as u64,
            _ => panic!("extent kind mismatch on attribute {}", self.name),
        }
    }
}

/// The sensitive attribute: an ordered, finite value domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensitiveAttribute {
    pub name: String,
    pub values: Vec<String>,
    index: HashMap<String, u32>,
}

impl SensitiveAttribute {
    pub fn new(name: &str, values: Vec<String>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, v) in values.iter().enumerate() {
            if index.insert(v.clone(), i as u32).is_some() {
                return Err(Error::Validation(format!("duplicate sensitive value {v:?}")));
            }
        }
        if values.is_empty() {
            return Err(Error::Validation("empty sensitive domain".into()));
        }
        Ok(SensitiveAttribute {
            name: name.to_string(),
            values,
            index,
        })
    }

    pub fn index(&self, value: &str) -> Option<u32> {
        self.index.get(value).copied()
    }

    pub fn name_of(&self, v: u32) -> &str {
        &self.values[v as usize]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    pub qi: Vec<AttributeSchema>,
    pub sensitive: SensitiveAttribute,
}

impl Schema {
    pub fn new(qi: Vec<AttributeSchema>, sensitive: SensitiveAttribute) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for a in &qi {
            if !seen.insert(a.name.as_str()) || a.name == sensitive.name || a.name == "id" {
                return Err(Error::Validation(format!("attribute name {:?} reused", a.name)));
            }
        }
        Ok(Schema { qi, sensitive })
    }

    pub fn full_region(&self) -> Region {
        Region {
            extents: self.qi.iter().map(|a| a.full_extent()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub qi: Vec<i64>,
    pub sensitive: u32,
}

impl Record {
    pub fn conforms(&self, schema: &Schema) -> bool {
        self.qi.len() == schema.qi.len()
            && self.qi.iter().zip(&schema.qi).all(|(v, a)| a.contains(*v))
            && (self.sensitive as usize) < schema.sensitive.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordVersion {
    pub record: Record,
    pub release_index: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    pub extents: Vec<Extent>,
}

impl Region {
    pub fn point(schema: &Schema, qi: &[i64]) -> Region {
        Region {
            extents: schema.qi.iter().zip(qi).map(|(a, v)| a.point(*v)).collect(),
        }
    }

    pub fn include(&mut self, schema: &Schema, qi: &[i64]) {
        for ((e, a), v) in self.extents.iter_mut().zip(&schema.qi).zip(qi) {
            *e = a.merge(*e, a.point(*v));
        }
    }

    pub fn union(&mut self, schema: &Schema, other: &Region) {
        for ((e, a), o) in self.extents.iter_mut().zip(&schema.qi).zip(&other.extents) {
            *e = a.merge(*e, *o);
        }
    }

    pub fn covers(&self, schema: &Schema, qi: &[i64]) -> bool {
        self.extents.len() == qi.len()
            && self
                .extents
                .iter()
                .zip(&schema.qi)
                .zip(qi)
                .all(|((e, a), v)| a.extent_contains(*e, *v))
    }

    pub fn covers_region(&self, schema: &Schema, other: &Region) -> bool {
        self.extents.iter().zip(&schema.qi).zip(&other.extents).all(|((e, a), o)| {
            a.merge(*e, *o) == *e
        })
    }

    pub fn is_valid(&self, schema: &Schema) -> bool {
        self.extents.len() == schema.qi.len()
            && self.extents.iter().zip(&schema.qi).all(|(e, a)| a.extent_is_valid(*e))
    }
}

/// Minimal region covering every point.
pub fn bounding_region<'a, I>(points: I, schema: &Schema) -> Result<Region>
where
    I: IntoIterator<Item = &'a [i64]>,
{
    let mut iter = points.into_iter();
    let first = iter.next().ok_or(Error::EmptyGroup)?;
    let mut region = Region::point(schema, first);
    for p in iter {
        region.include(schema, p);
    }
    Ok(region)
}

/// Product over attributes of covered points divided by domain size.
pub fn region_measure(region: &Region, schema: &Schema) -> BigRational {
    let mut num = BigInt::from(1u8);
    let mut den = BigInt::from(1u8);
    for (e, a) in region.extents.iter().zip(&schema.qi) {
        num *= a.extent_size(*e);
        den *= a.domain_size();
    }
    BigRational::new(num, den)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Member {
    Real(String),
    Counterfeit(u32),
}

impl Member {
    pub fn label(&self) -> String {
        match self {
            Member::Real(id) => id.clone(),
            Member::Counterfeit(tag) => format!("c{tag}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupMember {
    pub member: Member,
    pub sensitive: u32,
}

impl GroupMember {
    pub fn is_counterfeit(&self) -> bool {
        matches!(self.member, Member::Counterfeit(_))
    }

    pub fn id(&self) -> Option<&str> {
        match &self.member {
            Member::Real(id) => Some(id),
            Member::Counterfeit(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QiGroup {
    pub gid: u32,
    pub region: Region,
    pub members: Vec<GroupMember>,
}

impl QiGroup {
    /// Sensitive values of every member, counterfeits included.
    pub fn values(&self) -> Vec<u32> {
        self.members.iter().map(|m| m.sensitive).collect()
    }

    pub fn counterfeits(&self) -> u32 {
        self.members.iter().filter(|m| m.is_counterfeit()).count() as u32
    }

    pub fn real_count(&self) -> usize {
        self.members.len() - self.counterfeits() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublishedRelease {
    pub release_index: u32,
    pub groups: Vec<QiGroup>,
    pub counterfeit_stats: BTreeMap<u32, u32>,
}

impl PublishedRelease {
    /// Nonzero counterfeit counts per gid, derived from the members.
    pub fn derived_stats(groups: &[QiGroup]) -> BTreeMap<u32, u32> {
        groups
            .iter()
            .filter(|g| g.counterfeits() > 0)
            .map(|g| (g.gid, g.counterfeits()))
            .collect()
    }

    pub fn stats_consistent(&self) -> bool {
        self.counterfeit_stats == Self::derived_stats(&self.groups)
    }

    /// Map from real record id to the index of its group.
    pub fn group_index(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::new();
        for (gi, g) in self.groups.iter().enumerate() {
            for m in &g.members {
                if let Some(id) = m.id() {
                    map.insert(id, gi);
                }
            }
        }
        map
    }

    pub fn real_count(&self) -> usize {
        self.groups.iter().map(|g| g.real_count()).sum()
    }

    pub fn counterfeit_total(&self) -> u64 {
        self.counterfeit_stats.values().map(|&c| c as u64).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalKnowledgeTable {
    pub release_index: u32,
    pub rows: BTreeMap<String, Vec<i64>>,
}

impl ExternalKnowledgeTable {
    /// The microdata with the sensitive column removed.
    pub fn from_records(release_index: u32, records: &[Record]) -> Self {
        ExternalKnowledgeTable {
            release_index,
            rows: records.iter().map(|r| (r.id.clone(), r.qi.clone())).collect(),
        }
    }
}

/// A group member before generalization.
#[derive(Clone, Copy, Debug)]
pub enum Placed<'a> {
    Real(&'a Record),
    Counterfeit(u32),
}

/// Generalizes each group to the bounding region of its real members and
/// assigns gids `1..=n` in input order. Counterfeit tags run `1..` across the
/// release in output row order.
pub fn generalize(groups: &[Vec<Placed<'_>>], schema: &Schema, release_index: u32) -> Result<PublishedRelease> {
    let mut out = Vec::with_capacity(groups.len());
    let mut next_tag = 1u32;
    for (i, group) in groups.iter().enumerate() {
        let region = bounding_region(
            group.iter().filter_map(|p| match p {
                Placed::Real(r) => Some(r.qi.as_slice()),
                Placed::Counterfeit(_) => None,
            }),
            schema,
        )?;
        let mut reals: Vec<&Record> = group
            .iter()
            .filter_map(|p| match p {
                Placed::Real(r) => Some(*r),
                Placed::Counterfeit(_) => None,
            })
            .collect();
        reals.sort_by(|a, b| a.id.cmp(&b.id));
        let mut fakes: Vec<u32> = group
            .iter()
            .filter_map(|p| match p {
                Placed::Counterfeit(v) => Some(*v),
                Placed::Real(_) => None,
            })
            .collect();
        fakes.sort_unstable();
        let mut members: Vec<GroupMember> = reals
            .into_iter()
            .map(|r| GroupMember {
                member: Member::Real(r.id.clone()),
                sensitive: r.sensitive,
            })
            .collect();
        for v in fakes {
            members.push(GroupMember {
                member: Member::Counterfeit(next_tag),
                sensitive: v,
            });
            next_tag += 1;
        }
        out.push(QiGroup {
            gid: i as u32 + 1,
            region,
            members,
        });
    }
    let counterfeit_stats = PublishedRelease::derived_stats(&out);
    Ok(PublishedRelease {
        release_index,
        groups: out,
        counterfeit_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disease_tree() -> Hierarchy {
        let defs: Vec<(String, Option<String>)> = [
            ("any", None),
            ("digestive", Some("any")),
            ("respiratory", Some("any")),
            ("Dyspepsia", Some("digestive")),
            ("Gastritis", Some("digestive")),
            ("Pneumonia", Some("respiratory")),
            ("Flu", Some("respiratory")),
            ("Lung Cancer", Some("respiratory")),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.map(str::to_string)))
        .collect();
        Hierarchy::new(&defs).unwrap()
    }

    fn zip_hours() -> Schema {
        Schema::new(
            vec![
                AttributeSchema::numeric("Zipcode", 10, 40).unwrap(),
                AttributeSchema::numeric("Hours", 10, 40).unwrap(),
            ],
            SensitiveAttribute::new("Disease", vec!["Flu".into(), "Pneumonia".into()]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn bounding_region_of_ken_and_julia() {
        let s = zip_hours();
        let r = bounding_region([&[14i64, 20][..], &[16, 23][..]], &s).unwrap();
        assert_eq!(r.extents, vec![Extent::Interval(14, 16), Extent::Interval(20, 23)]);
    }

    #[test]
    fn single_point_is_degenerate() {
        let s = zip_hours();
        let r = bounding_region([&[29i64, 17][..]], &s).unwrap();
        assert_eq!(r, Region::point(&s, &[29, 17]));
    }

    #[test]
    fn empty_group_errors() {
        let s = zip_hours();
        assert!(matches!(bounding_region(std::iter::empty(), &s), Err(Error::EmptyGroup)));
    }

    #[test]
    fn categorical_bound_is_lca() {
        let h = disease_tree();
        let s = Schema::new(
            vec![AttributeSchema::categorical("D", h.clone())],
            SensitiveAttribute::new("S", vec!["x".into()]).unwrap(),
        )
        .unwrap();
        let flu = h.leaf_position("Flu").unwrap() as i64;
        let pneu = h.leaf_position("Pneumonia").unwrap() as i64;
        let r = bounding_region([&[flu][..], &[pneu][..]], &s).unwrap();
        assert_eq!(r.extents, vec![Extent::Node(h.node("respiratory").unwrap())]);
        let dys = h.leaf_position("Dyspepsia").unwrap() as i64;
        let r = bounding_region([&[flu][..], &[dys][..]], &s).unwrap();
        assert_eq!(r.extents, vec![Extent::Node(h.root())]);
    }

    #[test]
    fn measures() {
        let one = Schema::new(
            vec![AttributeSchema::numeric("A", 0, 99).unwrap()],
            SensitiveAttribute::new("S", vec!["x".into()]).unwrap(),
        )
        .unwrap();
        let full = one.full_region();
        assert_eq!(region_measure(&full, &one), BigRational::from_integer(1.into()));
        let r = Region {
            extents: vec![Extent::Interval(20, 23)],
        };
        assert_eq!(region_measure(&r, &one), BigRational::new(4.into(), 100.into()));

        let six = Hierarchy::flat("*", &["a", "b", "c", "d", "e", "f"]);
        let defs: Vec<(String, Option<String>)> = vec![
            ("*".into(), None),
            ("abc".into(), Some("*".into())),
            ("a".into(), Some("abc".into())),
            ("b".into(), Some("abc".into())),
            ("c".into(), Some("abc".into())),
            ("def".into(), Some("*".into())),
            ("d".into(), Some("def".into())),
            ("e".into(), Some("def".into())),
            ("f".into(), Some("def".into())),
        ];
        let grouped = Hierarchy::new(&defs).unwrap();
        assert_eq!(six.leaf_count(), 6);
        let two = Schema::new(
            vec![
                AttributeSchema::numeric("A", 0, 99).unwrap(),
                AttributeSchema::categorical("B", grouped.clone()),
            ],
            SensitiveAttribute::new("S", vec!["x".into()]).unwrap(),
        )
        .unwrap();
        let r = Region {
            extents: vec![Extent::Interval(20, 23), Extent::Node(grouped.node("abc").unwrap())],
        };
        assert_eq!(region_measure(&r, &two), BigRational::new(12.into(), 600.into()));
    }

    #[test]
    fn generalize_orders_members_and_counts_counterfeits() {
        let s = zip_hours();
        let lily = Record {
            id: "Lily".into(),
            qi: vec![12, 17],
            sensitive: 0,
        };
        let ben = Record {
            id: "Ben".into(),
            qi: vec![26, 35],
            sensitive: 1,
        };
        let groups = vec![
            vec![Placed::Counterfeit(1), Placed::Real(&lily)],
            vec![Placed::Real(&ben)],
        ];
        let rel = generalize(&groups, &s, 2).unwrap();
        assert_eq!(rel.groups[0].gid, 1);
        assert_eq!(rel.groups[0].region, Region::point(&s, &[12, 17]));
        assert_eq!(rel.groups[0].members[0].member, Member::Real("Lily".into()));
        assert_eq!(rel.groups[0].members[1].member, Member::Counterfeit(1));
        assert_eq!(rel.counterfeit_stats, BTreeMap::from([(1, 1)]));
        assert_eq!(rel.groups[1].region, Region::point(&s, &[26, 35]));
        assert!(rel.stats_consistent());
    }

    #[test]
    fn hierarchy_rejects_two_roots_and_cycles() {
        let defs = vec![("a".to_string(), None), ("b".to_string(), None)];
        assert!(Hierarchy::new(&defs).is_err());
        let defs = vec![
            ("r".to_string(), None),
            ("a".to_string(), Some("b".to_string())),
            ("b".to_string(), Some("a".to_string())),
        ];
        assert!(Hierarchy::new(&defs).is_err());
    }

    #[test]
    fn categorical_overlap_uses_leaf_order() {
        let h = disease_tree();
        let resp = h.node("respiratory").unwrap();
        // leaves: Dyspepsia 0, Gastritis 1, Pneumonia 2, Flu 3, Lung Cancer 4
        assert_eq!(h.overlap(resp, 0, 2), 1);
        assert_eq!(h.overlap(resp, 3, 4), 2);
        assert_eq!(h.overlap(h.root(), 0, 4), 5);
    }
}
