use super::split::{colour_groups, split_items, SplitCtx};
use super::*;
use crate::model::{AttributeSchema, SensitiveAttribute};
use crate::sug::attack_release_sequence;
use crate::updates::ValueSet;
use num_rational::BigRational;

const DISEASES: [&str; 9] = [
    "Dyspepsia",
    "Gastritis",
    "Gastric Ulcer",
    "Pneumonia",
    "Flu",
    "Lung Cancer",
    "Glaucoma",
    "Cataract",
    "Conjunctivitis",
];

fn disease_model() -> UpdateModel {
    let class = |v: u32| ValueSet::from_values(9, (v / 3 * 3)..(v / 3 * 3 + 3));
    UpdateModel::uniform((0..9).map(class).collect())
}

fn schema() -> Schema {
    Schema::new(
        vec![
            AttributeSchema::numeric("Zipcode", 10, 40).unwrap(),
            AttributeSchema::numeric("Hours", 10, 40).unwrap(),
        ],
        SensitiveAttribute::new("Disease", DISEASES.iter().map(|s| s.to_string()).collect()).unwrap(),
    )
    .unwrap()
}

fn rec(id: &str, z: i64, h: i64, d: &str) -> Record {
    Record {
        id: id.into(),
        qi: vec![z, h],
        sensitive: DISEASES.iter().position(|x| *x == d).unwrap() as u32,
    }
}

fn table1() -> Vec<Record> {
    vec![
        rec("Ken", 14, 20, "Dyspepsia"),
        rec("Julia", 16, 23, "Pneumonia"),
        rec("Tom", 24, 32, "Pneumonia"),
        rec("Harry", 26, 35, "Gastritis"),
        rec("Lily", 29, 17, "Glaucoma"),
        rec("Ben", 31, 19, "Flu"),
    ]
}

fn table2() -> Vec<Record> {
    vec![
        rec("Ken", 14, 20, "Dyspepsia"),
        rec("Julia", 18, 31, "Lung Cancer"),
        rec("Tom", 15, 27, "Pneumonia"),
        rec("Harry", 23, 32, "Dyspepsia"),
        rec("Lily", 12, 17, "Glaucoma"),
        rec("Ben", 26, 35, "Pneumonia"),
    ]
}

fn one_attr() -> Schema {
    Schema::new(
        vec![AttributeSchema::numeric("A", 1, 10).unwrap()],
        SensitiveAttribute::new("S", (0..6).map(|i| i.to_string()).collect()).unwrap(),
    )
    .unwrap()
}

fn r1(id: &str, a: i64, s: u32) -> Record {
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
fn split_score_examples() {
    let s = one_attr();
    let p = |v: &[i64]| v.iter().map(|x| vec![*x]).collect::<Vec<_>>();
    let (a, b) = (p(&[1, 2]), p(&[9, 10]));
    let ra: Vec<&[i64]> = a.iter().map(|v| v.as_slice()).collect();
    let rb: Vec<&[i64]> = b.iter().map(|v| v.as_slice()).collect();
    assert_eq!(split_score(&s, &ra, &rb).unwrap(), frac(4, 5));
    let (a, b) = (p(&[1, 9]), p(&[2, 10]));
    let ra: Vec<&[i64]> = a.iter().map(|v| v.as_slice()).collect();
    let rb: Vec<&[i64]> = b.iter().map(|v| v.as_slice()).collect();
    assert_eq!(split_score(&s, &ra, &rb).unwrap(), frac(18, 5));
    assert!(split_score(&s, &ra, &[]).is_err());
}

fn two_entry_bucket(records: &[Record], entry_of: &[usize], sets: Vec<ValueSet>, s: &Schema) -> Bucket {
    let mut b = Bucket::new(Uss::new(sets));
    for (i, r) in records.iter().enumerate() {
        b.push(entry_of[i], i, r, s);
    }
    b
}

#[test]
fn locality_split() {
    let s = one_attr();
    let records = vec![r1("a", 1, 0), r1("b", 9, 1), r1("c", 2, 2), r1("d", 10, 3)];
    let left = ValueSet::from_values(6, [0, 1]);
    let right = ValueSet::from_values(6, [2, 3]);
    let b = two_entry_bucket(&records, &[0, 0, 1, 1], vec![left, right], &s);
    let mut rng = release_rng(1, 1);
    let groups = phase3_split(&b, &records, &s, &mut rng).unwrap();
    let mut ids: Vec<Vec<&str>> = groups
        .iter()
        .map(|g| {
            let mut v: Vec<&str> = g
                .iter()
                .map(|p| match p {
                    Placed::Real(r) => r.id.as_str(),
                    Placed::Counterfeit(_) => "c",
                })
                .collect();
            v.sort();
            v
        })
        .collect();
    ids.sort();
    assert_eq!(ids, vec![vec!["a", "c"], vec!["b", "d"]]);
}

#[test]
fn single_delta_is_one_group() {
    let s = one_attr();
    let records = vec![r1("a", 1, 0), r1("b", 9, 2)];
    let b = two_entry_bucket(
        &records,
        &[0, 1],
        vec![ValueSet::from_values(6, [0, 1]), ValueSet::from_values(6, [2, 3])],
        &s,
    );
    let mut rng = release_rng(1, 1);
    assert_eq!(phase3_split(&b, &records, &s, &mut rng).unwrap().len(), 1);
}

#[test]
fn fallback_when_greedy_tuples_strand_a_value() {
    // The greedy tuple (a, b, d) leaves (c, c, e) behind, which repeats c.
    let s = one_attr();
    let records = vec![
        r1("a", 1, 0),
        r1("c1", 8, 2),
        r1("b", 2, 1),
        r1("c2", 9, 2),
        r1("d", 3, 3),
        r1("e", 10, 4),
    ];
    let all = ValueSet::from_values(6, 0..6);
    let sets = vec![all.clone(), all.clone(), all];
    let ctx = SplitCtx {
        records: &records,
        schema: &s,
        sets: &sets,
    };
    let entries = vec![
        vec![Item::Real(0), Item::Real(1)],
        vec![Item::Real(2), Item::Real(3)],
        vec![Item::Real(4), Item::Real(5)],
    ];
    let groups = split_items(&ctx, entries.clone());
    assert_eq!(groups.len(), 2);
    for g in &groups {
        let mut vals: Vec<u32> = g
            .iter()
            .map(|it| match it {
                Item::Real(i) => records[*i].sensitive,
                Item::Counterfeit => unreachable!(),
            })
            .collect();
        vals.sort();
        vals.dedup();
        assert_eq!(vals.len(), 3);
    }
    assert_eq!(colour_groups(&ctx, &entries).len(), 2);
}

#[test]
fn colouring_handles_counterfeits_and_repeats() {
    let s = one_attr();
    let records: Vec<Record> = [0u32, 1, 2, 0, 1, 2, 0]
        .iter()
        .enumerate()
        .map(|(i, v)| r1(&format!("r{i}"), (i + 1) as i64, *v))
        .collect();
    let all = ValueSet::from_values(6, 0..6);
    let sets = vec![all.clone(), all.clone(), all];
    let ctx = SplitCtx {
        records: &records,
        schema: &s,
        sets: &sets,
    };
    let entries = vec![
        vec![Item::Real(0), Item::Real(1), Item::Real(2)],
        vec![Item::Real(3), Item::Real(4), Item::Real(5)],
        vec![Item::Real(6), Item::Counterfeit, Item::Counterfeit],
    ];
    let groups = colour_groups(&ctx, &entries);
    assert_eq!(groups.len(), 3);
    for g in &groups {
        let vals: Vec<u32> = g
            .iter()
            .filter_map(|it| match it {
                Item::Real(i) => Some(records[*i].sensitive),
                Item::Counterfeit => None,
            })
            .collect();
        let set: HashSet<u32> = vals.iter().copied().collect();
        assert_eq!(set.len(), vals.len());
    }
}

#[test]
fn first_release_is_static() {
    let s = schema();
    let m = disease_model();
    let state = EngineState::new(2, Mode::MDistinct, 7);
    let (rel, next, stats) = publish(&table1(), &state, &m, &s).unwrap();
    assert_eq!(stats.buckets, 0);
    assert_eq!(stats.first_timer_records, 6);
    assert_eq!(rel.real_count(), 6);
    assert!(verify_m_distinct(&[rel], &m, 2).is_empty());
    assert_eq!(next.releases, 1);
    assert_eq!(next.last_group.len(), 6);
}

#[test]
fn tables_one_then_two() {
    let s = schema();
    let m = disease_model();
    let state = EngineState::new(2, Mode::MDistinct, 7);
    let (r1, st, _) = publish(&table1(), &state, &m, &s).unwrap();
    let (r2, _, stats) = publish(&table2(), &st, &m, &s).unwrap();
    assert!(stats.buckets >= 1);
    let releases = vec![r1, r2];
    assert!(verify_m_distinct(&releases, &m, 2).is_empty());
    let risks = attack_release_sequence(&releases, &[], &m, &s).unwrap();
    assert_eq!(risks.len(), 6);
    for r in &risks {
        assert_eq!(r.removed_nodes, 0);
        for x in &r.report.risks {
            assert!(*x <= frac(1, 2), "{} {}", r.report.id, x);
        }
    }
}

#[test]
fn table_two_assignment_respects_signatures() {
    let s = schema();
    let m = disease_model();
    let t3: Vec<Vec<&str>> = vec![vec!["Ken", "Julia"], vec!["Tom", "Harry"], vec!["Lily", "Ben"]];
    let t1 = table1();
    let value_of = |id: &str| t1.iter().find(|r| r.id == id).unwrap().sensitive;
    let mut pre_map: HashMap<&str, Uss> = HashMap::new();
    for g in &t3 {
        let vals: Vec<u32> = g.iter().map(|id| value_of(id)).collect();
        for id in g {
            pre_map.insert(id, uss_of(&vals, &m).unwrap());
        }
    }
    let t2 = table2();
    let pre: Vec<Option<&Uss>> = t2.iter().map(|r| pre_map.get(r.id.as_str())).collect();
    let buckets = phase1_create_buckets(pre.iter().flatten().copied());
    let (filled, left) = phase2_assign(&t2, &pre, buckets, &s, false).unwrap();
    assert!(left.is_empty());
    for b in &filled {
        for it in b.entries.iter().flatten() {
            if let Item::Real(i) = it {
                assert!(crate::updates::implies(pre[*i].unwrap(), &b.signature));
            }
        }
    }
}

#[test]
fn star_mode_groups_are_disjoint() {
    let s = schema();
    let m = disease_model();
    let state = EngineState::new(3, Mode::MDistinctStar, 11);
    let mut records = table1();
    records.extend([
        rec("Ann", 20, 21, "Cataract"),
        rec("Bob", 21, 22, "Gastric Ulcer"),
        rec("Cid", 22, 23, "Lung Cancer"),
    ]);
    let (rel, _, _) = publish(&records, &state, &m, &s).unwrap();
    assert!(verify_cus_disjoint(std::slice::from_ref(&rel), &m).is_empty());
    assert!(verify_m_distinct(&[rel], &m, 3).is_empty());
}

#[test]
fn star_mode_needs_enough_classes() {
    let s = schema();
    let m = disease_model();
    let state = EngineState::new(4, Mode::MDistinctStar, 11);
    assert!(matches!(publish(&table1(), &state, &m, &s), Err(Error::Infeasible(_))));
}

#[test]
fn publishing_is_deterministic() {
    let s = schema();
    let m = disease_model();
    let state = EngineState::new(2, Mode::MDistinct, 99);
    let (a1, sa, _) = publish(&table1(), &state, &m, &s).unwrap();
    let (a2, _, _) = publish(&table2(), &sa, &m, &s).unwrap();
    let (b1, sb, _) = publish(&table1(), &state, &m, &s).unwrap();
    let (b2, _, _) = publish(&table2(), &sb, &m, &s).unwrap();
    assert_eq!((a1, a2), (b1, b2));
}

#[test]
fn verify_rejects_small_and_repeating_groups() {
    let m = disease_model();
    let s = schema();
    let recs = table1();
    let groups = vec![vec![Placed::Real(&recs[0])], vec![Placed::Real(&recs[1]), Placed::Real(&recs[2])]];
    let rel = generalize(&groups, &s, 1).unwrap();
    let v = verify_m_distinct(&[rel], &m, 2);
    assert_eq!(v.len(), 2);
}

#[test]
fn out_of_model_update_is_rejected() {
    let s = schema();
    let m = disease_model();
    let state = EngineState::new(2, Mode::MDistinct, 1);
    let (_, st, _) = publish(&table1(), &state, &m, &s).unwrap();
    let mut t2 = table2();
    t2[0] = rec("Ken", 14, 20, "Glaucoma");
    assert!(matches!(publish(&t2, &st, &m, &s), Err(Error::Validation(_))));
}
