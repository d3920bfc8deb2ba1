mod common;

use common::*;
use mdistinct::engine::{publish, static_partition, verify_cus_disjoint, verify_m_distinct, EngineState, Keys, Mode};
use mdistinct::eval::{cnt_g, estimate_count, AggregateQuery};
use mdistinct::io::{read_release, write_counterfeits, write_release};
use mdistinct::model::{AttributeSchema, ExternalKnowledgeTable, Placed, Record, Schema, SensitiveAttribute};
use mdistinct::sug::{
    attack_release_sequence, build_sug, disclosure_risks, enumerate_paths, prune, risks_by_joint_oracle, total_path_mass,
    DEFAULT_ORACLE_CAP,
};
use mdistinct::updates::{implies, intersect, is_legal_update_instance, uss_of, Transitions, UpdateModel};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

const DOMAIN: usize = 12;

fn schema() -> Schema {
    Schema::new(
        vec![
            AttributeSchema::numeric("X", 0, 49).unwrap(),
            AttributeSchema::numeric("Y", 0, 19).unwrap(),
        ],
        SensitiveAttribute::new("S", (0..DOMAIN).map(|i| format!("s{i}")).collect()).unwrap(),
    )
    .unwrap()
}

fn table(rng: &mut ChaCha8Rng, n: usize, start: usize) -> Vec<Record> {
    (start..start + n)
        .map(|i| Record {
            id: format!("r{i:03}"),
            qi: vec![rng.gen_range(0..50), rng.gen_range(0..20)],
            sensitive: rng.gen_range(0..DOMAIN as u32),
        })
        .collect()
}

/// Next table: values move within their candidate set, some rows leave,
/// some arrive.
fn evolve(rng: &mut ChaCha8Rng, prev: &[Record], model: &UpdateModel, next_id: &mut usize) -> Vec<Record> {
    let mut out = Vec::new();
    for r in prev {
        if rng.gen_range(0..10) == 0 {
            continue;
        }
        let cus: Vec<u32> = model.cus(r.sensitive).iter().collect();
        out.push(Record {
            sensitive: cus[rng.gen_range(0..cus.len())],
            qi: vec![(r.qi[0] + rng.gen_range(0..3)).min(49), r.qi[1]],
            ..r.clone()
        });
    }
    let extra = rng.gen_range(0..6);
    out.extend(table(rng, extra, *next_id));
    *next_id += extra;
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn path_risks_match_joint_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = SparseModel::random(rng.gen_range(2..=5), &mut rng);
        let history = random_history(model.domain_size(), 4, 4, &mut rng);
        if let Some((fs, actual)) = feasible_instance(&model, &history, &mut rng) {
            let fast = disclosure_risks(&fs, &actual).unwrap();
            let slow = risks_by_joint_oracle(&history, &model, &actual, DEFAULT_ORACLE_CAP).unwrap();
            prop_assert_eq!(fast.risks, slow.risks);
            prop_assert_eq!(fast.paths, slow.paths);
        }
    }

    #[test]
    fn risks_are_probabilities_of_feasible_mass(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = SparseModel::random(rng.gen_range(2..=5), &mut rng);
        let history = random_history(model.domain_size(), 4, 3, &mut rng);
        if let Some((fs, actual)) = feasible_instance(&model, &history, &mut rng) {
            let rep = disclosure_risks(&fs, &actual).unwrap();
            for r in &rep.risks {
                prop_assert!(*r > BigRational::zero() && *r <= BigRational::one());
            }
            let paths = enumerate_paths(&fs, 1_000_000).unwrap();
            let sum: BigRational = paths.iter().map(|p| p.1.clone()).sum();
            prop_assert_eq!(sum, total_path_mass(&fs.graph));
        }
    }

    #[test]
    fn fully_mixing_appends_keep_risks(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=5);
        let model = UpdateModel::fully_mixing(n);
        let history = random_history(n, 3, 4, &mut rng);
        let actual: Vec<u32> = history.iter().map(|l| l[rng.gen_range(0..l.len())]).collect();
        let before = disclosure_risks(&prune(&build_sug(&history, &model).unwrap()).unwrap(), &actual).unwrap();
        let mut longer = history.clone();
        longer.push(vec![rng.gen_range(0..n as u32), rng.gen_range(0..n as u32)]);
        let mut actual2 = actual.clone();
        actual2.push(longer.last().unwrap()[0]);
        let after = disclosure_risks(&prune(&build_sug(&longer, &model).unwrap()).unwrap(), &actual2).unwrap();
        prop_assert_eq!(&after.risks[..actual.len()], &before.risks[..]);
    }

    #[test]
    fn certainty_iff_single_survivor(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = SparseModel::random(rng.gen_range(2..=5), &mut rng);
        let history = random_history(model.domain_size(), 4, 4, &mut rng);
        if let Some((fs, actual)) = feasible_instance(&model, &history, &mut rng) {
            let rep = disclosure_risks(&fs, &actual).unwrap();
            for (i, r) in rep.risks.iter().enumerate() {
                prop_assert_eq!(r.is_one(), fs.graph.layers[i].len() == 1);
            }
        }
    }

    #[test]
    fn signature_relations(values in proptest::collection::vec(0u32..DOMAIN as u32, 1..6),
                           other in proptest::collection::vec(0u32..DOMAIN as u32, 1..6)) {
        let model = UpdateModel::blocks(DOMAIN, 3);
        let a = uss_of(&values, &model).unwrap();
        let b = uss_of(&other, &model).unwrap();
        prop_assert!(implies(&a, &a));
        prop_assert!(is_legal_update_instance(&values, &a));
        if let Some(plan) = intersect(&a, &b) {
            prop_assert!(implies(&a, &plan.result));
            prop_assert!(implies(&b, &plan.result));
        }
    }

    #[test]
    fn static_groups_are_m_unique(seed in any::<u64>(), m in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..60);
        let recs = table(&mut rng, n, 0);
        let refs: Vec<&Record> = recs.iter().collect();
        let s = schema();
        let groups = static_partition(&refs, m, &Keys::values(DOMAIN), &s, true, &mut rng).unwrap();
        let mut placed = 0;
        for g in &groups {
            prop_assert!(g.len() >= m);
            let mut vals: Vec<u32> = g.iter().map(|p| match p {
                Placed::Real(r) => { placed += 1; r.sensitive }
                Placed::Counterfeit(v) => *v,
            }).collect();
            vals.sort();
            vals.dedup();
            prop_assert_eq!(vals.len(), g.len());
        }
        prop_assert_eq!(placed, n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn engine_sequences_resist_the_attack(seed in any::<u64>(), m in 2usize..4, star in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = UpdateModel::blocks(DOMAIN, 3);
        let s = schema();
        let mode = if star { Mode::MDistinctStar } else { Mode::MDistinct };
        let mut state = EngineState::new(m, mode, seed);
        let n = rng.gen_range(4..40);
        let mut cur = table(&mut rng, n, 0);
        let mut next_id = n;
        let mut releases = Vec::new();
        let mut et = Vec::new();
        for i in 1..=4u32 {
            if i > 1 {
                cur = evolve(&mut rng, &cur, &model, &mut next_id);
            }
            let (rel, next, _) = publish(&cur, &state, &model, &s).unwrap();
            prop_assert_eq!(rel.real_count(), cur.len());
            prop_assert!(rel.stats_consistent());
            prop_assert_eq!(estimate_count(&rel, &s, &AggregateQuery::whole(&s)), BigRational::from_integer(BigInt::from(cur.len())));
            prop_assert_eq!(
                cnt_g(&rel) * BigRational::from_integer(BigInt::from(rel.groups.len())),
                BigRational::from_integer(BigInt::from(rel.counterfeit_total()))
            );
            state = next;
            releases.push(rel);
            et.push(ExternalKnowledgeTable::from_records(i, &cur));
        }
        prop_assert!(verify_m_distinct(&releases, &model, m).is_empty());
        if star {
            prop_assert!(verify_cus_disjoint(&releases, &model).is_empty());
        }
        let bound = BigRational::new(1.into(), BigInt::from(m));
        for r in attack_release_sequence(&releases, &et, &model, &s).unwrap() {
            prop_assert_eq!(r.removed_nodes, 0);
            prop_assert!(r.layer_sizes.iter().all(|&k| k >= m));
            if star {
                prop_assert!(r.report.max_risk() <= bound);
            }
        }
    }

    #[test]
    fn releases_survive_a_file_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = UpdateModel::blocks(DOMAIN, 3);
        let s = schema();
        let n = rng.gen_range(2..30);
        let cur = table(&mut rng, n, 0);
        let (rel, _, _) = publish(&cur, &EngineState::new(2, Mode::MDistinct, seed), &model, &s).unwrap();
        let mut body = Vec::new();
        write_release(&mut body, &rel, &s).unwrap();
        let mut stats = Vec::new();
        write_counterfeits(&mut stats, &rel).unwrap();
        let p = Path::new("mem");
        let back = read_release(body.as_slice(), p, &s, rel.release_index, Some((stats.as_slice(), p))).unwrap();
        prop_assert_eq!(back, rel);
    }
}
