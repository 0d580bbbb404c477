mod common;

use std::collections::BTreeSet;

use ontoloss::datagen::{
    self, clustered_fingerprints, diversity_subsample, tanimoto, Fingerprint, SyntheticSpec,
};
use ontoloss::losses::{
    disjointness_loss, implication_loss, tnorm, LossConfig, LossVariant, TNormKind,
};
use ontoloss::metrics::count_violations;
use ontoloss::ontology::{check_acyclic, compile_constraints, ClassId, ConstraintSet};
use ontoloss::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn all_labels(n: usize) -> BTreeSet<ClassId> {
    (0..n).map(ClassId).collect()
}

fn dag() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=20, 0.0f64..0.4, any::<u64>()).prop_map(|(n, density, seed)| {
        let edges = common::random_dag(n, density, &mut common::rng(seed));
        (n, edges)
    })
}

fn unit() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 1 => Just(1.0), 8 => 0.0f64..=1.0]
}

fn variants() -> Vec<LossConfig> {
    let mut out = Vec::new();
    for tnorm in [TNormKind::Product, TNormKind::Lukasiewicz] {
        for variant in [
            LossVariant::FuzzyStandard,
            LossVariant::FuzzyBalanced {
                k: 2.0,
                epsilon: 0.01,
            },
            LossVariant::FuzzyBalanced {
                k: 4.0,
                epsilon: 1e-4,
            },
            LossVariant::XuSemantic,
        ] {
            out.push(LossConfig::new(tnorm, variant));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn closure_is_idempotent((n, edges) in dag()) {
        let once = compile_constraints(&common::graph_from_edges(n, &edges, &[]), &all_labels(n)).unwrap();
        let pairs: Vec<(usize, usize)> = common::implication_pairs(&once).into_iter().collect();
        let twice = compile_constraints(&common::graph_from_edges(n, &pairs, &[]), &all_labels(n)).unwrap();
        prop_assert_eq!(once.implications(), twice.implications());
    }

    #[test]
    fn disjointness_closure_matches_enumeration(
        (n, edges) in dag(),
        axioms in prop::collection::vec((0usize..20, 0usize..20), 0..4),
    ) {
        let axioms: Vec<(usize, usize)> = axioms
            .into_iter()
            .map(|(a, b)| (a % n, b % n))
            .filter(|(a, b)| a != b)
            .collect();
        let r = common::boolean_closure(n, &edges);
        let below = |x: usize, c: usize| x == c || r[x][c];
        let mut want = BTreeSet::new();
        for &(c, d) in &axioms {
            for a in 0..n {
                for b in 0..n {
                    if a != b && below(a, c) && below(b, d) {
                        want.insert((a.min(b), a.max(b)));
                    }
                }
            }
        }
        let conflict = want.iter().any(|&(a, b)| r[a][b] || r[b][a])
            || axioms.iter().any(|&(c, d)| (0..n).any(|x| below(x, c) && below(x, d)));
        let g = common::graph_from_edges(n, &edges, &axioms);
        match compile_constraints(&g, &all_labels(n)) {
            Ok(cs) => {
                prop_assert!(!conflict);
                prop_assert_eq!(common::disjoint_pairs(&cs), want);
                prop_assert!(cs.validate().is_ok());
            }
            Err(e) => {
                prop_assert!(conflict, "unexpected error {e}");
                prop_assert!(matches!(e, Error::InconsistentAxioms(_)));
            }
        }
    }

    #[test]
    fn acyclicity_matches_path_search(
        n in 2usize..=8,
        raw in prop::collection::vec((0usize..8, 0usize..8), 0..14),
    ) {
        let edges: Vec<(usize, usize)> = raw
            .into_iter()
            .map(|(a, b)| (a % n, b % n))
            .filter(|(a, b)| a != b)
            .collect();
        let g = common::graph_from_edges(n, &edges, &[]);
        prop_assert_eq!(check_acyclic(&g).is_ok(), !common::has_cycle(n, &edges));
    }

    #[test]
    fn tnorm_ordering_symmetry_and_monotonicity(a in unit(), b in unit(), d in 0.0f64..=1.0) {
        let luk = tnorm(TNormKind::Lukasiewicz, a, b).unwrap();
        let prod = tnorm(TNormKind::Product, a, b).unwrap();
        prop_assert!(luk <= prod && prod <= a.min(b));
        for kind in [TNormKind::Product, TNormKind::Lukasiewicz] {
            let t = tnorm(kind, a, b).unwrap();
            prop_assert_eq!(t, tnorm(kind, b, a).unwrap());
            let a2 = (a + d).min(1.0);
            prop_assert!(tnorm(kind, a2, b).unwrap() >= t);
            prop_assert!(tnorm(kind, a, (b + d).min(1.0)).unwrap() >= t);
        }
    }

    #[test]
    fn losses_are_non_negative(a in unit(), b in unit()) {
        for cfg in variants() {
            let li = implication_loss(&cfg, a, b).unwrap();
            let ld = disjointness_loss(&cfg, a, b).unwrap();
            prop_assert!(li.is_sign_positive() && li.is_finite(), "{cfg:?} implication {li}");
            prop_assert!(ld.is_sign_positive() && ld.is_finite(), "{cfg:?} disjointness {ld}");
        }
    }

    #[test]
    fn raising_threshold_never_adds_active_antecedents(seed in any::<u64>(), lo in 1u32..19, gap in 1u32..10) {
        let mut rng = common::rng(seed);
        let cs = common::random_constraints(6, 7, &mut rng);
        let preds = common::random_predictions(8, 6, &mut rng);
        let hi = (lo + gap).min(19);
        let low = count_violations(&cs, &preds, f64::from(lo) / 20.0).unwrap();
        let high = count_violations(&cs, &preds, f64::from(hi) / 20.0).unwrap();
        prop_assert!(high.tp_impl + high.fn_impl <= low.tp_impl + low.fn_impl);
        prop_assert!(high.tp_disj + high.fn_disj <= low.tp_disj + low.fn_disj);
    }

    #[test]
    fn counts_invariant_under_row_and_class_permutation(seed in any::<u64>(), n in 2usize..=8) {
        let mut rng = common::rng(seed);
        let cs = common::random_constraints(n, 7, &mut rng);
        let mut preds = common::random_predictions(10, n, &mut rng);
        let before = count_violations(&cs, &preds, 0.5).unwrap();

        preds.shuffle(&mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let relabel = |pairs: &BTreeSet<(usize, usize)>| -> Vec<(usize, usize)> {
            pairs.iter().map(|&(a, b)| (perm[a], perm[b])).collect()
        };
        let moved = ConstraintSet::from_parts(
            (0..n).map(|i| format!("c{i}")).collect(),
            relabel(&common::implication_pairs(&cs)),
            relabel(&common::disjoint_pairs(&cs)),
        )
        .unwrap();
        let moved_preds: Vec<Vec<f64>> = preds
            .iter()
            .map(|row| {
                let mut out = vec![0.0; n];
                for (c, &v) in row.iter().enumerate() {
                    out[perm[c]] = v;
                }
                out
            })
            .collect();
        prop_assert_eq!(count_violations(&moved, &moved_preds, 0.5).unwrap(), before);
    }

    #[test]
    fn split_partitions_every_row(n in 1usize..500, rt in 1.0f64..400.0, rv in 0.0f64..20.0, rs in 0.0f64..60.0, seed in any::<u64>()) {
        if let Ok(s) = datagen::split(n, (rt, rv, rs), seed) {
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(datagen::split(n, (rt, rv, rs), seed).unwrap(), s);
        }
    }
}

#[test]
fn balanced_loss_specializes_to_standard() {
    let standard = LossConfig::default();
    let balanced = LossConfig::new(
        TNormKind::Product,
        LossVariant::FuzzyBalanced {
            k: 1.0 + 1e-6,
            epsilon: 1e-9,
        },
    );
    let mut worst: f64 = 0.0;
    for i in 0..=50 {
        for j in 0..=50 {
            let (a, b) = (f64::from(i) / 50.0, f64::from(j) / 50.0);
            let d = implication_loss(&balanced, a, b).unwrap()
                - implication_loss(&standard, a, b).unwrap();
            worst = worst.max(d.abs());
        }
    }
    assert!(worst < 1e-4, "max deviation {worst}");
}

#[test]
fn crisp_consistent_predictions_have_zero_constraint_loss() {
    let cs = ConstraintSet::from_parts(
        ["a", "b", "c", "d"].map(String::from).to_vec(),
        [(0, 1)],
        [(1, 2), (0, 2)],
    )
    .unwrap();
    let mut checked = 0;
    for bits in 0u32..16 {
        let h: Vec<f64> = (0..4).map(|c| f64::from((bits >> c) & 1)).collect();
        let v = count_violations(&cs, std::slice::from_ref(&h), 0.5).unwrap();
        if v.fn_impl + v.fn_disj > 0 {
            continue;
        }
        for tn in [TNormKind::Product, TNormKind::Lukasiewicz] {
            let cfg = LossConfig::new(tn, LossVariant::FuzzyStandard);
            for &(a, b) in cs.implications() {
                assert_eq!(implication_loss(&cfg, h[a.0], h[b.0]).unwrap(), 0.0);
            }
            for &(a, b) in cs.disjointness() {
                assert_eq!(disjointness_loss(&cfg, h[a.0], h[b.0]).unwrap(), 0.0);
            }
        }
        checked += 1;
    }
    assert!(checked > 1);
}

fn mean_pairwise_tanimoto(items: &[&Fingerprint]) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0;
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            sum += tanimoto(items[i], items[j]).unwrap();
            pairs += 1;
        }
    }
    sum / f64::from(pairs)
}

/// One dense cluster holding most of the pool plus several small ones.
fn skewed_pool(seed: u64) -> Vec<Fingerprint> {
    let mut pool = clustered_fingerprints(1, 150, 128, 0.05, seed);
    pool.extend(clustered_fingerprints(4, 12, 128, 0.05, seed + 1000));
    pool
}

fn diverse_vs_random(pool: &[Fingerprint], keep: usize, seed: u64) -> (f64, f64) {
    let picked = diversity_subsample(pool, pool.len(), keep, seed).unwrap();
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed + 100));
    let chosen: Vec<&Fingerprint> = picked.iter().map(|&i| &pool[i]).collect();
    let random: Vec<&Fingerprint> = order[..keep].iter().map(|&i| &pool[i]).collect();
    (
        mean_pairwise_tanimoto(&chosen),
        mean_pairwise_tanimoto(&random),
    )
}

#[test]
fn diversity_subsample_beats_random_subsets() {
    let wins = (0..20u64)
        .filter(|&seed| {
            let (diverse, random) = diverse_vs_random(&skewed_pool(seed), 24, seed);
            diverse < random
        })
        .count();
    assert!(wins >= 19, "diverse subset won only {wins}/20 seeds");
}

#[test]
fn generated_labels_respect_implications() {
    for seed in 0..5 {
        let spec = SyntheticSpec {
            n_classes: 30,
            dag_density: 0.15,
            n_samples: 400,
            seed,
            ..Default::default()
        };
        let syn = datagen::generate(&spec).unwrap();
        let cs = compile_constraints(&syn.graph, &all_labels(syn.graph.len())).unwrap();
        assert!(!cs.implications().is_empty());
        for y in &syn.dataset.labels {
            for &(a, b) in cs.implications() {
                assert!(
                    !y.values[a.0] || y.values[b.0],
                    "seed {seed}: {a} set without {b}"
                );
            }
        }
    }
}
