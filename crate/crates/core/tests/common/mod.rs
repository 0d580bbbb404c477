//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's algorithms; each oracle
//! transcribes its definition as directly as possible.

#![allow(dead_code)]

use std::collections::BTreeSet;

use ontoloss::{ConstraintSet, OntologyGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random DAG on `n` nodes named `v0..`; edges only go from a higher to a
/// lower index before the node order is scrambled.
pub fn random_dag(n: usize, density: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..i {
            if rng.random_bool(density) {
                edges.push((perm[i], perm[j]));
            }
        }
    }
    edges
}

pub fn graph_from_edges(
    n: usize,
    edges: &[(usize, usize)],
    disjoint: &[(usize, usize)],
) -> OntologyGraph {
    let mut g = OntologyGraph::new();
    for i in 0..n {
        g.intern(&format!("v{i}"));
    }
    for &(c, p) in edges {
        g.add_subsumption(&format!("v{c}"), &format!("v{p}"))
            .unwrap();
    }
    for &(a, b) in disjoint {
        g.add_disjointness(&format!("v{a}"), &format!("v{b}"))
            .unwrap();
    }
    g.mark_all_annotated();
    g
}

/// Transitive closure by repeated Boolean matrix squaring, R ← R ∨ R·R.
pub fn boolean_closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for &(a, b) in edges {
        r[a][b] = true;
    }
    loop {
        let mut next = r.clone();
        for i in 0..n {
            for k in 0..n {
                if r[i][k] {
                    for j in 0..n {
                        if r[k][j] {
                            next[i][j] = true;
                        }
                    }
                }
            }
        }
        if next == r {
            return r;
        }
        r = next;
    }
}

/// Brute-force cycle test: some v reaches itself.
pub fn has_cycle(n: usize, edges: &[(usize, usize)]) -> bool {
    let r = boolean_closure(n, edges);
    (0..n).any(|v| r[v][v])
}

pub fn implication_pairs(cs: &ConstraintSet) -> BTreeSet<(usize, usize)> {
    cs.implications().iter().map(|&(a, b)| (a.0, b.0)).collect()
}

pub fn disjoint_pairs(cs: &ConstraintSet) -> BTreeSet<(usize, usize)> {
    cs.disjointness().iter().map(|&(a, b)| (a.0, b.0)).collect()
}

/// Random constraint set over `n` classes with up to `max_axioms`
/// implication pairs and disjointness pairs each; closure is not required
/// by the metric definitions.
pub fn random_constraints(n: usize, max_axioms: usize, rng: &mut ChaCha8Rng) -> ConstraintSet {
    let pick = |rng: &mut ChaCha8Rng| -> Vec<(usize, usize)> {
        let count = rng.random_range(0..=max_axioms);
        (0..count)
            .filter_map(|_| {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                (a != b).then_some((a, b))
            })
            .collect()
    };
    let imp = pick(rng);
    let dis = pick(rng);
    ConstraintSet::from_parts((0..n).map(|i| format!("c{i}")).collect(), imp, dis).unwrap()
}

/// Prediction matrix with values on a coarse grid so that threshold ties
/// and score ties both occur.
pub fn random_predictions(rows: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            (0..n)
                .map(|_| f64::from(rng.random_range(0..=20u32)) / 20.0)
                .collect()
        })
        .collect()
}

pub fn random_labels(rows: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<bool>> {
    (0..rows)
        .map(|_| (0..n).map(|_| rng.random_bool(0.4)).collect())
        .collect()
}

/// (tp_impl, fn_impl, tp_disj, fn_disj) straight from the set-builder
/// definitions: every (sample, A, B) triple is inspected.
pub fn violation_oracle(
    cs: &ConstraintSet,
    preds: &[Vec<f64>],
    theta: f64,
) -> (u64, u64, u64, u64) {
    let n = cs.universe_size();
    let imp = implication_pairs(cs);
    let dis = disjoint_pairs(cs);
    let (mut tpi, mut fni, mut tpd, mut fnd) = (0, 0, 0, 0);
    for h in preds {
        for a in 0..n {
            for b in 0..n {
                if imp.contains(&(a, b)) && h[a] > theta && h[b] > theta {
                    tpi += 1;
                }
                if imp.contains(&(a, b)) && h[a] > theta && h[b] <= theta {
                    fni += 1;
                }
                let disjoint = dis.contains(&(a.min(b), a.max(b))) && a != b;
                if disjoint && h[a] > theta && h[b] <= theta {
                    tpd += 1;
                }
                if disjoint && h[a] > theta && h[b] > theta {
                    fnd += 1;
                }
            }
        }
    }
    (tpi, fni, tpd, fnd)
}

fn f1_from(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp + fp + fn_ == 0 {
        0.0
    } else {
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }
}

/// (micro, macro) F1 via precision and recall.
pub fn f1_oracle(labels: &[Vec<bool>], preds: &[Vec<f64>], theta: f64) -> (f64, f64) {
    let n = labels[0].len();
    let cell = |i: usize, c: usize| (labels[i][c], preds[i][c] > theta);
    let count = |c: Option<usize>, want: (bool, bool)| {
        (0..labels.len())
            .flat_map(|i| (0..n).map(move |k| (i, k)))
            .filter(|&(i, k)| c.is_none_or(|c| c == k) && cell(i, k) == want)
            .count()
    };
    let micro = f1_from(
        count(None, (true, true)),
        count(None, (false, true)),
        count(None, (true, false)),
    );
    let macro_ = (0..n)
        .map(|c| {
            f1_from(
                count(Some(c), (true, true)),
                count(Some(c), (false, true)),
                count(Some(c), (true, false)),
            )
        })
        .sum::<f64>()
        / n as f64;
    (micro, macro_)
}

/// AUC as the fraction of (positive, negative) pairs ordered correctly,
/// ties counting one half.
pub fn auc_oracle(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut good = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if si > sj {
                    good += 1.0;
                } else if si == sj {
                    good += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| good / pairs)
}

/// (micro, macro) AUC; macro averages classes with both label values.
pub fn roc_oracle(labels: &[Vec<bool>], preds: &[Vec<f64>]) -> (Option<f64>, Option<f64>) {
    let pooled_s: Vec<f64> = preds.iter().flatten().copied().collect();
    let pooled_l: Vec<bool> = labels.iter().flatten().copied().collect();
    let n = labels[0].len();
    let per: Vec<f64> = (0..n)
        .filter_map(|c| {
            let s: Vec<f64> = preds.iter().map(|r| r[c]).collect();
            let l: Vec<bool> = labels.iter().map(|r| r[c]).collect();
            auc_oracle(&s, &l)
        })
        .collect();
    let macro_ = (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64);
    (auc_oracle(&pooled_s, &pooled_l), macro_)
}
