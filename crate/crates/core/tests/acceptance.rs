//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ontoloss::benchmark::{self, Benchmark, DEFAULT_SPLIT, DESK_EPOCHS, DESK_SHIFT};
use ontoloss::losses::{self, implication_loss, LossConfig, LossVariant, TNormKind};
use ontoloss::metrics::{count_violations, f1_scores, roc_auc, MetricsReport};
use ontoloss::ontology::{compile_constraints, ClassId, OntologyGraph};
use ontoloss::{gradcheck, Mlp, TrainConfig};
use rand::Rng;

const GRADCHECK_BUDGET: Duration = Duration::from_secs(10);
const EXACT_TOL: f64 = 1e-12;
const XU_POINTS: usize = 100_000;
const METRIC_INSTANCES: usize = 500;
const CLOSURE_DAGS: usize = 200;
const DESK_SEEDS: [u64; 3] = [0, 1, 2];
const FNR_RATIO_MAX: f64 = 0.2;
const F1_SLACK: f64 = 0.02;
const EXPERIMENT_BUDGET: Duration = Duration::from_secs(300);
const OOD_UNLABELLED: usize = 5000;
const OOD_TEST: usize = 1000;
const SEMI_WINS_REQUIRED: usize = 2;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

fn gradient_audit() -> Outcome {
    let start = Instant::now();
    let report = match gradcheck::run(&LossConfig::default(), gradcheck::DEFAULT_TRIALS, 0) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let worst = report.worst.as_ref().map_or(0.0, |w| w.rel_error);
    Outcome::new(
        report.passed() && report.trials == 1000 && elapsed < GRADCHECK_BUDGET,
        format!(
            "{} comparisons, worst relative error {worst:.2e} (< {:e}), {:.2?}",
            report.comparisons, report.tolerance, elapsed
        ),
    )
}

fn balanced_exactness() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for k in [1.5, 2.0, 4.0] {
        for epsilon in [1e-4, 0.01, 0.1] {
            let cfg = LossConfig::new(
                TNormKind::Product,
                LossVariant::FuzzyBalanced { k, epsilon },
            );
            for i in 0..=100 {
                let b = f64::from(i) / 100.0;
                worst = worst.max(implication_loss(&cfg, 0.0, b).unwrap().abs());
            }
            worst = worst.max((implication_loss(&cfg, 1.0, 0.0).unwrap() - 1.0).abs());
        }
        let check = gradcheck::boundary_gradient(k, losses::combined_loss_grad).unwrap();
        if !check.exact() {
            failures.push(format!("k={k}: {:?} != {:?}", check.grad, check.expected));
        }
    }
    Outcome::new(
        worst < EXACT_TOL && failures.is_empty(),
        format!(
            "max boundary deviation {worst:.1e}; gradients at (1,0) {}",
            if failures.is_empty() {
                "exactly (1/k, -k)".to_string()
            } else {
                failures.join(", ")
            }
        ),
    )
}

fn xu_identity() -> Outcome {
    let product = LossConfig::default();
    let xu = LossConfig::new(TNormKind::Product, LossVariant::XuSemantic);
    let mut rng = common::rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..XU_POINTS {
        let a: f64 = rng.random_range(0.0..1.0);
        let b: f64 = rng.random_range(0.0..1.0);
        let lp = implication_loss(&product, a, b).unwrap();
        let lx = implication_loss(&xu, a, b).unwrap();
        worst = worst.max((-(1.0 - lp).ln() - lx).abs());
    }
    Outcome::new(
        worst < EXACT_TOL,
        format!("{XU_POINTS} points, max abs error {worst:.1e}"),
    )
}

fn metric_oracles() -> Outcome {
    let mut rng = common::rng(4);
    let mut mismatches = Vec::new();
    let mut odd = 0;
    let mut nonempty_disj = 0;
    for case in 0..METRIC_INSTANCES {
        let rows = rng.random_range(1..=10);
        let n = rng.random_range(2..=8);
        let cs = common::random_constraints(n, 7, &mut rng);
        let preds = common::random_predictions(rows, n, &mut rng);
        let labels = common::random_labels(rows, n, &mut rng);
        let theta = f64::from(rng.random_range(1..20u32)) / 20.0;

        let got = count_violations(&cs, &preds, theta).unwrap();
        let want = common::violation_oracle(&cs, &preds, theta);
        if (got.tp_impl, got.fn_impl, got.tp_disj, got.fn_disj) != want {
            mismatches.push(format!("case {case}: counts {got:?} vs {want:?}"));
        }
        odd += usize::from(got.fn_disj % 2 == 1);
        nonempty_disj += usize::from(got.fn_disj > 0);

        let f1 = f1_scores(&labels, &preds, theta).unwrap();
        let (micro, macro_) = common::f1_oracle(&labels, &preds, theta);
        if (f1.micro - micro).abs() > EXACT_TOL || (f1.macro_ - macro_).abs() > EXACT_TOL {
            mismatches.push(format!("case {case}: f1 {f1:?} vs ({micro}, {macro_})"));
        }

        let auc = roc_auc(&labels, &preds).unwrap();
        let (micro, macro_) = common::roc_oracle(&labels, &preds);
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() <= EXACT_TOL,
            (None, None) => true,
            _ => false,
        };
        if !close(auc.micro, micro) || !close(auc.macro_, macro_) {
            mismatches.push(format!(
                "case {case}: auc {auc:?} vs ({micro:?}, {macro_:?})"
            ));
        }
    }
    Outcome::new(
        mismatches.is_empty() && odd == 0,
        format!(
            "{METRIC_INSTANCES} instances, {} mismatches, {odd} odd fn_disj ({nonempty_disj} with fn_disj > 0){}",
            mismatches.len(),
            mismatches.first().map(|m| format!("; first: {m}")).unwrap_or_default()
        ),
    )
}

fn closure_oracle() -> Outcome {
    let mut rng = common::rng(5);
    let mut bad = 0;
    let mut total_pairs = 0;
    for _ in 0..CLOSURE_DAGS {
        let n = rng.random_range(1..=20);
        let density = rng.random_range(0.02..0.35);
        let edges = common::random_dag(n, density, &mut rng);
        let g = common::graph_from_edges(n, &edges, &[]);
        let labels: BTreeSet<ClassId> = (0..n).map(ClassId).collect();
        let cs = compile_constraints(&g, &labels).unwrap();
        let r = common::boolean_closure(n, &edges);
        let want: BTreeSet<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| r[i][j])
            .collect();
        total_pairs += want.len();
        bad += usize::from(common::implication_pairs(&cs) != want);
    }

    let mut g = OntologyGraph::new();
    for name in ["A", "B", "C", "D"] {
        g.intern(name);
    }
    g.add_subsumption("A", "C").unwrap();
    g.add_subsumption("B", "D").unwrap();
    g.add_disjointness("C", "D").unwrap();
    g.mark_all_annotated();
    let labels: BTreeSet<ClassId> = (0..4).map(ClassId).collect();
    let cs = compile_constraints(&g, &labels).unwrap();
    let named: BTreeSet<(String, String)> = cs
        .disjointness()
        .iter()
        .map(|&(a, b)| {
            let mut p = [cs.names()[a.0].clone(), cs.names()[b.0].clone()];
            p.sort();
            (p[0].clone(), p[1].clone())
        })
        .collect();
    let expected: BTreeSet<(String, String)> = [("C", "D"), ("A", "D"), ("B", "C"), ("A", "B")]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    Outcome::new(
        bad == 0 && named == expected,
        format!(
            "{CLOSURE_DAGS} DAGs ({total_pairs} closure pairs), {bad} mismatches; worked example gives {} disjoint pairs",
            named.len()
        ),
    )
}

struct SeedRun {
    bench: Benchmark,
    product: Mlp,
    baseline: MetricsReport,
    product_report: MetricsReport,
    balanced: MetricsReport,
}

fn desk_runs() -> (Vec<SeedRun>, Duration) {
    let start = Instant::now();
    let runs = DESK_SEEDS
        .iter()
        .map(|&seed| {
            let bench = Benchmark::new(&benchmark::desk_spec(seed), DEFAULT_SPLIT).unwrap();
            let fit = |loss: LossConfig| -> Mlp {
                let tc = benchmark::desk_train_config(seed, loss);
                bench.fit(&tc, None).unwrap().best
            };
            let baseline = fit(benchmark::desk_baseline());
            let product = fit(benchmark::desk_product());
            let balanced = fit(benchmark::desk_balanced());
            let score = |m: &Mlp| bench.score(m, &bench.test, 0.5).unwrap();
            SeedRun {
                baseline: score(&baseline),
                product_report: score(&product),
                balanced: score(&balanced),
                product,
                bench,
            }
        })
        .collect();
    (runs, start.elapsed())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn desk_consistency(runs: &[SeedRun], elapsed: Duration) -> Outcome {
    let base_fnr = mean(runs.iter().map(|r| r.baseline.fnr_impl.unwrap_or(0.0)));
    let prod_fnr = mean(
        runs.iter()
            .map(|r| r.product_report.fnr_impl.unwrap_or(0.0)),
    );
    let disj: Vec<u64> = runs
        .iter()
        .flat_map(|r| [r.product_report.fn_disj, r.balanced.fn_disj])
        .collect();
    let base_f1 = mean(runs.iter().map(|r| r.baseline.micro_f1.unwrap()));
    let bal_f1 = mean(runs.iter().map(|r| r.balanced.micro_f1.unwrap()));
    let ratio = prod_fnr / base_fnr;
    let a = base_fnr > 0.0 && ratio <= FNR_RATIO_MAX;
    let b = disj.iter().all(|&c| c == 0);
    let c = bal_f1 >= base_f1 - F1_SLACK;
    Outcome::new(
        a && b && c && elapsed < EXPERIMENT_BUDGET,
        format!(
            "(a) FNR_impl product {prod_fnr:.4} vs baseline {base_fnr:.4}, ratio {ratio:.3} (<= {FNR_RATIO_MAX}) {}; \
             (b) fuzzy fn_disj {disj:?} {}; (c) micro-F1 balanced {bal_f1:.4} vs baseline {base_f1:.4} {}; \
             {} seeds x {DESK_EPOCHS} epochs in {elapsed:.1?}",
            tick(a),
            tick(b),
            tick(c),
            runs.len()
        ),
    )
}

fn tick(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn semi_supervised(runs: &[SeedRun]) -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let mut pairs = Vec::new();
    for (run, &seed) in runs.iter().zip(&DESK_SEEDS) {
        let bench = &run.bench;
        let shift = bench.synthetic.generator.shift(DESK_SHIFT, 1000 + seed);
        let unlabelled = bench.shifted_rows(OOD_UNLABELLED, false, &shift, 2000 + seed);
        let ood_test = bench.shifted_rows(OOD_TEST, true, &shift, 3000 + seed);
        let tc = TrainConfig {
            semi_supervised: true,
            ..benchmark::desk_train_config(seed, benchmark::desk_product())
        };
        let semi = bench.fit(&tc, Some(&unlabelled)).unwrap().best;
        let supervised = bench
            .score(&run.product, &ood_test, 0.5)
            .unwrap()
            .fnr_impl
            .unwrap_or(0.0);
        let mixed = bench
            .score(&semi, &ood_test, 0.5)
            .unwrap()
            .fnr_impl
            .unwrap_or(0.0);
        wins += usize::from(mixed < supervised);
        pairs.push(format!("{supervised:.4} -> {mixed:.4}"));
    }
    let elapsed = start.elapsed();
    Outcome::new(
        wins >= SEMI_WINS_REQUIRED && elapsed < EXPERIMENT_BUDGET,
        format!(
            "OOD FNR_impl supervised -> semi-supervised [{}], improved in {wins}/{} seeds, {elapsed:.1?}",
            pairs.join(", "),
            runs.len()
        ),
    )
}

fn ontoloss(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ontoloss"))
        .args(args)
        .output()
        .expect("spawn ontoloss")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let cs = dir.path().join("constraints.txt");
    let steps: Vec<Vec<String>> = vec![
        [
            "generate",
            "--classes",
            "12",
            "--samples",
            "300",
            "--feature-dim",
            "8",
            "--seed",
            "3",
            "--out",
            path(&data),
        ]
        .map(String::from)
        .to_vec(),
        [
            "compile-constraints",
            "--edges",
            path(&data.join("edges.tsv")),
            "--disjoint",
            path(&data.join("disjoint.tsv")),
            "--classes",
            path(&data.join("classes.txt")),
            "--out",
            path(&cs),
        ]
        .map(String::from)
        .to_vec(),
    ];
    for step in &steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        let out = ontoloss(&args);
        if !out.status.success() {
            return Outcome::new(
                false,
                format!(
                    "{} failed: {}",
                    step[0],
                    String::from_utf8_lossy(&out.stderr)
                ),
            );
        }
    }
    let train = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = ontoloss(&[
            "train",
            "--data",
            path(&data.join("data.tsv")),
            "--constraints",
            path(&cs),
            "--seed",
            "9",
            "--max-epochs",
            "6",
            "--hidden",
            "16",
            "--w-impl",
            "1",
            "--out",
            path(&out_dir),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        (
            fs::read(out_dir.join(ontoloss::cli::LOG_FILE)).unwrap(),
            fs::read(out_dir.join(ontoloss::cli::CHECKPOINT_FILE)).unwrap(),
        )
    };
    let (log_a, ck_a) = train("run_a");
    let (log_b, ck_b) = train("run_b");
    let lines = log_a.iter().filter(|&&c| c == b'\n').count();
    Outcome::new(
        !log_a.is_empty() && log_a == log_b,
        format!(
            "logs {} ({lines} lines, {} bytes); checkpoints {}",
            if log_a == log_b {
                "byte-identical"
            } else {
                "DIFFER"
            },
            log_a.len(),
            if ck_a == ck_b {
                "byte-identical"
            } else {
                "differ"
            }
        ),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut record = |name, outcome: Outcome| {
        println!(
            "[{}] {name}: {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
        results.push((name, outcome));
    };
    record("1 gradient audit", gradient_audit());
    record("2 balanced-loss exactness", balanced_exactness());
    record("3 Xu identity", xu_identity());
    record("4 metric oracle equivalence", metric_oracles());
    record("5 closure oracle equivalence", closure_oracle());
    let (runs, elapsed) = desk_runs();
    record("6 desk-scale consistency", desk_consistency(&runs, elapsed));
    record("7 semi-supervised effect", semi_supervised(&runs));
    record("8 training determinism", cli_determinism());

    let failed = results.iter().filter(|(_, o)| !o.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
