//! Finite-difference audit of the analytic loss gradients.
//!
//! Each trial draws predictions uniformly from [0.05, 0.95] and compares
//! the analytic ∂L/∂ŷ against central differences on three instances: a
//! lone implication term, a lone disjointness term, and a small combined
//! loss with labels and a random closed constraint set. The boundary
//! gradients of the balanced loss at ε = 0 are checked for exact equality.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::{self, LabelVector, LossConfig, LossVariant, TNormKind};
use crate::ontology::ConstraintSet;

pub const DEFAULT_TRIALS: usize = 1000;
pub const FD_STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-5;
pub const SAMPLE_RANGE: (f64, f64) = (0.05, 0.95);
/// Both values below this magnitude count as agreeing zeros.
pub const ZERO_FLOOR: f64 = 1e-8;
/// Łukasiewicz points closer than this to the kink are redrawn.
const KINK_MARGIN: f64 = 1e-4;
const COMBINED_CLASSES: usize = 5;

/// Signature of a gradient implementation under audit.
pub type GradientFn = fn(&LossConfig, &ConstraintSet, &LabelVector, &[f64]) -> Result<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Offender {
    pub variant: String,
    pub instance: &'static str,
    pub point: Vec<f64>,
    pub component: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

impl fmt::Display for Offender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} / {} at ŷ = {:?}, component {}: analytic {:.9e}, numeric {:.9e}, relative error {:.3e}",
            self.variant,
            self.instance,
            self.point,
            self.component,
            self.analytic,
            self.numeric,
            self.rel_error
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCheck {
    pub k: f64,
    pub grad: (f64, f64),
    pub expected: (f64, f64),
}

impl BoundaryCheck {
    pub fn exact(&self) -> bool {
        self.grad == self.expected
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub trials: usize,
    pub comparisons: usize,
    /// Largest relative error per variant.
    pub per_variant: Vec<(String, f64)>,
    pub worst: Option<Offender>,
    pub boundary: Vec<BoundaryCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.worst
            .as_ref()
            .is_none_or(|w| w.rel_error < self.tolerance)
            && self.boundary.iter().all(BoundaryCheck::exact)
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            return Ok(self);
        }
        let mut msg = String::new();
        if let Some(w) = self
            .worst
            .as_ref()
            .filter(|w| w.rel_error >= self.tolerance)
        {
            msg = format!("worst offender: {w}");
        }
        for b in self.boundary.iter().filter(|b| !b.exact()) {
            if !msg.is_empty() {
                msg.push_str("; ");
            }
            msg.push_str(&format!(
                "boundary gradient at k = {}: got {:?}, expected {:?}",
                b.k, b.grad, b.expected
            ));
        }
        Err(Error::GradCheck(msg))
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} trials per variant, {} comparisons, tolerance {:e}",
            self.trials, self.comparisons, self.tolerance
        )?;
        for (name, err) in &self.per_variant {
            writeln!(f, "  {name:<28} max relative error {err:.3e}")?;
        }
        for b in &self.boundary {
            writeln!(
                f,
                "  boundary k = {}: ({}, {}) expected ({}, {}) {}",
                b.k,
                b.grad.0,
                b.grad.1,
                b.expected.0,
                b.expected.1,
                if b.exact() { "exact" } else { "MISMATCH" }
            )?;
        }
        if let Some(w) = &self.worst {
            writeln!(f, "  worst: {w}")?;
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// The audited variants, parameterised by `base` (weights, k, ε).
pub fn audit_variants(base: &LossConfig) -> Vec<(String, LossConfig)> {
    let (k, epsilon) = match base.variant {
        LossVariant::FuzzyBalanced { k, epsilon } => (k, epsilon),
        _ => (losses::DEFAULT_K, losses::DEFAULT_EPSILON),
    };
    let balanced = LossVariant::FuzzyBalanced { k, epsilon };
    let make = |tnorm, variant| {
        let mut cfg = base.clone();
        cfg.tnorm = tnorm;
        cfg.variant = variant;
        cfg
    };
    vec![
        (
            "product".into(),
            make(TNormKind::Product, LossVariant::FuzzyStandard),
        ),
        (
            "lukasiewicz".into(),
            make(TNormKind::Lukasiewicz, LossVariant::FuzzyStandard),
        ),
        (
            format!("balanced product (k={k})"),
            make(TNormKind::Product, balanced),
        ),
        (
            format!("balanced lukasiewicz (k={k})"),
            make(TNormKind::Lukasiewicz, balanced),
        ),
        (
            "xu".into(),
            make(TNormKind::Product, LossVariant::XuSemantic),
        ),
    ]
}

fn near_kink(cfg: &LossConfig, cs: &ConstraintSet, yhat: &[f64]) -> bool {
    if cfg.tnorm != TNormKind::Lukasiewicz || cfg.variant == LossVariant::XuSemantic {
        return false;
    }
    let impl_near = cs.implications().iter().any(|&(a, b)| {
        let (x, y) = match cfg.variant {
            LossVariant::FuzzyBalanced { k, epsilon } => {
                let r = 1.0 / k;
                let f = ((yhat[a.0] + epsilon).powf(r) - epsilon.powf(r))
                    / ((1.0 + epsilon).powf(r) - epsilon.powf(r));
                (f, (1.0 - yhat[b.0]).powf(k))
            }
            _ => (yhat[a.0], 1.0 - yhat[b.0]),
        };
        (x + y - 1.0).abs() < KINK_MARGIN
    });
    impl_near
        || cs
            .disjointness()
            .iter()
            .any(|&(c, d)| (yhat[c.0] + yhat[d.0] - 1.0).abs() < KINK_MARGIN)
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < ZERO_FLOOR {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

fn central_difference(
    cfg: &LossConfig,
    cs: &ConstraintSet,
    y: &LabelVector,
    yhat: &[f64],
    i: usize,
) -> Result<f64> {
    let mut p = yhat.to_vec();
    p[i] = yhat[i] + FD_STEP;
    let hi = losses::combined_loss(cfg, cs, y, &p)?.total;
    p[i] = yhat[i] - FD_STEP;
    let lo = losses::combined_loss(cfg, cs, y, &p)?.total;
    Ok((hi - lo) / (2.0 * FD_STEP))
}

/// Random constraint set over `n` classes that is closed under
/// transitivity and disjointness inheritance, generated from a random
/// DAG on the index order.
fn random_constraints(n: usize, rng: &mut ChaCha8Rng) -> ConstraintSet {
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..i {
            if rng.random_bool(0.35) {
                reach[i][j] = true;
            }
        }
    }
    // indices only point downwards, so one sweep in order closes the relation
    for i in 0..n {
        for j in 0..i {
            if reach[i][j] {
                let row = reach[j].clone();
                for (r, v) in reach[i].iter_mut().zip(row) {
                    *r |= v;
                }
            }
        }
    }
    let implications: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| reach[i][j])
        .collect();
    let reach = &reach;
    let below = |c: usize| (0..n).filter(move |&x| x == c || reach[x][c]);
    let mut disjoint = Vec::new();
    for c in 0..n {
        for d in c + 1..n {
            let shared = below(c).any(|x| x == d || reach[x][d]);
            if !shared && rng.random_bool(0.3) {
                for x in below(c) {
                    for z in below(d) {
                        disjoint.push((x.min(z), x.max(z)));
                    }
                }
            }
        }
    }
    let names = (0..n).map(|i| format!("c{i}")).collect();
    ConstraintSet::from_parts(names, implications, disjoint).expect("generated set is well formed")
}

fn draw_point(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| rng.random_range(SAMPLE_RANGE.0..SAMPLE_RANGE.1))
        .collect()
}

/// Runs the audit with the library gradient.
pub fn run(base: &LossConfig, trials: usize, seed: u64) -> Result<GradCheckReport> {
    run_with(base, trials, seed, losses::combined_loss_grad)
}

/// Runs the audit against an arbitrary gradient implementation.
pub fn run_with(
    base: &LossConfig,
    trials: usize,
    seed: u64,
    gradient: GradientFn,
) -> Result<GradCheckReport> {
    if trials == 0 {
        return Err(Error::Invalid("gradcheck needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comparisons = 0;
    let mut worst: Option<Offender> = None;
    let mut per_variant = Vec::new();

    let pair_impl = ConstraintSet::from_parts(vec!["a".into(), "b".into()], [(0, 1)], [])?;
    let pair_disj = ConstraintSet::from_parts(vec!["c".into(), "d".into()], [], [(0, 1)])?;
    let unit_weights = |cfg: &LossConfig| cfg.clone().with_weights(1.0, 1.0);

    for (name, cfg) in audit_variants(base) {
        let mut variant_max: f64 = 0.0;
        let elementary = unit_weights(&cfg);
        for _ in 0..trials {
            let counts: Vec<usize> = (0..COMBINED_CLASSES)
                .map(|_| rng.random_range(0..200))
                .collect();
            let combined_cfg = cfg.clone().with_class_counts(counts);
            let cs = random_constraints(COMBINED_CLASSES, &mut rng);
            let labels = LabelVector::labelled(
                (0..COMBINED_CLASSES)
                    .map(|_| rng.random_bool(0.5))
                    .collect(),
            );

            let instances: [(
                &'static str,
                &LossConfig,
                &ConstraintSet,
                LabelVector,
                usize,
            ); 3] = [
                (
                    "implication",
                    &elementary,
                    &pair_impl,
                    LabelVector::unlabelled(2),
                    2,
                ),
                (
                    "disjointness",
                    &elementary,
                    &pair_disj,
                    LabelVector::unlabelled(2),
                    2,
                ),
                ("combined", &combined_cfg, &cs, labels, COMBINED_CLASSES),
            ];
            for (instance, icfg, ics, y, n) in instances {
                let yhat = loop {
                    let p = draw_point(n, &mut rng);
                    if !near_kink(icfg, ics, &p) {
                        break p;
                    }
                };
                let analytic = gradient(icfg, ics, &y, &yhat)?;
                for (i, &a) in analytic.iter().enumerate() {
                    let numeric = central_difference(icfg, ics, &y, &yhat, i)?;
                    let rel = relative_error(a, numeric);
                    comparisons += 1;
                    variant_max = variant_max.max(rel);
                    if worst.as_ref().is_none_or(|w| rel > w.rel_error) {
                        worst = Some(Offender {
                            variant: name.clone(),
                            instance,
                            point: yhat.clone(),
                            component: i,
                            analytic: a,
                            numeric,
                            rel_error: rel,
                        });
                    }
                }
            }
        }
        per_variant.push((name, variant_max));
    }

    let k = match base.variant {
        LossVariant::FuzzyBalanced { k, .. } => k,
        _ => losses::DEFAULT_K,
    };
    let boundary = vec![boundary_gradient(k, gradient)?];

    Ok(GradCheckReport {
        trials,
        comparisons,
        per_variant,
        worst,
        boundary,
        tolerance: TOLERANCE,
    })
}

/// (∂/∂ŷ_A, ∂/∂ŷ_B) of the product balanced implication term at ŷ = (1, 0)
/// with ε = 0, which should be exactly (1/k, −k).
pub fn boundary_gradient(k: f64, gradient: GradientFn) -> Result<BoundaryCheck> {
    let cfg = LossConfig::new(
        TNormKind::Product,
        LossVariant::FuzzyBalanced { k, epsilon: 0.0 },
    )
    .with_weights(1.0, 1.0);
    let cs = ConstraintSet::from_parts(vec!["a".into(), "b".into()], [(0, 1)], [])?;
    let g = gradient(&cfg, &cs, &LabelVector::unlabelled(2), &[1.0, 0.0])?;
    Ok(BoundaryCheck {
        k,
        grad: (g[0], g[1]),
        expected: (1.0 / k, -k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sign_flipped(
        cfg: &LossConfig,
        cs: &ConstraintSet,
        y: &LabelVector,
        yhat: &[f64],
    ) -> Result<Vec<f64>> {
        let mut g = losses::combined_loss_grad(cfg, cs, y, yhat)?;
        if let Some(first) = g.first_mut() {
            *first = -*first;
        }
        Ok(g)
    }

    #[test]
    fn default_audit_passes() {
        let report = run(&LossConfig::default(), 200, 7).unwrap();
        assert!(report.passed(), "{report}");
        assert_eq!(report.per_variant.len(), 5);
    }

    #[test]
    fn sign_flip_is_caught() {
        let report = run_with(&LossConfig::default(), 20, 7, sign_flipped).unwrap();
        assert!(!report.passed());
        let worst = report.worst.clone().unwrap();
        assert_eq!(worst.component, 0);
        assert!(worst.rel_error >= 1.0);
        assert!(matches!(report.into_result(), Err(Error::GradCheck(_))));
    }

    #[test]
    fn boundary_is_exact_for_k2() {
        let b = boundary_gradient(2.0, losses::combined_loss_grad).unwrap();
        assert_eq!(b.grad, (0.5, -2.0));
        assert!(b.exact());
    }

    #[test]
    fn random_constraints_are_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let cs = random_constraints(6, &mut rng);
            assert!(cs.validate().is_ok());
        }
    }
}
