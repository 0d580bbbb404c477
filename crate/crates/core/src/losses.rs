//! Fuzzy consistency losses and their analytic gradients.
//!
//! Every loss here is a function of the prediction vector ŷ only, so the
//! same code serves any model that emits per-class scores in [0, 1]. The
//! per-sample objective is
//!
//! ```text
//! L = L_base + w_impl · Σ_{A⊑B} ℓ_impl(ŷ_A, ŷ_B) + w_disj · Σ_{C⊥D} ℓ_disj(ŷ_C, ŷ_D)
//! ```
//!
//! with `L_base` a class-weighted binary cross-entropy that is dropped for
//! unlabelled samples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::ConstraintSet;

/// Floor applied to every logarithm argument.
pub const LOG_CLAMP: f64 = 1e-12;
/// Tolerance for inputs that fall marginally outside [0, 1].
pub const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TNormKind {
    #[default]
    Product,
    Lukasiewicz,
}

/// a + b − 1 as `min − (1 − max)`, which rounds once whenever the result
/// is positive.
#[inline]
fn lukasiewicz_excess(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    lo - (1.0 - hi)
}

impl TNormKind {
    /// T(a, b) without domain checks.
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            TNormKind::Product => a * b,
            TNormKind::Lukasiewicz => lukasiewicz_excess(a, b).max(0.0),
        }
    }

    /// (∂T/∂a, ∂T/∂b). Łukasiewicz uses subgradient 0 at the kink.
    #[inline]
    pub fn partials(self, a: f64, b: f64) -> (f64, f64) {
        match self {
            TNormKind::Product => (b, a),
            TNormKind::Lukasiewicz => {
                if lukasiewicz_excess(a, b) > 0.0 {
                    (1.0, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }
}

impl fmt::Display for TNormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TNormKind::Product => "product",
            TNormKind::Lukasiewicz => "lukasiewicz",
        })
    }
}

impl FromStr for TNormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "product" | "prod" => Ok(TNormKind::Product),
            "lukasiewicz" | "luka" | "łukasiewicz" => Ok(TNormKind::Lukasiewicz),
            other => Err(Error::Config(format!("unknown t-norm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum LossVariant {
    #[default]
    FuzzyStandard,
    /// Implication terms with a softened antecedent and sharpened
    /// consequent; requires `k > 1`, `epsilon > 0` when loaded from a
    /// config file. `epsilon = 0` is accepted programmatically for
    /// inspecting boundary gradients.
    FuzzyBalanced {
        k: f64,
        epsilon: f64,
    },
    XuSemantic,
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossVariant::FuzzyStandard => f.write_str("standard"),
            LossVariant::FuzzyBalanced { k, epsilon } => {
                write!(f, "balanced(k={k}, eps={epsilon})")
            }
            LossVariant::XuSemantic => f.write_str("xu"),
        }
    }
}

/// All loss hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub tnorm: TNormKind,
    pub variant: LossVariant,
    pub w_impl: f64,
    pub w_disj: f64,
    pub beta: f64,
    class_counts: Vec<usize>,
    weights: Vec<f64>,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            tnorm: TNormKind::Product,
            variant: LossVariant::FuzzyStandard,
            w_impl: 0.01,
            w_disj: 100.0,
            beta: 0.99,
            class_counts: Vec::new(),
            weights: Vec::new(),
        }
    }
}

pub const DEFAULT_K: f64 = 2.0;
pub const DEFAULT_EPSILON: f64 = 0.01;

impl LossConfig {
    pub fn new(tnorm: TNormKind, variant: LossVariant) -> Self {
        LossConfig {
            tnorm,
            variant,
            ..Default::default()
        }
    }

    pub fn with_weights(mut self, w_impl: f64, w_disj: f64) -> Self {
        self.w_impl = w_impl;
        self.w_disj = w_disj;
        self
    }

    /// Sets per-class positive counts and recomputes the class weights.
    pub fn with_class_counts(mut self, counts: Vec<usize>) -> Self {
        self.set_class_counts(counts);
        self
    }

    pub fn set_class_counts(&mut self, counts: Vec<usize>) {
        self.weights = class_weights(self.beta, &counts);
        self.class_counts = counts;
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Weight of positive entries of class `c`; 1 when no counts are set.
    #[inline]
    pub fn class_weight(&self, c: usize) -> f64 {
        self.weights.get(c).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_impl >= 0.0 && self.w_impl.is_finite()) {
            return Err(Error::Config(format!(
                "w_impl must be >= 0, got {}",
                self.w_impl
            )));
        }
        if !(self.w_disj >= 0.0 && self.w_disj.is_finite()) {
            return Err(Error::Config(format!(
                "w_disj must be >= 0, got {}",
                self.w_disj
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Config(format!(
                "beta must lie in [0, 1), got {}",
                self.beta
            )));
        }
        if let LossVariant::FuzzyBalanced { k, epsilon } = self.variant {
            if !(k > 1.0 && k.is_finite()) {
                return Err(Error::Config(format!("k must be > 1, got {k}")));
            }
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
            }
        }
        Ok(())
    }
}

/// Class-balanced weights: w'_C = (1−β)/(1−β^{n_C}), normalized to sum to
/// the number of classes. Classes without positives get the n_C = 1 value.
pub fn class_weights(beta: f64, counts: &[usize]) -> Vec<f64> {
    if counts.is_empty() {
        return Vec::new();
    }
    let raw: Vec<f64> = counts
        .iter()
        .map(|&n| {
            let n = n.max(1) as f64;
            let denom = 1.0 - beta.powf(n);
            if denom > 0.0 {
                (1.0 - beta) / denom
            } else {
                1.0
            }
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    let scale = counts.len() as f64 / sum;
    raw.into_iter().map(|w| w * scale).collect()
}

#[inline]
fn check_unit(context: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&v) {
        Ok(v.clamp(0.0, 1.0))
    } else {
        Err(Error::Domain { context, value: v })
    }
}

pub fn tnorm(kind: TNormKind, a: f64, b: f64) -> Result<f64> {
    let a = check_unit("t-norm", a)?;
    let b = check_unit("t-norm", b)?;
    Ok(kind.apply(a, b))
}

#[inline]
fn pow_k(x: f64, k: f64) -> f64 {
    if k == 2.0 {
        x * x
    } else if k == 1.0 {
        x
    } else if k.fract() == 0.0 && k.abs() <= 64.0 {
        x.powi(k as i32)
    } else {
        x.powf(k)
    }
}

#[inline]
fn root_k(x: f64, k: f64) -> f64 {
    if k == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / k)
    }
}

/// Antecedent transform of the balanced loss and its derivative.
#[inline]
fn balanced_antecedent(a: f64, k: f64, epsilon: f64) -> (f64, f64) {
    let eps_root = root_k(epsilon, k);
    let denom = root_k(1.0 + epsilon, k) - eps_root;
    let root = root_k(a + epsilon, k);
    let value = (root - eps_root) / denom;
    // (1/k)·(a+ε)^{1/k−1} = root / (k·(a+ε))
    let deriv = if a + epsilon == 0.0 {
        f64::INFINITY
    } else {
        root / (k * (a + epsilon)) / denom
    };
    (value, deriv)
}

/// Value and partial derivatives (∂/∂ŷ_A, ∂/∂ŷ_B) of one implication term.
#[inline]
pub fn implication_term(cfg: &LossConfig, ya: f64, yb: f64) -> (f64, f64, f64) {
    match cfg.variant {
        LossVariant::FuzzyStandard => {
            let x = 1.0 - yb;
            let (ta, tb) = cfg.tnorm.partials(ya, x);
            (cfg.tnorm.apply(ya, x), ta, -tb)
        }
        LossVariant::FuzzyBalanced { k, epsilon } => {
            let (fa, dfa) = balanced_antecedent(ya, k, epsilon);
            let gb = pow_k(1.0 - yb, k);
            let dgb = -k * pow_k(1.0 - yb, k - 1.0);
            let (ta, tb) = cfg.tnorm.partials(fa, gb);
            // exact zero partials must not meet an infinite inner derivative
            let da = if ta == 0.0 { 0.0 } else { ta * dfa };
            let db = if tb == 0.0 { 0.0 } else { tb * dgb };
            (cfg.tnorm.apply(fa, gb), da, db)
        }
        LossVariant::XuSemantic => {
            let q = 1.0 - ya * (1.0 - yb);
            if q > LOG_CLAMP {
                (0.0 - q.ln(), (1.0 - yb) / q, -ya / q)
            } else {
                (-LOG_CLAMP.ln(), 0.0, 0.0)
            }
        }
    }
}

/// Value and partials of one disjointness term. Balancing does not apply.
#[inline]
pub fn disjointness_term(cfg: &LossConfig, yc: f64, yd: f64) -> (f64, f64, f64) {
    match cfg.variant {
        LossVariant::FuzzyStandard | LossVariant::FuzzyBalanced { .. } => {
            let (tc, td) = cfg.tnorm.partials(yc, yd);
            (cfg.tnorm.apply(yc, yd), tc, td)
        }
        LossVariant::XuSemantic => {
            let q = 1.0 - yc * yd;
            if q > LOG_CLAMP {
                (0.0 - q.ln(), yd / q, yc / q)
            } else {
                (-LOG_CLAMP.ln(), 0.0, 0.0)
            }
        }
    }
}

pub fn implication_loss(cfg: &LossConfig, ya: f64, yb: f64) -> Result<f64> {
    let ya = check_unit("implication loss", ya)?;
    let yb = check_unit("implication loss", yb)?;
    Ok(implication_term(cfg, ya, yb).0)
}

pub fn disjointness_loss(cfg: &LossConfig, yc: f64, yd: f64) -> Result<f64> {
    let yc = check_unit("disjointness loss", yc)?;
    let yd = check_unit("disjointness loss", yd)?;
    Ok(disjointness_term(cfg, yc, yd).0)
}

/// Crisp label vector of one sample. Unlabelled samples only feed the
/// constraint terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    pub values: Vec<bool>,
    pub labelled: bool,
}

impl LabelVector {
    pub fn labelled(values: Vec<bool>) -> Self {
        LabelVector {
            values,
            labelled: true,
        }
    }

    pub fn unlabelled(n: usize) -> Self {
        LabelVector {
            values: vec![false; n],
            labelled: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub base: f64,
    pub impl_term: f64,
    pub disj_term: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(cfg: &LossConfig, base: f64, impl_term: f64, disj_term: f64) -> Self {
        LossBreakdown {
            base,
            impl_term,
            disj_term,
            total: base + cfg.w_impl * impl_term + cfg.w_disj * disj_term,
        }
    }

    /// Arithmetic mean of per-sample breakdowns.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len().max(1) as f64;
        let mut acc = LossBreakdown::default();
        for b in items {
            acc.base += b.base;
            acc.impl_term += b.impl_term;
            acc.disj_term += b.disj_term;
            acc.total += b.total;
        }
        LossBreakdown {
            base: acc.base / n,
            impl_term: acc.impl_term / n,
            disj_term: acc.disj_term / n,
            total: acc.total / n,
        }
    }
}

fn check_predictions(yhat: &[f64], n: usize) -> Result<()> {
    if yhat.len() != n {
        return Err(Error::Dimension {
            context: "prediction vector",
            expected: n,
            actual: yhat.len(),
        });
    }
    for &v in yhat {
        check_unit("prediction vector", v)?;
    }
    Ok(())
}

/// Weighted binary cross-entropy −Σ [w_C y_C log ŷ_C + (1−y_C) log(1−ŷ_C)].
pub fn base_loss(cfg: &LossConfig, y: &LabelVector, yhat: &[f64]) -> Result<f64> {
    if !y.labelled {
        return Err(Error::Invalid(
            "base loss requested for an unlabelled sample".into(),
        ));
    }
    check_predictions(yhat, y.values.len())?;
    Ok(base_value(cfg, &y.values, yhat))
}

fn base_value(cfg: &LossConfig, y: &[bool], yhat: &[f64]) -> f64 {
    let mut loss = 0.0;
    for (c, (&label, &p)) in y.iter().zip(yhat).enumerate() {
        let p = p.clamp(0.0, 1.0);
        if label {
            loss -= cfg.class_weight(c) * p.max(LOG_CLAMP).ln();
        } else {
            loss -= (1.0 - p).max(LOG_CLAMP).ln();
        }
    }
    loss
}

fn base_grad_into(cfg: &LossConfig, y: &[bool], yhat: &[f64], grad: &mut [f64]) {
    for (c, (&label, &p)) in y.iter().zip(yhat).enumerate() {
        if label {
            if p > LOG_CLAMP {
                grad[c] -= cfg.class_weight(c) / p;
            }
        } else if 1.0 - p > LOG_CLAMP {
            grad[c] += 1.0 / (1.0 - p);
        }
    }
}

/// Raw sums of the implication and disjointness terms, optionally
/// accumulating their weighted gradient into `grad`.
pub fn constraint_terms(
    cfg: &LossConfig,
    cs: &ConstraintSet,
    yhat: &[f64],
    mut grad: Option<&mut [f64]>,
) -> (f64, f64) {
    let mut impl_sum = 0.0;
    for &(a, b) in cs.implications() {
        let (v, da, db) = implication_term(cfg, yhat[a.0], yhat[b.0]);
        impl_sum += v;
        if let Some(g) = grad.as_deref_mut() {
            if cfg.w_impl != 0.0 {
                g[a.0] += cfg.w_impl * da;
                g[b.0] += cfg.w_impl * db;
            }
        }
    }
    let mut disj_sum = 0.0;
    for &(c, d) in cs.disjointness() {
        let (v, dc, dd) = disjointness_term(cfg, yhat[c.0], yhat[d.0]);
        disj_sum += v;
        if let Some(g) = grad.as_deref_mut() {
            if cfg.w_disj != 0.0 {
                g[c.0] += cfg.w_disj * dc;
                g[d.0] += cfg.w_disj * dd;
            }
        }
    }
    (impl_sum, disj_sum)
}

fn check_sample(cs: &ConstraintSet, y: &LabelVector, yhat: &[f64]) -> Result<()> {
    let n = cs.universe_size();
    check_predictions(yhat, n)?;
    if y.labelled && y.values.len() != n {
        return Err(Error::Dimension {
            context: "label vector",
            expected: n,
            actual: y.values.len(),
        });
    }
    Ok(())
}

pub fn combined_loss(
    cfg: &LossConfig,
    cs: &ConstraintSet,
    y: &LabelVector,
    yhat: &[f64],
) -> Result<LossBreakdown> {
    check_sample(cs, y, yhat)?;
    let base = if y.labelled {
        base_value(cfg, &y.values, yhat)
    } else {
        0.0
    };
    let (impl_term, disj_term) = constraint_terms(cfg, cs, yhat, None);
    Ok(LossBreakdown::new(cfg, base, impl_term, disj_term))
}

/// ∂L/∂ŷ for one sample.
pub fn combined_loss_grad(
    cfg: &LossConfig,
    cs: &ConstraintSet,
    y: &LabelVector,
    yhat: &[f64],
) -> Result<Vec<f64>> {
    Ok(combined_loss_and_grad(cfg, cs, y, yhat)?.1)
}

pub fn combined_loss_and_grad(
    cfg: &LossConfig,
    cs: &ConstraintSet,
    y: &LabelVector,
    yhat: &[f64],
) -> Result<(LossBreakdown, Vec<f64>)> {
    check_sample(cs, y, yhat)?;
    let mut grad = vec![0.0; yhat.len()];
    let base = if y.labelled {
        base_grad_into(cfg, &y.values, yhat, &mut grad);
        base_value(cfg, &y.values, yhat)
    } else {
        0.0
    };
    let (impl_term, disj_term) = constraint_terms(cfg, cs, yhat, Some(&mut grad));
    Ok((LossBreakdown::new(cfg, base, impl_term, disj_term), grad))
}

/// Mean of per-sample losses over a batch.
pub fn batch_loss(
    cfg: &LossConfig,
    cs: &ConstraintSet,
    labels: &[LabelVector],
    preds: &[Vec<f64>],
) -> Result<LossBreakdown> {
    if labels.len() != preds.len() {
        return Err(Error::Dimension {
            context: "batch rows",
            expected: labels.len(),
            actual: preds.len(),
        });
    }
    let items = labels
        .iter()
        .zip(preds)
        .map(|(y, p)| combined_loss(cfg, cs, y, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossBreakdown::mean(&items))
}
