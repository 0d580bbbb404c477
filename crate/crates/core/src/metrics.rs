//! Consistency-violation counts and multi-label classification scores.
//!
//! A prediction is positive when it is strictly above the threshold. For an
//! implication (A, B) with A predicted positive, a positive B is a true
//! positive and a negative B a false negative. Disjointness axioms are
//! checked in both directions, so every joint positive of C and D yields
//! two false negatives. Rows whose antecedent is negative count as neither.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::ConstraintSet;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ViolationCounts {
    pub tp_impl: u64,
    pub fn_impl: u64,
    pub tp_disj: u64,
    pub fn_disj: u64,
    pub threshold: f64,
}

impl Add for ViolationCounts {
    type Output = ViolationCounts;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for ViolationCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp_impl += rhs.tp_impl;
        self.fn_impl += rhs.fn_impl;
        self.tp_disj += rhs.tp_disj;
        self.fn_disj += rhs.fn_disj;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Implication,
    Disjointness,
}

fn check_width(cs: &ConstraintSet, row: &[f64]) -> Result<()> {
    if row.len() != cs.universe_size() {
        return Err(Error::Dimension {
            context: "prediction matrix columns",
            expected: cs.universe_size(),
            actual: row.len(),
        });
    }
    Ok(())
}

/// Violation counts of a single prediction vector.
pub fn count_sample(cs: &ConstraintSet, yhat: &[f64], threshold: f64) -> ViolationCounts {
    let mut counts = ViolationCounts {
        threshold,
        ..Default::default()
    };
    for &(a, b) in cs.implications() {
        if yhat[a.0] > threshold {
            if yhat[b.0] > threshold {
                counts.tp_impl += 1;
            } else {
                counts.fn_impl += 1;
            }
        }
    }
    for &(c, d) in cs.disjointness() {
        for (x, y) in [(c, d), (d, c)] {
            if yhat[x.0] > threshold {
                if yhat[y.0] > threshold {
                    counts.fn_disj += 1;
                } else {
                    counts.tp_disj += 1;
                }
            }
        }
    }
    counts
}

/// Pooled violation counts over all rows.
pub fn count_violations(
    cs: &ConstraintSet,
    preds: &[Vec<f64>],
    threshold: f64,
) -> Result<ViolationCounts> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Invalid(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let mut total = ViolationCounts {
        threshold,
        ..Default::default()
    };
    for row in preds {
        check_width(cs, row)?;
        total += count_sample(cs, row, threshold);
    }
    Ok(total)
}

/// FN / (FN + TP), `None` when no antecedent was active.
pub fn fnr(counts: &ViolationCounts, family: Family) -> Option<f64> {
    let (tp, fn_) = match family {
        Family::Implication => (counts.tp_impl, counts.fn_impl),
        Family::Disjointness => (counts.tp_disj, counts.fn_disj),
    };
    if tp + fn_ == 0 {
        None
    } else {
        Some(fn_ as f64 / (tp + fn_) as f64)
    }
}

/// Per-row FNRs, for diagnostics.
pub fn per_sample_fnr(
    cs: &ConstraintSet,
    preds: &[Vec<f64>],
    threshold: f64,
    family: Family,
) -> Result<Vec<Option<f64>>> {
    preds
        .iter()
        .map(|row| {
            check_width(cs, row)?;
            Ok(fnr(&count_sample(cs, row, threshold), family))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub micro: f64,
    pub macro_: f64,
}

fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

fn check_matrix(labels: &[Vec<bool>], preds: &[Vec<f64>]) -> Result<usize> {
    if labels.is_empty() {
        return Err(Error::Invalid("no labelled rows to score".into()));
    }
    if labels.len() != preds.len() {
        return Err(Error::Dimension {
            context: "metric rows",
            expected: labels.len(),
            actual: preds.len(),
        });
    }
    let width = labels[0].len();
    for (y, p) in labels.iter().zip(preds) {
        if y.len() != width || p.len() != width {
            return Err(Error::Dimension {
                context: "metric columns",
                expected: width,
                actual: if y.len() != width { y.len() } else { p.len() },
            });
        }
    }
    Ok(width)
}

/// Micro- and macro-averaged F1 at `> threshold`. A class with neither
/// positive labels nor positive predictions scores 0 in the macro mean.
pub fn f1_scores(labels: &[Vec<bool>], preds: &[Vec<f64>], threshold: f64) -> Result<F1Scores> {
    let width = check_matrix(labels, preds)?;
    let mut per_class = vec![(0u64, 0u64, 0u64); width];
    for (y, p) in labels.iter().zip(preds) {
        for c in 0..width {
            let entry = &mut per_class[c];
            match (y[c], p[c] > threshold) {
                (true, true) => entry.0 += 1,
                (false, true) => entry.1 += 1,
                (true, false) => entry.2 += 1,
                (false, false) => {}
            }
        }
    }
    let (tp, fp, fn_) = per_class
        .iter()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    let macro_ = if width == 0 {
        0.0
    } else {
        per_class.iter().map(|&(t, p, n)| f1(t, p, n)).sum::<f64>() / width as f64
    };
    Ok(F1Scores {
        micro: f1(tp, fp, fn_),
        macro_,
    })
}

/// Mann–Whitney AUC with half credit for ties; `None` unless both classes
/// are present.
pub fn binary_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap_or(Ordering::Equal));
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // average 1-based rank of the tie block i..=j
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let positives = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum += rank * positives as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucScores {
    pub micro: Option<f64>,
    pub macro_: Option<f64>,
    /// Classes left out of the macro mean for lacking positives or negatives.
    pub skipped: Vec<usize>,
}

pub fn roc_auc(labels: &[Vec<bool>], preds: &[Vec<f64>]) -> Result<AucScores> {
    let width = check_matrix(labels, preds)?;
    let pooled_scores: Vec<f64> = preds.iter().flatten().copied().collect();
    let pooled_labels: Vec<bool> = labels.iter().flatten().copied().collect();
    let micro = binary_auc(&pooled_scores, &pooled_labels);

    let mut per_class = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..width {
        let s: Vec<f64> = preds.iter().map(|r| r[c]).collect();
        let l: Vec<bool> = labels.iter().map(|r| r[c]).collect();
        match binary_auc(&s, &l) {
            Some(a) => per_class.push(a),
            None => skipped.push(c),
        }
    }
    let macro_ = if per_class.is_empty() {
        None
    } else {
        Some(per_class.iter().sum::<f64>() / per_class.len() as f64)
    };
    Ok(AucScores {
        micro,
        macro_,
        skipped,
    })
}

/// Grid {step, 2·step, …} strictly inside (0, 1).
pub fn threshold_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::Invalid(format!(
            "grid step must lie in (0, 1), got {step}"
        )));
    }
    let mut grid = Vec::new();
    let mut i = 1u32;
    loop {
        let t = (f64::from(i) * step * 1e9).round() / 1e9;
        if t >= 1.0 {
            break;
        }
        grid.push(t);
        i += 1;
    }
    Ok(grid)
}

/// Threshold maximizing training micro-F1 over the grid. Ties go to the
/// candidate closest to 0.5, then to the smaller one.
pub fn optimal_threshold(labels: &[Vec<bool>], preds: &[Vec<f64>], grid_step: f64) -> Result<f64> {
    let grid = threshold_grid(grid_step)?;
    let mut best: Option<(f64, f64)> = None;
    for t in grid {
        let score = f1_scores(labels, preds, t)?.micro;
        let better = match best {
            None => true,
            Some((bt, bs)) => {
                score > bs
                    || (score == bs
                        && ((t - 0.5).abs() < (bt - 0.5).abs()
                            || ((t - 0.5).abs() == (bt - 0.5).abs() && t < bt)))
            }
        };
        if better {
            best = Some((t, score));
        }
    }
    Ok(best.map(|(t, _)| t).unwrap_or(0.5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub micro_roc_auc: Option<f64>,
    pub macro_roc_auc: Option<f64>,
    pub threshold: f64,
}

/// Everything the `evaluate` command reports, one JSON object per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: usize,
    pub labelled_rows: usize,
    pub fnr_impl: Option<f64>,
    pub fnr_disj: Option<f64>,
    pub tp_impl: u64,
    pub fn_impl: u64,
    pub tp_disj: u64,
    pub fn_disj: u64,
    pub micro_f1: Option<f64>,
    pub macro_f1: Option<f64>,
    pub micro_auc: Option<f64>,
    pub macro_auc: Option<f64>,
    pub threshold: f64,
    pub t_max: Option<f64>,
}

impl MetricsReport {
    /// Violations over all rows, classification scores over labelled rows.
    pub fn compute(
        cs: &ConstraintSet,
        preds: &[Vec<f64>],
        labels: &[Option<Vec<bool>>],
        threshold: f64,
        t_max: Option<f64>,
    ) -> Result<Self> {
        let counts = count_violations(cs, preds, threshold)?;
        let (ly, lp): (Vec<Vec<bool>>, Vec<Vec<f64>>) = labels
            .iter()
            .zip(preds)
            .filter_map(|(y, p)| y.as_ref().map(|y| (y.clone(), p.clone())))
            .unzip();
        let (f1s, aucs) = if ly.is_empty() {
            (None, None)
        } else {
            (
                Some(f1_scores(&ly, &lp, threshold)?),
                Some(roc_auc(&ly, &lp)?),
            )
        };
        Ok(MetricsReport {
            rows: preds.len(),
            labelled_rows: ly.len(),
            fnr_impl: fnr(&counts, Family::Implication),
            fnr_disj: fnr(&counts, Family::Disjointness),
            tp_impl: counts.tp_impl,
            fn_impl: counts.fn_impl,
            tp_disj: counts.tp_disj,
            fn_disj: counts.fn_disj,
            micro_f1: f1s.map(|s| s.micro),
            macro_f1: f1s.map(|s| s.macro_),
            micro_auc: aucs.as_ref().and_then(|a| a.micro),
            macro_auc: aucs.as_ref().and_then(|a| a.macro_),
            threshold,
            t_max,
        })
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_owned(), |x| format!("{x:.4}"))
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>12}", "metric", "value")?;
        writeln!(f, "{:-<14} {:->12}", "", "")?;
        let rows = [
            ("rows", self.rows.to_string()),
            ("labelled", self.labelled_rows.to_string()),
            ("threshold", format!("{:.4}", self.threshold)),
            ("t_max", opt(self.t_max)),
            ("fnr_impl", opt(self.fnr_impl)),
            ("tp/fn impl", format!("{}/{}", self.tp_impl, self.fn_impl)),
            ("fnr_disj", opt(self.fnr_disj)),
            ("tp/fn disj", format!("{}/{}", self.tp_disj, self.fn_disj)),
            ("micro_f1", opt(self.micro_f1)),
            ("macro_f1", opt(self.macro_f1)),
            ("micro_auc", opt(self.micro_auc)),
            ("macro_auc", opt(self.macro_auc)),
        ];
        for (k, v) in rows {
            writeln!(f, "{k:<14} {v:>12}")?;
        }
        Ok(())
    }
}
