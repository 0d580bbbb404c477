//! Adamax optimisation of the combined loss with best-epoch selection.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::losses::{LossBreakdown, LossConfig};
use crate::metrics::f1_scores;
use crate::model::{accumulate_gradient, Mlp};
use crate::ontology::ConstraintSet;

/// Adamax: first moment plus an exponentially weighted infinity norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Adamax {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub u: Vec<f64>,
}

impl Adamax {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Adamax {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            u: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension {
                context: "optimizer state",
                expected: self.m.len(),
                actual: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        self.step += 1;
        let lr_t = self.learning_rate / (1.0 - self.beta1.powi(self.step as i32));
        for (((p, &g), m), u) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.u.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *u = (self.beta2 * *u).max(g.abs());
            *p -= lr_t * *m / (*u + self.epsilon);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
    /// Keep unlabelled training rows; they only feed the constraint terms.
    pub semi_supervised: bool,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            hidden_dims: vec![128],
            seed: 0,
            semi_supervised: false,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        self.loss.validate()
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub base: f64,
    pub impl_term: f64,
    pub disj_term: f64,
    pub total: f64,
    pub val_micro_f1: f64,
}

pub fn log_to_jsonl(log: &[EpochRecord]) -> String {
    let mut out = String::new();
    for r in log {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainStatus {
    Completed,
    /// Non-finite loss or gradient in this epoch; training stopped.
    Diverged {
        epoch: usize,
    },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the highest validation micro-F1.
    pub best: Mlp,
    pub best_epoch: Option<usize>,
    pub best_val_micro_f1: f64,
    pub optimizer: Adamax,
    pub log: Vec<EpochRecord>,
    pub status: TrainStatus,
}

/// Validation micro-F1 at 0.5 over labelled rows.
pub fn validation_micro_f1(model: &Mlp, val: &Dataset) -> Result<f64> {
    let labelled = val.labelled();
    let preds = model.predict(&labelled.features)?;
    let labels: Vec<Vec<bool>> = labelled.labels.into_iter().map(|y| y.values).collect();
    Ok(f1_scores(&labels, &preds, 0.5)?.micro)
}

/// Trains from a seeded random initialisation.
pub fn train(
    train: &Dataset,
    val: &Dataset,
    cs: &ConstraintSet,
    tc: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut dims = vec![train.feature_dim];
    dims.extend(&tc.hidden_dims);
    dims.push(cs.universe_size());
    let model = Mlp::random(&dims, tc.seed)?;
    train_from(model, train, val, cs, tc)
}

/// Trains starting from `model`.
///
/// Every epoch reshuffles the rows with the seeded RNG, takes one Adamax
/// step per mini-batch on the mean per-sample loss, then scores the
/// labelled validation rows. The returned model is the one from the epoch
/// with the highest validation micro-F1 (earliest on ties).
pub fn train_from(
    mut model: Mlp,
    train: &Dataset,
    val: &Dataset,
    cs: &ConstraintSet,
    tc: &TrainConfig,
) -> Result<TrainOutcome> {
    tc.validate()?;
    if train.n_labels != cs.universe_size() || val.n_labels != cs.universe_size() {
        return Err(Error::Dimension {
            context: "dataset labels vs constraint universe",
            expected: cs.universe_size(),
            actual: if train.n_labels != cs.universe_size() {
                train.n_labels
            } else {
                val.n_labels
            },
        });
    }
    let rows: Vec<usize> = (0..train.len())
        .filter(|&i| tc.semi_supervised || train.labels[i].labelled)
        .collect();
    if rows.is_empty() {
        return Err(Error::Invalid("no usable training rows".into()));
    }
    if val.labelled_count() == 0 {
        return Err(Error::Invalid(
            "validation split has no labelled rows".into(),
        ));
    }

    let mut loss_cfg = tc.loss.clone();
    loss_cfg.set_class_counts(train.class_counts());

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut opt = Adamax::new(model.params().len(), tc.learning_rate);
    let mut best = model.clone();
    let mut best_epoch = None;
    let mut best_f1 = f64::NEG_INFINITY;
    let mut log = Vec::with_capacity(tc.max_epochs);
    let mut order = rows;
    let mut grad = vec![0.0; model.params().len()];

    for epoch in 1..=tc.max_epochs {
        order.shuffle(&mut rng);
        let mut sums = LossBreakdown::default();
        let mut diverged = false;
        for batch in order.chunks(tc.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let l = match accumulate_gradient(
                    &model,
                    &train.features[i],
                    &train.labels[i],
                    cs,
                    &loss_cfg,
                    &mut grad,
                ) {
                    Ok(l) => l,
                    Err(Error::NonFinite(_)) => {
                        diverged = true;
                        break;
                    }
                    Err(e) => return Err(e),
                };
                sums.base += l.base;
                sums.impl_term += l.impl_term;
                sums.disj_term += l.disj_term;
                sums.total += l.total;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if diverged || !sums.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                diverged = true;
                break;
            }
            opt.step(model.params_mut(), &grad)?;
        }
        let val_f1 = if diverged || model.params().iter().any(|p| !p.is_finite()) {
            None
        } else {
            match validation_micro_f1(&model, val) {
                Ok(f1) => Some(f1),
                Err(Error::NonFinite(_)) => None,
                Err(e) => return Err(e),
            }
        };
        let Some(val_f1) = val_f1 else {
            return Ok(TrainOutcome {
                best,
                best_epoch,
                best_val_micro_f1: best_f1,
                optimizer: opt,
                log,
                status: TrainStatus::Diverged { epoch },
            });
        };
        let n = order.len() as f64;
        log.push(EpochRecord {
            epoch,
            base: sums.base / n,
            impl_term: sums.impl_term / n,
            disj_term: sums.disj_term / n,
            total: sums.total / n,
            val_micro_f1: val_f1,
        });
        if val_f1 > best_f1 {
            best_f1 = val_f1;
            best_epoch = Some(epoch);
            best = model.clone();
        }
    }
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_val_micro_f1: best_f1,
        optimizer: opt,
        log,
        status: TrainStatus::Completed,
    })
}

/// Where the training rows of a checkpoint came from, so that `evaluate`
/// can recompute the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRecord {
    pub data: PathBuf,
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Mlp,
    pub optimizer: Adamax,
    pub epoch: usize,
    pub seed: u64,
    pub split: Option<SplitRecord>,
}

const CHECKPOINT_MAGIC: &str = "ontoloss-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

fn write_floats(out: &mut String, name: &str, values: &[f64]) {
    writeln!(out, "{name} {}", values.len()).unwrap();
    for v in values {
        writeln!(out, "{v:?}").unwrap();
    }
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n");
        writeln!(out, "epoch {}", self.epoch).unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        let dims: Vec<String> = self.model.dims().iter().map(usize::to_string).collect();
        writeln!(out, "dims {}", dims.join(" ")).unwrap();
        if let Some(s) = &self.split {
            writeln!(
                out,
                "split {:?} {:?} {:?} {}",
                s.ratios.0, s.ratios.1, s.ratios.2, s.seed
            )
            .unwrap();
            writeln!(out, "data {}", s.data.display()).unwrap();
        }
        let o = &self.optimizer;
        writeln!(
            out,
            "adamax {:?} {:?} {:?} {:?} {}",
            o.learning_rate, o.beta1, o.beta2, o.epsilon, o.step
        )
        .unwrap();
        write_floats(&mut out, "params", self.model.params());
        write_floats(&mut out, "m", &o.m);
        write_floats(&mut out, "u", &o.u);
        out
    }

    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        let bad = |line: usize, msg: &str| Error::parse(source, line + 1, msg);
        let (i, header) = lines.next().ok_or_else(|| bad(0, "empty checkpoint"))?;
        if header != format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}") {
            return Err(bad(i, "unsupported checkpoint header"));
        }
        let mut epoch = None;
        let mut seed = None;
        let mut dims: Option<Vec<usize>> = None;
        let mut split_meta: Option<((f64, f64, f64), u64)> = None;
        let mut data = None;
        let mut adamax: Option<(f64, f64, f64, f64, u64)> = None;
        let mut arrays: [Option<Vec<f64>>; 3] = [None, None, None];

        while let Some((i, line)) = lines.next() {
            let mut parts = line.split_whitespace();
            let Some(key) = parts.next() else { continue };
            let rest: Vec<&str> = parts.collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i, "bad number"));
            let int = |s: &str| s.parse::<u64>().map_err(|_| bad(i, "bad integer"));
            match key {
                "epoch" if rest.len() == 1 => epoch = Some(int(rest[0])? as usize),
                "seed" if rest.len() == 1 => seed = Some(int(rest[0])?),
                "dims" => {
                    dims = Some(
                        rest.iter()
                            .map(|s| int(s).map(|v| v as usize))
                            .collect::<Result<_>>()?,
                    )
                }
                "split" if rest.len() == 4 => {
                    split_meta =
                        Some(((num(rest[0])?, num(rest[1])?, num(rest[2])?), int(rest[3])?))
                }
                "data" => {
                    data = Some(PathBuf::from(
                        line.strip_prefix("data ").unwrap_or_default(),
                    ))
                }
                "adamax" if rest.len() == 5 => {
                    adamax = Some((
                        num(rest[0])?,
                        num(rest[1])?,
                        num(rest[2])?,
                        num(rest[3])?,
                        int(rest[4])?,
                    ))
                }
                "params" | "m" | "u" if rest.len() == 1 => {
                    let n = int(rest[0])? as usize;
                    let mut values = Vec::with_capacity(n);
                    for _ in 0..n {
                        let (j, v) = lines.next().ok_or_else(|| bad(i, "truncated array"))?;
                        values.push(v.trim().parse::<f64>().map_err(|_| bad(j, "bad number"))?);
                    }
                    let slot = match key {
                        "params" => 0,
                        "m" => 1,
                        _ => 2,
                    };
                    arrays[slot] = Some(values);
                }
                _ => return Err(bad(i, &format!("unexpected line `{line}`"))),
            }
        }
        let missing = |what: &str| Error::parse(source, 0, format!("checkpoint lacks `{what}`"));
        let dims = dims.ok_or_else(|| missing("dims"))?;
        let [params, m, u] = arrays;
        let model = Mlp::from_params(&dims, params.ok_or_else(|| missing("params"))?)?;
        let (learning_rate, beta1, beta2, epsilon, step) =
            adamax.ok_or_else(|| missing("adamax"))?;
        let optimizer = Adamax {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step,
            m: m.ok_or_else(|| missing("m"))?,
            u: u.ok_or_else(|| missing("u"))?,
        };
        if optimizer.m.len() != model.params().len() || optimizer.u.len() != model.params().len() {
            return Err(Error::parse(
                source,
                0,
                "optimizer state does not match parameters",
            ));
        }
        let split = match (split_meta, data) {
            (Some((ratios, seed)), Some(data)) => Some(SplitRecord { data, ratios, seed }),
            (None, None) => None,
            _ => return Err(Error::parse(source, 0, "incomplete split record")),
        };
        Ok(Checkpoint {
            model,
            optimizer,
            epoch: epoch.ok_or_else(|| missing("epoch"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            split,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
