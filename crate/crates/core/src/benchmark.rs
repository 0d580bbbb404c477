//! Synthetic consistency benchmark: generate an ontology and data, compile
//! its constraints, split, train and score on the held-out rows.

use crate::datagen::{self, Shift, Split, Synthetic, SyntheticSpec};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::losses::{LossConfig, LossVariant, TNormKind, DEFAULT_EPSILON, DEFAULT_K};
use crate::metrics::MetricsReport;
use crate::model::Mlp;
use crate::ontology::{compile_constraints, ConstraintSet};
use crate::trainer::{self, TrainConfig, TrainOutcome};

pub const DEFAULT_SPLIT: (f64, f64, f64) = (340.0, 9.0, 51.0);

/// Implication weight used at desk scale. With 50 classes the default
/// 0.01 leaves test violation rates unchanged.
pub const DESK_W_IMPL: f64 = 2.0;
pub const DESK_LEARNING_RATE: f64 = 5e-3;
pub const DESK_EPOCHS: usize = 60;
pub const DESK_FEATURE_NOISE: f64 = 2.0;
pub const DESK_HIDDEN: usize = 64;
/// Prototype displacement for out-of-distribution rows.
pub const DESK_SHIFT: f64 = 1.5;

/// 50 classes, density 0.08, 8 disjointness axioms, 5000 samples, 64
/// features.
pub fn desk_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        seed,
        feature_noise: DESK_FEATURE_NOISE,
        ..Default::default()
    }
}

/// Trainer settings of the desk-scale protocol around `loss`.
pub fn desk_train_config(seed: u64, loss: LossConfig) -> TrainConfig {
    TrainConfig {
        max_epochs: DESK_EPOCHS,
        learning_rate: DESK_LEARNING_RATE,
        hidden_dims: vec![DESK_HIDDEN],
        seed,
        loss,
        ..Default::default()
    }
}

/// The loss configurations compared at desk scale.
pub fn desk_baseline() -> LossConfig {
    LossConfig::default().with_weights(0.0, 0.0)
}

pub fn desk_product() -> LossConfig {
    LossConfig::default().with_weights(DESK_W_IMPL, 100.0)
}

pub fn desk_balanced() -> LossConfig {
    LossConfig::new(
        TNormKind::Product,
        LossVariant::FuzzyBalanced {
            k: DEFAULT_K,
            epsilon: DEFAULT_EPSILON,
        },
    )
    .with_weights(DESK_W_IMPL, 100.0)
}

pub struct Benchmark {
    pub synthetic: Synthetic,
    pub constraints: ConstraintSet,
    pub split: Split,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl Benchmark {
    /// Every generated class is a label, in generation order.
    pub fn new(spec: &SyntheticSpec, ratios: (f64, f64, f64)) -> Result<Self> {
        let synthetic = datagen::generate(spec)?;
        let labels = datagen::column_classes(&synthetic.graph)
            .into_iter()
            .collect();
        let constraints = compile_constraints(&synthetic.graph, &labels)?;
        let split = datagen::split(synthetic.dataset.len(), ratios, spec.seed)?;
        let data = &synthetic.dataset;
        Ok(Benchmark {
            train: data.subset(&split.train),
            val: data.subset(&split.val),
            test: data.subset(&split.test),
            synthetic,
            constraints,
            split,
        })
    }

    /// Trains on the training split, optionally extended with `extra` rows.
    pub fn fit(&self, tc: &TrainConfig, extra: Option<&Dataset>) -> Result<TrainOutcome> {
        let mut rows = self.train.clone();
        if let Some(extra) = extra {
            rows.extend(extra)?;
        }
        trainer::train(&rows, &self.val, &self.constraints, tc)
    }

    pub fn score(&self, model: &Mlp, rows: &Dataset, threshold: f64) -> Result<MetricsReport> {
        let preds = model.predict(&rows.features)?;
        MetricsReport::compute(
            &self.constraints,
            &preds,
            &rows.label_rows(),
            threshold,
            None,
        )
    }

    /// Fresh rows from the generating process with every class prototype
    /// moved by `shift`.
    pub fn shifted_rows(&self, n: usize, labelled: bool, shift: &Shift, seed: u64) -> Dataset {
        self.synthetic.generator.sample(n, labelled, shift, seed)
    }
}
