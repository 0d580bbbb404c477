//! End-to-end library use: generate data, compile constraints, train,
//! save a checkpoint, reload it and evaluate at the F1-optimal threshold.

use std::collections::BTreeSet;

use ontoloss::datagen::{self, SyntheticSpec};
use ontoloss::metrics::{optimal_threshold, MetricsReport};
use ontoloss::ontology::compile_constraints;
use ontoloss::trainer::{self, Checkpoint};
use ontoloss::{ClassId, LossConfig, TrainConfig};

fn main() -> ontoloss::Result<()> {
    let spec = SyntheticSpec {
        n_classes: 20,
        n_samples: 1200,
        feature_dim: 16,
        n_disjoint_axioms: 3,
        seed: 5,
        ..Default::default()
    };
    let syn = datagen::generate(&spec)?;
    let labels: BTreeSet<ClassId> = datagen::column_classes(&syn.graph).into_iter().collect();
    let cs = compile_constraints(&syn.graph, &labels)?;
    let split = datagen::split(syn.dataset.len(), (340.0, 9.0, 51.0), spec.seed)?;
    let (train, val, test) = (
        syn.dataset.subset(&split.train),
        syn.dataset.subset(&split.val),
        syn.dataset.subset(&split.test),
    );

    let tc = TrainConfig {
        max_epochs: 40,
        hidden_dims: vec![32],
        learning_rate: 5e-3,
        loss: LossConfig::default().with_weights(1.0, 100.0),
        ..Default::default()
    };
    let outcome = trainer::train(&train, &val, &cs, &tc)?;
    for r in &outcome.log {
        println!(
            "epoch {:>2}  total {:.4}  base {:.4}  impl {:.5}  disj {:.6}  val micro-F1 {:.4}",
            r.epoch, r.total, r.base, r.impl_term, r.disj_term, r.val_micro_f1
        );
    }

    let dir = std::env::temp_dir().join("ontoloss-example");
    std::fs::create_dir_all(&dir).map_err(|e| ontoloss::Error::io(&dir, e))?;
    let path = dir.join("model.ckpt");
    Checkpoint {
        model: outcome.best.clone(),
        optimizer: outcome.optimizer.clone(),
        epoch: outcome.best_epoch.unwrap_or(0),
        seed: tc.seed,
        split: None,
    }
    .save(&path)?;
    let model = Checkpoint::load(&path)?.model;

    let train_preds = model.predict(&train.features)?;
    let train_labels: Vec<Vec<bool>> = train.labels.iter().map(|y| y.values.clone()).collect();
    let t_max = optimal_threshold(&train_labels, &train_preds, 0.05)?;
    let report = MetricsReport::compute(
        &cs,
        &model.predict(&test.features)?,
        &test.label_rows(),
        t_max,
        Some(t_max),
    )?;
    println!("\ncheckpoint {}\n{report}", path.display());
    Ok(())
}
