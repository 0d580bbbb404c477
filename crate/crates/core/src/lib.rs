//! Ontology-constrained multi-label classification.
//!
//! Subsumption and disjointness axioms are compiled into a closed
//! [`ConstraintSet`]; fuzzy-logic loss terms then penalise predictions that
//! violate them, and violation metrics measure how often a trained model
//! still does.

pub mod benchmark;
pub mod cli;
pub mod config;
pub mod datagen;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod ontology;
pub mod trainer;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use losses::{LabelVector, LossBreakdown, LossConfig, LossVariant, TNormKind};
pub use metrics::{MetricsReport, ViolationCounts};
pub use model::Mlp;
pub use ontology::{ClassId, ConstraintSet, OntologyGraph};
pub use trainer::{Adamax, TrainConfig, TrainOutcome};
