//! Command-line front end.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{load_loss_config, load_train_config, parse_variant};
use crate::datagen::{self, SyntheticSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gradcheck;
use crate::losses::{LossConfig, LossVariant, TNormKind};
use crate::metrics::{optimal_threshold, MetricsReport};
use crate::ontology::{self, ConstraintSet, OntologyGraph};
use crate::trainer::{self, Checkpoint, SplitRecord, TrainConfig, TrainStatus};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOG_FILE: &str = "train_log.jsonl";
const THRESHOLD_GRID_STEP: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(
    name = "ontoloss",
    version,
    about = "Ontology-constrained multi-label training"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile subsumption and disjointness axioms into a closed constraint set
    CompileConstraints(CompileArgs),
    /// Generate a synthetic ontology and dataset
    Generate(GenerateArgs),
    /// Select a diverse subset of a fingerprint pool
    Subsample(SubsampleArgs),
    /// Train a classifier on the combined loss
    Train(Box<TrainArgs>),
    /// Evaluate a checkpoint: consistency violations and classification scores
    Evaluate(EvaluateArgs),
    /// Audit analytic loss gradients against finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    /// Subsumption edges, one `child<TAB>parent` per line
    #[arg(long)]
    pub edges: PathBuf,
    /// Disjointness axioms, one `a<TAB>b` per line
    #[arg(long)]
    pub disjoint: Option<PathBuf>,
    /// Minimum number of annotated subclasses for a class to become a label
    #[arg(long, default_value_t = 0)]
    pub min_subclasses: usize,
    /// Count an annotated class towards its own subclass total
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub count_self: bool,
    /// Annotated class names, one per line [default: every class]
    #[arg(long)]
    pub annotated: Option<PathBuf>,
    /// Class names in dataset column order, one per line
    #[arg(long)]
    pub classes: Option<PathBuf>,
    /// Output constraint file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 50)]
    pub classes: usize,
    /// Probability of each candidate subsumption edge
    #[arg(long, default_value_t = 0.08)]
    pub density: f64,
    #[arg(long, default_value_t = 8)]
    pub disjoint_axioms: usize,
    #[arg(long, default_value_t = 5000)]
    pub samples: usize,
    #[arg(long, default_value_t = 64)]
    pub feature_dim: usize,
    /// Per-bit label flip probability applied after closure
    #[arg(long, default_value_t = 0.0)]
    pub label_noise: f64,
    /// Standard deviation of the feature noise
    #[arg(long, default_value_t = 1.0)]
    pub feature_noise: f64,
    /// Extra unlabelled rows from shifted clusters, written to unlabelled.tsv
    #[arg(long, default_value_t = 0)]
    pub unlabelled: usize,
    /// Magnitude of the cluster shift for the unlabelled rows
    #[arg(long, default_value_t = 1.5)]
    pub shift: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    /// Hex-encoded fingerprints, one per line
    #[arg(long)]
    pub fingerprints: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub group_size: usize,
    /// Items kept per full group
    #[arg(long, default_value_t = 2_000)]
    pub keep: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Selected indices, one per line
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file
    #[arg(long)]
    pub data: PathBuf,
    /// Constraint file from `compile-constraints`
    #[arg(long)]
    pub constraints: PathBuf,
    /// Flat `key = value` config file; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra unlabelled rows appended to the training split
    #[arg(long)]
    pub unlabelled: Option<PathBuf>,
    /// Seed for the split, initialisation and shuffling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// train/val/test ratios
    #[arg(long, default_value = "340,9,51")]
    pub ratios: String,
    /// Output directory for the checkpoint and training log
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: HyperParams,
}

/// Hyperparameter overrides. Unset flags fall back to the config file,
/// then to the listed defaults.
#[derive(Debug, Args, Default, Clone)]
pub struct HyperParams {
    /// product | lukasiewicz [default: product]
    #[arg(long)]
    pub tnorm: Option<String>,
    /// standard | balanced | xu [default: standard]
    #[arg(long)]
    pub variant: Option<String>,
    /// Balanced-loss exponent [default: 2]
    #[arg(long)]
    pub k: Option<f64>,
    /// Balanced-loss offset [default: 0.01]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Implication loss weight [default: 0.01]
    #[arg(long)]
    pub w_impl: Option<f64>,
    /// Disjointness loss weight [default: 100]
    #[arg(long)]
    pub w_disj: Option<f64>,
    /// Class-balancing beta [default: 0.99]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Maximum epochs [default: 200]
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Mini-batch size [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adamax learning rate [default: 0.001]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Hidden layer widths, comma separated [default: 128]
    #[arg(long)]
    pub hidden: Option<String>,
    /// Keep unlabelled training rows for the constraint terms [default: false]
    #[arg(long)]
    pub semi_supervised: Option<bool>,
}

impl HyperParams {
    pub fn apply(&self, tc: &mut TrainConfig) -> Result<()> {
        let loss = &mut tc.loss;
        if let Some(t) = &self.tnorm {
            loss.tnorm = t.parse::<TNormKind>()?;
        }
        let (mut k, mut epsilon) = match loss.variant {
            LossVariant::FuzzyBalanced { k, epsilon } => (k, epsilon),
            _ => (crate::losses::DEFAULT_K, crate::losses::DEFAULT_EPSILON),
        };
        k = self.k.unwrap_or(k);
        epsilon = self.epsilon.unwrap_or(epsilon);
        if let Some(v) = &self.variant {
            loss.variant = parse_variant(&v.to_ascii_lowercase(), k, epsilon)?;
        } else if let LossVariant::FuzzyBalanced { .. } = loss.variant {
            loss.variant = LossVariant::FuzzyBalanced { k, epsilon };
        }
        if let Some(w) = self.w_impl {
            loss.w_impl = w;
        }
        if let Some(w) = self.w_disj {
            loss.w_disj = w;
        }
        if let Some(b) = self.beta {
            loss.beta = b;
        }
        if let Some(n) = self.max_epochs {
            tc.max_epochs = n;
        }
        if let Some(n) = self.batch_size {
            tc.batch_size = n;
        }
        if let Some(lr) = self.learning_rate {
            tc.learning_rate = lr;
        }
        if let Some(h) = &self.hidden {
            tc.hidden_dims = parse_widths(h)?;
        }
        if let Some(s) = self.semi_supervised {
            tc.semi_supervised = s;
        }
        tc.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    All,
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub constraints: PathBuf,
    /// Checkpoint written by `train`
    #[arg(long)]
    pub model: PathBuf,
    /// Decision threshold in (0, 1), or `auto` for the training-split optimum
    #[arg(long, default_value = "0.5")]
    pub threshold: String,
    /// Rows to score; train/val/test use the split recorded in the checkpoint
    #[arg(long, value_enum, default_value_t = SplitChoice::All)]
    pub split: SplitChoice,
    /// Append the report as one JSON line to this file
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Loss config supplying k, epsilon and the loss weights
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random points per variant
    #[arg(long, default_value_t = gradcheck::DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_widths(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if text.is_empty() || text == "none" {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| s.trim().parse::<usize>().ok().filter(|&n| n > 0))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Config(format!("bad hidden widths `{text}`")))
}

pub fn parse_ratios(text: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad split ratios `{text}`")))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(Error::Config(format!(
            "expected three split ratios, got `{text}`"
        ))),
    }
}

/// Dispatches one parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::CompileConstraints(a) => compile(a, out),
        Command::Generate(a) => generate(a, out),
        Command::Subsample(a) => subsample(a, out),
        Command::Train(a) => train(*a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Gradcheck(a) => run_gradcheck(a, out),
    }
}

fn emit(out: &mut dyn Write, text: impl std::fmt::Display) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn compile(a: CompileArgs, out: &mut dyn Write) -> Result<()> {
    let mut graph = OntologyGraph::new();
    if let Some(path) = &a.classes {
        ontology::load_class_list(&mut graph, path)?;
    }
    ontology::read_ontology_into(&mut graph, &a.edges, a.disjoint.as_deref())?;
    match &a.annotated {
        Some(path) => ontology::load_annotations(&mut graph, path)?,
        None => graph.mark_all_annotated(),
    }
    ontology::check_acyclic(&graph)?;
    let labels = ontology::select_labels(&graph, a.min_subclasses, a.count_self);
    let cs = ontology::compile_constraints(&graph, &labels)?;
    cs.save(&a.out)?;
    emit(
        out,
        format_args!(
            "{} labels, {} implications, {} disjointness",
            cs.universe_size(),
            cs.implications().len(),
            cs.disjointness().len()
        ),
    )
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let spec = SyntheticSpec {
        n_classes: a.classes,
        dag_density: a.density,
        n_disjoint_axioms: a.disjoint_axioms,
        n_samples: a.samples,
        feature_dim: a.feature_dim,
        label_noise: a.label_noise,
        feature_noise: a.feature_noise,
        seed: a.seed,
        ..Default::default()
    };
    let syn = datagen::generate(&spec)?;
    datagen::write_synthetic(&a.out, &syn.graph, &syn.dataset)?;
    if a.unlabelled > 0 {
        let shift = syn.generator.shift(a.shift, a.seed.wrapping_add(1));
        let extra = syn
            .generator
            .sample(a.unlabelled, false, &shift, a.seed.wrapping_add(2));
        extra.save(&a.out.join("unlabelled.tsv"))?;
    }
    emit(
        out,
        format_args!(
            "{} classes, {} subsumption edges, {} disjointness axioms, {} samples -> {}",
            syn.graph.len(),
            syn.graph.subsumptions().len(),
            syn.graph.disjointness().len(),
            syn.dataset.len(),
            a.out.display()
        ),
    )
}

fn subsample(a: SubsampleArgs, out: &mut dyn Write) -> Result<()> {
    let pool = datagen::load_fingerprints(&a.fingerprints)?;
    let picked = datagen::diversity_subsample(&pool, a.group_size, a.keep, a.seed)?;
    let text: String = picked.iter().map(|i| format!("{i}\n")).collect();
    fs::write(&a.out, text).map_err(|e| Error::io(&a.out, e))?;
    emit(
        out,
        format_args!("kept {} of {} fingerprints", picked.len(), pool.len()),
    )
}

fn check_universe(cs: &ConstraintSet, n_labels: usize) -> Result<()> {
    if cs.universe_size() != n_labels {
        return Err(Error::Dimension {
            context: "dataset label columns vs constraint classes",
            expected: cs.universe_size(),
            actual: n_labels,
        });
    }
    Ok(())
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut tc = match &a.config {
        Some(path) => load_train_config(path)?,
        None => TrainConfig::default(),
    };
    a.overrides.apply(&mut tc)?;
    tc.seed = a.seed;
    let ratios = parse_ratios(&a.ratios)?;
    let data = Dataset::load(&a.data)?;
    let cs = ConstraintSet::load(&a.constraints)?;
    check_universe(&cs, data.n_labels)?;
    let parts = datagen::split(data.len(), ratios, a.seed)?;
    let mut train_set = data.subset(&parts.train);
    if let Some(path) = &a.unlabelled {
        train_set.extend(&Dataset::load(path)?)?;
    }
    let val_set = data.subset(&parts.val);

    let outcome = trainer::train(&train_set, &val_set, &cs, &tc)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let log_path = a.out.join(LOG_FILE);
    fs::write(&log_path, trainer::log_to_jsonl(&outcome.log))
        .map_err(|e| Error::io(&log_path, e))?;
    let data_path = fs::canonicalize(&a.data).unwrap_or_else(|_| a.data.clone());
    let checkpoint = Checkpoint {
        model: outcome.best.clone(),
        optimizer: outcome.optimizer.clone(),
        epoch: outcome.best_epoch.unwrap_or(0),
        seed: a.seed,
        split: Some(SplitRecord {
            data: data_path,
            ratios,
            seed: a.seed,
        }),
    };
    checkpoint.save(&a.out.join(CHECKPOINT_FILE))?;
    match outcome.status {
        TrainStatus::Completed => emit(
            out,
            format_args!(
                "trained {} epochs; best epoch {} with validation micro-F1 {:.4}",
                outcome.log.len(),
                outcome.best_epoch.unwrap_or(0),
                outcome.best_val_micro_f1
            ),
        ),
        TrainStatus::Diverged { epoch } => Err(Error::Diverged {
            epoch,
            last_finite_epoch: outcome.log.last().map(|r| r.epoch),
        }),
    }
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let data = Dataset::load(&a.data)?;
    let cs = ConstraintSet::load(&a.constraints)?;
    let ck = Checkpoint::load(&a.model)?;
    if ck.model.output_dim() != cs.universe_size() {
        return Err(Error::Dimension {
            context: "model outputs vs constraint classes",
            expected: cs.universe_size(),
            actual: ck.model.output_dim(),
        });
    }
    check_universe(&cs, data.n_labels)?;
    if ck.model.input_dim() != data.feature_dim {
        return Err(Error::Dimension {
            context: "model inputs vs dataset features",
            expected: ck.model.input_dim(),
            actual: data.feature_dim,
        });
    }
    let recorded = ck.split.as_ref();
    let rows = match a.split {
        SplitChoice::All => data.clone(),
        choice => {
            let rec = recorded.ok_or_else(|| {
                Error::Invalid("checkpoint has no split record; use `--split all`".into())
            })?;
            let s = datagen::split(data.len(), rec.ratios, rec.seed)?;
            data.subset(match choice {
                SplitChoice::Train => &s.train,
                SplitChoice::Val => &s.val,
                _ => &s.test,
            })
        }
    };

    let (threshold, t_max) = if a.threshold.eq_ignore_ascii_case("auto") {
        let rec = recorded.ok_or_else(|| {
            Error::Invalid("`--threshold auto` needs a checkpoint with a split record".into())
        })?;
        let source = Dataset::load(&rec.data)?;
        let s = datagen::split(source.len(), rec.ratios, rec.seed)?;
        let train_rows = source.subset(&s.train).labelled();
        let preds = ck.model.predict(&train_rows.features)?;
        let labels: Vec<Vec<bool>> = train_rows.labels.into_iter().map(|y| y.values).collect();
        let t = optimal_threshold(&labels, &preds, THRESHOLD_GRID_STEP)?;
        (t, Some(t))
    } else {
        let t: f64 = a
            .threshold
            .parse()
            .map_err(|_| Error::Config(format!("bad threshold `{}`", a.threshold)))?;
        (t, None)
    };

    let preds = ck.model.predict(&rows.features)?;
    let report = MetricsReport::compute(&cs, &preds, &rows.label_rows(), threshold, t_max)?;
    emit(out, &report)?;
    if let Some(path) = &a.report {
        append_line(path, &report.to_json_line())?;
    }
    Ok(())
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

fn run_gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = match &a.config {
        Some(path) => load_loss_config(path)?,
        None => LossConfig::default(),
    };
    let report = gradcheck::run(&cfg, a.trials, a.seed)?;
    emit(out, &report)?;
    report.into_result().map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn ratios_parse() {
        assert_eq!(parse_ratios("340,9,51").unwrap(), (340.0, 9.0, 51.0));
        assert!(parse_ratios("1,2").is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut tc = TrainConfig::default();
        HyperParams {
            variant: Some("balanced".into()),
            k: Some(4.0),
            w_disj: Some(5.0),
            hidden: Some("16,8".into()),
            ..Default::default()
        }
        .apply(&mut tc)
        .unwrap();
        assert_eq!(
            tc.loss.variant,
            LossVariant::FuzzyBalanced {
                k: 4.0,
                epsilon: 0.01
            }
        );
        assert_eq!(tc.loss.w_disj, 5.0);
        assert_eq!(tc.hidden_dims, vec![16, 8]);
    }
}
