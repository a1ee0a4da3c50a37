//! Metrics, the practical and relaxed validation protocols, and
//! experiment orchestration.
//!
//! Practical protocol: the test design is never seen during training;
//! designs from the same base-circuit family go to validation only, and
//! when the test design has no family members three validation designs
//! are drawn by a seeded random choice. Relaxed ("best case") protocol:
//! the test design itself doubles as the validation set.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_graph, BuildError, FeatureSchema, GateGraph, LabelRule, Role};
use crate::inference::{predict, InferError, NodeFilter, Prediction, ThresholdChoice};
use crate::model::ModelError;
use crate::netlist::{InterchangeError, Netlist};
use crate::scalar::Scalar;
use crate::trainer::{run_seeds_all, select_winner, SeedOutcome, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least {needed} designs besides the test design, found {available}")]
    InsufficientDesigns { available: usize, needed: usize },
    #[error("split leaves no designs for training")]
    NoTrainDesigns,
    #[error("design `{0}` is not in the corpus")]
    UnknownDesign(String),
    #[error("prediction references node {node_id} which carries no label")]
    MissingLabel { node_id: usize },
    #[error("corpus error: {0}")]
    Corpus(String),
    #[error(transparent)]
    Interchange(#[from] InterchangeError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Infer(#[from] InferError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
}

// ---------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------

/// Gate-level confusion counts; positive = HT gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// TP / (TP + FN); `None` when no true HT gate was scored.
    pub fn tpr(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.tp as f64 / pos as f64)
    }

    /// TN / (TN + FP); `None` when no true benign gate was scored.
    pub fn tnr(&self) -> Option<f64> {
        let neg = self.tn + self.fp;
        (neg > 0).then(|| self.tn as f64 / neg as f64)
    }

    /// Mean of TPR and TNR; a missing side contributes 0.
    pub fn balanced_score(&self) -> f64 {
        (self.tpr().unwrap_or(0.0) + self.tnr().unwrap_or(0.0)) / 2.0
    }
}

/// Scores predictions against per-node labels. TPR/TNR come back as
/// `None` (reported as N/A), never as a silent 0/0.
pub fn compute_metrics(
    predictions: &[Prediction],
    labels: &[bool],
) -> Result<(ConfusionCounts, Option<f64>, Option<f64>), EvalError> {
    let mut counts = ConfusionCounts::default();
    for p in predictions {
        let truth = *labels
            .get(p.node_id)
            .ok_or(EvalError::MissingLabel { node_id: p.node_id })?;
        match (p.decision, truth) {
            (true, true) => counts.tp += 1,
            (true, false) => counts.fp += 1,
            (false, false) => counts.tn += 1,
            (false, true) => counts.fn_ += 1,
        }
    }
    Ok((counts, counts.tpr(), counts.tnr()))
}

// ---------------------------------------------------------------------
// Split plans
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Practical,
    Relaxed,
}

/// Role assignment of every corpus design for one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SplitPlan {
    pub protocol: Protocol,
    pub test_design: String,
    /// Graph-build roles. Under the relaxed protocol the test design
    /// carries the validation role (validation and test sets are the
    /// same design); the test set is addressed by design name.
    pub assignments: Vec<(String, Role)>,
    /// Seed of the random validation draw, when one was needed.
    pub validation_draw_seed: Option<u64>,
}

impl SplitPlan {
    pub fn designs_with_role(&self, role: Role) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, r)| *r == role)
            .map(|(d, _)| d.as_str())
            .collect()
    }
}

/// Base-circuit family: the benchmark name with a trailing `t<digits>`
/// variant tag removed (`rs232t1000` -> `rs232`).
pub fn design_family(name: &str) -> &str {
    if let Some(pos) = name.rfind('t') {
        let tail = &name[pos + 1..];
        if pos > 0 && !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) {
            return &name[..pos];
        }
    }
    name
}

fn check_membership(designs: &[String], test_design: &str) -> Result<(), EvalError> {
    if !designs.iter().any(|d| d == test_design) {
        return Err(EvalError::UnknownDesign(test_design.to_string()));
    }
    Ok(())
}

/// Practical protocol: same-family designs go to validation only; the
/// rest train. A family-less test design gets 3 validation designs by
/// seeded random draw.
pub fn make_practical_split(
    designs: &[String],
    test_design: &str,
    draw_seed: u64,
) -> Result<SplitPlan, EvalError> {
    check_membership(designs, test_design)?;
    let others: Vec<&String> = designs.iter().filter(|d| *d != test_design).collect();
    if others.len() < 3 {
        return Err(EvalError::InsufficientDesigns { available: others.len(), needed: 3 });
    }
    let family = design_family(test_design);
    let family_members: Vec<&String> =
        others.iter().copied().filter(|d| design_family(d) == family).collect();

    let (validation, used_draw): (Vec<String>, Option<u64>) = if family_members.is_empty() {
        if others.len() < 4 {
            return Err(EvalError::InsufficientDesigns { available: others.len(), needed: 4 });
        }
        let mut pool: Vec<&String> = others.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(draw_seed);
        let mut chosen = Vec::with_capacity(3);
        for _ in 0..3 {
            let idx = rng.random_range(0..pool.len());
            chosen.push(pool.remove(idx).clone());
        }
        (chosen, Some(draw_seed))
    } else {
        (family_members.into_iter().cloned().collect(), None)
    };

    let mut assignments = Vec::with_capacity(designs.len());
    let mut train_count = 0usize;
    for d in designs {
        let role = if d == test_design {
            Role::Test
        } else if validation.contains(d) {
            Role::Validation
        } else {
            train_count += 1;
            Role::Train
        };
        assignments.push((d.clone(), role));
    }
    if train_count == 0 {
        return Err(EvalError::NoTrainDesigns);
    }
    Ok(SplitPlan {
        protocol: Protocol::Practical,
        test_design: test_design.to_string(),
        assignments,
        validation_draw_seed: used_draw,
    })
}

/// Relaxed protocol: the test design doubles as validation; everything
/// else trains.
pub fn make_relaxed_split(designs: &[String], test_design: &str) -> Result<SplitPlan, EvalError> {
    check_membership(designs, test_design)?;
    if designs.len() < 2 {
        return Err(EvalError::NoTrainDesigns);
    }
    let assignments = designs
        .iter()
        .map(|d| {
            let role = if d == test_design { Role::Validation } else { Role::Train };
            (d.clone(), role)
        })
        .collect();
    Ok(SplitPlan {
        protocol: Protocol::Relaxed,
        test_design: test_design.to_string(),
        assignments,
        validation_draw_seed: None,
    })
}

pub fn make_split(
    designs: &[String],
    protocol: Protocol,
    test_design: &str,
    draw_seed: u64,
) -> Result<SplitPlan, EvalError> {
    match protocol {
        Protocol::Practical => make_practical_split(designs, test_design, draw_seed),
        Protocol::Relaxed => make_relaxed_split(designs, test_design),
    }
}

// ---------------------------------------------------------------------
// Experiment configuration (TOML)
// ---------------------------------------------------------------------

fn default_seeds() -> Vec<u64> {
    (0..6).collect()
}

/// Everything `tskit eval` needs besides the corpus: training
/// hyperparameters, the seed list of the model race, schema families
/// and labeling rules.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub train: TrainConfig,
    /// Seeds of the per-model race; the best validation score wins.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Seed of the random validation draw for family-less test designs.
    #[serde(default)]
    pub split_seed: u64,
    /// One-hot gate families; the built-in vocabulary when omitted.
    #[serde(default)]
    pub schema_families: Option<Vec<String>>,
    #[serde(default)]
    pub labels: LabelRule,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            seeds: default_seeds(),
            split_seed: 0,
            schema_families: None,
            labels: LabelRule::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        toml::from_str(&fs::read_to_string(path)?).map_err(|e| EvalError::Config(e.to_string()))
    }

    pub fn schema(&self) -> Result<FeatureSchema, BuildError> {
        match &self.schema_families {
            Some(families) => FeatureSchema::new(families.clone()),
            None => Ok(FeatureSchema::default_vocabulary()),
        }
    }
}

// ---------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------

/// Loads every `*.json` interchange netlist under `dir`, sorted by
/// design name for stable node ordering.
pub fn load_corpus(dir: &Path) -> Result<Vec<Netlist>, EvalError> {
    let mut netlists = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "json").unwrap_or(false))
        .collect();
    entries.sort();
    for path in entries {
        let netlist = Netlist::from_json(&fs::read_to_string(&path)?)?;
        netlists.push(netlist);
    }
    if netlists.is_empty() {
        return Err(EvalError::Corpus(format!("no .json netlists under {}", dir.display())));
    }
    netlists.sort_by(|a, b| a.name.cmp(&b.name));
    let mut names: Vec<&str> = netlists.iter().map(|n| n.name.as_str()).collect();
    names.dedup();
    if names.len() != netlists.len() {
        return Err(EvalError::Corpus("duplicate design names in corpus".into()));
    }
    Ok(netlists)
}

/// The report emitted by one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub test_design: String,
    pub split: SplitSummary,
    pub seed: u64,
    pub threshold: f64,
    pub validation_score: f64,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub confusion: ConfusionCounts,
    /// Test-role nodes that entered any gradient across every seed's
    /// training run; must be zero.
    pub test_node_touches: u64,
    pub config: ExperimentConfig,
    pub predictions_path: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitSummary {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: String,
    pub validation_draw_seed: Option<u64>,
}

impl SplitSummary {
    fn from_plan(plan: &SplitPlan) -> Self {
        SplitSummary {
            train: plan.designs_with_role(Role::Train).iter().map(|s| s.to_string()).collect(),
            validation: plan
                .designs_with_role(Role::Validation)
                .iter()
                .map(|s| s.to_string())
                .collect(),
            test: plan.test_design.clone(),
            validation_draw_seed: plan.validation_draw_seed,
        }
    }
}

/// Everything an experiment produces: the report, the winning model and
/// the per-gate predictions of the test design.
pub struct ExperimentOutcome<T: Scalar> {
    pub report: EvalReport,
    pub winner: SeedOutcome<T>,
    pub predictions: Vec<Prediction>,
    pub graph: GateGraph<T>,
}

/// Builds the split, assembles the graph, races the seeds, scores the
/// test design at the winner's tuned threshold.
pub fn run_experiment<T: Scalar>(
    corpus: &[Netlist],
    protocol: Protocol,
    test_design: &str,
    config: &ExperimentConfig,
) -> Result<ExperimentOutcome<T>, EvalError> {
    let names: Vec<String> = corpus.iter().map(|n| n.name.clone()).collect();
    let plan = make_split(&names, protocol, test_design, config.split_seed)?;
    let role_of: HashMap<&str, Role> =
        plan.assignments.iter().map(|(d, r)| (d.as_str(), *r)).collect();
    let with_roles: Vec<(Netlist, Role)> =
        corpus.iter().map(|n| (n.clone(), role_of[n.name.as_str()])).collect();
    let schema = config.schema()?;
    let graph = build_graph::<T>(&with_roles, &schema, &config.labels)?;

    let outcomes = run_seeds_all(&graph, &config.train, &config.seeds)?;
    let test_node_touches: u64 = outcomes.iter().map(|o| o.record.test_node_touches).sum();
    let winner = select_winner(outcomes);
    let predictions = predict(
        &winner.model,
        &graph,
        winner.threshold,
        NodeFilter::Design(test_design),
    )?;
    let (confusion, tpr, tnr) = compute_metrics(&predictions, graph.labels())?;

    let report = EvalReport {
        protocol,
        test_design: test_design.to_string(),
        split: SplitSummary::from_plan(&plan),
        seed: winner.seed,
        threshold: winner.threshold,
        validation_score: winner.val_score,
        tpr,
        tnr,
        confusion,
        test_node_touches,
        config: config.clone(),
        predictions_path: "predictions.csv".into(),
    };
    Ok(ExperimentOutcome { report, winner, predictions, graph })
}

/// Re-derives TPR/TNR from a persisted predictions file plus labels;
/// used to confirm reports regenerate from their artifacts.
pub fn rescore_predictions(
    predictions: &[Prediction],
    labels: &[bool],
) -> Result<(Option<f64>, Option<f64>), EvalError> {
    let (_, tpr, tnr) = compute_metrics(predictions, labels)?;
    Ok((tpr, tnr))
}

/// One row of the `eval-all` summary table.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub design: String,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub threshold: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixSummary {
    pub protocol: Protocol,
    pub rows: Vec<SummaryRow>,
    /// Averages over designs with defined rates.
    pub mean_tpr: Option<f64>,
    pub mean_tnr: Option<f64>,
}

impl MatrixSummary {
    pub fn from_rows(protocol: Protocol, rows: Vec<SummaryRow>) -> Self {
        let mean = |xs: Vec<f64>| {
            (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
        };
        let mean_tpr = mean(rows.iter().filter_map(|r| r.tpr).collect());
        let mean_tnr = mean(rows.iter().filter_map(|r| r.tnr).collect());
        MatrixSummary { protocol, rows, mean_tpr, mean_tnr }
    }
}

/// Threshold tuning outcome persisted by `tskit tune`.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub score: f64,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub single_class: bool,
}

impl From<ThresholdChoice> for ThresholdReport {
    fn from(c: ThresholdChoice) -> Self {
        ThresholdReport {
            threshold: c.threshold,
            score: c.score,
            tpr: c.tpr,
            tnr: c.tnr,
            single_class: c.single_class,
        }
    }
}
