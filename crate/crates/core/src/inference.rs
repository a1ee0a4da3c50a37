//! Full-graph inference: per-gate HT probabilities, decision
//! thresholding, and the validation sweep that picks the threshold.
//!
//! The sweep evaluates `steps` candidates `upper * k / steps`
//! (k = 1..steps) and keeps the candidate maximizing
//! `(TPR + TNR) / 2`, breaking ties toward the smallest threshold so
//! any hint of malicious structure flips a gate to HT as early as
//! possible.

use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GateGraph, Role};
use crate::model::{forward, GraphRef, ModelError, SageModel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Number of evaluated candidates over (0, upper].
    #[serde(default = "ThresholdConfig::default_steps")]
    pub steps: usize,
    #[serde(default = "ThresholdConfig::default_upper")]
    pub upper: f64,
}

impl ThresholdConfig {
    fn default_steps() -> usize {
        1000
    }

    fn default_upper() -> f64 {
        0.5
    }

    pub fn candidate(&self, k: usize) -> f64 {
        self.upper * k as f64 / self.steps as f64
    }
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig { steps: Self::default_steps(), upper: Self::default_upper() }
    }
}

#[derive(Debug, Error)]
pub enum InferError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One scored gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub node_id: usize,
    pub design: String,
    pub instance: String,
    pub p_ht: f64,
    /// `true` iff `p_ht >= threshold`.
    pub decision: bool,
}

#[derive(Debug, Clone, Copy)]
pub enum NodeFilter<'a> {
    All,
    Role(Role),
    Design(&'a str),
}

/// Per-node HT-class probability from a full-graph forward pass (no
/// sampling, no alpha weights). Fails with `SchemaMismatch` when the
/// model was trained against a different feature schema.
pub fn node_probabilities<T: Scalar>(
    model: &SageModel<T>,
    graph: &GateGraph<T>,
) -> Result<Vec<f64>, ModelError> {
    if model.schema_fingerprint() != graph.schema().fingerprint() {
        return Err(ModelError::SchemaMismatch);
    }
    let features = model.prepare_features(graph.features());
    let probs = forward(model, GraphRef::full(graph), &features)?;
    Ok((0..graph.num_nodes()).map(|u| probs[[u, 1]].to_f64_lossy()).collect())
}

/// Thresholded classification of the filtered nodes.
pub fn predict<T: Scalar>(
    model: &SageModel<T>,
    graph: &GateGraph<T>,
    threshold: f64,
    filter: NodeFilter<'_>,
) -> Result<Vec<Prediction>, ModelError> {
    let probs = node_probabilities(model, graph)?;
    Ok(select_nodes(graph, filter)
        .into_iter()
        .map(|u| {
            let (design, instance) = graph.origin(u);
            Prediction {
                node_id: u,
                design: design.to_string(),
                instance: instance.to_string(),
                p_ht: probs[u],
                decision: probs[u] >= threshold,
            }
        })
        .collect())
}

fn select_nodes<T: Scalar>(graph: &GateGraph<T>, filter: NodeFilter<'_>) -> Vec<usize> {
    match filter {
        NodeFilter::All => (0..graph.num_nodes()).collect(),
        NodeFilter::Role(role) => graph.nodes_with_role(role),
        NodeFilter::Design(name) => graph.design_nodes(name),
    }
}

/// Outcome of a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    /// `(TPR + TNR) / 2` at the chosen threshold; a missing class
    /// contributes 0.
    pub score: f64,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    /// Set when validation held only one class; the threshold defaults
    /// to the smallest candidate in that case.
    pub single_class: bool,
}

/// Sweeps the candidate thresholds over precomputed probabilities.
/// Asserts the sweep monotonicity: TPR never increases and TNR never
/// decreases as the threshold grows.
pub fn sweep_threshold(probs: &[f64], labels: &[bool], cfg: &ThresholdConfig) -> ThresholdChoice {
    assert_eq!(probs.len(), labels.len());
    assert!(cfg.steps >= 1, "threshold sweep needs at least one candidate");
    let mut ht: Vec<f64> = Vec::new();
    let mut benign: Vec<f64> = Vec::new();
    for (&p, &y) in probs.iter().zip(labels) {
        if y {
            ht.push(p);
        } else {
            benign.push(p);
        }
    }
    ht.sort_by(f64::total_cmp);
    benign.sort_by(f64::total_cmp);
    let single_class = ht.is_empty() || benign.is_empty();

    let rate_at = |sorted: &[f64], th: f64| -> usize {
        // count of probabilities >= th
        sorted.len() - sorted.partition_point(|&p| p < th)
    };
    let score_at = |th: f64| -> (f64, Option<f64>, Option<f64>) {
        let tpr = (!ht.is_empty()).then(|| rate_at(&ht, th) as f64 / ht.len() as f64);
        let tnr = (!benign.is_empty())
            .then(|| (benign.len() - rate_at(&benign, th)) as f64 / benign.len() as f64);
        ((tpr.unwrap_or(0.0) + tnr.unwrap_or(0.0)) / 2.0, tpr, tnr)
    };

    if single_class {
        warn!("validation set holds a single class; threshold defaults to the smallest candidate");
        let th = cfg.candidate(1);
        let (score, tpr, tnr) = score_at(th);
        return ThresholdChoice { threshold: th, score, tpr, tnr, single_class: true };
    }

    let mut best: Option<ThresholdChoice> = None;
    let mut prev_tpr = f64::INFINITY;
    let mut prev_tnr = f64::NEG_INFINITY;
    for k in 1..=cfg.steps {
        let th = cfg.candidate(k);
        let (score, tpr, tnr) = score_at(th);
        let (t, n) = (tpr.unwrap(), tnr.unwrap());
        assert!(t <= prev_tpr + 1e-15, "TPR must be non-increasing over the sweep");
        assert!(n >= prev_tnr - 1e-15, "TNR must be non-decreasing over the sweep");
        prev_tpr = t;
        prev_tnr = n;
        let better = best.as_ref().map(|b| score > b.score).unwrap_or(true);
        if better {
            best = Some(ThresholdChoice { threshold: th, score, tpr, tnr, single_class: false });
        }
    }
    best.expect("at least one candidate")
}

/// Tunes the decision threshold on the given validation nodes.
pub fn tune_threshold<T: Scalar>(
    model: &SageModel<T>,
    graph: &GateGraph<T>,
    validation_nodes: &[usize],
    cfg: &ThresholdConfig,
) -> Result<ThresholdChoice, ModelError> {
    let probs = node_probabilities(model, graph)?;
    let sel_probs: Vec<f64> = validation_nodes.iter().map(|&u| probs[u]).collect();
    let sel_labels: Vec<bool> = validation_nodes.iter().map(|&u| graph.labels()[u]).collect();
    Ok(sweep_threshold(&sel_probs, &sel_labels, cfg))
}

/// Writes `predictions.csv` with columns
/// `node_id, design, instance, p_ht, decision`.
pub fn write_predictions_csv(path: &Path, predictions: &[Prediction]) -> Result<(), InferError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["node_id", "design", "instance", "p_ht", "decision"])?;
    for p in predictions {
        writer.write_record([
            p.node_id.to_string(),
            p.design.clone(),
            p.instance.clone(),
            format!("{}", p.p_ht),
            u8::from(p.decision).to_string(),
        ])?;
    }
    writer.flush().map_err(InferError::Io)?;
    Ok(())
}

pub fn read_predictions_csv(path: &Path) -> Result<Vec<Prediction>, InferError> {
    let text = fs::read_to_string(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in reader.records() {
        let r = record?;
        out.push(Prediction {
            node_id: r[0].parse().unwrap_or(0),
            design: r[1].to_string(),
            instance: r[2].to_string(),
            p_ht: r[3].parse().unwrap_or(f64::NAN),
            decision: &r[4] == "1",
        });
    }
    Ok(out)
}
