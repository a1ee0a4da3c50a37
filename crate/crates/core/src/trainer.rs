//! End-to-end training: estimate the alpha/lambda normalization table,
//! then per minibatch sample a random-walk subgraph, propagate
//! alpha-normalized features, backpropagate the lambda-normalized
//! cross-entropy loss and apply an SGD step. Validation is scored every
//! epoch on the full graph (no sampling, no alpha), and the snapshot
//! with the best validation score is returned.

use std::time::Instant;

use ndarray::Axis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{feature_stats, GateGraph, Role};
use crate::inference::{tune_threshold, ThresholdConfig};
use crate::model::{
    loss_and_gradients, sgd_step, GraphRef, ModelDims, ModelError, SageModel,
};
use crate::sampler::{
    estimate_normalization, sample_subgraph, SampleError, SamplerConfig, STREAM_MINIBATCH,
};
use crate::scalar::Scalar;

/// RNG stream for weight initialization, distinct from the sampler
/// streams derived from the same seed.
const STREAM_MODEL_INIT: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "TrainConfig::default_epochs")]
    pub epochs: usize,
    #[serde(default = "TrainConfig::default_minibatches")]
    pub minibatches_per_epoch: usize,
    #[serde(default = "TrainConfig::default_learning_rate")]
    pub learning_rate: f64,
    /// Hidden layer widths; two layers of 256 by default.
    #[serde(default = "TrainConfig::default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub rng_seed: u64,
    /// Epochs without validation improvement before stopping early.
    #[serde(default = "TrainConfig::default_patience")]
    pub patience: usize,
    /// Standardize features with train-split statistics before training.
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub threshold: ThresholdConfig,
}

impl TrainConfig {
    fn default_epochs() -> usize {
        100
    }

    fn default_minibatches() -> usize {
        20
    }

    fn default_learning_rate() -> f64 {
        0.01
    }

    fn default_hidden() -> Vec<usize> {
        vec![256, 256]
    }

    fn default_patience() -> usize {
        20
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: Self::default_epochs(),
            minibatches_per_epoch: Self::default_minibatches(),
            learning_rate: Self::default_learning_rate(),
            hidden: Self::default_hidden(),
            sampler: SamplerConfig::default(),
            rng_seed: 0,
            patience: Self::default_patience(),
            standardize: false,
            threshold: ThresholdConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("graph has no validation-role nodes")]
    NoValidationNodes,
    #[error("loss diverged at epoch {epoch}, minibatch {minibatch}")]
    Diverged { epoch: usize, minibatch: usize },
    #[error("learning rate must be positive")]
    BadLearningRate,
    #[error("seed list is empty")]
    EmptySeeds,
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub losses: Vec<f64>,
    pub val_score: f64,
    pub threshold: f64,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainRecord {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub best_val_score: f64,
    pub best_threshold: f64,
    /// Test-role nodes that entered any gradient-bearing minibatch.
    /// Must stay zero: walks are restricted to train nodes.
    pub test_node_touches: u64,
}

impl TrainRecord {
    fn empty() -> Self {
        TrainRecord {
            epochs: Vec::new(),
            best_epoch: None,
            best_val_score: 0.0,
            best_threshold: 0.0,
            test_node_touches: 0,
        }
    }
}

/// Runs the training loop and returns the snapshot with the best
/// validation `(TPR + TNR) / 2` at its tuned threshold (ties keep the
/// earliest epoch). `epochs = 0` returns the initialized model.
pub fn train<T: Scalar>(
    graph: &GateGraph<T>,
    cfg: &TrainConfig,
) -> Result<(SageModel<T>, TrainRecord), TrainError> {
    if cfg.learning_rate <= 0.0 {
        return Err(TrainError::BadLearningRate);
    }
    let train_nodes = graph.nodes_with_role(Role::Train);
    if train_nodes.is_empty() {
        return Err(TrainError::Sample(SampleError::NoTrainNodes));
    }
    let val_nodes = graph.nodes_with_role(Role::Validation);
    if val_nodes.is_empty() {
        return Err(TrainError::NoValidationNodes);
    }

    let mut sampler_cfg = cfg.sampler.clone();
    sampler_cfg.rng_seed = cfg.rng_seed;

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    init_rng.set_stream(STREAM_MODEL_INIT);
    let dims = ModelDims::new(graph.schema().width(), cfg.hidden.clone());
    let mut model = SageModel::<T>::init(&dims, &graph.schema().fingerprint(), &mut init_rng);
    if cfg.standardize {
        let (mean, std) = feature_stats(graph, &train_nodes);
        model.set_feature_norm(Some((mean, std)));
    }
    let features = model.prepare_features(graph.features());

    let mut record = TrainRecord::empty();
    if cfg.epochs == 0 {
        return Ok((model, record));
    }

    let norm = estimate_normalization(graph, &sampler_cfg)?;
    let lr = T::from_f64_lossy(cfg.learning_rate);
    let mut mb_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    mb_rng.set_stream(STREAM_MINIBATCH);

    let mut best: Option<(usize, f64, f64, SageModel<T>)> = None;
    let mut stale_epochs = 0usize;
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut losses = Vec::with_capacity(cfg.minibatches_per_epoch);
        for minibatch in 0..cfg.minibatches_per_epoch {
            let mut sub = sample_subgraph(graph, &sampler_cfg, &mut mb_rng)?;
            record.test_node_touches += sub
                .node_ids()
                .iter()
                .filter(|&&u| graph.roles()[u] == Role::Test)
                .count() as u64;
            sub.fill_normalization(&norm, graph);
            let sub_features = features.select(Axis(0), sub.node_ids());
            let sub_labels: Vec<bool> =
                sub.node_ids().iter().map(|&u| graph.labels()[u]).collect();
            let outcome = loss_and_gradients(
                &model,
                GraphRef::sampled(&sub),
                &sub_features,
                &sub_labels,
                sub.lambda(),
            );
            let (loss, grads) = match outcome {
                Ok(ok) => ok,
                Err(ModelError::NonFiniteLoss) => {
                    return Err(TrainError::Diverged { epoch, minibatch })
                }
                Err(e) => return Err(e.into()),
            };
            let loss = loss.to_f64_lossy();
            if !loss.is_finite() || !grads.is_finite() {
                return Err(TrainError::Diverged { epoch, minibatch });
            }
            losses.push(loss);
            sgd_step(&mut model, &grads, lr);
        }

        let choice = tune_threshold(&model, graph, &val_nodes, &cfg.threshold)?;
        let improved = best.as_ref().map(|(_, s, _, _)| choice.score > *s).unwrap_or(true);
        if improved {
            best = Some((epoch, choice.score, choice.threshold, model.clone()));
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
        }
        record.epochs.push(EpochStats {
            losses,
            val_score: choice.score,
            threshold: choice.threshold,
            wall_secs: started.elapsed().as_secs_f64(),
        });
        if cfg.patience > 0 && stale_epochs >= cfg.patience {
            break;
        }
    }

    let (best_epoch, best_score, best_threshold, best_model) =
        best.expect("at least one epoch ran");
    record.best_epoch = Some(best_epoch);
    record.best_val_score = best_score;
    record.best_threshold = best_threshold;
    Ok((best_model, record))
}

/// One competitor in the multi-seed race.
#[derive(Debug, Clone)]
pub struct SeedOutcome<T: Scalar> {
    pub model: SageModel<T>,
    pub seed: u64,
    pub val_score: f64,
    pub threshold: f64,
    pub record: TrainRecord,
}

/// Trains one model per seed (concurrently; inputs are immutable) and
/// returns every outcome in seed-list order.
pub fn run_seeds_all<T: Scalar>(
    graph: &GateGraph<T>,
    cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<SeedOutcome<T>>, TrainError> {
    if seeds.is_empty() {
        return Err(TrainError::EmptySeeds);
    }
    seeds
        .par_iter()
        .map(|&seed| {
            let mut seeded = cfg.clone();
            seeded.rng_seed = seed;
            let (model, record) = train(graph, &seeded)?;
            Ok(SeedOutcome {
                model,
                seed,
                val_score: record.best_val_score,
                threshold: record.best_threshold,
                record,
            })
        })
        .collect()
}

/// Races the seeds and keeps the model with the best validation score
/// at its tuned threshold. Ties go to the lowest seed.
pub fn run_seeds<T: Scalar>(
    graph: &GateGraph<T>,
    cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<SeedOutcome<T>, TrainError> {
    Ok(select_winner(run_seeds_all(graph, cfg, seeds)?))
}

/// Winner selection shared by [`run_seeds`] and the eval harness.
pub fn select_winner<T: Scalar>(outcomes: Vec<SeedOutcome<T>>) -> SeedOutcome<T> {
    outcomes
        .into_iter()
        .reduce(|best, next| {
            if next.val_score > best.val_score
                || (next.val_score == best.val_score && next.seed < best.seed)
            {
                next
            } else {
                best
            }
        })
        .expect("non-empty seed list")
}
