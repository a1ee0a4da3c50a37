//! Random-walk subgraph sampling over train-role nodes, plus the
//! pre-sampling estimation of the aggregation (alpha) and loss (lambda)
//! normalization coefficients that correct the sampler's node-frequency
//! bias.
//!
//! Walks never leave train-role nodes, so validation/test information
//! cannot leak into training subgraphs.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GateGraph, Role};
use crate::scalar::Scalar;

/// RNG stream ids derived from one base seed, so pre-sampling rounds are
/// independent of the minibatch stream and may run concurrently.
const STREAM_PRESAMPLE_BASE: u64 = 1 << 32;
pub(crate) const STREAM_MINIBATCH: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Number of walk roots per subgraph; `None` picks
    /// `min(3000, train/2).max(1)`.
    #[serde(default)]
    pub num_roots: Option<usize>,
    #[serde(default = "SamplerConfig::default_walk_length")]
    pub walk_length: usize,
    #[serde(default)]
    pub rng_seed: u64,
    /// Pre-sampling rounds M used to estimate alpha and lambda.
    #[serde(default = "SamplerConfig::default_presample_rounds")]
    pub presample_rounds: usize,
}

impl SamplerConfig {
    fn default_walk_length() -> usize {
        2
    }

    fn default_presample_rounds() -> usize {
        50
    }

    pub fn effective_num_roots(&self, train_count: usize) -> usize {
        self.num_roots.unwrap_or_else(|| (train_count / 2).clamp(1, 3000))
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            num_roots: None,
            walk_length: Self::default_walk_length(),
            rng_seed: 0,
            presample_rounds: Self::default_presample_rounds(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("graph has no train-role nodes")]
    NoTrainNodes,
    #[error("sampler config invalid: {0}")]
    BadConfig(String),
}

/// A node-induced subgraph of the training graph. `alpha`/`lambda` stay
/// empty until filled from a [`NormTable`].
#[derive(Debug, Clone)]
pub struct Subgraph<T: Scalar> {
    /// Sorted global node ids; position is the local id.
    node_ids: Vec<usize>,
    local_adjacency: Vec<Vec<usize>>,
    alpha: Option<Vec<Vec<T>>>,
    lambda: Option<Vec<T>>,
}

impl<T: Scalar> Subgraph<T> {
    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn local_adjacency(&self) -> &[Vec<usize>] {
        &self.local_adjacency
    }

    pub fn alpha(&self) -> Option<&[Vec<T>]> {
        self.alpha.as_deref()
    }

    pub fn lambda(&self) -> Option<&[T]> {
        self.lambda.as_deref()
    }

    /// Copies the relevant alpha/lambda entries out of the table.
    pub fn fill_normalization(&mut self, table: &NormTable<T>, graph: &GateGraph<T>) {
        let lambda = self.node_ids.iter().map(|&g| table.lambda[g]).collect();
        let alpha = self
            .node_ids
            .iter()
            .zip(&self.local_adjacency)
            .map(|(&gu, locals)| {
                locals
                    .iter()
                    .map(|&lv| table.alpha_for(graph, gu, self.node_ids[lv]))
                    .collect()
            })
            .collect();
        self.lambda = Some(lambda);
        self.alpha = Some(alpha);
    }
}

/// Smoothed normalization coefficients over the full graph.
#[derive(Debug, Clone)]
pub struct NormTable<T: Scalar> {
    /// Per-node loss divisor `(C_v + 1) / (M + 1)`.
    lambda: Vec<T>,
    /// Per directed edge `(u -> v in N(u))`: `(C_uv + 1) / (C_v + 1)`,
    /// aligned with the graph's neighbor lists.
    alpha: Vec<Vec<T>>,
}

impl<T: Scalar> NormTable<T> {
    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    fn alpha_for(&self, graph: &GateGraph<T>, u: usize, v: usize) -> T {
        let idx = graph
            .neighbors(u)
            .binary_search(&v)
            .expect("alpha lookup for non-edge");
        self.alpha[u][idx]
    }

    fn from_counts(
        graph: &GateGraph<T>,
        node_counts: &[u64],
        edge_counts: &HashMap<(usize, usize), u64>,
        rounds: usize,
    ) -> Self {
        let m = T::from_usize_lossy(rounds) + T::one();
        let lambda = node_counts
            .iter()
            .map(|&c| (T::from_f64_lossy(c as f64) + T::one()) / m)
            .collect();
        let alpha = (0..graph.num_nodes())
            .map(|u| {
                graph
                    .neighbors(u)
                    .iter()
                    .map(|&v| {
                        let c_uv = edge_counts.get(&(u.min(v), u.max(v))).copied().unwrap_or(0);
                        let c_v = node_counts[v];
                        (T::from_f64_lossy(c_uv as f64) + T::one())
                            / (T::from_f64_lossy(c_v as f64) + T::one())
                    })
                    .collect()
            })
            .collect();
        NormTable { lambda, alpha }
    }
}

/// One random-walk sample: uniform roots over train nodes, each walked
/// `walk_length` steps over train-role neighbors; the union of visited
/// nodes induces the subgraph.
pub fn sample_subgraph<T: Scalar>(
    graph: &GateGraph<T>,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<Subgraph<T>, SampleError> {
    if cfg.walk_length == 0 {
        return Err(SampleError::BadConfig("walk_length must be >= 1".into()));
    }
    if cfg.num_roots == Some(0) {
        return Err(SampleError::BadConfig("num_roots must be >= 1".into()));
    }
    let train: Vec<usize> = graph.nodes_with_role(Role::Train);
    if train.is_empty() {
        return Err(SampleError::NoTrainNodes);
    }
    let num_roots = cfg.effective_num_roots(train.len());
    let roles = graph.roles();
    let mut visited = vec![false; graph.num_nodes()];
    let mut train_neighbors = Vec::new();
    for _ in 0..num_roots {
        let mut cur = train[rng.random_range(0..train.len())];
        visited[cur] = true;
        for _ in 0..cfg.walk_length {
            train_neighbors.clear();
            train_neighbors
                .extend(graph.neighbors(cur).iter().copied().filter(|&v| roles[v] == Role::Train));
            if train_neighbors.is_empty() {
                break;
            }
            cur = train_neighbors[rng.random_range(0..train_neighbors.len())];
            visited[cur] = true;
        }
    }
    let node_ids: Vec<usize> = visited
        .iter()
        .enumerate()
        .filter_map(|(i, &hit)| hit.then_some(i))
        .collect();
    let local_of: HashMap<usize, usize> =
        node_ids.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let local_adjacency = node_ids
        .iter()
        .map(|&g| {
            graph
                .neighbors(g)
                .iter()
                .filter_map(|v| local_of.get(v).copied())
                .collect()
        })
        .collect();
    Ok(Subgraph { node_ids, local_adjacency, alpha: None, lambda: None })
}

/// Runs `presample_rounds` independent sampling rounds (derived RNG
/// streams, merged counts) and returns the smoothed alpha/lambda table.
pub fn estimate_normalization<T: Scalar>(
    graph: &GateGraph<T>,
    cfg: &SamplerConfig,
) -> Result<NormTable<T>, SampleError> {
    if cfg.presample_rounds == 0 {
        return Err(SampleError::BadConfig("presample_rounds must be >= 1".into()));
    }
    let rounds: Vec<Subgraph<T>> = (0..cfg.presample_rounds)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(STREAM_PRESAMPLE_BASE + i as u64);
            sample_subgraph(graph, cfg, &mut rng)
        })
        .collect::<Result<_, _>>()?;
    let mut node_counts = vec![0u64; graph.num_nodes()];
    let mut edge_counts: HashMap<(usize, usize), u64> = HashMap::new();
    for sub in &rounds {
        for &g in sub.node_ids() {
            node_counts[g] += 1;
        }
        for (lu, locals) in sub.local_adjacency().iter().enumerate() {
            let gu = sub.node_ids()[lu];
            for &lv in locals {
                let gv = sub.node_ids()[lv];
                if gu < gv {
                    *edge_counts.entry((gu, gv)).or_insert(0) += 1;
                }
            }
        }
    }
    Ok(NormTable::from_counts(graph, &node_counts, &edge_counts, cfg.presample_rounds))
}
