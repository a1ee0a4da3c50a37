//! GraphSAGE network with mean aggregation, a two-class softmax head,
//! cross-entropy loss and hand-derived gradients.
//!
//! Each layer computes `h_u = ReLU(W * agg_u + B * h_u_prev)` where
//! `agg_u` is the (optionally alpha-weighted) neighbor mean
//! `sum_{v in N(u)} w_uv * h_v / |N(u)|`. The two-block sum is the
//! algebraic equivalent of concatenating `[agg_u, h_u_prev]` and
//! applying one weight matrix.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::GateGraph;
use crate::sampler::{SamplerConfig, Subgraph};
use crate::scalar::Scalar;

/// Probability floor applied before the log in the cross-entropy loss.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {place}: expected {expected}, got {got}")]
    DimensionMismatch { place: &'static str, expected: usize, got: usize },
    #[error("model was trained against a different feature schema")]
    SchemaMismatch,
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Adjacency (plus optional per-edge aggregation weights) seen by the
/// forward/backward passes. Training passes the sampled subgraph with
/// alpha; validation and inference pass the full graph without.
#[derive(Clone, Copy)]
pub struct GraphRef<'a, T: Scalar> {
    pub neighbors: &'a [Vec<usize>],
    pub alpha: Option<&'a [Vec<T>]>,
}

impl<'a, T: Scalar> GraphRef<'a, T> {
    pub fn full(graph: &'a GateGraph<T>) -> Self {
        GraphRef { neighbors: graph.adjacency(), alpha: None }
    }

    pub fn sampled(sub: &'a Subgraph<T>) -> Self {
        GraphRef { neighbors: sub.local_adjacency(), alpha: sub.alpha() }
    }

    fn num_nodes(&self) -> usize {
        self.neighbors.len()
    }
}

#[derive(Debug, Clone)]
pub struct SageLayer<T: Scalar> {
    /// Applied to the aggregated neighbor vector (d_out x d_in).
    pub w: Array2<T>,
    /// Applied to the node's own previous embedding (d_out x d_in).
    pub b: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct SageModel<T: Scalar> {
    layers: Vec<SageLayer<T>>,
    /// Fully-connected output head (2 x d_L), classes (benign, HT).
    head: Array2<T>,
    schema_fingerprint: String,
    /// Train-split standardization (mean, std) when enabled.
    feature_norm: Option<(Vec<f64>, Vec<f64>)>,
}

/// Layer widths: input feature width plus one output width per layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub feature_width: usize,
    pub hidden: Vec<usize>,
}

impl ModelDims {
    pub fn new(feature_width: usize, hidden: Vec<usize>) -> Self {
        ModelDims { feature_width, hidden }
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len());
        let mut d_in = self.feature_width;
        for &d_out in &self.hidden {
            dims.push((d_out, d_in));
            d_in = d_out;
        }
        dims
    }

    fn output_width(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.feature_width)
    }
}

fn glorot<T: Scalar>(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| {
        T::from_f64_lossy(rng.random_range(-bound..bound))
    })
}

impl<T: Scalar> SageModel<T> {
    /// Fresh model with symmetric uniform (Glorot) initialization.
    pub fn init(dims: &ModelDims, schema_fingerprint: &str, rng: &mut impl Rng) -> Self {
        let layers = dims
            .layer_dims()
            .into_iter()
            .map(|(d_out, d_in)| SageLayer {
                w: glorot(d_out, d_in, rng),
                b: glorot(d_out, d_in, rng),
            })
            .collect();
        let head = glorot(2, dims.output_width(), rng);
        SageModel {
            layers,
            head,
            schema_fingerprint: schema_fingerprint.to_string(),
            feature_norm: None,
        }
    }

    pub fn layers(&self) -> &[SageLayer<T>] {
        &self.layers
    }

    pub fn head(&self) -> &Array2<T> {
        &self.head
    }

    pub fn schema_fingerprint(&self) -> &str {
        &self.schema_fingerprint
    }

    pub fn feature_width(&self) -> usize {
        self.layers.first().map(|l| l.w.ncols()).unwrap_or(self.head.ncols())
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            feature_width: self.feature_width(),
            hidden: self.layers.iter().map(|l| l.w.nrows()).collect(),
        }
    }

    pub fn feature_norm(&self) -> Option<&(Vec<f64>, Vec<f64>)> {
        self.feature_norm.as_ref()
    }

    pub fn set_feature_norm(&mut self, norm: Option<(Vec<f64>, Vec<f64>)>) {
        self.feature_norm = norm;
    }

    /// Standardizes a feature matrix when the model carries train-split
    /// statistics; otherwise returns it untouched.
    pub fn prepare_features(&self, features: &Array2<T>) -> Array2<T> {
        match &self.feature_norm {
            Some((mean, std)) => crate::graph::standardize(features, mean, std),
            None => features.clone(),
        }
    }

    /// All parameter tensors, layer order then head. The gradient
    /// container uses the same order.
    pub fn param_tensors_mut(&mut self) -> Vec<&mut Array2<T>> {
        let mut out: Vec<&mut Array2<T>> = Vec::with_capacity(self.layers.len() * 2 + 1);
        for layer in &mut self.layers {
            out.push(&mut layer.w);
            out.push(&mut layer.b);
        }
        out.push(&mut self.head);
        out
    }

    pub fn param_tensors(&self) -> Vec<&Array2<T>> {
        let mut out: Vec<&Array2<T>> = Vec::with_capacity(self.layers.len() * 2 + 1);
        for layer in &self.layers {
            out.push(&layer.w);
            out.push(&layer.b);
        }
        out.push(&self.head);
        out
    }
}

/// Mean aggregation: `a_u = sum_{v in N(u)} w_uv * h_v / |N(u)|`,
/// weights 1 without alpha; isolated nodes aggregate to zero.
pub fn aggregate_mean<T: Scalar>(
    embeddings: &Array2<T>,
    graph: GraphRef<'_, T>,
) -> Result<Array2<T>, ModelError> {
    let n = graph.num_nodes();
    if embeddings.nrows() != n {
        return Err(ModelError::DimensionMismatch {
            place: "aggregate_mean embeddings",
            expected: n,
            got: embeddings.nrows(),
        });
    }
    let d = embeddings.ncols();
    let mut agg = Array2::<T>::zeros((n, d));
    for u in 0..n {
        let nbrs = &graph.neighbors[u];
        if nbrs.is_empty() {
            continue;
        }
        let inv = T::one() / T::from_usize_lossy(nbrs.len());
        let mut row = agg.row_mut(u);
        for (i, &v) in nbrs.iter().enumerate() {
            let w = graph.alpha.map(|a| a[u][i]).unwrap_or_else(T::one);
            row.scaled_add(w * inv, &embeddings.row(v));
        }
    }
    Ok(agg)
}

/// One layer: `ReLU(agg * W^T + h_prev * B^T)`.
pub fn layer_forward<T: Scalar>(
    layer: &SageLayer<T>,
    h_prev: &Array2<T>,
    graph: GraphRef<'_, T>,
) -> Result<Array2<T>, ModelError> {
    if h_prev.ncols() != layer.w.ncols() {
        return Err(ModelError::DimensionMismatch {
            place: "layer_forward input width",
            expected: layer.w.ncols(),
            got: h_prev.ncols(),
        });
    }
    let agg = aggregate_mean(h_prev, graph)?;
    let z = agg.dot(&layer.w.t()) + h_prev.dot(&layer.b.t());
    Ok(z.mapv(|v| v.max(T::zero())))
}

/// Cached intermediate results of one forward pass, as needed by the
/// analytic backward pass.
pub struct ForwardPass<T: Scalar> {
    /// h_0 .. h_L (h_0 is the input feature matrix).
    pub activations: Vec<Array2<T>>,
    /// agg(h_0) .. agg(h_{L-1}).
    pub aggregates: Vec<Array2<T>>,
    pub logits: Array2<T>,
    /// Row-softmax of logits: columns (benign, HT).
    pub probabilities: Array2<T>,
}

fn softmax_rows<T: Scalar>(logits: &Array2<T>) -> Array2<T> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Full forward pass retaining intermediates.
pub fn forward_cached<T: Scalar>(
    model: &SageModel<T>,
    graph: GraphRef<'_, T>,
    features: &Array2<T>,
) -> Result<ForwardPass<T>, ModelError> {
    if features.ncols() != model.feature_width() {
        return Err(ModelError::DimensionMismatch {
            place: "forward features",
            expected: model.feature_width(),
            got: features.ncols(),
        });
    }
    let mut activations = vec![features.clone()];
    let mut aggregates = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let h_prev = activations.last().unwrap();
        let agg = aggregate_mean(h_prev, graph)?;
        let z = agg.dot(&layer.w.t()) + h_prev.dot(&layer.b.t());
        aggregates.push(agg);
        activations.push(z.mapv(|v| v.max(T::zero())));
    }
    let logits = activations.last().unwrap().dot(&model.head.t());
    let probabilities = softmax_rows(&logits);
    Ok(ForwardPass { activations, aggregates, logits, probabilities })
}

/// Per-node class probabilities; rows sum to 1.
pub fn forward<T: Scalar>(
    model: &SageModel<T>,
    graph: GraphRef<'_, T>,
    features: &Array2<T>,
) -> Result<Array2<T>, ModelError> {
    Ok(forward_cached(model, graph, features)?.probabilities)
}

/// Gradients for every parameter tensor, in [`SageModel::param_tensors`]
/// order.
#[derive(Debug, Clone)]
pub struct Gradients<T: Scalar> {
    pub layers: Vec<(Array2<T>, Array2<T>)>,
    pub head: Array2<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn tensors(&self) -> Vec<&Array2<T>> {
        let mut out: Vec<&Array2<T>> = Vec::with_capacity(self.layers.len() * 2 + 1);
        for (w, b) in &self.layers {
            out.push(w);
            out.push(b);
        }
        out.push(&self.head);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Lambda-normalized cross-entropy loss and its exact gradients.
///
/// `loss = sum_u CE(p_u, y_u) / lambda_u`, with `lambda` = 1 when absent
/// (validation/inference conditions). Probabilities are clamped at
/// [`PROB_CLAMP`] before the log.
pub fn loss_and_gradients<T: Scalar>(
    model: &SageModel<T>,
    graph: GraphRef<'_, T>,
    features: &Array2<T>,
    labels: &[bool],
    lambda: Option<&[T]>,
) -> Result<(T, Gradients<T>), ModelError> {
    let n = graph.num_nodes();
    if labels.len() != n {
        return Err(ModelError::DimensionMismatch {
            place: "loss labels",
            expected: n,
            got: labels.len(),
        });
    }
    if let Some(l) = lambda {
        if l.len() != n {
            return Err(ModelError::DimensionMismatch {
                place: "loss lambda",
                expected: n,
                got: l.len(),
            });
        }
    }
    let pass = forward_cached(model, graph, features)?;
    let clamp = T::from_f64_lossy(PROB_CLAMP);
    let mut loss = T::zero();
    // dL/dlogits = (p - onehot(y)) / lambda_u
    let mut d_logits = pass.probabilities.clone();
    for u in 0..n {
        let y = usize::from(labels[u]);
        let lam = lambda.map(|l| l[u]).unwrap_or_else(T::one);
        let p = pass.probabilities[[u, y]].max(clamp);
        loss += -p.ln() / lam;
        d_logits[[u, y]] -= T::one();
        let mut row = d_logits.row_mut(u);
        for v in row.iter_mut() {
            *v /= lam;
        }
    }
    if !loss.is_finite() {
        return Err(ModelError::NonFiniteLoss);
    }

    let d_head = d_logits.t().dot(pass.activations.last().unwrap());
    let mut d_h = d_logits.dot(&model.head);
    let mut layer_grads: Vec<(Array2<T>, Array2<T>)> = Vec::with_capacity(model.layers.len());
    for (l, layer) in model.layers.iter().enumerate().rev() {
        let h_out = &pass.activations[l + 1];
        let h_prev = &pass.activations[l];
        let agg = &pass.aggregates[l];
        // ReLU subgradient: pass where the activation is positive
        let mut d_z = d_h;
        for (dz, &h) in d_z.iter_mut().zip(h_out.iter()) {
            if h <= T::zero() {
                *dz = T::zero();
            }
        }
        let d_w = d_z.t().dot(agg);
        let d_b = d_z.t().dot(h_prev);
        let d_agg = d_z.dot(&layer.w);
        let mut d_prev = d_z.dot(&layer.b);
        // adjoint of the weighted-mean aggregation
        for u in 0..n {
            let nbrs = &graph.neighbors[u];
            if nbrs.is_empty() {
                continue;
            }
            let inv = T::one() / T::from_usize_lossy(nbrs.len());
            let dau = d_agg.row(u);
            for (i, &v) in nbrs.iter().enumerate() {
                let w = graph.alpha.map(|a| a[u][i]).unwrap_or_else(T::one);
                d_prev.row_mut(v).scaled_add(w * inv, &dau);
            }
        }
        layer_grads.push((d_w, d_b));
        d_h = d_prev;
    }
    layer_grads.reverse();
    Ok((loss, Gradients { layers: layer_grads, head: d_head }))
}

/// Plain SGD: `theta -= lr * grad` for every parameter.
pub fn sgd_step<T: Scalar>(model: &mut SageModel<T>, grads: &Gradients<T>, learning_rate: T) {
    for (layer, (gw, gb)) in model.layers.iter_mut().zip(&grads.layers) {
        layer.w.scaled_add(-learning_rate, gw);
        layer.b.scaled_add(-learning_rate, gb);
    }
    model.head.scaled_add(-learning_rate, &grads.head);
}

// ---------------------------------------------------------------------
// Checkpoint format: structured JSON header plus base64 blobs of
// little-endian f32 parameters, layer order as in `param_tensors`.
// ---------------------------------------------------------------------

const CHECKPOINT_FORMAT: &str = "tskit-checkpoint-v1";

/// A trained model bundled with the training provenance the header
/// records: sampler config, seed and the tuned decision threshold.
#[derive(Debug, Clone)]
pub struct Checkpoint<T: Scalar> {
    pub model: SageModel<T>,
    pub sampler: SamplerConfig,
    pub rng_seed: u64,
    pub threshold: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct LayerBlob {
    w: String,
    b: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRepr {
    format: String,
    dtype: String,
    schema_fingerprint: String,
    feature_width: usize,
    hidden_dims: Vec<usize>,
    rng_seed: u64,
    sampler: SamplerConfig,
    threshold: Option<f64>,
    feature_mean: Option<Vec<f64>>,
    feature_std: Option<Vec<f64>>,
    layers: Vec<LayerBlob>,
    head: String,
}

fn encode_matrix<T: Scalar>(m: &Array2<T>) -> String {
    let mut bytes = Vec::with_capacity(m.len() * 4);
    for v in m.iter() {
        bytes.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    B64.encode(bytes)
}

fn decode_matrix<T: Scalar>(blob: &str, rows: usize, cols: usize) -> Result<Array2<T>, ModelError> {
    let bytes = B64
        .decode(blob)
        .map_err(|e| ModelError::Checkpoint(format!("bad base64 blob: {e}")))?;
    if bytes.len() != rows * cols * 4 {
        return Err(ModelError::Checkpoint(format!(
            "blob holds {} bytes, expected {} ({rows}x{cols} f32)",
            bytes.len(),
            rows * cols * 4
        )));
    }
    let values: Vec<T> = bytes
        .chunks_exact(4)
        .map(|c| T::from_f64_lossy(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| ModelError::Checkpoint(e.to_string()))
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_json(&self) -> String {
        let dims = self.model.dims();
        let repr = CheckpointRepr {
            format: CHECKPOINT_FORMAT.into(),
            dtype: "f32-le".into(),
            schema_fingerprint: self.model.schema_fingerprint.clone(),
            feature_width: dims.feature_width,
            hidden_dims: dims.hidden,
            rng_seed: self.rng_seed,
            sampler: self.sampler.clone(),
            threshold: self.threshold,
            feature_mean: self.model.feature_norm.as_ref().map(|(m, _)| m.clone()),
            feature_std: self.model.feature_norm.as_ref().map(|(_, s)| s.clone()),
            layers: self
                .model
                .layers
                .iter()
                .map(|l| LayerBlob { w: encode_matrix(&l.w), b: encode_matrix(&l.b) })
                .collect(),
            head: encode_matrix(&self.model.head),
        };
        serde_json::to_string_pretty(&repr).expect("checkpoint serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let repr: CheckpointRepr =
            serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        if repr.format != CHECKPOINT_FORMAT {
            return Err(ModelError::Checkpoint(format!("unknown format `{}`", repr.format)));
        }
        if repr.dtype != "f32-le" {
            return Err(ModelError::Checkpoint(format!("unknown dtype `{}`", repr.dtype)));
        }
        if repr.layers.len() != repr.hidden_dims.len() {
            return Err(ModelError::Checkpoint("layer blob count != hidden_dims".into()));
        }
        let mut layers = Vec::with_capacity(repr.layers.len());
        let mut d_in = repr.feature_width;
        for (blob, &d_out) in repr.layers.iter().zip(&repr.hidden_dims) {
            layers.push(SageLayer {
                w: decode_matrix(&blob.w, d_out, d_in)?,
                b: decode_matrix(&blob.b, d_out, d_in)?,
            });
            d_in = d_out;
        }
        let head = decode_matrix(&repr.head, 2, d_in)?;
        let feature_norm = match (repr.feature_mean, repr.feature_std) {
            (Some(m), Some(s)) => {
                if m.len() != repr.feature_width || s.len() != repr.feature_width {
                    return Err(ModelError::Checkpoint("feature_norm width mismatch".into()));
                }
                Some((m, s))
            }
            (None, None) => None,
            _ => return Err(ModelError::Checkpoint("feature_mean/std must come together".into())),
        };
        Ok(Checkpoint {
            model: SageModel {
                layers,
                head,
                schema_fingerprint: repr.schema_fingerprint,
                feature_norm,
            },
            sampler: repr.sampler,
            rng_seed: repr.rng_seed,
            threshold: repr.threshold,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
