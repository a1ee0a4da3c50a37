//! Gate-level netlist Trojan scanning toolkit.
//!
//! The pipeline: parse flattened structural Verilog netlists into a
//! [`netlist::Netlist`], assemble designs into one disjoint undirected
//! [`graph::GateGraph`] with per-gate features and labels, train a
//! sampling-based GraphSAGE classifier on random-walk subgraphs, tune
//! the decision threshold on validation gates, and report per-gate
//! Trojan predictions with TPR/TNR under the practical or relaxed
//! validation protocol.
//!
//! Numeric code is generic over the scalar type ([`scalar::Scalar`],
//! f32 or f64); the aliases below fix the common choices. Checkpoints
//! always store parameters as little-endian f32 regardless of the
//! in-memory scalar.

pub mod dataset;
pub mod eval;
pub mod graph;
pub mod inference;
pub mod library;
pub mod model;
pub mod netlist;
pub mod sampler;
pub mod scalar;
pub mod synthetic;
pub mod trainer;
pub mod verilog;

pub use scalar::Scalar;

/// Single-precision gate graph (matches the checkpoint blob width).
pub type GateGraphF32 = graph::GateGraph<f32>;
/// Double-precision gate graph (default for training and evaluation).
pub type GateGraphF64 = graph::GateGraph<f64>;
pub type SageModelF32 = model::SageModel<f32>;
pub type SageModelF64 = model::SageModel<f64>;
pub type CheckpointF32 = model::Checkpoint<f32>;
pub type CheckpointF64 = model::Checkpoint<f64>;
pub type SubgraphF32 = sampler::Subgraph<f32>;
pub type SubgraphF64 = sampler::Subgraph<f64>;
