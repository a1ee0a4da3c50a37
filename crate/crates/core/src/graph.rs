//! Conversion of parsed netlists into one disjoint undirected gate
//! graph with per-node features, hardware-Trojan labels and
//! train/validation/test roles.
//!
//! Nodes are gates; PIs/POs are not nodes and enter only through the
//! distance features. Edges connect a net's driver to each of its
//! sinks, with directionality discarded in the adjacency but kept for
//! the in/out-degree features.

use std::collections::{HashMap, HashSet, VecDeque};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::Netlist;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Validation,
    Test,
}

/// Fixed ordering of the non-one-hot feature slots.
pub const SCALAR_SLOTS: [&str; 4] = ["in_degree", "out_degree", "dist_to_pi", "dist_to_po"];

/// Distance sentinel for gates that cannot reach any PI (resp. PO).
/// Reachable gates always have distance >= 1 under the convention that
/// a gate touching a primary port net has distance 1.
pub const UNREACHABLE: usize = 0;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("design `{0}` has zero cells")]
    EmptyDesign(String),
    #[error("duplicate design name `{0}` in graph build")]
    DuplicateDesign(String),
    #[error("label list names `{instance}` which is absent from design `{design}`")]
    LabelFileMismatch { design: String, instance: String },
    #[error("invalid feature schema: {0}")]
    InvalidSchema(String),
    #[error("graph invariant violated: {0}")]
    Invariant(String),
}

/// Frozen one-hot vocabulary plus the four scalar slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    gate_families: Vec<String>,
}

impl FeatureSchema {
    /// Builds a schema, appending the mandatory trailing OTHER slot when
    /// missing. OTHER anywhere but last is rejected.
    pub fn new(mut families: Vec<String>) -> Result<Self, BuildError> {
        if families.is_empty() {
            return Err(BuildError::InvalidSchema("family list is empty".into()));
        }
        for f in &mut families {
            *f = f.to_uppercase();
        }
        let mut seen = HashSet::new();
        for f in &families {
            if !seen.insert(f.clone()) {
                return Err(BuildError::InvalidSchema(format!("duplicate family `{f}`")));
            }
        }
        match families.iter().position(|f| f == "OTHER") {
            Some(i) if i + 1 == families.len() => {}
            Some(_) => {
                return Err(BuildError::InvalidSchema("OTHER must be the final slot".into()))
            }
            None => families.push("OTHER".into()),
        }
        Ok(FeatureSchema { gate_families: families })
    }

    pub fn default_vocabulary() -> Self {
        Self::new(
            ["AND", "NAND", "OR", "NOR", "XOR", "XNOR", "INV", "BUF", "MUX", "DFF", "LATCH", "AOI", "OAI", "OTHER"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
        .expect("default vocabulary is valid")
    }

    pub fn families(&self) -> &[String] {
        &self.gate_families
    }

    /// Feature width: one-hot slots plus the four scalar slots.
    pub fn width(&self) -> usize {
        self.gate_families.len() + SCALAR_SLOTS.len()
    }

    /// One-hot slot for a family name; unknown families land on OTHER.
    pub fn family_slot(&self, family: &str) -> usize {
        let upper = family.to_uppercase();
        self.gate_families
            .iter()
            .position(|f| *f == upper)
            .unwrap_or(self.gate_families.len() - 1)
    }

    /// Stable identity hash binding models to the schema they saw.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for f in &self.gate_families {
            hasher.update(f.as_bytes());
            hasher.update([0u8]);
        }
        for s in SCALAR_SLOTS {
            hasher.update(s.as_bytes());
            hasher.update([0u8]);
        }
        hex_string(&hasher.finalize())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Instance-name patterns (case-insensitive substrings) plus optional
/// per-design explicit gate lists marking HT membership.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRule {
    #[serde(default = "LabelRule::default_patterns")]
    pub patterns: Vec<String>,
    #[serde(default)]
    pub explicit: HashMap<String, Vec<String>>,
}

impl LabelRule {
    fn default_patterns() -> Vec<String> {
        vec!["troj".into(), "tj".into()]
    }
}

impl Default for LabelRule {
    fn default() -> Self {
        LabelRule { patterns: Self::default_patterns(), explicit: HashMap::new() }
    }
}

/// The assembled disjoint union graph.
#[derive(Debug, Clone)]
pub struct GateGraph<T: Scalar> {
    neighbors: Vec<Vec<usize>>,
    features: Array2<T>,
    labels: Vec<bool>,
    roles: Vec<Role>,
    designs: Vec<String>,
    node_design: Vec<usize>,
    node_instance: Vec<String>,
    schema: FeatureSchema,
}

impl<T: Scalar> GateGraph<T> {
    /// Assembles a graph from raw parts, validating the adjacency
    /// invariants (symmetry, no self-loops, sorted unique neighbor
    /// lists) and the cross-field length agreements.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        neighbors: Vec<Vec<usize>>,
        features: Array2<T>,
        labels: Vec<bool>,
        roles: Vec<Role>,
        designs: Vec<String>,
        node_design: Vec<usize>,
        node_instance: Vec<String>,
        schema: FeatureSchema,
    ) -> Result<Self, BuildError> {
        let n = neighbors.len();
        if features.nrows() != n || labels.len() != n || roles.len() != n
            || node_design.len() != n || node_instance.len() != n
        {
            return Err(BuildError::Invariant("per-node array lengths disagree".into()));
        }
        if features.ncols() != schema.width() {
            return Err(BuildError::Invariant(format!(
                "feature width {} does not match schema width {}",
                features.ncols(),
                schema.width()
            )));
        }
        for (u, list) in neighbors.iter().enumerate() {
            for (i, &v) in list.iter().enumerate() {
                if v >= n {
                    return Err(BuildError::Invariant(format!("neighbor {v} out of range")));
                }
                if v == u {
                    return Err(BuildError::Invariant(format!("self-loop at node {u}")));
                }
                if i > 0 && list[i - 1] >= v {
                    return Err(BuildError::Invariant(format!(
                        "neighbor list of {u} not sorted/unique"
                    )));
                }
                if neighbors[v].binary_search(&u).is_err() {
                    return Err(BuildError::Invariant(format!("edge {u}-{v} not symmetric")));
                }
            }
        }
        for &d in &node_design {
            if d >= designs.len() {
                return Err(BuildError::Invariant("node design index out of range".into()));
            }
        }
        Ok(GateGraph {
            neighbors,
            features,
            labels,
            roles,
            designs,
            node_design,
            node_instance,
            schema,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[u]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn features(&self) -> &Array2<T> {
        &self.features
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn designs(&self) -> &[String] {
        &self.designs
    }

    /// (design, instance) provenance of a node, for reporting.
    pub fn origin(&self, u: usize) -> (&str, &str) {
        (&self.designs[self.node_design[u]], &self.node_instance[u])
    }

    pub fn nodes_with_role(&self, role: Role) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&u| self.roles[u] == role).collect()
    }

    pub fn design_nodes(&self, design: &str) -> Vec<usize> {
        match self.designs.iter().position(|d| d == design) {
            Some(idx) => {
                (0..self.num_nodes()).filter(|&u| self.node_design[u] == idx).collect()
            }
            None => Vec::new(),
        }
    }

    /// Undirected edges as (u, v) with u < v, ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, list) in self.neighbors.iter().enumerate() {
            for &v in list {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

/// Per-design directed degree and undirected wiring facts computed from
/// the net driver/sink relation.
struct DesignWiring {
    neighbors: Vec<Vec<usize>>,
    in_degree: Vec<usize>,
    out_degree: Vec<usize>,
}

fn design_wiring(netlist: &Netlist) -> DesignWiring {
    let n = netlist.cells.len();
    let mut drivers: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut sinks: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut in_degree = vec![0usize; n];
    for (ci, cell) in netlist.cells.iter().enumerate() {
        in_degree[ci] = cell.input_pins.len();
        for (_, net) in &cell.output_pins {
            drivers.entry(*net).or_default().push(ci);
        }
        for (_, net) in &cell.input_pins {
            sinks.entry(*net).or_default().push(ci);
        }
    }
    let mut out_degree = vec![0usize; n];
    let mut edge_set: HashSet<(usize, usize)> = HashSet::new();
    for (net, ds) in &drivers {
        let sink_pins = sinks.get(net).map(Vec::as_slice).unwrap_or(&[]);
        for &d in ds {
            out_degree[d] += sink_pins.len();
            for &s in sink_pins {
                if d != s {
                    edge_set.insert((d.min(s), d.max(s)));
                }
            }
        }
    }
    let mut neighbors = vec![Vec::new(); n];
    for &(u, v) in &edge_set {
        neighbors[u].push(v);
        neighbors[v].push(u);
    }
    for list in &mut neighbors {
        list.sort_unstable();
    }
    DesignWiring { neighbors, in_degree, out_degree }
}

/// Multi-source BFS distances over the undirected gate graph. Gates with
/// a pin on any of `port_nets` start at distance 1; unreachable gates
/// keep the 0 sentinel.
fn port_distances(netlist: &Netlist, neighbors: &[Vec<usize>], port_nets: &HashSet<usize>) -> Vec<usize> {
    let n = netlist.cells.len();
    let mut dist = vec![UNREACHABLE; n];
    let mut queue = VecDeque::new();
    for (ci, cell) in netlist.cells.iter().enumerate() {
        let touches = cell
            .input_pins
            .iter()
            .chain(&cell.output_pins)
            .any(|(_, net)| port_nets.contains(net));
        if touches {
            dist[ci] = 1;
            queue.push_back(ci);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &v in &neighbors[u] {
            if dist[v] == UNREACHABLE {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Per-gate feature rows for one design: one-hot family, directed
/// degrees, BFS distances to primary inputs and outputs.
pub fn extract_features<T: Scalar>(netlist: &Netlist, schema: &FeatureSchema) -> Array2<T> {
    let wiring = design_wiring(netlist);
    extract_features_with(netlist, schema, &wiring)
}

fn extract_features_with<T: Scalar>(
    netlist: &Netlist,
    schema: &FeatureSchema,
    wiring: &DesignWiring,
) -> Array2<T> {
    let n = netlist.cells.len();
    let width = schema.width();
    let pi_nets: HashSet<usize> = netlist.primary_inputs.iter().copied().collect();
    let po_nets: HashSet<usize> = netlist.primary_outputs.iter().copied().collect();
    let dist_pi = port_distances(netlist, &wiring.neighbors, &pi_nets);
    let dist_po = port_distances(netlist, &wiring.neighbors, &po_nets);
    let onehot = schema.gate_families.len();
    let mut rows = Array2::<T>::zeros((n, width));
    for (ci, cell) in netlist.cells.iter().enumerate() {
        rows[[ci, schema.family_slot(&cell.family)]] = T::one();
        rows[[ci, onehot]] = T::from_usize_lossy(wiring.in_degree[ci]);
        rows[[ci, onehot + 1]] = T::from_usize_lossy(wiring.out_degree[ci]);
        rows[[ci, onehot + 2]] = T::from_usize_lossy(dist_pi[ci]);
        rows[[ci, onehot + 3]] = T::from_usize_lossy(dist_po[ci]);
    }
    rows
}

/// Binary HT labels for one design under a [`LabelRule`].
pub fn derive_labels(netlist: &Netlist, rule: &LabelRule) -> Result<Vec<bool>, BuildError> {
    let patterns: Vec<String> = rule.patterns.iter().map(|p| p.to_lowercase()).collect();
    let explicit: HashSet<&str> = rule
        .explicit
        .get(&netlist.name)
        .map(|v| v.iter().map(String::as_str).collect())
        .unwrap_or_default();
    let known: HashSet<&str> = netlist.cells.iter().map(|c| c.instance_name.as_str()).collect();
    for name in &explicit {
        if !known.contains(name) {
            return Err(BuildError::LabelFileMismatch {
                design: netlist.name.clone(),
                instance: name.to_string(),
            });
        }
    }
    Ok(netlist
        .cells
        .iter()
        .map(|c| {
            let lower = c.instance_name.to_lowercase();
            patterns.iter().any(|p| lower.contains(p)) || explicit.contains(c.instance_name.as_str())
        })
        .collect())
}

/// Builds the disjoint union graph across designs. Node ids follow the
/// input order (designs, then cells within each design).
pub fn build_graph<T: Scalar>(
    netlists: &[(Netlist, Role)],
    schema: &FeatureSchema,
    label_rule: &LabelRule,
) -> Result<GateGraph<T>, BuildError> {
    let mut seen = HashSet::new();
    for (nl, _) in netlists {
        if nl.cells.is_empty() {
            return Err(BuildError::EmptyDesign(nl.name.clone()));
        }
        if !seen.insert(nl.name.as_str()) {
            return Err(BuildError::DuplicateDesign(nl.name.clone()));
        }
    }
    let total: usize = netlists.iter().map(|(nl, _)| nl.cells.len()).sum();
    let width = schema.width();
    let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(total);
    let mut features = Array2::<T>::zeros((total, width));
    let mut labels = Vec::with_capacity(total);
    let mut roles = Vec::with_capacity(total);
    let mut designs = Vec::with_capacity(netlists.len());
    let mut node_design = Vec::with_capacity(total);
    let mut node_instance = Vec::with_capacity(total);
    let mut offset = 0usize;
    for (design_idx, (nl, role)) in netlists.iter().enumerate() {
        let wiring = design_wiring(nl);
        let rows = extract_features_with::<T>(nl, schema, &wiring);
        let local_labels = derive_labels(nl, label_rule)?;
        for (ci, cell) in nl.cells.iter().enumerate() {
            neighbors.push(wiring.neighbors[ci].iter().map(|&v| v + offset).collect());
            for col in 0..width {
                features[[offset + ci, col]] = rows[[ci, col]];
            }
            labels.push(local_labels[ci]);
            roles.push(*role);
            node_design.push(design_idx);
            node_instance.push(cell.instance_name.clone());
        }
        designs.push(nl.name.clone());
        offset += nl.cells.len();
    }
    GateGraph::from_parts(
        neighbors,
        features,
        labels,
        roles,
        designs,
        node_design,
        node_instance,
        schema.clone(),
    )
}

/// HT-to-benign node ratios, per design and aggregate.
#[derive(Debug, Clone, Serialize)]
pub struct ImbalanceReport {
    pub per_design: Vec<(String, f64)>,
    pub aggregate: f64,
}

fn ratio(ht: usize, benign: usize) -> f64 {
    if ht == 0 {
        0.0
    } else if benign == 0 {
        f64::INFINITY
    } else {
        ht as f64 / benign as f64
    }
}

pub fn compute_imbalance<T: Scalar>(graph: &GateGraph<T>) -> ImbalanceReport {
    let mut per = vec![(0usize, 0usize); graph.designs.len()];
    let mut total = (0usize, 0usize);
    for u in 0..graph.num_nodes() {
        let slot = &mut per[graph.node_design[u]];
        if graph.labels[u] {
            slot.0 += 1;
            total.0 += 1;
        } else {
            slot.1 += 1;
            total.1 += 1;
        }
    }
    ImbalanceReport {
        per_design: graph
            .designs
            .iter()
            .zip(&per)
            .map(|(name, &(ht, benign))| (name.clone(), ratio(ht, benign)))
            .collect(),
        aggregate: ratio(total.0, total.1),
    }
}

/// Raw HT/benign count ratio, exposed for tabulated count inputs.
pub fn imbalance_ratio(ht: usize, benign: usize) -> f64 {
    ratio(ht, benign)
}

/// Per-feature mean and standard deviation over `nodes`, for the
/// optional train-time standardization flag.
pub fn feature_stats<T: Scalar>(graph: &GateGraph<T>, nodes: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let width = graph.features.ncols();
    let mut mean = vec![0.0f64; width];
    let mut var = vec![0.0f64; width];
    let count = nodes.len().max(1) as f64;
    for &u in nodes {
        for (c, m) in mean.iter_mut().enumerate() {
            *m += graph.features[[u, c]].to_f64_lossy();
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    for &u in nodes {
        for (c, v) in var.iter_mut().enumerate() {
            let d = graph.features[[u, c]].to_f64_lossy() - mean[c];
            *v += d * d;
        }
    }
    let std: Vec<f64> = var
        .iter()
        .map(|v| {
            let s = (v / count).sqrt();
            if s < 1e-9 {
                1.0
            } else {
                s
            }
        })
        .collect();
    (mean, std)
}

/// Applies `(x - mean) / std` column-wise, returning a new matrix.
pub fn standardize<T: Scalar>(features: &Array2<T>, mean: &[f64], std: &[f64]) -> Array2<T> {
    let mut out = features.clone();
    for mut row in out.rows_mut() {
        for (c, x) in row.iter_mut().enumerate() {
            *x = T::from_f64_lossy((x.to_f64_lossy() - mean[c]) / std[c]);
        }
    }
    out
}
