//! On-disk graph dataset directory:
//!
//! ```text
//! dataset/
//!   adj.txt      one line per undirected edge "u v" with u < v
//!   feats.csv    node id + one column per feature slot
//!   labels.txt   node id + 0/1
//!   roles.json   {"train": [ids], "validation": [ids], "test": [ids]}
//!   nodes.tsv    node id, design, instance
//!   schema.json  the frozen feature schema
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{BuildError, FeatureSchema, GateGraph, Role};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset file {file}: {reason}")]
    Format { file: &'static str, reason: String },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize, Default)]
struct RolesRepr {
    train: Vec<usize>,
    validation: Vec<usize>,
    test: Vec<usize>,
}

/// Writes all dataset files into `dir` (created if missing).
pub fn write_dataset<T: Scalar>(graph: &GateGraph<T>, dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir)?;

    let mut adj = String::new();
    for (u, v) in graph.edges() {
        adj.push_str(&format!("{u} {v}\n"));
    }
    fs::write(dir.join("adj.txt"), adj)?;

    let mut feats = String::from("node_id");
    for fam in graph.schema().families() {
        feats.push(',');
        feats.push_str(fam);
    }
    for slot in crate::graph::SCALAR_SLOTS {
        feats.push(',');
        feats.push_str(slot);
    }
    feats.push('\n');
    for u in 0..graph.num_nodes() {
        feats.push_str(&u.to_string());
        for x in graph.features().row(u) {
            feats.push(',');
            feats.push_str(&format!("{x}"));
        }
        feats.push('\n');
    }
    fs::write(dir.join("feats.csv"), feats)?;

    let mut labels = String::new();
    for (u, &y) in graph.labels().iter().enumerate() {
        labels.push_str(&format!("{u} {}\n", u8::from(y)));
    }
    fs::write(dir.join("labels.txt"), labels)?;

    let mut roles = RolesRepr::default();
    for (u, role) in graph.roles().iter().enumerate() {
        match role {
            Role::Train => roles.train.push(u),
            Role::Validation => roles.validation.push(u),
            Role::Test => roles.test.push(u),
        }
    }
    fs::write(dir.join("roles.json"), serde_json::to_string_pretty(&roles).unwrap())?;

    let mut nodes = String::new();
    for u in 0..graph.num_nodes() {
        let (design, instance) = graph.origin(u);
        nodes.push_str(&format!("{u}\t{design}\t{instance}\n"));
    }
    fs::write(dir.join("nodes.tsv"), nodes)?;

    fs::write(
        dir.join("schema.json"),
        serde_json::to_string_pretty(graph.schema()).unwrap(),
    )?;
    Ok(())
}

fn format_err(file: &'static str, reason: impl Into<String>) -> DatasetError {
    DatasetError::Format { file, reason: reason.into() }
}

/// Loads a dataset directory back into a [`GateGraph`].
pub fn load_dataset<T: Scalar>(dir: &Path) -> Result<GateGraph<T>, DatasetError> {
    let schema: FeatureSchema = serde_json::from_str(&fs::read_to_string(dir.join("schema.json"))?)
        .map_err(|e| format_err("schema.json", e.to_string()))?;

    let feats_text = fs::read_to_string(dir.join("feats.csv"))?;
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (i, line) in feats_text.lines().enumerate() {
        if i == 0 {
            continue; // header
        }
        let mut parts = line.split(',');
        let id: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err("feats.csv", format!("bad node id on line {}", i + 1)))?;
        if id != rows.len() {
            return Err(format_err("feats.csv", format!("node ids must be dense; got {id}")));
        }
        let row: Vec<T> = parts
            .map(|s| {
                s.parse::<f64>()
                    .map(T::from_f64_lossy)
                    .map_err(|e| format_err("feats.csv", format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<_, _>>()?;
        if row.len() != schema.width() {
            return Err(format_err(
                "feats.csv",
                format!("line {}: {} columns, schema wants {}", i + 1, row.len(), schema.width()),
            ));
        }
        rows.push(row);
    }
    let n = rows.len();
    let mut features = Array2::<T>::zeros((n, schema.width()));
    for (u, row) in rows.iter().enumerate() {
        for (c, &x) in row.iter().enumerate() {
            features[[u, c]] = x;
        }
    }

    let mut neighbors = vec![Vec::new(); n];
    for (i, line) in fs::read_to_string(dir.join("adj.txt"))?.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let (u, v): (usize, usize) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (
                a.parse().map_err(|_| format_err("adj.txt", format!("line {}", i + 1)))?,
                b.parse().map_err(|_| format_err("adj.txt", format!("line {}", i + 1)))?,
            ),
            _ => return Err(format_err("adj.txt", format!("line {}: expected `u v`", i + 1))),
        };
        if u >= n || v >= n {
            return Err(format_err("adj.txt", format!("line {}: node out of range", i + 1)));
        }
        neighbors[u].push(v);
        neighbors[v].push(u);
    }
    for list in &mut neighbors {
        list.sort_unstable();
        list.dedup();
    }

    let mut labels = vec![false; n];
    for (i, line) in fs::read_to_string(dir.join("labels.txt"))?.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let (u, y): (usize, u8) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (
                a.parse().map_err(|_| format_err("labels.txt", format!("line {}", i + 1)))?,
                b.parse().map_err(|_| format_err("labels.txt", format!("line {}", i + 1)))?,
            ),
            _ => return Err(format_err("labels.txt", format!("line {}", i + 1))),
        };
        if u >= n {
            return Err(format_err("labels.txt", format!("line {}: node out of range", i + 1)));
        }
        labels[u] = y != 0;
    }

    let roles_repr: RolesRepr = serde_json::from_str(&fs::read_to_string(dir.join("roles.json"))?)
        .map_err(|e| format_err("roles.json", e.to_string()))?;
    let mut roles = vec![None; n];
    for (ids, role) in [
        (&roles_repr.train, Role::Train),
        (&roles_repr.validation, Role::Validation),
        (&roles_repr.test, Role::Test),
    ] {
        for &u in ids {
            if u >= n {
                return Err(format_err("roles.json", format!("node {u} out of range")));
            }
            if roles[u].replace(role).is_some() {
                return Err(format_err("roles.json", format!("node {u} assigned two roles")));
            }
        }
    }
    let roles: Vec<Role> = roles
        .into_iter()
        .enumerate()
        .map(|(u, r)| r.ok_or_else(|| format_err("roles.json", format!("node {u} has no role"))))
        .collect::<Result<_, _>>()?;

    let mut designs: Vec<String> = Vec::new();
    let mut design_index: HashMap<String, usize> = HashMap::new();
    let mut node_design = vec![0usize; n];
    let mut node_instance = vec![String::new(); n];
    for (i, line) in fs::read_to_string(dir.join("nodes.tsv"))?.lines().enumerate() {
        let mut parts = line.split('\t');
        let (u, design, instance) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(d), Some(inst)) => (
                a.parse::<usize>()
                    .map_err(|_| format_err("nodes.tsv", format!("line {}", i + 1)))?,
                d.to_string(),
                inst.to_string(),
            ),
            _ => return Err(format_err("nodes.tsv", format!("line {}", i + 1))),
        };
        if u >= n {
            return Err(format_err("nodes.tsv", format!("line {}: node out of range", i + 1)));
        }
        let idx = *design_index.entry(design.clone()).or_insert_with(|| {
            designs.push(design);
            designs.len() - 1
        });
        node_design[u] = idx;
        node_instance[u] = instance;
    }

    Ok(GateGraph::from_parts(
        neighbors,
        features,
        labels,
        roles,
        designs,
        node_design,
        node_instance,
        schema,
    )?)
}
