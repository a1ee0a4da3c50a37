//! Parsed structural netlist representation and its canonical JSON
//! interchange format.
//!
//! A [`Netlist`] is the flattened view of one design: library-cell
//! instances, the scalar nets wiring them together, and the primary
//! input/output nets. Values are immutable after construction and safe
//! to share across threads.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index into [`Netlist::nets`].
pub type NetId = usize;

/// One library-cell instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub instance_name: String,
    /// Library cell identifier as written in source (e.g. `AND2X1`).
    pub cell_type: String,
    /// Functional gate family resolved at parse time (e.g. `AND`, `DFF`).
    pub family: String,
    pub input_pins: Vec<(String, NetId)>,
    pub output_pins: Vec<(String, NetId)>,
}

impl Cell {
    /// A cell with no output pins only sinks signals (e.g. an output pad).
    pub fn is_sink_only(&self) -> bool {
        self.output_pins.is_empty()
    }
}

/// A parsed flattened design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    /// Top module identifier.
    pub name: String,
    /// Unique scalar net identifiers; positions are the [`NetId`] space.
    pub nets: Vec<String>,
    pub cells: Vec<Cell>,
    pub primary_inputs: Vec<NetId>,
    pub primary_outputs: Vec<NetId>,
}

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("duplicate net identifier `{0}`")]
    DuplicateNet(String),
    #[error("duplicate cell instance `{0}`")]
    DuplicateInstance(String),
    #[error("cell `{cell}` pin `{pin}` references unknown net `{net}`")]
    UnknownNet { cell: String, pin: String, net: String },
    #[error("duplicate pin `{pin}` on cell `{cell}`")]
    DuplicatePin { cell: String, pin: String },
    #[error("unknown primary port net `{net}`")]
    UnknownPort { is_input: bool, net: String },
    #[error("malformed interchange JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Serialize, Deserialize)]
struct CellRepr {
    instance: String,
    cell_type: String,
    family: String,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct NetlistRepr {
    name: String,
    nets: Vec<String>,
    cells: Vec<CellRepr>,
    primary_inputs: Vec<String>,
    primary_outputs: Vec<String>,
}

impl Netlist {
    /// Validates the structural invariants: unique nets and instance
    /// names, in-range pin references, no duplicate pin names per cell.
    pub fn validate(&self) -> Result<(), InterchangeError> {
        let mut seen_nets = HashSet::with_capacity(self.nets.len());
        for net in &self.nets {
            if !seen_nets.insert(net.as_str()) {
                return Err(InterchangeError::DuplicateNet(net.clone()));
            }
        }
        let mut seen_cells = HashSet::with_capacity(self.cells.len());
        for cell in &self.cells {
            if !seen_cells.insert(cell.instance_name.as_str()) {
                return Err(InterchangeError::DuplicateInstance(cell.instance_name.clone()));
            }
            let mut seen_pins = HashSet::new();
            for (pin, net) in cell.input_pins.iter().chain(&cell.output_pins) {
                if !seen_pins.insert(pin.as_str()) {
                    return Err(InterchangeError::DuplicatePin {
                        cell: cell.instance_name.clone(),
                        pin: pin.clone(),
                    });
                }
                if *net >= self.nets.len() {
                    return Err(InterchangeError::UnknownNet {
                        cell: cell.instance_name.clone(),
                        pin: pin.clone(),
                        net: format!("#{net}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.nets[id]
    }

    /// Serializes to the canonical interchange JSON. Net references are
    /// written by name so the file is stable under tooling changes.
    pub fn to_json(&self) -> String {
        let repr = NetlistRepr {
            name: self.name.clone(),
            nets: self.nets.clone(),
            cells: self
                .cells
                .iter()
                .map(|c| CellRepr {
                    instance: c.instance_name.clone(),
                    cell_type: c.cell_type.clone(),
                    family: c.family.clone(),
                    inputs: c
                        .input_pins
                        .iter()
                        .map(|(p, n)| (p.clone(), self.nets[*n].clone()))
                        .collect(),
                    outputs: c
                        .output_pins
                        .iter()
                        .map(|(p, n)| (p.clone(), self.nets[*n].clone()))
                        .collect(),
                })
                .collect(),
            primary_inputs: self.primary_inputs.iter().map(|&n| self.nets[n].clone()).collect(),
            primary_outputs: self.primary_outputs.iter().map(|&n| self.nets[n].clone()).collect(),
        };
        serde_json::to_string_pretty(&repr).expect("netlist serialization")
    }

    /// Loads the canonical interchange JSON produced by [`Netlist::to_json`].
    pub fn from_json(text: &str) -> Result<Self, InterchangeError> {
        let repr: NetlistRepr = serde_json::from_str(text)?;
        let mut index: HashMap<&str, NetId> = HashMap::with_capacity(repr.nets.len());
        for (id, net) in repr.nets.iter().enumerate() {
            if index.insert(net.as_str(), id).is_some() {
                return Err(InterchangeError::DuplicateNet(net.clone()));
            }
        }
        let lookup = |cell: &str, pin: &str, net: &str| -> Result<NetId, InterchangeError> {
            index.get(net).copied().ok_or_else(|| InterchangeError::UnknownNet {
                cell: cell.to_string(),
                pin: pin.to_string(),
                net: net.to_string(),
            })
        };
        let mut cells = Vec::with_capacity(repr.cells.len());
        for c in &repr.cells {
            let mut input_pins = Vec::with_capacity(c.inputs.len());
            for (pin, net) in &c.inputs {
                input_pins.push((pin.clone(), lookup(&c.instance, pin, net)?));
            }
            let mut output_pins = Vec::with_capacity(c.outputs.len());
            for (pin, net) in &c.outputs {
                output_pins.push((pin.clone(), lookup(&c.instance, pin, net)?));
            }
            cells.push(Cell {
                instance_name: c.instance.clone(),
                cell_type: c.cell_type.clone(),
                family: c.family.clone(),
                input_pins,
                output_pins,
            });
        }
        let port = |net: &String, is_input: bool| -> Result<NetId, InterchangeError> {
            index
                .get(net.as_str())
                .copied()
                .ok_or_else(|| InterchangeError::UnknownPort { is_input, net: net.clone() })
        };
        let netlist = Netlist {
            name: repr.name,
            nets: repr.nets.clone(),
            cells,
            primary_inputs: repr
                .primary_inputs
                .iter()
                .map(|n| port(n, true))
                .collect::<Result<_, _>>()?,
            primary_outputs: repr
                .primary_outputs
                .iter()
                .map(|n| port(n, false))
                .collect::<Result<_, _>>()?,
        };
        netlist.validate()?;
        Ok(netlist)
    }
}
