//! Deterministic synthetic netlist corpus with planted Trojan
//! subcircuits, used by the desk-scale end-to-end checks and the demo
//! workflow.
//!
//! Benign logic draws from inverter/buffer/and/or/mux/flop cells;
//! planted trigger-plus-payload chains use xor/xnor/aoi/oai cells and
//! `troj_*` instance names, so the default label patterns mark them and
//! a feature-only classifier can separate them. Trojans tap benign nets
//! and re-route one victim input, keeping them wired into the fabric.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eval::ExperimentConfig;
use crate::inference::ThresholdConfig;
use crate::sampler::SamplerConfig;
use crate::trainer::TrainConfig;

/// Parameters of one generated design.
#[derive(Debug, Clone)]
pub struct DesignSpec {
    pub name: String,
    pub benign_gates: usize,
    pub trojan_gates: usize,
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub seed: u64,
}

/// The shipped four-design corpus: two families, two variants each,
/// 200-600 gates, trojans of 5-15 gates.
pub fn toy_corpus_specs() -> Vec<DesignSpec> {
    vec![
        DesignSpec {
            name: "pipeline_t100".into(),
            benign_gates: 230,
            trojan_gates: 9,
            num_inputs: 12,
            num_outputs: 6,
            seed: 1001,
        },
        DesignSpec {
            name: "pipeline_t200".into(),
            benign_gates: 370,
            trojan_gates: 12,
            num_inputs: 14,
            num_outputs: 8,
            seed: 1002,
        },
        DesignSpec {
            name: "crossbar_t100".into(),
            benign_gates: 300,
            trojan_gates: 7,
            num_inputs: 10,
            num_outputs: 5,
            seed: 1003,
        },
        DesignSpec {
            name: "crossbar_t200".into(),
            benign_gates: 540,
            trojan_gates: 15,
            num_inputs: 16,
            num_outputs: 9,
            seed: 1004,
        },
    ]
}

/// Library profile covering every cell the generator emits.
pub fn library_profile_text() -> &'static str {
    "# generated-cell library\n\
     INV*: A=in, Y=out, family=INV\n\
     BUF*: A=in, Y=out, family=BUF\n\
     NAND*: A=in, B=in, Y=out, family=NAND\n\
     NOR*: A=in, B=in, Y=out, family=NOR\n\
     AND*: A=in, B=in, Y=out, family=AND\n\
     OR*: A=in, B=in, Y=out, family=OR\n\
     XOR*: A=in, B=in, Y=out, family=XOR\n\
     XNOR*: A=in, B=in, Y=out, family=XNOR\n\
     MUX*: A=in, B=in, S=in, Y=out, family=MUX\n\
     DFF*: D=in, CLK=in, Q=out, family=DFF\n\
     AOI21*: A=in, B=in, C=in, Y=out, family=AOI\n\
     OAI21*: A=in, B=in, C=in, Y=out, family=OAI\n"
}

/// Training configuration sized for the toy corpus: minutes of CPU, not
/// cluster time.
pub fn toy_experiment_config() -> ExperimentConfig {
    ExperimentConfig {
        train: TrainConfig {
            epochs: 40,
            minibatches_per_epoch: 8,
            learning_rate: 0.02,
            hidden: vec![32],
            sampler: SamplerConfig {
                num_roots: Some(60),
                walk_length: 2,
                rng_seed: 0,
                presample_rounds: 50,
            },
            rng_seed: 0,
            patience: 12,
            standardize: true,
            threshold: ThresholdConfig::default(),
        },
        seeds: (0..6).collect(),
        split_seed: 0,
        schema_families: None,
        labels: Default::default(),
    }
}

struct Gate {
    cell_type: &'static str,
    instance: String,
    conns: Vec<(&'static str, String)>,
}

/// Renders one design as structural Verilog.
pub fn generate_design(spec: &DesignSpec) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let inputs: Vec<String> = (0..spec.num_inputs).map(|i| format!("in{i}")).collect();
    let clk = "clk".to_string();

    let mut nets: Vec<String> = inputs.clone();
    let mut gates: Vec<Gate> = Vec::with_capacity(spec.benign_gates + spec.trojan_gates);
    let mut wires: Vec<String> = Vec::new();

    // recent-net picker: keeps the netlist locally wired like a real
    // synthesized circuit instead of a random hairball
    let pick = |rng: &mut ChaCha8Rng, nets: &[String]| -> String {
        let window = nets.len().min(24);
        nets[nets.len() - 1 - rng.random_range(0..window)].clone()
    };

    for i in 0..spec.benign_gates {
        let out = format!("n{i}");
        let roll = rng.random_range(0..100);
        let gate = if roll < 22 {
            Gate {
                cell_type: "NAND2X1",
                instance: format!("u{i}"),
                conns: vec![
                    ("A", pick(&mut rng, &nets)),
                    ("B", pick(&mut rng, &nets)),
                    ("Y", out.clone()),
                ],
            }
        } else if roll < 38 {
            Gate {
                cell_type: "NOR2X1",
                instance: format!("u{i}"),
                conns: vec![
                    ("A", pick(&mut rng, &nets)),
                    ("B", pick(&mut rng, &nets)),
                    ("Y", out.clone()),
                ],
            }
        } else if roll < 52 {
            Gate {
                cell_type: "AND2X1",
                instance: format!("u{i}"),
                conns: vec![
                    ("A", pick(&mut rng, &nets)),
                    ("B", pick(&mut rng, &nets)),
                    ("Y", out.clone()),
                ],
            }
        } else if roll < 64 {
            Gate {
                cell_type: "OR2X1",
                instance: format!("u{i}"),
                conns: vec![
                    ("A", pick(&mut rng, &nets)),
                    ("B", pick(&mut rng, &nets)),
                    ("Y", out.clone()),
                ],
            }
        } else if roll < 80 {
            Gate {
                cell_type: "INVX1",
                instance: format!("u{i}"),
                conns: vec![("A", pick(&mut rng, &nets)), ("Y", out.clone())],
            }
        } else if roll < 85 {
            Gate {
                cell_type: "BUFX2",
                instance: format!("u{i}"),
                conns: vec![("A", pick(&mut rng, &nets)), ("Y", out.clone())],
            }
        } else if roll < 93 {
            Gate {
                cell_type: "DFFX1",
                instance: format!("u{i}"),
                conns: vec![("D", pick(&mut rng, &nets)), ("CLK", clk.clone()), ("Q", out.clone())],
            }
        } else {
            Gate {
                cell_type: "MUX2X1",
                instance: format!("u{i}"),
                conns: vec![
                    ("A", pick(&mut rng, &nets)),
                    ("B", pick(&mut rng, &nets)),
                    ("S", pick(&mut rng, &nets)),
                    ("Y", out.clone()),
                ],
            }
        };
        gates.push(gate);
        wires.push(out.clone());
        nets.push(out);
    }

    // trigger chain + payload, all in the trojan-only cell families
    let t = spec.trojan_gates.max(3);
    let benign_net = |rng: &mut ChaCha8Rng| -> String {
        format!("n{}", rng.random_range(spec.benign_gates / 4..spec.benign_gates))
    };
    let mut prev = {
        let out = format!("tn{}", 0);
        gates.push(Gate {
            cell_type: "XOR2X1",
            instance: format!("troj_{}_0", spec.name),
            conns: vec![
                ("A", benign_net(&mut rng)),
                ("B", benign_net(&mut rng)),
                ("Y", out.clone()),
            ],
        });
        wires.push(out.clone());
        out
    };
    for k in 1..t - 1 {
        let out = format!("tn{k}");
        let gate = match k % 3 {
            0 => Gate {
                cell_type: "XNOR2X1",
                instance: format!("troj_{}_{k}", spec.name),
                conns: vec![("A", prev.clone()), ("B", benign_net(&mut rng)), ("Y", out.clone())],
            },
            1 => Gate {
                cell_type: "AOI21X1",
                instance: format!("troj_{}_{k}", spec.name),
                conns: vec![
                    ("A", prev.clone()),
                    ("B", benign_net(&mut rng)),
                    ("C", benign_net(&mut rng)),
                    ("Y", out.clone()),
                ],
            },
            _ => Gate {
                cell_type: "OAI21X1",
                instance: format!("troj_{}_{k}", spec.name),
                conns: vec![
                    ("A", prev.clone()),
                    ("B", benign_net(&mut rng)),
                    ("C", benign_net(&mut rng)),
                    ("Y", out.clone()),
                ],
            },
        };
        gates.push(gate);
        wires.push(out.clone());
        prev = out;
    }
    // payload: splice the trigger into a victim gate's first input
    let victim_idx = rng.random_range(spec.benign_gates / 2..spec.benign_gates);
    let victim_net = gates[victim_idx].conns[0].1.clone();
    let payload_out = format!("tn{}", t - 1);
    gates.push(Gate {
        cell_type: "XOR2X1",
        instance: format!("troj_{}_{}", spec.name, t - 1),
        conns: vec![("A", victim_net), ("B", prev), ("Y", payload_out.clone())],
    });
    wires.push(payload_out.clone());
    gates[victim_idx].conns[0].1 = payload_out;

    // outputs tap late nets so most logic sits between PIs and POs
    let mut outputs: Vec<(String, String)> = Vec::new(); // (port, driven-by net)
    for j in 0..spec.num_outputs {
        let src = format!("n{}", spec.benign_gates - 1 - j);
        outputs.push((format!("out{j}"), src));
    }

    let mut v = String::new();
    let ports: Vec<String> = std::iter::once(clk.clone())
        .chain(inputs.iter().cloned())
        .chain(outputs.iter().map(|(p, _)| p.clone()))
        .collect();
    let _ = writeln!(v, "// synthetic benchmark {}", spec.name);
    let _ = writeln!(v, "module {}({});", spec.name, ports.join(", "));
    let _ = writeln!(v, "  input {};", clk);
    for i in &inputs {
        let _ = writeln!(v, "  input {i};");
    }
    for (p, _) in &outputs {
        let _ = writeln!(v, "  output {p};");
    }
    for w in &wires {
        let _ = writeln!(v, "  wire {w};");
    }
    for (p, src) in &outputs {
        gates.push(Gate {
            cell_type: "BUFX2",
            instance: format!("po_{p}"),
            conns: vec![("A", src.clone()), ("Y", p.clone())],
        });
    }
    for g in &gates {
        let conns: Vec<String> =
            g.conns.iter().map(|(pin, net)| format!(".{pin}({net})")).collect();
        let _ = writeln!(v, "  {} {} ({});", g.cell_type, g.instance, conns.join(", "));
    }
    let _ = writeln!(v, "endmodule");
    v
}

/// Writes `<name>.v` for every spec plus `profile.lib` and a
/// `train.toml` sized for the corpus.
pub fn write_corpus(dir: &Path, specs: &[DesignSpec]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for spec in specs {
        fs::write(dir.join(format!("{}.v", spec.name)), generate_design(spec))?;
    }
    fs::write(dir.join("profile.lib"), library_profile_text())?;
    let config = toy_experiment_config();
    fs::write(
        dir.join("train.toml"),
        toml::to_string_pretty(&config).expect("config serializes"),
    )?;
    Ok(())
}
