//! `tskit`: parse structural netlists, build gate-graph datasets, train
//! the sampled GraphSAGE Trojan classifier, and score designs under the
//! practical or relaxed validation protocol.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use tskit_core::dataset::{load_dataset, write_dataset};
use tskit_core::eval::{
    compute_metrics, load_corpus, run_experiment, ExperimentConfig, MatrixSummary, Protocol,
    SummaryRow, ThresholdReport,
};
use tskit_core::graph::{build_graph, FeatureSchema, GateGraph, LabelRule, Role};
use tskit_core::inference::{
    predict, read_predictions_csv, tune_threshold, write_predictions_csv, NodeFilter,
};
use tskit_core::library::LibraryProfile;
use tskit_core::model::Checkpoint;
use tskit_core::netlist::Netlist;
use tskit_core::synthetic::{toy_corpus_specs, write_corpus};
use tskit_core::trainer::run_seeds;
use tskit_core::verilog::parse_netlist;

#[derive(Parser)]
#[command(name = "tskit", version, about = "Gate-level netlist Trojan scanning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Practical,
    Relaxed,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Practical => Protocol::Practical,
            ProtocolArg::Relaxed => Protocol::Relaxed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a structural Verilog netlist into the canonical JSON form.
    Parse {
        netlist: PathBuf,
        /// Library profile mapping cell types to pin directions/families.
        #[arg(long = "lib")]
        lib: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Fail instead of falling back to the pin-direction heuristic.
        #[arg(long)]
        strict: bool,
    },
    /// Assemble parsed designs into a graph dataset directory.
    Build {
        /// Interchange JSONs whose nodes take the train role.
        #[arg(long, num_args = 1..)]
        train: Vec<PathBuf>,
        /// Interchange JSONs whose nodes take the validation role.
        #[arg(long, num_args = 0..)]
        val: Vec<PathBuf>,
        /// Interchange JSONs whose nodes take the test role.
        #[arg(long, num_args = 0..)]
        test: Vec<PathBuf>,
        /// Feature schema JSON ({"gate_families": [...]}).
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Label rule JSON (patterns + explicit per-design lists).
        #[arg(long = "label-rule")]
        label_rule: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train on a dataset directory and write a checkpoint.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated seed list overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Structured per-minibatch/epoch training log (JSON lines).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a dataset with a trained checkpoint.
    Infer {
        checkpoint: PathBuf,
        dataset: PathBuf,
        /// Decision threshold; defaults to the checkpoint's tuned value.
        #[arg(long)]
        th: Option<f64>,
        /// Restrict scoring to one design.
        #[arg(long)]
        design: Option<String>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Tune the decision threshold on the dataset's validation nodes.
    Tune {
        checkpoint: PathBuf,
        dataset: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run one experiment: split, train seeds, tune, score the test design.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        /// Design under test.
        #[arg(long)]
        test: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report path; predictions.csv lands beside it.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Evaluate every corpus design as the test design and summarize.
    EvalAll {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory: per-design reports plus summary.json.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write the built-in synthetic demo corpus (Verilog + profile + config).
    GenCorpus {
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Recompute TPR/TNR from a persisted predictions.csv.
    Rescore {
        predictions: PathBuf,
        dataset: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Parse { netlist, lib, output, strict } => cmd_parse(&netlist, lib.as_deref(), &output, strict),
        Command::Build { train, val, test, schema, label_rule, output } => {
            cmd_build(&train, &val, &test, schema.as_deref(), label_rule.as_deref(), &output)
        }
        Command::Train { dataset, config, output, seeds, log } => {
            cmd_train(&dataset, config.as_deref(), &output, &seeds, log.as_deref())
        }
        Command::Infer { checkpoint, dataset, th, design, output } => {
            cmd_infer(&checkpoint, &dataset, th, design.as_deref(), &output)
        }
        Command::Tune { checkpoint, dataset, output } => cmd_tune(&checkpoint, &dataset, &output),
        Command::Eval { corpus, protocol, test, config, output } => {
            cmd_eval(&corpus, protocol.into(), &test, config.as_deref(), &output)
        }
        Command::EvalAll { corpus, protocol, config, output } => {
            cmd_eval_all(&corpus, protocol.into(), config.as_deref(), &output)
        }
        Command::GenCorpus { output } => cmd_gen_corpus(&output),
        Command::Rescore { predictions, dataset } => cmd_rescore(&predictions, &dataset),
    }
}

fn load_profile(path: Option<&Path>, strict: bool) -> Result<LibraryProfile> {
    let profile = match path {
        Some(p) => LibraryProfile::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => LibraryProfile::empty(),
    };
    Ok(profile.strict(strict))
}

fn cmd_parse(netlist: &Path, lib: Option<&Path>, output: &Path, strict: bool) -> Result<()> {
    let source = fs::read_to_string(netlist).with_context(|| format!("reading {}", netlist.display()))?;
    let profile = load_profile(lib, strict)?;
    let parsed = parse_netlist(&source, &profile)?;
    fs::write(output, parsed.to_json())?;
    println!(
        "parsed {}: {} cells, {} nets, {} PIs, {} POs -> {}",
        parsed.name,
        parsed.cells.len(),
        parsed.nets.len(),
        parsed.primary_inputs.len(),
        parsed.primary_outputs.len(),
        output.display()
    );
    Ok(())
}

fn load_netlists(paths: &[PathBuf], role: Role) -> Result<Vec<(Netlist, Role)>> {
    paths
        .iter()
        .map(|p| {
            let n = Netlist::from_json(&fs::read_to_string(p)?)
                .with_context(|| format!("loading {}", p.display()))?;
            Ok((n, role))
        })
        .collect()
}

fn cmd_build(
    train: &[PathBuf],
    val: &[PathBuf],
    test: &[PathBuf],
    schema: Option<&Path>,
    label_rule: Option<&Path>,
    output: &Path,
) -> Result<()> {
    if train.is_empty() {
        bail!("--train needs at least one design");
    }
    let mut netlists = load_netlists(train, Role::Train)?;
    netlists.extend(load_netlists(val, Role::Validation)?);
    netlists.extend(load_netlists(test, Role::Test)?);
    let schema = match schema {
        Some(p) => serde_json::from_str::<FeatureSchema>(&fs::read_to_string(p)?)
            .with_context(|| format!("loading {}", p.display()))?,
        None => FeatureSchema::default_vocabulary(),
    };
    let rule = match label_rule {
        Some(p) => serde_json::from_str::<LabelRule>(&fs::read_to_string(p)?)
            .with_context(|| format!("loading {}", p.display()))?,
        None => LabelRule::default(),
    };
    let graph = build_graph::<f64>(&netlists, &schema, &rule)?;
    write_dataset(&graph, output)?;
    let counts = tskit_core::graph::compute_imbalance(&graph);
    println!(
        "dataset: {} nodes, {} edges -> {}",
        graph.num_nodes(),
        graph.edges().len(),
        output.display()
    );
    for (design, ratio) in &counts.per_design {
        println!("  {design}: HT/benign ratio {ratio:.3}");
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    })
}

fn write_train_log(path: &Path, record: &tskit_core::trainer::TrainRecord) -> Result<()> {
    let mut lines = String::new();
    for (epoch, stats) in record.epochs.iter().enumerate() {
        for (index, loss) in stats.losses.iter().enumerate() {
            lines.push_str(&serde_json::json!({
                "type": "minibatch", "epoch": epoch, "index": index, "loss": loss,
            }).to_string());
            lines.push('\n');
        }
        lines.push_str(&serde_json::json!({
            "type": "epoch", "epoch": epoch, "val_score": stats.val_score,
            "threshold": stats.threshold, "wall_secs": stats.wall_secs,
        }).to_string());
        lines.push('\n');
    }
    fs::write(path, lines)?;
    Ok(())
}

fn cmd_train(
    dataset: &Path,
    config: Option<&Path>,
    output: &Path,
    seeds: &[u64],
    log: Option<&Path>,
) -> Result<()> {
    let graph: GateGraph<f64> = load_dataset(dataset)?;
    let cfg = load_config(config)?;
    let seeds = if seeds.is_empty() { cfg.seeds.clone() } else { seeds.to_vec() };
    let winner = run_seeds(&graph, &cfg.train, &seeds)?;
    println!(
        "best seed {} with validation mean(TPR,TNR) {:.4} at threshold {:.4} (test-node touches: {})",
        winner.seed, winner.val_score, winner.threshold, winner.record.test_node_touches
    );
    if let Some(log_path) = log {
        write_train_log(log_path, &winner.record)?;
    }
    let mut sampler = cfg.train.sampler.clone();
    sampler.rng_seed = winner.seed;
    Checkpoint {
        model: winner.model,
        sampler,
        rng_seed: winner.seed,
        threshold: Some(winner.threshold),
    }
    .save(output)?;
    println!("checkpoint -> {}", output.display());
    Ok(())
}

fn cmd_infer(
    checkpoint: &Path,
    dataset: &Path,
    th: Option<f64>,
    design: Option<&str>,
    output: &Path,
) -> Result<()> {
    let ckpt = Checkpoint::<f64>::load(checkpoint)?;
    let graph: GateGraph<f64> = load_dataset(dataset)?;
    let threshold = match th.or(ckpt.threshold) {
        Some(t) => t,
        None => bail!("checkpoint stores no threshold; pass --th"),
    };
    if !(0.0..=1.0).contains(&threshold) {
        bail!("threshold must lie in [0, 1], got {threshold}");
    }
    let filter = match design {
        Some(name) => NodeFilter::Design(name),
        None => NodeFilter::All,
    };
    let predictions = predict(&ckpt.model, &graph, threshold, filter)?;
    write_predictions_csv(output, &predictions)?;
    let flagged = predictions.iter().filter(|p| p.decision).count();
    println!(
        "scored {} gates at threshold {threshold}: {flagged} flagged HT -> {}",
        predictions.len(),
        output.display()
    );
    Ok(())
}

fn cmd_tune(checkpoint: &Path, dataset: &Path, output: &Path) -> Result<()> {
    let ckpt = Checkpoint::<f64>::load(checkpoint)?;
    let graph: GateGraph<f64> = load_dataset(dataset)?;
    let val_nodes = graph.nodes_with_role(Role::Validation);
    if val_nodes.is_empty() {
        bail!("dataset has no validation-role nodes");
    }
    let choice = tune_threshold(
        &ckpt.model,
        &graph,
        &val_nodes,
        &tskit_core::inference::ThresholdConfig::default(),
    )?;
    let report = ThresholdReport::from(choice);
    fs::write(output, serde_json::to_string_pretty(&report)?)?;
    println!(
        "threshold {} scores {:.4} on validation -> {}",
        report.threshold,
        report.score,
        output.display()
    );
    Ok(())
}

fn report_paths(output: &Path) -> (PathBuf, PathBuf) {
    let dir = output.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    (output.to_path_buf(), dir.join("predictions.csv"))
}

fn cmd_eval(
    corpus: &Path,
    protocol: Protocol,
    test: &str,
    config: Option<&Path>,
    output: &Path,
) -> Result<()> {
    let designs = load_corpus(corpus)?;
    let cfg = load_config(config)?;
    let outcome = run_experiment::<f64>(&designs, protocol, test, &cfg)?;
    let (report_path, predictions_path) = report_paths(output);
    if let Some(parent) = report_path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_predictions_csv(&predictions_path, &outcome.predictions)?;
    fs::write(&report_path, serde_json::to_string_pretty(&outcome.report)?)?;
    println!(
        "{test} [{proto:?}] seed {} threshold {:.4}: TPR {} TNR {} -> {}",
        outcome.report.seed,
        outcome.report.threshold,
        fmt_rate(outcome.report.tpr),
        fmt_rate(outcome.report.tnr),
        report_path.display(),
        proto = protocol,
    );
    Ok(())
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.3}")).unwrap_or_else(|| "N/A".into())
}

fn cmd_eval_all(
    corpus: &Path,
    protocol: Protocol,
    config: Option<&Path>,
    output: &Path,
) -> Result<()> {
    let designs = load_corpus(corpus)?;
    let cfg = load_config(config)?;
    let names: Vec<String> = designs.iter().map(|d| d.name.clone()).collect();
    fs::create_dir_all(output)?;
    let mut rows = Vec::with_capacity(names.len());
    for name in &names {
        let outcome = run_experiment::<f64>(&designs, protocol, name, &cfg)?;
        let dir = output.join(name);
        fs::create_dir_all(&dir)?;
        write_predictions_csv(&dir.join("predictions.csv"), &outcome.predictions)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&outcome.report)?)?;
        println!(
            "{name:20} TPR {} / TNR {}  (seed {}, th {:.4})",
            fmt_rate(outcome.report.tpr),
            fmt_rate(outcome.report.tnr),
            outcome.report.seed,
            outcome.report.threshold
        );
        rows.push(SummaryRow {
            design: name.clone(),
            tpr: outcome.report.tpr,
            tnr: outcome.report.tnr,
            threshold: outcome.report.threshold,
            seed: outcome.report.seed,
        });
    }
    let summary = MatrixSummary::from_rows(protocol, rows);
    fs::write(output.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!(
        "average: TPR {} / TNR {} -> {}",
        fmt_rate(summary.mean_tpr),
        fmt_rate(summary.mean_tnr),
        output.join("summary.json").display()
    );
    Ok(())
}

fn cmd_gen_corpus(output: &Path) -> Result<()> {
    let specs = toy_corpus_specs();
    write_corpus(output, &specs)?;
    println!("wrote {} designs, profile.lib and train.toml under {}", specs.len(), output.display());
    println!("next: tskit parse {}/<design>.v --lib {}/profile.lib -o <design>.json", output.display(), output.display());
    Ok(())
}

fn cmd_rescore(predictions: &Path, dataset: &Path) -> Result<()> {
    let preds = read_predictions_csv(predictions)?;
    let graph: GateGraph<f64> = load_dataset(dataset)?;
    let (counts, tpr, tnr) = compute_metrics(&preds, graph.labels())?;
    println!(
        "TP {} FP {} TN {} FN {} | TPR {} TNR {}",
        counts.tp,
        counts.fp,
        counts.tn,
        counts.fn_,
        fmt_rate(tpr),
        fmt_rate(tnr)
    );
    Ok(())
}
