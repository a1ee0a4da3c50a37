//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured quantity (run with `--nocapture` to see
//! them).

mod common;

use std::collections::HashSet;
use std::sync::OnceLock;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{
    all_pairs_hops, brute_force_edges, oracle_port_distance, oracle_profile_text,
    random_netlist_source, Logistic, SourceOptions,
};
use tskit_core::eval::{run_experiment, ExperimentOutcome, Protocol};
use tskit_core::graph::{
    build_graph, imbalance_ratio, FeatureSchema, GateGraph, LabelRule, Role,
};
use tskit_core::inference::{sweep_threshold, tune_threshold, ThresholdConfig};
use tskit_core::library::LibraryProfile;
use tskit_core::model::{loss_and_gradients, GraphRef, ModelDims, SageModel};
use tskit_core::netlist::Netlist;
use tskit_core::sampler::{estimate_normalization, sample_subgraph, SamplerConfig};
use tskit_core::synthetic::{
    generate_design, library_profile_text, toy_corpus_specs, toy_experiment_config,
};
use tskit_core::trainer::{train, TrainConfig};
use tskit_core::verilog::parse_netlist;

// ---------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------

fn graph_from_parts(
    n: usize,
    edges: &[(usize, usize)],
    features: Array2<f64>,
    labels: Vec<bool>,
    roles: Vec<Role>,
) -> GateGraph<f64> {
    let mut neighbors = vec![Vec::new(); n];
    for &(u, v) in edges {
        neighbors[u].push(v);
        neighbors[v].push(u);
    }
    for list in &mut neighbors {
        list.sort_unstable();
        list.dedup();
    }
    let onehot = features.ncols() - 4;
    let families: Vec<String> =
        (0..onehot - 1).map(|i| format!("F{i}")).chain(["OTHER".to_string()]).collect();
    GateGraph::from_parts(
        neighbors,
        features,
        labels,
        roles,
        vec!["synthetic".into()],
        vec![0; n],
        (0..n).map(|i| format!("g{i}")).collect(),
        FeatureSchema::new(families).unwrap(),
    )
    .unwrap()
}

fn random_edges(rng: &mut ChaCha8Rng, n: usize, percent: u32) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_range(0..100) < percent {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// The full toy-corpus practical-protocol experiment matrix, run once
/// and shared by the leakage, detection and determinism criteria.
fn toy_matrix() -> &'static (Vec<ExperimentOutcome<f64>>, f64) {
    static MATRIX: OnceLock<(Vec<ExperimentOutcome<f64>>, f64)> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let profile = LibraryProfile::parse(library_profile_text()).unwrap();
        let corpus: Vec<Netlist> = toy_corpus_specs()
            .iter()
            .map(|s| parse_netlist(&generate_design(s), &profile).unwrap())
            .collect();
        let config = toy_experiment_config();
        let started = Instant::now();
        let outcomes = toy_corpus_specs()
            .iter()
            .map(|s| run_experiment::<f64>(&corpus, Protocol::Practical, &s.name, &config).unwrap())
            .collect();
        (outcomes, started.elapsed().as_secs_f64())
    })
}

// ---------------------------------------------------------------------
// 1. parser round-trip
// ---------------------------------------------------------------------

#[test]
fn acceptance_1_parser_round_trip() {
    let started = Instant::now();
    let profile = LibraryProfile::parse(oracle_profile_text()).unwrap();
    for i in 0..20u64 {
        let opts = SourceOptions {
            gates: 20 + (i as usize % 5) * 10,
            buses: i % 2 == 0,
            escaped: i % 3 == 0,
            positional: i % 2 == 1,
        };
        let source = random_netlist_source(&format!("rt{i}"), 9000 + i, &opts);
        let parsed = parse_netlist(&source, &profile).unwrap();
        let reloaded = Netlist::from_json(&parsed.to_json()).unwrap();
        assert_eq!(parsed, reloaded, "round-trip must be structural identity (file {i})");
        let reparsed = parse_netlist(&source, &profile).unwrap();
        assert_eq!(parsed, reparsed, "parsing must be deterministic (file {i})");
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "round-trip corpus took {elapsed:.2}s, budget 5s");
    println!("acceptance 1 (parser round-trip, 20 files): PASS in {elapsed:.2}s");
}

// ---------------------------------------------------------------------
// 2. graph correctness oracle
// ---------------------------------------------------------------------

#[test]
fn acceptance_2_graph_oracles() {
    let profile = LibraryProfile::parse(oracle_profile_text()).unwrap();
    let schema = FeatureSchema::default_vocabulary();
    let onehot = schema.families().len();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..100u64 {
        let opts = SourceOptions {
            gates: rng.random_range(5..=38usize),
            buses: false,
            escaped: false,
            positional: false,
        };
        let source = random_netlist_source(&format!("oracle{i}"), 5000 + i, &opts);
        let netlist = parse_netlist(&source, &profile).unwrap();
        let graph =
            build_graph::<f64>(&[(netlist.clone(), Role::Train)], &schema, &LabelRule::default())
                .unwrap();

        let expected_edges = brute_force_edges(&netlist);
        assert_eq!(graph.edges(), expected_edges, "adjacency oracle mismatch (netlist {i})");

        let hops = all_pairs_hops(netlist.cells.len(), &expected_edges);
        let pi_nets: std::collections::HashSet<usize> =
            netlist.primary_inputs.iter().copied().collect();
        let po_nets: std::collections::HashSet<usize> =
            netlist.primary_outputs.iter().copied().collect();
        let want_pi = oracle_port_distance(&netlist, &hops, &pi_nets);
        let want_po = oracle_port_distance(&netlist, &hops, &po_nets);
        for u in 0..netlist.cells.len() {
            assert_eq!(
                graph.features()[[u, onehot + 2]],
                want_pi[u] as f64,
                "dist_to_PI mismatch at node {u} (netlist {i})"
            );
            assert_eq!(
                graph.features()[[u, onehot + 3]],
                want_po[u] as f64,
                "dist_to_PO mismatch at node {u} (netlist {i})"
            );
        }
    }
    println!("acceptance 2 (graph vs brute-force oracles, 100 netlists): PASS");
}

// ---------------------------------------------------------------------
// 3. gradient check
// ---------------------------------------------------------------------

#[test]
fn acceptance_3_gradient_check() {
    const EPSILON: f64 = 1e-5;
    const REL_TOL: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(333);
    let mut checked = 0usize;
    for model_idx in 0..50 {
        let n = rng.random_range(2..=10usize);
        let edges = random_edges(&mut rng, n, 35);
        let f = rng.random_range(5..=6usize);
        let mut feats = Array2::<f64>::zeros((n, f));
        for v in feats.iter_mut() {
            *v = rng.random_range(-1.5..1.5);
        }
        let labels: Vec<bool> = (0..n).map(|_| rng.random_range(0..2) == 1).collect();
        let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let graph = graph_from_parts(n, &edges, feats.clone(), labels.clone(), vec![Role::Train; n]);

        let layers = rng.random_range(1..=2usize);
        let hidden: Vec<usize> = (0..layers).map(|_| rng.random_range(2..=8)).collect();
        let model = SageModel::<f64>::init(
            &ModelDims::new(f, hidden),
            "oracle",
            &mut rng,
        );
        let (_, grads) = loss_and_gradients(
            &model,
            GraphRef::full(&graph),
            &feats,
            &labels,
            Some(&lambda),
        )
        .unwrap();
        let tensors: Vec<Array2<f64>> = grads.tensors().into_iter().cloned().collect();
        for (ti, tensor) in tensors.iter().enumerate() {
            for r in 0..tensor.nrows() {
                for c in 0..tensor.ncols() {
                    let probe = |delta: f64| {
                        let mut m = model.clone();
                        m.param_tensors_mut()[ti][[r, c]] += delta;
                        loss_and_gradients(
                            &m,
                            GraphRef::full(&graph),
                            &feats,
                            &labels,
                            Some(&lambda),
                        )
                        .unwrap()
                        .0
                    };
                    let numeric = (probe(EPSILON) - probe(-EPSILON)) / (2.0 * EPSILON);
                    let analytic = tensor[[r, c]];
                    let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                    let rel = (numeric - analytic).abs() / denom;
                    assert!(
                        rel <= REL_TOL,
                        "model {model_idx} tensor {ti} [{r},{c}]: rel err {rel:.2e} \
                         (numeric {numeric:.6e}, analytic {analytic:.6e})"
                    );
                    checked += 1;
                }
            }
        }
    }
    println!("acceptance 3 (finite-difference gradient check, 50 models, {checked} parameters): PASS");
}

// ---------------------------------------------------------------------
// 4. sampler properties
// ---------------------------------------------------------------------

#[test]
fn acceptance_4_sampler_properties() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(444);

    // induced-subgraph exactness, exhaustive on graphs up to 50 nodes
    for &n in &[8usize, 20, 35, 50] {
        let edges = random_edges(&mut rng, n, 10);
        let graph = graph_from_parts(
            n,
            &edges,
            Array2::zeros((n, 5)),
            vec![false; n],
            vec![Role::Train; n],
        );
        let cfg = SamplerConfig { num_roots: Some(4), walk_length: 2, ..Default::default() };
        for _ in 0..40 {
            let sub = sample_subgraph(&graph, &cfg, &mut rng).unwrap();
            let members: HashSet<usize> = sub.node_ids().iter().copied().collect();
            for (lu, locals) in sub.local_adjacency().iter().enumerate() {
                let gu = sub.node_ids()[lu];
                for &lv in locals {
                    assert!(graph.neighbors(gu).contains(&sub.node_ids()[lv]));
                }
            }
            for &(u, v) in &edges {
                if members.contains(&u) && members.contains(&v) {
                    let lu = sub.node_ids().binary_search(&u).unwrap();
                    let lv = sub.node_ids().binary_search(&v).unwrap();
                    assert!(sub.local_adjacency()[lu].contains(&lv), "missing induced edge");
                    assert!(sub.local_adjacency()[lv].contains(&lu), "induced edge asymmetric");
                }
            }
        }
    }

    // frequency consistency: the presample counts behind lambda agree
    // with an independent 10^4-round empirical estimate within 3 sigma
    // of the presample estimator
    let n = 24usize;
    let edges = random_edges(&mut rng, n, 14);
    let graph = graph_from_parts(
        n,
        &edges,
        Array2::zeros((n, 5)),
        vec![false; n],
        vec![Role::Train; n],
    );
    let m = 50usize;
    let cfg = SamplerConfig {
        num_roots: Some(5),
        walk_length: 2,
        rng_seed: 21,
        presample_rounds: m,
    };
    let table = estimate_normalization(&graph, &cfg).unwrap();
    let rounds = 10_000usize;
    let mut hits = vec![0u64; n];
    let mut emp_rng = ChaCha8Rng::seed_from_u64(987_654);
    for _ in 0..rounds {
        let sub = sample_subgraph(&graph, &cfg, &mut emp_rng).unwrap();
        for &u in sub.node_ids() {
            hits[u] += 1;
        }
    }
    for (u, (&hit, &lambda)) in hits.iter().zip(table.lambda()).enumerate() {
        // recover the presample count from the smoothed lambda
        let c_v = lambda * (m as f64 + 1.0) - 1.0;
        let p_hat = c_v / m as f64;
        let p_emp = hit as f64 / rounds as f64;
        let p_safe = (c_v + 1.0) / (m as f64 + 2.0);
        let sigma = (p_safe * (1.0 - p_safe) / m as f64).sqrt();
        assert!(
            (p_emp - p_hat).abs() <= 3.0 * sigma,
            "node {u}: empirical {p_emp:.4} vs presample {p_hat:.4}, 3 sigma {:.4}",
            3.0 * sigma
        );
        assert!(lambda > 0.0 && lambda.is_finite());
    }

    // alpha positivity over a mixed-role graph
    let roles: Vec<Role> =
        (0..n).map(|u| if u % 5 == 0 { Role::Validation } else { Role::Train }).collect();
    let graph2 = graph_from_parts(n, &edges, Array2::zeros((n, 5)), vec![false; n], roles);
    let table2 = estimate_normalization(&graph2, &cfg).unwrap();
    let mut sub = sample_subgraph(&graph2, &cfg, &mut rng).unwrap();
    sub.fill_normalization(&table2, &graph2);
    assert!(sub.alpha().unwrap().iter().flatten().all(|&a| a > 0.0 && a.is_finite()));
    assert!(sub.lambda().unwrap().iter().all(|&l| l > 0.0 && l.is_finite()));

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "sampler property suite took {elapsed:.2}s, budget 30s");
    println!("acceptance 4 (sampler properties): PASS in {elapsed:.2}s");
}

// ---------------------------------------------------------------------
// 5. threshold sweep
// ---------------------------------------------------------------------

#[test]
fn acceptance_5_threshold_sweep() {
    // exhaustive 5-node hand example reproduced exactly
    let probs = [0.4, 0.45, 0.1, 0.2, 0.3];
    let labels = [true, true, false, false, false];
    let cfg = ThresholdConfig::default();
    let choice = sweep_threshold(&probs, &labels, &cfg);
    assert_eq!(choice.score, 1.0);
    assert!((choice.threshold - 0.3005).abs() < 1e-12, "smallest optimal candidate");

    // tie-break must return the smallest optimal threshold
    let flat = sweep_threshold(&[0.25; 4], &[true, false, true, false], &cfg);
    assert!((flat.threshold - cfg.candidate(1)).abs() < 1e-12);

    // monotonicity across the 1000 candidates on tuned models
    let toy = {
        let n = 12usize;
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let mut feats = Array2::<f64>::zeros((n, 7));
        let ht = [2usize, 7, 11];
        for u in 0..n {
            feats[[u, usize::from(ht.contains(&u))]] = 1.0;
            feats[[u, 3]] = 2.0;
            feats[[u, 4]] = 2.0;
            feats[[u, 5]] = 1.0;
            feats[[u, 6]] = 1.0;
        }
        let labels: Vec<bool> = (0..n).map(|u| ht.contains(&u)).collect();
        let roles: Vec<Role> =
            (0..n).map(|u| if u < 8 { Role::Train } else { Role::Validation }).collect();
        graph_from_parts(n, &edges, feats, labels, roles)
    };
    for seed in 0..3u64 {
        let cfg_train = TrainConfig {
            epochs: 12,
            minibatches_per_epoch: 4,
            learning_rate: 0.05,
            hidden: vec![6],
            sampler: SamplerConfig {
                num_roots: Some(3),
                walk_length: 2,
                presample_rounds: 15,
                ..Default::default()
            },
            rng_seed: seed,
            patience: 12,
            standardize: false,
            threshold: ThresholdConfig::default(),
        };
        let (model, _) = train(&toy, &cfg_train).unwrap();
        let val: Vec<usize> = toy.nodes_with_role(Role::Validation);
        let tuned = tune_threshold(&model, &toy, &val, &cfg).unwrap();
        // independent monotonicity audit over every candidate
        let probs = tskit_core::inference::node_probabilities(&model, &toy).unwrap();
        let val_probs: Vec<f64> = val.iter().map(|&u| probs[u]).collect();
        let val_labels: Vec<bool> = val.iter().map(|&u| toy.labels()[u]).collect();
        let mut prev_tpr = f64::INFINITY;
        let mut prev_tnr = f64::NEG_INFINITY;
        let mut best_seen = f64::NEG_INFINITY;
        for k in 1..=cfg.steps {
            let th = cfg.candidate(k);
            let tp = val_probs.iter().zip(&val_labels).filter(|(p, &y)| **p >= th && y).count();
            let pos = val_labels.iter().filter(|&&y| y).count();
            let fp = val_probs.iter().zip(&val_labels).filter(|(p, &y)| **p >= th && !y).count();
            let neg = val_labels.len() - pos;
            let tpr = tp as f64 / pos as f64;
            let tnr = (neg - fp) as f64 / neg as f64;
            assert!(tpr <= prev_tpr, "TPR increased during sweep (seed {seed})");
            assert!(tnr >= prev_tnr, "TNR decreased during sweep (seed {seed})");
            prev_tpr = tpr;
            prev_tnr = tnr;
            best_seen = best_seen.max((tpr + tnr) / 2.0);
        }
        assert!(
            (best_seen - tuned.score).abs() < 1e-12,
            "tuned score must equal the sweep optimum (seed {seed})"
        );
    }
    println!("acceptance 5 (threshold sweep properties): PASS");
}

// ---------------------------------------------------------------------
// 6. leakage audit
// ---------------------------------------------------------------------

#[test]
fn acceptance_6_leakage_audit() {
    let (outcomes, _) = toy_matrix();
    for outcome in outcomes {
        assert_eq!(
            outcome.report.test_node_touches, 0,
            "training touched test nodes for {}",
            outcome.report.test_design
        );
        // the split itself keeps the test design out of train/validation
        assert!(!outcome.report.split.train.contains(&outcome.report.test_design));
        assert!(!outcome.report.split.validation.contains(&outcome.report.test_design));
        // node-set intersection audit on the built graph
        let test_nodes: HashSet<usize> = outcome
            .graph
            .design_nodes(&outcome.report.test_design)
            .into_iter()
            .collect();
        let train_nodes: HashSet<usize> =
            outcome.graph.nodes_with_role(Role::Train).into_iter().collect();
        assert!(test_nodes.is_disjoint(&train_nodes));
    }
    println!(
        "acceptance 6 (leakage audit over {} practical experiments): PASS",
        outcomes.len()
    );
}

// ---------------------------------------------------------------------
// 7. end-to-end desk-scale detection
// ---------------------------------------------------------------------

#[test]
fn acceptance_7_end_to_end_detection() {
    let (outcomes, wall) = toy_matrix();
    for outcome in outcomes {
        // oracle pre-check: a feature-only logistic classifier separates
        // the planted trojans, so the target is attainable before the
        // GNN is blamed
        let train_nodes = outcome.graph.nodes_with_role(Role::Train);
        let test_nodes = outcome.graph.design_nodes(&outcome.report.test_design);
        let oracle = Logistic::fit(&outcome.graph, &train_nodes, 400);
        let oracle_score = oracle.balanced_accuracy(&outcome.graph, &test_nodes);
        assert!(
            oracle_score >= 0.9,
            "logistic oracle scores {oracle_score:.3} on {}; target unattainable",
            outcome.report.test_design
        );

        let score = outcome.report.confusion.balanced_score();
        assert!(
            score >= 0.9,
            "practical mean(TPR,TNR) {score:.3} < 0.9 on {}",
            outcome.report.test_design
        );
    }
    assert!(*wall < 300.0, "experiment matrix took {wall:.1}s, budget 300s");
    println!(
        "acceptance 7 (end-to-end detection >= 0.9 on {} designs): PASS in {wall:.1}s",
        outcomes.len()
    );
}

// ---------------------------------------------------------------------
// 8. imbalance arithmetic
// ---------------------------------------------------------------------

#[test]
fn acceptance_8_imbalance_arithmetic() {
    // tabulated benchmark node counts and their printed ratios
    let rows: [(usize, usize, &str); 17] = [
        (13, 202, "0.064"),
        (12, 204, "0.059"),
        (17, 199, "0.085"),
        (9, 204, "0.044"),
        (13, 202, "0.064"),
        (14, 202, "0.069"),
        (11, 203, "0.054"),
        (26, 2156, "0.012"),
        (15, 5426, "0.003"),
        (12, 5426, "0.002"),
        (35, 5427, "0.006"),
        (12, 5329, "0.002"),
        (15, 5329, "0.003"),
        (44, 5329, "0.008"),
        (9, 6473, "0.001"),
        (83, 6473, "0.013"),
        (731, 6473, "0.113"),
    ];
    for (ht, benign, printed) in rows {
        let got = format!("{:.3}", imbalance_ratio(ht, benign));
        assert_eq!(got, printed, "ratio {ht}/{benign}");
    }
    println!("acceptance 8 (imbalance arithmetic, 17 benchmark rows): PASS");
}

// ---------------------------------------------------------------------
// 9. determinism
// ---------------------------------------------------------------------

#[test]
fn acceptance_9_determinism() {
    let profile = LibraryProfile::parse(library_profile_text()).unwrap();
    let corpus: Vec<Netlist> = toy_corpus_specs()
        .iter()
        .map(|s| parse_netlist(&generate_design(s), &profile).unwrap())
        .collect();
    let mut config = toy_experiment_config();
    config.train.epochs = 10; // determinism does not need convergence
    config.seeds = vec![0, 1];
    let run = || {
        let outcome =
            run_experiment::<f64>(&corpus, Protocol::Practical, "crossbar_t100", &config).unwrap();
        let report = serde_json::to_string_pretty(&outcome.report).unwrap();
        (report, outcome.predictions)
    };
    let (report_a, preds_a) = run();
    let (report_b, preds_b) = run();
    assert_eq!(report_a.as_bytes(), report_b.as_bytes(), "report bytes must match");
    assert_eq!(preds_a, preds_b, "predictions must match");

    // regenerating metrics from the persisted predictions file gives
    // back the reported TPR/TNR exactly
    let outcome =
        run_experiment::<f64>(&corpus, Protocol::Practical, "crossbar_t100", &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("predictions.csv");
    tskit_core::inference::write_predictions_csv(&csv, &outcome.predictions).unwrap();
    let reloaded = tskit_core::inference::read_predictions_csv(&csv).unwrap();
    let (tpr, tnr) =
        tskit_core::eval::rescore_predictions(&reloaded, outcome.graph.labels()).unwrap();
    assert_eq!(tpr, outcome.report.tpr);
    assert_eq!(tnr, outcome.report.tnr);
    println!("acceptance 9 (byte-identical repeated evaluation): PASS");
}
