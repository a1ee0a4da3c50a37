//! End-to-end CLI checks driving the real binary over the generated
//! demo corpus.

use std::fs;
use std::path::Path;
use std::process::Command;

fn tskit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tskit"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn tskit");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn small_config(path: &Path) {
    fs::write(
        path,
        r#"
seeds = [0, 1]
split_seed = 0

[train]
epochs = 12
minibatches_per_epoch = 6
learning_rate = 0.02
hidden = [16]
patience = 12
standardize = true

[train.sampler]
num_roots = 40
walk_length = 2
presample_rounds = 30
"#,
    )
    .unwrap();
}

#[test]
fn full_pipeline_and_deterministic_eval() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let corpus = root.join("corpus");

    run_ok(tskit().args(["gen-corpus", "-o"]).arg(&corpus));
    assert!(corpus.join("pipeline_t100.v").exists());
    assert!(corpus.join("profile.lib").exists());
    assert!(corpus.join("train.toml").exists());

    // parse every design into the interchange corpus
    let parsed = root.join("parsed");
    fs::create_dir_all(&parsed).unwrap();
    let designs = ["pipeline_t100", "pipeline_t200", "crossbar_t100", "crossbar_t200"];
    for name in designs {
        run_ok(
            tskit()
                .arg("parse")
                .arg(corpus.join(format!("{name}.v")))
                .arg("--lib")
                .arg(corpus.join("profile.lib"))
                .arg("-o")
                .arg(parsed.join(format!("{name}.json"))),
        );
    }

    // build a dataset: train on the pipeline family, validate/test on crossbar
    let dataset = root.join("dataset");
    run_ok(
        tskit()
            .arg("build")
            .arg("--train")
            .arg(parsed.join("pipeline_t100.json"))
            .arg(parsed.join("pipeline_t200.json"))
            .arg("--val")
            .arg(parsed.join("crossbar_t100.json"))
            .arg("--test")
            .arg(parsed.join("crossbar_t200.json"))
            .arg("-o")
            .arg(&dataset),
    );
    for file in ["adj.txt", "feats.csv", "labels.txt", "roles.json", "nodes.tsv", "schema.json"] {
        assert!(dataset.join(file).exists(), "{file} missing from dataset dir");
    }

    // train + tune + infer + rescore
    let config = root.join("small.toml");
    small_config(&config);
    let ckpt = root.join("model.ckpt");
    let log = root.join("train.jsonl");
    run_ok(
        tskit()
            .arg("train")
            .arg(&dataset)
            .arg("--config")
            .arg(&config)
            .arg("-o")
            .arg(&ckpt)
            .arg("--seeds")
            .arg("0,1")
            .arg("--log")
            .arg(&log),
    );
    assert!(ckpt.exists());
    let log_text = fs::read_to_string(&log).unwrap();
    assert!(log_text.lines().any(|l| l.contains("\"minibatch\"")));
    assert!(log_text.lines().any(|l| l.contains("\"epoch\"")));

    let threshold_json = root.join("threshold.json");
    run_ok(tskit().arg("tune").arg(&ckpt).arg(&dataset).arg("-o").arg(&threshold_json));
    let th: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&threshold_json).unwrap()).unwrap();
    assert!(th["threshold"].as_f64().unwrap() > 0.0);

    let preds = root.join("predictions.csv");
    run_ok(
        tskit()
            .arg("infer")
            .arg(&ckpt)
            .arg(&dataset)
            .arg("--design")
            .arg("crossbar_t200")
            .arg("-o")
            .arg(&preds),
    );
    let pred_text = fs::read_to_string(&preds).unwrap();
    assert!(pred_text.starts_with("node_id,design,instance,p_ht,decision"));
    assert!(pred_text.lines().count() > 500, "one row per crossbar_t200 gate");

    let rescore_out = run_ok(tskit().arg("rescore").arg(&preds).arg(&dataset));
    assert!(rescore_out.contains("TPR"), "rescore prints rates: {rescore_out}");

    // eval twice: byte-identical report and predictions
    let eval_a = root.join("eval_a");
    let eval_b = root.join("eval_b");
    for out in [&eval_a, &eval_b] {
        run_ok(
            tskit()
                .arg("eval")
                .arg("--corpus")
                .arg(&parsed)
                .arg("--protocol")
                .arg("practical")
                .arg("--test")
                .arg("crossbar_t100")
                .arg("--config")
                .arg(&config)
                .arg("-o")
                .arg(out.join("report.json")),
        );
    }
    let report_a = fs::read(eval_a.join("report.json")).unwrap();
    let report_b = fs::read(eval_b.join("report.json")).unwrap();
    assert_eq!(report_a, report_b, "report bytes must be identical");
    let csv_a = fs::read(eval_a.join("predictions.csv")).unwrap();
    let csv_b = fs::read(eval_b.join("predictions.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "prediction bytes must be identical");

    let report: serde_json::Value = serde_json::from_slice(&report_a).unwrap();
    assert_eq!(report["test_design"], "crossbar_t100");
    assert_eq!(report["protocol"], "practical");
    assert_eq!(report["test_node_touches"], 0);
    assert!(report["threshold"].as_f64().unwrap() <= 0.5);
}

#[test]
fn strict_parse_rejects_unknown_pins() {
    let dir = tempfile::tempdir().unwrap();
    let netlist = dir.path().join("m.v");
    fs::write(
        &netlist,
        "module m(a,y); input a; output y; MYSTERY u1(.P(a),.Q(y)); endmodule",
    )
    .unwrap();
    let out_path = dir.path().join("m.json");

    // non-strict: heuristic classifies Q as an output
    run_ok(tskit().arg("parse").arg(&netlist).arg("-o").arg(&out_path));
    assert!(out_path.exists());

    // strict: refuses the heuristic
    let out = tskit()
        .arg("parse")
        .arg(&netlist)
        .arg("--strict")
        .arg("-o")
        .arg(dir.path().join("strict.json"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("classify"), "stderr: {stderr}");
}

#[test]
fn eval_all_writes_summary_table() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let corpus = root.join("corpus");
    run_ok(tskit().args(["gen-corpus", "-o"]).arg(&corpus));
    let parsed = root.join("parsed");
    fs::create_dir_all(&parsed).unwrap();
    for name in ["pipeline_t100", "pipeline_t200", "crossbar_t100", "crossbar_t200"] {
        run_ok(
            tskit()
                .arg("parse")
                .arg(corpus.join(format!("{name}.v")))
                .arg("--lib")
                .arg(corpus.join("profile.lib"))
                .arg("-o")
                .arg(parsed.join(format!("{name}.json"))),
        );
    }
    let config = root.join("small.toml");
    small_config(&config);
    let out_dir = root.join("matrix");
    let stdout = run_ok(
        tskit()
            .arg("eval-all")
            .arg("--corpus")
            .arg(&parsed)
            .arg("--protocol")
            .arg("relaxed")
            .arg("--config")
            .arg(&config)
            .arg("-o")
            .arg(&out_dir),
    );
    assert!(stdout.contains("average:"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 4);
    assert_eq!(summary["protocol"], "relaxed");
    for name in ["pipeline_t100", "crossbar_t200"] {
        assert!(out_dir.join(name).join("report.json").exists());
        assert!(out_dir.join(name).join("predictions.csv").exists());
    }
}
