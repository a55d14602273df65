use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use ppg_screen::output::{read_report, Manifest};
use serde_json::Value;

const SMALL: [&str; 4] = [
    "--synth.days=1",
    "--synth.spot_per_day=2",
    "--synth.background_per_day=2",
    "--synth.n_subjects=16",
];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ppg-screen"));
    c.env_remove("PPG_SCREEN_SEED").env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// A small strong-effect dataset shared by the tests that only read it.
fn dataset() -> &'static Path {
    static DIR: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    &DIR.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        let mut args = vec!["synth", "--seed", "7", "--out", s(&data)];
        args.extend(SMALL);
        ok(&args);
        (tmp, data)
    })
    .1
}

#[test]
fn help_exits_zero_and_lists_defaults() {
    for sub in ["synth", "preprocess", "features", "train", "evaluate", "screen", "report"] {
        let out = run(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("--jobs <JOBS>") && text.contains("[default: 0]"), "{sub}: {text}");
        assert!(text.contains("PPG_SCREEN_SEED"), "{sub}");
        assert!(text.contains("--train.max_epochs=50") && text.contains("--preprocess.z_limit=2.0"), "{sub}");
    }
    assert!(ok(&["evaluate", "--help"]).contains("[default: resnet]"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["bogus"][..],
        &[],
        &["synth", "--out", "x", "--frobnicate"],
        &["synth", "--out", "x", "--effect", "huge"],
        &["evaluate", "--data", "d", "--out", "o", "--models", "resnet,svm"],
        &["synth", "--out", "x", "--train.no_such_key=1"],
        &["synth", "--out", "x", "--eval.k=many"],
        &["evaluate", "--data", "/nonexistent/data", "--out", "o"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn synth_is_deterministic_and_seed_sources_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs: Vec<PathBuf> = (0..4).map(|i| tmp.path().join(format!("d{i}"))).collect();
    let small = |dir: &Path| {
        let mut a = vec!["synth".to_owned(), "--out".into(), s(dir).into()];
        a.extend(SMALL.map(String::from));
        a
    };
    let args = small(&dirs[0]);
    let mut c = bin();
    c.args(&args).arg("--seed=7");
    assert!(c.output().unwrap().status.success());
    let mut c = bin();
    c.args(small(&dirs[1])).args(["--seed", "7"]);
    assert!(c.output().unwrap().status.success());
    let mut c = bin();
    c.args(small(&dirs[2])).env("PPG_SCREEN_SEED", "7");
    assert!(c.output().unwrap().status.success());
    let mut c = bin();
    c.args(small(&dirs[3])).env("PPG_SCREEN_SEED", "7").arg("--seed=8");
    assert!(c.output().unwrap().status.success());

    for f in ["subjects.csv", "records.ndjson", "synth_spec.json", "manifest.json"] {
        let a = read(&dirs[0].join(f));
        assert_eq!(a, read(&dirs[1].join(f)), "{f}");
        assert_eq!(a, read(&dirs[2].join(f)), "{f}");
    }
    assert_ne!(read(&dirs[0].join("records.ndjson")), read(&dirs[3].join("records.ndjson")));

    let spec: Value = serde_json::from_slice(&read(&dirs[0].join("synth_spec.json"))).unwrap();
    assert_eq!(spec["provenance"]["seed"], 7);
    assert_eq!(spec["spec"]["n_subjects"], 16);
    assert_eq!(spec["spec"]["seed"], ppg_screen_core::seed::derive_seed(7, "synth"));
    let header = std::fs::read_to_string(dirs[0].join("subjects.csv")).unwrap();
    assert!(header.starts_with("subject_id,age,sex,mean_sbp,mean_dbp\n"));
}

#[test]
fn evaluate_is_reproducible_and_self_describing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("run.json");
    std::fs::write(&cfg_path, r#"{"seed": 7, "eval": {"k": 4}, "train": {"max_epochs": 2}}"#).unwrap();
    let outs: Vec<PathBuf> = (0..2).map(|i| tmp.path().join(format!("e{i}"))).collect();
    for (i, out) in outs.iter().enumerate() {
        let jobs = if i == 0 { "1" } else { "2" };
        let table = ok(&[
            "evaluate",
            "--config",
            s(&cfg_path),
            "--data",
            s(dataset()),
            "--out",
            s(out),
            "--models",
            "resnet,baseline",
            "--train.max_epochs=1",
            "--jobs",
            jobs,
        ]);
        assert!(table.contains("ROC_AUC") && table.contains("baseline"));
    }
    let files = ["report_resnet.json", "report_baseline.json", "roc_resnet.csv", "pr_baseline.csv", "manifest.json"];
    for f in files {
        assert_eq!(read(&outs[0].join(f)), read(&outs[1].join(f)), "{f} differs between runs");
    }

    let rf = read_report(&outs[0].join("report_resnet.json")).unwrap();
    assert_eq!(rf.provenance.seed, 7);
    assert_eq!(rf.provenance.config.eval.k, 4);
    // the flag beats the config file
    assert_eq!(rf.report.config.train.max_epochs, 1);
    assert_eq!(rf.report.folds.len(), 4);
    assert_eq!(rf.report.seed, ppg_screen_core::seed::derive_seed(7, "evaluate"));
    assert!(rf.report.audit.is_clean());
    assert!(rf.report.folds.iter().all(|f| f.epochs.len() == 1));

    let roc = std::fs::read_to_string(outs[0].join("roc_resnet.csv")).unwrap();
    assert!(roc.starts_with("fpr,tpr,threshold\n0,0,inf\n"));
    assert!(roc.lines().last().unwrap().starts_with("1,1,"));
    let pr = std::fs::read_to_string(outs[0].join("pr_baseline.csv")).unwrap();
    assert!(pr.starts_with("recall,precision,threshold\n"));

    let m: Manifest = serde_json::from_slice(&read(&outs[0].join("manifest.json"))).unwrap();
    assert_eq!(m.artifacts.len(), 6);
    assert_eq!(m.provenance.command, "evaluate");

    let table = ok(&["report", s(&outs[0].join("report_resnet.json")), s(&outs[0].join("report_baseline.json"))]);
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("Model") && lines[0].contains("Precision  Sensitivity  Specificity  ROC_AUC  PR_AUC"));
    assert!(lines[2].starts_with("resnet") && lines[3].starts_with("baseline"));
    assert!(ok(&["report", "--per-fold", s(&outs[0].join("report_resnet.json"))]).contains("fold 3"));
}

#[test]
fn train_then_screen() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("model");
    ok(&["train", "--data", s(dataset()), "--out", s(&model), "--model", "baseline", "--seed", "3"]);
    let weights = model.join("weights.bin");
    let log = std::fs::read_to_string(model.join("training_log.csv")).unwrap();
    assert_eq!(log, "epoch,train_loss,val_roc_auc\n");

    let line = ok(&["screen", "--weights", s(&weights), "--data", s(dataset()), "--subject", "S0003"]);
    let fields: Vec<&str> = line.trim_end().split('\t').collect();
    assert_eq!(fields[0], "S0003");
    let ratio: f64 = fields[1].strip_prefix("positive_ratio ").unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&ratio));
    assert_eq!(fields[2], if ratio >= 0.5 { "positive" } else { "negative" });
    let strict = ok(&["screen", "--weights", s(&weights), "--data", s(dataset()), "--subject", "S0003", "--eval.threshold=1.01"]);
    assert!(strict.contains("\tnegative\t"));

    let missing = run(&["screen", "--weights", s(&weights), "--data", s(dataset()), "--subject", "S9999"]);
    assert_eq!(missing.status.code(), Some(1));

    let mut bytes = read(&weights);
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    let bad = tmp.path().join("bad.bin");
    std::fs::write(&bad, bytes).unwrap();
    let out = run(&["screen", "--weights", s(&bad), "--data", s(dataset()), "--subject", "S0003"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn resnet_train_writes_log_and_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("m");
    ok(&["train", "--data", s(dataset()), "--out", s(&model), "--train.max_epochs=2", "--seed", "5"]);
    let log = std::fs::read_to_string(model.join("training_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    let (fitted, prov) = ppg_screen::weights::load(&model.join("weights.bin")).unwrap();
    assert_eq!(fitted.kind(), ppg_screen_core::eval::ModelKind::Resnet);
    assert_eq!((prov.command.as_str(), prov.seed), ("train", 5));
    let line = ok(&["screen", "--weights", s(&model.join("weights.bin")), "--data", s(dataset()), "--subject", "S0001"]);
    assert!(line.contains("positive_ratio "));
}

#[test]
fn preprocess_and_features_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let pre = tmp.path().join("pre");
    ok(&["preprocess", "--data", s(dataset()), "--out", s(&pre)]);
    let qc = std::fs::read_to_string(pre.join("qc.ndjson")).unwrap();
    let n_records = std::fs::read_to_string(dataset().join("records.ndjson")).unwrap().lines().count();
    assert_eq!(qc.lines().count(), n_records);
    let mut tiles = 0;
    for line in qc.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["beats"].as_array().unwrap().iter().all(|b| b["status"].is_string() && b["z_amp"].is_number()));
        tiles += v["tiled_segments"].as_u64().unwrap();
    }
    let segs = std::fs::read_to_string(pre.join("segments.ndjson")).unwrap();
    assert_eq!(segs.lines().count() as u64, tiles);
    let first: Value = serde_json::from_str(segs.lines().next().unwrap()).unwrap();
    assert_eq!(first["samples"].as_array().unwrap().len(), 1000);

    let feat = tmp.path().join("feat");
    ok(&["features", "--data", s(dataset()), "--out", s(&feat)]);
    let text = std::fs::read_to_string(feat.join("features.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 17);
    assert_eq!(&header[..2], ["subject_id", "label"]);
    assert_eq!(&header[2..], ppg_screen_core::features::FEATURE_NAMES);
    assert_eq!(text.lines().count(), 17);
}
