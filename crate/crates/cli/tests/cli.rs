use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ahfe_cli::report::ComparisonDoc;

fn ahfe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ahfe"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generate_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = ahfe(dir.path(), &["generate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("blobs.csv")).unwrap();
    assert!(text.starts_with("f0,f1,label\n"));
    assert_eq!(text.lines().count(), 2001);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("class_counts: 1000,200,540,100,160"), "{stdout}");
}

#[test]
fn generate_rejects_bad_proportions() {
    let dir = tempfile::tempdir().unwrap();
    let out = ahfe(dir.path(), &["generate", "--proportions", "0.5,0.1,0.2,0.05,0.05"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("sum"), "{}", stderr(&out));
    assert!(!dir.path().join("blobs.csv").exists());
    let out = ahfe(dir.path(), &["generate", "--classes", "1"]);
    assert_eq!(code(&out), 2);
    let out = ahfe(dir.path(), &["generate", "--bogus"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn train_writes_128_epochs_of_curves() {
    let dir = tempfile::tempdir().unwrap();
    ahfe(dir.path(), &["generate", "--total", "300", "--out", "d.csv"]);
    let out = ahfe(
        dir.path(),
        &["train", "--data", "d.csv", "--epochs", "128", "--out", "run"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let curves = fs::read_to_string(dir.path().join("run/curves.csv")).unwrap();
    let mut lines = curves.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,val_loss,train_acc,val_acc"));
    assert_eq!(lines.count(), 128);
    assert!(!curves.contains('\r'));
    for f in ["model.toml", "metrics.json", "metrics.txt"] {
        assert!(dir.path().join("run").join(f).exists(), "{f}");
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["averaging"], "macro");
    assert_eq!(metrics["per_class"].as_array().unwrap().len(), 5);
}

#[test]
fn reduced_ahfe_reproduces_cce_curves() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["train", "--epochs", "15", "--seed", "6"];
    let cce = ahfe(dir.path(), &[&common[..], &["--loss", "cce", "--out", "cce"]].concat());
    assert_eq!(code(&cce), 0, "{}", stderr(&cce));
    let reduced = ahfe(
        dir.path(),
        &[
            &common[..],
            &[
                "--loss",
                "ahfe",
                "--gamma",
                "0",
                "--lambda",
                "0",
                "--weight-mode",
                "uniform",
                "--out",
                "ahfe",
            ],
        ]
        .concat(),
    );
    assert_eq!(code(&reduced), 0, "{}", stderr(&reduced));
    let a = fs::read(dir.path().join("cce/curves.csv")).unwrap();
    let b = fs::read(dir.path().join("ahfe/curves.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn train_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ahfe(dir.path(), &["train", "--data", "missing.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("missing.csv"));

    fs::write(dir.path().join("bad.csv"), "f0,f1,label\n1,2,0\n1,x,1\n").unwrap();
    let out = ahfe(dir.path(), &["train", "--data", "bad.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.csv:3"), "{}", stderr(&out));

    let mut huge = String::from("f0,label\n");
    for i in 0..10 {
        let sign = if i % 2 == 0 { "" } else { "-" };
        huge.push_str(&format!("{sign}{}e300,{}\n", 1 + i % 3, i % 2));
    }
    fs::write(dir.path().join("huge.csv"), huge).unwrap();
    let out = ahfe(
        dir.path(),
        &["train", "--data", "huge.csv", "--batch-size", "2", "--out", "nan"],
    );
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("epoch 1, batch"), "{}", stderr(&out));

    let out = ahfe(dir.path(), &["train", "--loss", "ahfe", "--gamma", "-1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn train_reads_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("exp.toml"),
        r#"
output_dir = "from_config"
seeds = [4]
[dataset]
total = 250
[model]
kind = "mlp1"
hidden_dim = 6
activation = "tanh"
[train]
epochs = 4
[[losses]]
loss = "focal"
gamma = 1.0
"#,
    )
    .unwrap();
    let out = ahfe(dir.path(), &["train", "--config", "exp.toml"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let model = ahfe_cli::model_io::load_model(&dir.path().join("from_config/model.toml")).unwrap();
    assert_eq!(model.spec.kind, "mlp1");
    assert_eq!(model.train.loss, "focal");
    assert_eq!(model.train.gamma, 1.0);
    assert_eq!(model.train.seed, 4);
    assert_eq!(model.model().unwrap().parameters.len(), 2 * 6 + 6 + 6 * 5 + 5);

    fs::write(dir.path().join("typo.toml"), "[train]\nepoch = 3\n").unwrap();
    let out = ahfe(dir.path(), &["train", "--config", "typo.toml"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn compare_counts_and_matches_standalone_runs() {
    let dir = tempfile::tempdir().unwrap();
    ahfe(dir.path(), &["generate", "--total", "400", "--out", "d.csv"]);
    let out = ahfe(
        dir.path(),
        &[
            "compare",
            "--data",
            "d.csv",
            "--epochs",
            "6",
            "--seeds",
            "1,2,3,4,5",
            "--out",
            "cmp",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cmp = dir.path().join("cmp");
    let curves: Vec<_> = fs::read_dir(&cmp)
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            name.starts_with("curves_").then_some(name)
        })
        .collect();
    assert_eq!(curves.len(), 10);
    let table = fs::read_to_string(cmp.join("comparison.txt")).unwrap();
    assert_eq!(
        table
            .lines()
            .filter(|l| l.starts_with("cce ") || l.starts_with("ahfe "))
            .count(),
        4
    );

    let doc: ComparisonDoc = serde_json::from_str(&fs::read_to_string(cmp.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(doc.cells.len(), 10);
    for agg in &doc.aggregates {
        let cells: Vec<_> = doc.cells.iter().filter(|c| c.loss == agg.loss).collect();
        let values: Vec<f64> = cells.iter().map(|c| c.metrics.as_ref().unwrap().macro_recall).collect();
        let s = agg.macro_recall.unwrap();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= s.median && s.median <= hi);
        assert_eq!((s.min, s.max), (lo, hi));
    }

    let out = ahfe(
        dir.path(),
        &[
            "train", "--data", "d.csv", "--epochs", "6", "--seed", "3", "--loss", "cce", "--out", "solo",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read(dir.path().join("solo/curves.csv")).unwrap(),
        fs::read(cmp.join("curves_cce_seed3.csv")).unwrap()
    );
    assert_eq!(
        fs::read(dir.path().join("solo/metrics.json")).unwrap(),
        fs::read(cmp.join("metrics_cce_seed3.json")).unwrap()
    );
}

#[test]
fn compare_preconditions_and_failed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = ahfe(dir.path(), &["compare", "--seeds", "1,2,3,4"]);
    assert_eq!(code(&out), 2);
    let out = ahfe(dir.path(), &["compare", "--seeds", "1,1,2,3,4"]);
    assert_eq!(code(&out), 2);

    let mut huge = String::from("f0,label\n");
    for i in 0..20 {
        let sign = if i % 2 == 0 { "" } else { "-" };
        huge.push_str(&format!("{sign}{}e300,{}\n", 1 + i % 3, i % 2));
    }
    fs::write(dir.path().join("huge.csv"), huge).unwrap();
    let out = ahfe(
        dir.path(),
        &[
            "compare",
            "--data",
            "huge.csv",
            "--batch-size",
            "2",
            "--epochs",
            "2",
            "--seeds",
            "1,2,3,4,5",
            "--out",
            "c",
        ],
    );
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let doc: ComparisonDoc =
        serde_json::from_str(&fs::read_to_string(dir.path().join("c/comparison.json")).unwrap()).unwrap();
    let failed: Vec<_> = doc.cells.iter().filter(|c| c.status == "failed").collect();
    assert!(!failed.is_empty());
    assert!(failed
        .iter()
        .all(|c| c.error.is_some() && c.metrics.is_none() && c.curves_file.is_none()));
    let failed_agg: usize = doc.aggregates.iter().map(|a| a.failed).sum();
    assert_eq!(failed_agg, failed.len());
    assert!(fs::read_to_string(dir.path().join("c/comparison.txt"))
        .unwrap()
        .contains("Failed runs"));
}

#[test]
fn gradcheck_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = ahfe(dir.path(), &["gradcheck", "--loss", "cce", "--cases", "1"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("num_cases: 1\n"), "{text}");
    assert!(text.contains("pass: true"));

    let out = ahfe(
        dir.path(),
        &["gradcheck", "--loss", "ahfe", "--cases", "1000", "--seed", "7"],
    );
    assert_eq!(code(&out), 0);

    let out = ahfe(dir.path(), &["gradcheck", "--loss", "hinge"]);
    assert_eq!(code(&out), 2);
    let out = ahfe(dir.path(), &["gradcheck", "--cases", "0"]);
    assert_eq!(code(&out), 2);
}
