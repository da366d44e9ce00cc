use std::path::Path;
use std::process::{Command, Output};

fn ptde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptde"))
        .args(args)
        .env_remove("PTDE_SEED")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_train_score_eval_roc() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = ptde(&["synth", "--out-dir", s(&data), "--dim", "16", "--seed", "2"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = data.join("manifest.json");
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), s(&manifest));

    let ckpt = dir.path().join("head.ckpt");
    let out = ptde(&[
        "train",
        "--manifest",
        s(&manifest),
        "--out-checkpoint",
        s(&ckpt),
        "--epochs",
        "30",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let log = std::fs::read_to_string(dir.path().join("head.ckpt.log")).unwrap();
    assert_eq!(log.lines().filter(|l| !l.starts_with('#')).count(), 30);

    let m = ptde::load_manifest(&manifest).unwrap();
    let video = m.videos_in(ptde::Split::Test).next().unwrap();
    let bag = ptde::load_video_bag(&m, &video.id, ptde::FusionMode::GlobalLocalConcat).unwrap();
    let out = ptde(&[
        "score",
        "--checkpoint",
        s(&ckpt),
        "--manifest",
        s(&manifest),
        "--video-id",
        &video.id,
    ]);
    assert!(out.status.success());
    let lines: Vec<f64> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(lines.len(), bag.segments.len());
    assert!(lines.iter().all(|x| (0.0..=1.0).contains(x)));

    let out = ptde(&["eval", "--checkpoint", s(&ckpt), "--manifest", s(&manifest)]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["threshold"], 0.2);
    let keys: Vec<&String> = report["per_category_auc"]
        .as_object()
        .unwrap()
        .keys()
        .collect();
    assert_eq!(keys, ["Delivery", "Irrelevant", "Pickup"]);
    assert!(report["overall_auc"].as_f64().unwrap() > 0.5);

    let csv = dir.path().join("roc.csv");
    let svg = dir.path().join("roc.svg");
    let out = ptde(&[
        "roc",
        "--checkpoint",
        s(&ckpt),
        "--manifest",
        s(&manifest),
        "--out-csv",
        s(&csv),
        "--out-svg",
        s(&svg),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("threshold,fpr,tpr"));
    assert_eq!(lines.next(), Some("inf,0,0"));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn train_with_missing_manifest_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let out = ptde(&[
        "train",
        "--manifest",
        s(&missing),
        "--out-checkpoint",
        s(&dir.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(ptde(&["train"]).status.code(), Some(1));
    assert_eq!(ptde(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        ptde(&[
            "train",
            "--manifest",
            "m",
            "--out-checkpoint",
            "c",
            "--fusion",
            "both"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(ptde(&["--help"]).status.code(), Some(0));
    assert_eq!(ptde(&["--version"]).status.code(), Some(0));
}

#[test]
fn score_with_foreign_checkpoint_is_dimension_error() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (d, dim) in [(&a, "8"), (&b, "12")] {
        let synth = [
            "synth",
            "--out-dir",
            s(d),
            "--dim",
            dim,
            "--train-counts",
            "2,1,1,1",
            "--test-counts",
            "1,1,1,1",
        ];
        assert!(ptde(&synth).status.success());
    }
    let ckpt = dir.path().join("a.ckpt");
    let manifest_a = a.join("manifest.json");
    let train = [
        "train",
        "--manifest",
        s(&manifest_a),
        "--out-checkpoint",
        s(&ckpt),
        "--epochs",
        "2",
    ];
    assert!(ptde(&train).status.success());
    let out = ptde(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--manifest",
        s(&b.join("manifest.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
}
