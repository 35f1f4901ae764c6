use std::path::Path;
use std::process::{Command, Output};

fn ngrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ngrid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ngrid(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn demo_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo");
    ok(&["demo", "--out", s(&demo), "--reps", "4"]);
    let scenario = demo.join("scenario.toml");
    assert!(ok(&["validate", "--scenario", s(&scenario)]).contains("500 n-grids, 750 EVs"));

    let serial = dir.path().join("serial");
    let parallel = dir.path().join("parallel");
    ok(&[
        "sweep",
        "--scenario",
        s(&scenario),
        "--out",
        s(&serial),
        "--repair",
        "1,2",
        "--serial",
    ]);
    ok(&[
        "sweep",
        "--scenario",
        s(&scenario),
        "--out",
        s(&parallel),
        "--repair",
        "1,2",
    ]);
    for name in [
        "fleet_series.csv",
        "summary.csv",
        "outages.csv",
        "sweep.csv",
    ] {
        let a = std::fs::read(serial.join(name)).unwrap();
        assert_eq!(a, std::fs::read(parallel.join(name)).unwrap(), "{name}");
    }
    let sweep = std::fs::read_to_string(serial.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);

    let plain = dir.path().join("plain");
    ok(&[
        "simulate",
        "--scenario",
        s(&scenario),
        "--out",
        s(&plain),
        "--reps",
        "2",
        "--seed",
        "3",
        "--precharge",
        "sor",
    ]);
    assert!(!plain.join("sweep.csv").exists());
    let outages = std::fs::read_to_string(plain.join("outages.csv")).unwrap();
    assert!(outages
        .lines()
        .skip(1)
        .all(|l| l.starts_with("0,") || l.starts_with("1,")));
}

#[test]
fn metrics_command() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    std::fs::write(&scores, "label,score\n0,0.1\n0,0.4\n1,0.35\n1,0.8\n").unwrap();
    let out = ok(&["metrics", "--scores", s(&scores)]);
    assert!(out.contains("roc_auc 0.750000"), "{out}");
}

#[test]
fn sor_train_score_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    let mut text = String::from("feeder_id,hour,label,wind,cat:terrain\n");
    for i in 0..120 {
        let wind = (i * 37 % 100) as f64;
        let terrain = ["hill", "flat", "coast"][i % 3];
        let label = u8::from(wind > 60.0);
        text.push_str(&format!("F{},{},{label},{wind},{terrain}\n", i % 5, i / 5));
    }
    std::fs::write(&data, text).unwrap();
    let model = dir.path().join("model.json");
    ok(&[
        "sor",
        "train",
        "--data",
        s(&data),
        "--out",
        s(&model),
        "--n-stumps",
        "20",
    ]);
    assert!(
        ok(&["sor", "eval", "--model", s(&model), "--data", s(&data)]).contains("roc_auc 1.000000")
    );
    let table = dir.path().join("sor.csv");
    ok(&[
        "sor",
        "score",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--out",
        s(&table),
    ]);
    let sor = std::fs::read_to_string(&table).unwrap();
    assert_eq!(sor.lines().next(), Some("feeder_id,hour,probability"));
    assert_eq!(sor.lines().count(), 121);
}

#[test]
fn exit_codes() {
    let missing = ngrid(&[
        "simulate",
        "--scenario",
        "/no/such/scenario.toml",
        "--out",
        "/tmp/x",
    ]);
    assert_eq!(missing.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo");
    ok(&["demo", "--out", s(&demo)]);
    let fleet = demo.join("fleet.toml");
    let text = std::fs::read_to_string(&fleet).unwrap();
    std::fs::write(
        &fleet,
        text.replacen("soc0_kwh = 13.5", "soc0_kwh = 20.0", 1),
    )
    .unwrap();
    let bad = ngrid(&["validate", "--scenario", s(&demo.join("scenario.toml"))]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("F01-N01"));

    let scores = dir.path().join("scores.csv");
    std::fs::write(&scores, "label,score\n1,0.4\n1,0.9\n").unwrap();
    assert_eq!(
        ngrid(&["metrics", "--scores", s(&scores)]).status.code(),
        Some(1)
    );
}
