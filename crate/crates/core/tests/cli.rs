mod common;

use std::path::Path;
use std::process::{Command, Output};

use vinehedge_core::harness::Manifest;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vinehedge"));
    c.env("SOURCE_DATE_EPOCH", "1700000000");
    c
}

fn vh(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scenario_generation_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::run_config(dir.path(), "");
    for method in ["rvc", "mvn"] {
        let (a, b) = (
            dir.path().join(format!("{method}-a")),
            dir.path().join(format!("{method}-b")),
        );
        for out in [&a, &b] {
            let o = vh(&[
                "gen-scenarios",
                "--config",
                s(&cfg),
                "--method",
                method,
                "--out",
                s(out),
            ]);
            assert_eq!(code(&o), 0, "{}", stderr(&o));
        }
        for f in ["scenarios.csv", "scenarios.json"] {
            assert_eq!(
                std::fs::read(a.join(f)).unwrap(),
                std::fs::read(b.join(f)).unwrap(),
                "{method} {f}"
            );
        }
    }
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::run_config(dir.path(), "populaton = 30\n");
    let o = vh(&[
        "optimize",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("populaton"), "{}", stderr(&o));
}

#[test]
fn bad_config_value_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::run_config(dir.path(), "generations = \"many\"\n");
    let o = vh(&[
        "optimize",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("generations"), "{}", stderr(&o));
}

#[test]
fn exit_codes_by_error_class() {
    assert_eq!(code(&vh(&["--help"])), 0);
    assert_eq!(code(&vh(&["--version"])), 0);
    assert_eq!(code(&vh(&["no-such-command"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let o = vh(&[
        "gen-scenarios",
        "--panel",
        "/nonexistent/panel.csv",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = vh(&[
        "gen-scenarios",
        "--config",
        s(&common::run_config(dir.path(), "")),
        "--method",
        "copula",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn optimize_backtest_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::run_config(dir.path(), "");
    let opt = dir.path().join("opt");
    let o = vh(&["optimize", "--config", s(&cfg), "--out", s(&opt)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(opt.join("solution.json")).unwrap()).unwrap();
    assert_eq!(report["mu"], 0.004);
    assert!(report["cvar"].is_number());
    let trace = std::fs::read_to_string(opt.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 6);

    let manifest = Manifest::read(&opt.join("manifest.json")).unwrap();
    assert_eq!(manifest.command, "optimize");
    assert_eq!(manifest.seed, 3);
    assert_eq!(manifest.timestamp, "2023-11-14T22:13:20Z");
    assert_eq!(manifest.outputs.len(), 2);

    let bt = dir.path().join("bt");
    let solution = opt.join("solution.json");
    let o = vh(&[
        "backtest",
        "--config",
        s(&cfg),
        "--solution",
        s(&solution),
        "--out",
        s(&bt),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = std::fs::read_to_string(bt.join("backtest.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 41);

    let again = dir.path().join("again");
    let o = bin()
        .env_remove("SOURCE_DATE_EPOCH")
        .args(["replay", s(&opt.join("manifest.json")), "--out", s(&again)])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["solution.json", "trace.csv"] {
        assert_eq!(
            std::fs::read(opt.join(f)).unwrap(),
            std::fs::read(again.join(f)).unwrap()
        );
    }

    let mut tampered = manifest.clone();
    tampered.outputs[0].sha256 = "0".repeat(64);
    let bad = dir.path().join("tampered.json");
    tampered.write(&bad).unwrap();
    let o = vh(&["replay", s(&bad), "--out", s(&dir.path().join("third"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::run_config(dir.path(), "");
    let out = dir.path().join("g");
    let o = vh(&[
        "gen-scenarios",
        "--config",
        s(&cfg),
        "--n",
        "17",
        "--seed",
        "9",
        "--method=mvn",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("scenarios.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 17);
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("scenarios.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 9);
    assert_eq!(meta["method"], "mvn");
}

#[test]
fn frontier_and_stability_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::run_config(
        dir.path(),
        "mu_start = 0.002\nmu_step = 0.004\nmu_points = 3\nstability_sizes = [40, 60]\nstability_seeds = 2\n",
    );
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("mu = 0.004\n", "");
    std::fs::write(&cfg, text).unwrap();
    let fr = dir.path().join("fr");
    let o = vh(&["frontier", "--config", s(&cfg), "--out", s(&fr)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(fr.join("frontier.csv")).unwrap();
    assert!(
        csv.starts_with("mu,achieved_return,cvar,equity_share,fx_exposure,total_overlay,status")
    );
    assert_eq!(csv.lines().count(), 1 + 3);

    let st = dir.path().join("st");
    let o = vh(&[
        "stability",
        "--config",
        s(&cfg),
        "--method",
        "mvn",
        "--out",
        s(&st),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(st.join("stability.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
}
