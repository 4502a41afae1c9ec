use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sbr_core::motivex::{constants, describe_constants, MotivExParams};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn fixture(name: &str) -> String {
    fixtures().join(name).to_str().unwrap().to_owned()
}

fn sbr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbr"))
        .args(args)
        .env_remove("SBR_THREADS")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn portfolio_args<'a>(out: &'a str, extra: &[&'a str]) -> Vec<String> {
    let mut v: Vec<String> = vec![
        "portfolio-exp".into(),
        "--train".into(),
        fixture("returns_2021.csv"),
        "--test".into(),
        fixture("returns_2022.csv"),
        "--adverse".into(),
        fixture("returns_2020.csv"),
        "--index".into(),
        fixture("index_2020.csv"),
        "--out".into(),
        out.into(),
    ];
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run_owned(args: &[String]) -> Output {
    sbr(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn help_exits_zero_everywhere() {
    assert_eq!(code(&sbr(&["--help"])), 0);
    for cmd in ["newsvendor-exp", "portfolio-exp", "motivex", "export-model"] {
        let o = sbr(&[cmd, "--help"]);
        assert_eq!(code(&o), 0, "{cmd}");
        assert!(stdout(&o).contains("--seed") || cmd == "export-model" && stdout(&o).contains("--big-m"));
        assert!(stdout(&o).contains("--config") && stdout(&o).contains("--threads"));
    }
}

#[test]
fn newsvendor_single_run_writes_frontier() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let o = sbr(&["newsvendor-exp", "--reps", "1", "--n", "50", "--m", "5", "--seed", "7", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("frontier.csv")).unwrap();
    assert!(text.lines().count() - 1 >= 36);
    assert!(text.contains("sbr-m5") && text.contains("wdro1") && text.contains("saa"));
    assert!(out.join("frontier.svg").is_file() && out.join("summary.json").is_file());

    let again = dir.path().join("b");
    let o = sbr(&["newsvendor-exp", "--m", "5", "--seed", "7", "--threads", "1", "--out", path_str(&again)]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(out.join("frontier.csv")).unwrap(), std::fs::read(again.join("frontier.csv")).unwrap());
}

#[test]
fn newsvendor_config_errors_exit_2() {
    assert_eq!(code(&sbr(&["newsvendor-exp", "--n", "50"])), 2);
    let o = sbr(&["newsvendor-exp", "--m", "60", "--n", "50"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("exceeds"));
    assert_eq!(code(&sbr(&["newsvendor-exp", "--m", "5", "--alpha", "1.5"])), 2);
    assert_eq!(code(&sbr(&["newsvendor-exp", "--m", "5", "--params", "/no/such/file.csv"])), 2);
}

#[test]
fn newsvendor_study_writes_relpoints() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbr(&[
        "newsvendor-exp", "--reps", "3", "--m", "3", "--test-size", "500", "--grid", "0.1,1", "--out", path_str(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("relpoints.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(stdout(&o).contains("strictly south-west"));
}

#[test]
fn config_file_sets_keys_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# study\nm = 60\nn=50\n").unwrap();
    let o = sbr(&["newsvendor-exp", "--config", path_str(&cfg)]);
    assert_eq!(code(&o), 2, "m from the file exceeds n");
    let out = dir.path().join("out");
    let o = sbr(&[
        "newsvendor-exp", "--config", path_str(&cfg), "--m", "2", "--grid", "0.5", "--test-size", "200", "--out", path_str(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("m = 2"));

    std::fs::write(&cfg, "m=5\nbogus=1\n").unwrap();
    let o = sbr(&["newsvendor-exp", "--config", path_str(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown key 'bogus'"));
    assert_eq!(code(&sbr(&["newsvendor-exp", "--config", "/no/such.cfg"])), 2);
}

#[test]
fn portfolio_reports_scenario_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = path_str(dir.path()).to_owned();
    let o = run_owned(&portfolio_args(&out, &["--thresholds", "-0.02", "--methods", "saa"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("threshold -0.02: m = 26"), "{}", stdout(&o));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["thresholds"][0]["m"], 26);
}

#[test]
fn portfolio_without_crossings_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = path_str(dir.path()).to_owned();
    let o = run_owned(&portfolio_args(&out, &["--thresholds", "-0.5"]));
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("no observation crosses the threshold -0.5"));
}

#[test]
fn portfolio_variants_have_distinct_tags() {
    let dir = tempfile::tempdir().unwrap();
    let mut tags = Vec::new();
    for variant in ["linear", "quadratic"] {
        let out = dir.path().join(variant);
        let o = run_owned(&portfolio_args(
            path_str(&out),
            &["--thresholds", "-0.05", "--methods", "sbr", "--variant", variant, "--grid", "0.1", "--random-starts", "0"],
        ));
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let text = std::fs::read_to_string(out.join("frontier_m0p05.csv")).unwrap();
        let methods: std::collections::BTreeSet<String> =
            text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().to_owned()).collect();
        tags.push(methods);
    }
    assert!(tags[0].contains("sbr-linear") && !tags[0].contains("sbr-quadratic"));
    assert!(tags[1].contains("sbr-quadratic") && !tags[1].contains("sbr-linear"));
}

#[test]
fn portfolio_missing_file_exits_2() {
    let o = sbr(&["portfolio-exp", "--train", "/no/a.csv", "--test", "/no/b.csv", "--adverse", "/no/c.csv", "--index", "/no/d.csv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn motivex_defaults_echo_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbr(&["motivex", "--beta", "0.5", "--sigma", "0.5", "--R", "0.5", "--out", path_str(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let want = describe_constants(&constants(&MotivExParams::new(0.5, 0.5, 0.5).unwrap()));
    assert!(stdout(&o).contains(&want));
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.lines().count() > 1);
    for f in ["tubes.csv", "mean.svg", "premium.svg", "summary.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn motivex_rejects_bad_beta() {
    assert_eq!(code(&sbr(&["motivex", "--beta", "0"])), 2);
    assert_eq!(code(&sbr(&["motivex", "--beta=-1"])), 2);
}

#[test]
fn export_matches_golden_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("model.json");
    let train = fixture("newsvendor_train.csv");
    let o = sbr(&[
        "export-model", "--family", "newsvendor", "--train", &train, "--m", "5", "--seed", "7", "--eps", "1", "--out", path_str(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(fixtures().join("newsvendor_model.json")).unwrap());

    let o = sbr(&[
        "export-model", "--family", "newsvendor", "--train", &train, "--m", "5", "--seed", "7", "--eps", "1", "--big-m", "1,1,1,1,1",
        "--out", path_str(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("big-M"));
}

#[test]
fn portfolio_export_quadratic_adds_s() {
    let dir = tempfile::tempdir().unwrap();
    let mut counts = Vec::new();
    for variant in ["linear", "quadratic"] {
        let out = dir.path().join(format!("{variant}.json"));
        let o = sbr(&[
            "export-model", "--family", "portfolio", "--train", &fixture("returns_2021.csv"), "--adverse", &fixture("returns_2020.csv"),
            "--index", &fixture("index_2020.csv"), "--threshold", "-0.035", "--variant", variant, "--eps", "0.1", "--out",
            path_str(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let model = sbr_core::solve::model::read_model(&out).unwrap();
        assert_eq!(model.binary_count(), 11);
        counts.push((model.variables.len(), model.var("s").is_some()));
    }
    assert_eq!(counts[1].0, counts[0].0 + 1);
    assert!(!counts[0].1 && counts[1].1);
}

#[test]
fn thread_env_fallback_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for (i, threads) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(i.to_string());
        let o = Command::new(env!("CARGO_BIN_EXE_sbr"))
            .args(["motivex", "--reps", "3", "--n-test", "1000", "--out", path_str(&out)])
            .env("SBR_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        bytes.push(std::fs::read(out.join("report.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}
