use std::path::Path;
use std::process::{Command, Output};

fn divlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divlab"))
        .args(args)
        .env_remove("DIVLAB_OUT")
        .env_remove("DIVLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn healthy_verify_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = divlab(&["verify", "--filter", "key-identity,phase-predictor,regime-envelopes", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("PASS ").count(), 3, "{text}");
    let csv = std::fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(!csv.contains('\r'));
}

#[test]
fn corrupted_fixture_fails_naming_the_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let mut fx: serde_json::Value =
        serde_json::from_str(include_str!("../../core/fixtures/acceptance.json")).unwrap();
    fx["regime_bands"]["ii"] = serde_json::json!([100.0, 200.0]);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, fx.to_string()).unwrap();
    let o = divlab(&[
        "verify",
        "--filter",
        "regime-envelopes",
        "--fixtures",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("C7:regime-envelopes"), "{}", stderr(&o));
    assert!(stdout(&o).contains("FAIL C7"));
}

#[test]
fn group_filter_selects_poisson_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let o = divlab(&["verify", "--filter", "poisson", "--out", dir.path().to_str().unwrap(), "--json"]);
    let text = stdout(&o);
    let ids: Vec<&str> = text
        .lines()
        .filter_map(|l| l.split_whitespace().nth(1))
        .filter(|w| w.starts_with('C'))
        .collect();
    assert_eq!(ids, ["C1:key-identity", "C6:phase-predictor", "C7:regime-envelopes", "C8:poisson-tail"]);
    let summary: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(summary["criteria"], 4);
}

#[test]
fn verify_csv_is_byte_identical_across_runs_and_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let filter = "poisson,daniels";
    divlab(&["verify", "--filter", filter, "--threads", "1", "--out", a.path().to_str().unwrap()]);
    divlab(&["verify", "--filter", filter, "--threads", "8", "--out", b.path().to_str().unwrap()]);
    let ra = std::fs::read(a.path().join("verify.csv")).unwrap();
    let rb = std::fs::read(b.path().join("verify.csv")).unwrap();
    assert!(!ra.is_empty());
    assert_eq!(ra, rb);
}

#[test]
fn smirnov_output_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "experiment = \"smirnov\"\nsamples = 30000\nk = [3, 6]\nv = [6.0]\nc = [2.0]\nm = 1\n").unwrap();
    let mut bodies = Vec::new();
    for t in ["1", "4"] {
        let out = dir.path().join(t);
        let o = divlab(&["smirnov", "-c", cfg.to_str().unwrap(), "--threads", t, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        bodies.push(std::fs::read(out.join("smirnov.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn env_overrides_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_divlab"))
        .args(["poisson-phase", "--config", &config("poisson_phase.toml"), "--format", "json"])
        .env("DIVLAB_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("poisson_regimes.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 9);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "poisson-phase");
    assert!(manifest["created_unix"].as_u64().unwrap() > 0);
}

#[test]
fn config_errors_exit_two_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"aq-dichotomy\"\nprime_sets = [\"all\"]\nn = []\n").unwrap();
    let o = divlab(&["aq-dichotomy", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("field `n`"), "{}", stderr(&o));

    let o = divlab(&["hq-scan", "--config", &config("smirnov.toml")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not `hq-scan`"));

    let o = divlab(&["hq-scan"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    for name in ["hq_scan.toml", "aq_dichotomy.toml", "poisson_phase.toml", "smirnov.toml", "verify.toml"] {
        divlab::config::ExperimentConfig::load(Path::new(&config(name))).unwrap();
    }
}
