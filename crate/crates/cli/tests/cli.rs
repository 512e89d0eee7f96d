use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_imlkit"));
    c.env_remove("IML_TOOLKIT_SEED");
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut c = bin();
    c.args(args).arg("--out").arg(out);
    if let Some(p) = config {
        c.arg("--config").arg(p);
    }
    c.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

const FIG5: &str = "\
# masked interaction, small forest
dgp = fig5_masked
dgp.n = 300
learner.kind = random_forest
learner.params.n_trees = 20
method.name = pdp
method.feature = X2
method.grid_size = 10
";

#[test]
fn effect_writes_pdp_ice_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fig5.conf", FIG5);
    let out = tmp.path().join("out");
    let o = run(&["effect", "--seed", "5"], Some(&cfg), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let pdp = std::fs::read_to_string(out.join("pdp.csv")).unwrap();
    assert!(pdp.starts_with("grid,value\n"));
    assert_eq!(pdp.lines().count(), 11);
    let ice = std::fs::read_to_string(out.join("ice.csv")).unwrap();
    assert!(ice.starts_with("grid,value,row_id\n"));
    let r = report(&out);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["seed"], 5);
    assert_eq!(r["seed_source"], "flag");
    assert_eq!(r["config"]["method.feature"], "X2");
    for k in ["data", "split", "fit", "method", "audit"] {
        assert!(r["derived_seeds"][k].is_u64(), "missing derived seed {k}");
    }
    assert!(r["audit"].as_array().unwrap().iter().any(|f| f["pitfall_id"] == "P11_causal"));
    assert!(r["version"].is_string() && r["wall_clock_seconds"].is_number());
}

#[test]
fn same_seed_gives_identical_csvs_for_any_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fig5.conf", FIG5);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["effect", "--seed", "9", "--threads", "1"], Some(&cfg), &a).status.success());
    assert!(run(&["effect", "--seed", "9", "--threads", "3"], Some(&cfg), &b).status.success());
    for f in ["pdp.csv", "ice.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn invalid_learner_kind_exits_2_and_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.conf", "dgp = fig5_masked\nlearner.kind = svm\nmethod.feature = X1\n");
    let out = tmp.path().join("out");
    let o = run(&["effect"], Some(&cfg), &out);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("learner.kind") && err.contains("line 2"), "{err}");
    assert!(!out.exists(), "no output directory for a rejected config");
}

#[test]
fn unknown_and_unused_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.conf", "dgp = fig5_masked\nlearner.colour = red\n");
    let o = run(&["effect"], Some(&cfg), &tmp.path().join("a"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"));

    let cfg = write_config(tmp.path(), "b.conf", &format!("{FIG5}method.orderings = 10\n"));
    let o = run(&["effect"], Some(&cfg), &tmp.path().join("b"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("method.orderings"), "{}", stderr(&o));
}

#[test]
fn unknown_feature_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "f.conf", &FIG5.replace("method.feature = X2", "method.feature = X9"));
    let o = run(&["effect"], Some(&cfg), &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("X9") && stderr(&o).contains("line 7"), "{}", stderr(&o));
}

#[test]
fn failed_run_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "band.conf",
        &format!("{FIG5}method.band = estimation\nmethod.replicates = 5\n"),
    );
    let out = tmp.path().join("out");
    // a directory where the band file should go makes the last write fail
    std::fs::create_dir_all(out.join("band.csv")).unwrap();
    let o = run(&["effect"], Some(&cfg), &out);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!out.join("pdp.csv").exists());
    assert!(!out.join("ice.csv").exists());
    assert!(!out.join("report.json").exists());
    assert!(out.join("band.csv").is_dir(), "pre-existing entries are left alone");
}

#[test]
fn test_command_writes_adjusted_p_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "fig8.conf",
        "dgp = fig8_mcp\ndgp.p = 8\ndgp.n = 200\nsplit.test_fraction = 0.5\nlearner.params.n_trees = 10\n\
         method.name = pimp\nmethod.target_permutations = 20\nmethod.correction = bonferroni\n",
    );
    let out = tmp.path().join("out");
    let o = run(&["test", "--seed", "1"], Some(&cfg), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("tested_importance.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("feature,observed,p_raw,p_adjusted,significant"));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (raw, adj): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        assert!((adj - (raw * 8.0).min(1.0)).abs() < 1e-12);
    }
    let r = report(&out);
    assert!(r["audit"].as_array().unwrap().iter().any(|f| f["pitfall_id"] == "P10_mcp" || f["pitfall_id"] == "P11_causal"));
}

#[test]
fn importance_interaction_and_dependence_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let base = "dgp = fig5_masked\ndgp.n = 300\nlearner.params.n_trees = 20\n";
    let imp = write_config(tmp.path(), "imp.conf", &format!("{base}method.name = pfi\nmethod.repeats = 3\n"));
    let o = run(&["importance"], Some(&imp), &tmp.path().join("imp"));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("imp/importance.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let h = write_config(tmp.path(), "h.conf", &format!("{base}method.features = X2, X3\nmethod.rows = 60\n"));
    let o = run(&["interaction"], Some(&h), &tmp.path().join("h"));
    assert!(o.status.success(), "{}", stderr(&o));
    let pairs = std::fs::read_to_string(tmp.path().join("h/h_pairwise.csv")).unwrap();
    assert!(pairs.starts_with("feature_a,feature_b,h_squared\nX2,X3,"));
    assert!(tmp.path().join("h/h_total.csv").exists());

    let d = write_config(
        tmp.path(),
        "d.conf",
        "dgp = ring_dependence\ndgp.n = 200\nmethod.permutations = 99\nmethod.feature = X1\nmethod.strategy = quantile, permutation\n",
    );
    let o = run(&["dependence"], Some(&d), &tmp.path().join("d"));
    assert!(o.status.success(), "{}", stderr(&o));
    let dep = std::fs::read_to_string(tmp.path().join("d/dependence.csv")).unwrap();
    assert!(dep.starts_with("feature_a,feature_b,pearson,spearman,hsic,hsic_p\n"));
    let ex = std::fs::read_to_string(tmp.path().join("d/extrapolation.csv")).unwrap();
    assert_eq!(ex.lines().count(), 3);
}

#[test]
fn audit_failure_exits_1_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "audit.conf",
        "dgp = correlated_gaussian\ndgp.rho = 0.95\ndgp.n = 400\nlearner.kind = ols_linear\n\
         method.name = pdp\nmethod.feature = X1\nmethod.grid = equidistant\n",
    );
    let out = tmp.path().join("out");
    let o = run(&["audit"], Some(&cfg), &out);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["status"], "fail");
    assert_eq!(r["failing_metrics"][0], "audit_fail_findings");
    let findings: Value = serde_json::from_str(&std::fs::read_to_string(out.join("audit.json")).unwrap()).unwrap();
    assert!(findings.as_array().unwrap().iter().any(|f| f["pitfall_id"] == "P4_extrapolation" && f["severity"] == "fail"));
}

#[test]
fn reproduce_scm8_passes_and_unknown_figure_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("scm8");
    let o = run(&["reproduce", "scm8", "--seed", "2"], None, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("scm8.csv")).unwrap();
    assert!(csv.starts_with("term,estimate,reference\n"));
    let r = report(&out);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["command"], "reproduce scm8");
    assert!(r["checks"].as_array().unwrap().len() >= 6);

    let o = run(&["reproduce", "fig7"], None, &tmp.path().join("x"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("env");
    let o = bin().args(["reproduce", "assoc", "--out"]).arg(&out).env("IML_TOOLKIT_SEED", "42").output().unwrap();
    assert!(o.status.code().is_some());
    let r = report(&out);
    assert_eq!(r["seed"], 42);
    assert_eq!(r["seed_source"], "env");

    let cfg = write_config(tmp.path(), "s.conf", "seed = 7\n");
    let out = tmp.path().join("cfg");
    bin().args(["reproduce", "assoc", "--config"]).arg(&cfg).arg("--out").arg(&out).env("IML_TOOLKIT_SEED", "42").output().unwrap();
    assert_eq!(report(&out)["seed"], 7);

    let bad = bin().args(["reproduce", "assoc", "--out"]).arg(tmp.path().join("bad")).env("IML_TOOLKIT_SEED", "abc").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn commands_other_than_reproduce_need_a_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["importance"], None, &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
}
