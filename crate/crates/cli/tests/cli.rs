use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cchr_core::sim::SimDesign;
use cchr_core::FitResult;
use serde_json::Value;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/lowdep_n400.csv")
}

fn cchr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cchr"))
        .args(args)
        .env_remove("CCHR_THREADS")
        .output()
        .expect("spawn cchr")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.code() == Some(0),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn quick_fit(extra: &[&str]) -> Output {
    let input = fixture();
    let mut args = vec!["fit", "--input", input.to_str().unwrap(), "--starts", "2"];
    args.extend_from_slice(extra);
    cchr(&args)
}

#[test]
fn fit_report_has_finite_fields() {
    let v = json(&quick_fit(&["--h1", "0.3", "--h2", "0.3", "--seed", "3"]));
    let params = v["parameters"].as_array().unwrap();
    let names: Vec<&str> = params.iter().map(|p| p["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["alpha", "beta1", "beta2", "eta0", "eta1", "eta2", "eta3", "nu", "tau"]);
    assert!(params.iter().all(|p| p["estimate"].as_f64().unwrap().is_finite()));
    assert!(v["loglik"].as_f64().unwrap().is_finite());
    assert_eq!(v["converged"], Value::Bool(true));
    assert!(v["n_outer"].as_u64().unwrap() >= 1);
    let times = v["hazard"]["time"].as_array().unwrap();
    assert_eq!(times.len(), v["hazard"]["increment"].as_array().unwrap().len());
    assert!(!times.is_empty());
    assert_eq!(v["fit"]["first_stage"]["h1"].as_f64(), Some(0.3));
}

#[test]
fn naive_weights_are_all_one() {
    let v = json(&quick_fit(&["--weights", "naive"]));
    let kappa = v["fit"]["weights_used"]["kappa"].as_array().unwrap();
    assert_eq!(kappa.len(), 400);
    assert!(kappa.iter().all(|k| k.as_f64() == Some(1.0)));
    assert_eq!(v["weights"], "naive");
}

#[test]
fn oracle_weights_come_from_the_complier_column() {
    let v = json(&quick_fit(&["--weights", "oracle"]));
    let text = std::fs::read_to_string(fixture()).unwrap();
    let want: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let got: Vec<f64> = v["fit"]["weights_used"]["kappa"]
        .as_array()
        .unwrap()
        .iter()
        .map(|k| k.as_f64().unwrap())
        .collect();
    assert_eq!(got, want);
    // the complier column must not leak into the covariates
    assert_eq!(v["parameters"].as_array().unwrap().len(), 9);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = quick_fit(&["--weights", "naive", "--seed", "9"]);
    let b = quick_fit(&["--weights", "naive", "--seed", "9", "--jobs", "2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn report_round_trips_the_fit() {
    let v = json(&quick_fit(&["--weights", "naive"]));
    let fit: FitResult = serde_json::from_value(v["fit"].clone()).unwrap();
    assert_eq!(serde_json::to_value(&fit).unwrap(), v["fit"]);
    assert_eq!(fit.theta.to_vec()[0], v["parameters"][0]["estimate"].as_f64().unwrap());
}

#[test]
fn non_convergence_exits_with_two_and_still_reports() {
    let out = quick_fit(&["--weights", "naive", "--max-outer-iters", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["converged"], Value::Bool(false));
}

#[test]
fn errors_exit_with_one() {
    let out = cchr(&["fit", "--input", "/nonexistent/data.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
    let input = fixture();
    let out = cchr(&["fit", "--input", input.to_str().unwrap(), "--schema", "x9:continuous"]);
    assert_eq!(out.status.code(), Some(1));
    let out = cchr(&["fit", "--input", input.to_str().unwrap(), "--copula", "nonsense"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn select_ranks_all_combinations() {
    let input = fixture();
    let v = json(&cchr(&[
        "select", "--input", input.to_str().unwrap(), "--weights", "naive", "--starts", "1",
    ]));
    let table = v["table"].as_array().unwrap();
    assert_eq!(table.len(), 21);
    let ll: Vec<f64> = table.iter().filter_map(|r| r["loglik"].as_f64()).collect();
    assert!(ll.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(table[0]["rank"], 1);
    assert_eq!(v["best"]["loglik"].as_f64(), Some(ll[0]));
}

#[test]
fn bootstrap_reports_standard_errors() {
    let input = fixture();
    let v = json(&cchr(&[
        "bootstrap", "--input", input.to_str().unwrap(), "--weights", "naive", "--starts", "1", "--boot", "3",
    ]));
    assert_eq!(v["bootstrap"]["b"], 3);
    for p in v["parameters"].as_array().unwrap() {
        assert!(p["se"].as_f64().unwrap() >= 0.0);
        let pv = p["p_value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&pv));
    }
}

fn simulate(dir: &Path, seed: &str) -> Output {
    cchr(&[
        "simulate",
        "--preset",
        "lowdep",
        "--weights",
        "naive",
        "--n",
        "200",
        "--replications",
        "3",
        "--starts",
        "1",
        "--seed",
        seed,
        "--out",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn simulate_writes_metrics_and_replicates() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(simulate(&a, "4").status.code(), Some(0));
    assert_eq!(simulate(&b, "4").status.code(), Some(0));

    let run: Value = serde_json::from_str(&std::fs::read_to_string(a.join("run.json")).unwrap()).unwrap();
    let failures = run["report"]["failures"].as_u64().unwrap() as usize;
    let reps = std::fs::read_to_string(a.join("replicates.csv")).unwrap();
    assert_eq!(reps.lines().count() - 1, 3 - failures);

    let metrics = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("parameter,truth,bias,esd,rmse,cr\nalpha,-0.6,"));
    assert_eq!(metrics, std::fs::read_to_string(b.join("metrics.csv")).unwrap());

    let design: SimDesign = serde_json::from_str(&std::fs::read_to_string(a.join("design.json")).unwrap()).unwrap();
    let preset = SimDesign::preset("lowdep").unwrap();
    assert_eq!(design.params_co, preset.params_co);
    assert_eq!(design.params_nc, preset.params_nc);
    assert_eq!(design.n, 200);
}

#[test]
fn lowdep_preset_values() {
    let d = SimDesign::preset("lowdep").unwrap();
    let co = &d.params_co;
    assert_eq!((co.baseline.c, co.baseline.rho), (0.5, 0.75));
    assert_eq!((co.tau, co.alpha, co.nu), (0.25, -0.6, 1.2));
    assert_eq!(co.beta, [1.0, 0.9]);
    assert_eq!(co.eta, [1.5, -0.8, -2.0, 0.9]);
    let nc = &d.params_nc;
    assert_eq!((nc.baseline.c, nc.baseline.rho), (0.7, 0.6));
    assert_eq!((nc.tau, nc.alpha, nc.nu), (0.2, -0.1, 1.1));
    assert_eq!(nc.beta, [0.8, 0.7]);
    assert_eq!(nc.eta, [1.3, -1.0, -1.8, 0.6]);
    assert_eq!(d.admin_upper, 15.0);
}

#[test]
fn sweep_echoes_axis_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep.csv");
    let status = cchr(&[
        "sweep",
        "--axis",
        "sample-size",
        "--values",
        "200,300",
        "--estimators",
        "naive,oracle",
        "--replications",
        "3",
        "--starts",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let alpha: Vec<(&str, &str)> = rows.iter().filter(|r| r[3] == "alpha").map(|r| (r[1], r[2])).collect();
    assert_eq!(alpha, [("200", "naive"), ("200", "oracle"), ("300", "naive"), ("300", "oracle")]);
}
