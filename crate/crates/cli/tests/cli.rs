use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sphlaplace::io::read_points;
use sphlaplace::stats::ks_two_sample;
use sphlaplace::{geodesic_distance, UnitVector};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sphlaplace"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn radii(file: &str) -> Vec<f64> {
    let t = read_points(fs::File::open(file).unwrap()).unwrap();
    let mu = UnitVector::basis(t.points[0].dim(), 0);
    t.points.iter().map(|x| geodesic_distance(&mu, x).unwrap()).collect()
}

#[test]
fn sample_is_deterministic() {
    let d = TempDir::new().unwrap();
    let (a, b) = (path(&d, "a.csv"), path(&d, "b.csv"));
    for f in [&a, &b] {
        run(&["sample", "--p", "2", "--sigma", "1", "--n", "100", "--seed", "7", "-o", f]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let meta = json(format!("{a}.meta.json"));
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["config"]["sigma"], 1.0);
    assert_eq!(meta["report"]["n_accepted"], 100);
}

#[test]
fn sample_replays_from_metadata() {
    let d = TempDir::new().unwrap();
    let a = path(&d, "a.csv");
    run(&["sample", "--sigma", "0.05", "--method", "mh", "--n", "50", "--seed", "3", "-o", &a]);
    let meta = json(format!("{a}.meta.json"));
    let b = path(&d, "b.csv");
    let argv: Vec<String> = meta["argv"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .map(|s| if s == a { b.clone() } else { s })
        .collect();
    let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
    run(&argv);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn sample_zero_points_writes_header() {
    let d = TempDir::new().unwrap();
    let a = path(&d, "a.csv");
    run(&["sample", "--p", "3", "--sigma", "1", "--n", "0", "-o", &a]);
    assert_eq!(fs::read_to_string(&a).unwrap(), "x0,x1,x2,x3\n");
}

#[test]
fn oracle_and_rejection_agree() {
    let d = TempDir::new().unwrap();
    let (a, b) = (path(&d, "rej.csv"), path(&d, "orc.csv"));
    run(&["sample", "--p", "2", "--sigma", "1", "--n", "10000", "--seed", "1", "-o", &a]);
    run(&[
        "sample", "--p", "2", "--sigma", "1", "--n", "10000", "--seed", "2", "--method", "oracle",
        "-o", &b,
    ]);
    let ks = ks_two_sample(&radii(&a), &radii(&b));
    assert!(ks.p_value > 0.01, "p-value {}", ks.p_value);
}

#[test]
fn sample_rejects_mismatched_location() {
    let err = run_err(&["sample", "--p", "3", "--sigma", "1", "--mu", "0,1,0"]);
    assert!(err.contains("does not match"), "{err}");
}

#[test]
fn rejection_abort_suggests_mh() {
    let err = run_err(&["sample", "--p", "20", "--sigma", "0.001", "--n", "10"]);
    assert!(err.contains("MH"), "{err}");
}

#[test]
fn fit_is_idempotent_and_recovers_location() {
    let d = TempDir::new().unwrap();
    let s = path(&d, "s.csv");
    run(&["sample", "--p", "5", "--sigma", "0.1", "--n", "500", "--seed", "11", "--method", "oracle", "-o", &s]);
    let (r1, r2) = (path(&d, "r1.json"), path(&d, "r2.json"));
    run(&["fit", &s, "--format", "json", "-o", &r1]);
    run(&["fit", &s, "--format", "json", "-o", &r2]);
    let rep = &json(&r1)["report"];
    assert_eq!(rep, &json(&r2)["report"]);
    let mu: Vec<f64> = rep["mu_hat"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let err = geodesic_distance(&UnitVector::new(mu).unwrap(), &UnitVector::basis(5, 0)).unwrap();
    assert!(err < 0.1, "location error {err}");
    let sigma = rep["sigma_hat"].as_f64().unwrap();
    assert!((sigma / 0.1 - 1.0).abs() < 0.2, "sigma {sigma}");
    assert_eq!(rep["location_converged"], true);
    assert_eq!(rep["scale_converged"], true);
}

#[test]
fn fit_two_points_midpoint() {
    let d = TempDir::new().unwrap();
    let s = path(&d, "two.csv");
    let (a, b) = (0.1f64, -0.35f64);
    fs::write(&s, format!("x0,x1\n{},{}\n{},{}\n", a.cos(), a.sin(), b.cos(), b.sin())).unwrap();
    let r = path(&d, "r.json");
    run(&["fit", &s, "--format", "json", "-o", &r]);
    let rep = &json(&r)["report"];
    // Any point on the arc minimizes; the mean distance is half the arc.
    assert!((rep["mean_distance"].as_f64().unwrap() - 0.225).abs() < 1e-9);
}

#[test]
fn fit_csv_report_has_fields_and_sidecar() {
    let d = TempDir::new().unwrap();
    let s = path(&d, "s.csv");
    run(&["sample", "--sigma", "0.2", "--n", "100", "--method", "mh", "-o", &s]);
    let r = path(&d, "r.csv");
    run(&["fit", &s, "--solver", "approx", "-o", &r]);
    let text = fs::read_to_string(&r).unwrap();
    assert!(text.starts_with("field,value\n"));
    assert!(text.contains("\nmu_hat_2,"));
    assert!(text.contains("\nsigma_hat,"));
    assert_eq!(json(format!("{r}.meta.json"))["config"]["solver"]["solver"], "approx");
}

#[test]
fn fit_reports_parse_errors_with_line() {
    let d = TempDir::new().unwrap();
    let s = path(&d, "bad.csv");
    fs::write(&s, "x0,x1\n1,0\n0,abc\n").unwrap();
    let err = run_err(&["fit", &s]);
    assert!(err.contains("line 3"), "{err}");
    fs::write(&s, "x0,x1\n1,0\n0,1,2\n").unwrap();
    let err = run_err(&["fit", &s]);
    assert!(err.contains("line 3"), "{err}");
    fs::write(&s, "x0,x1\n1,0\n").unwrap();
    let err = run_err(&["fit", &s]);
    assert!(err.contains("at least 2"), "{err}");
}

fn labelled_blobs(d: &TempDir) -> String {
    let (a, b) = (path(d, "a.csv"), path(d, "b.csv"));
    run(&["sample", "--sigma", "0.1", "--mu", "1,0,0", "--n", "40", "--seed", "1", "--method", "oracle", "-o", &a]);
    run(&["sample", "--sigma", "0.1", "--mu", "0,0,1", "--n", "40", "--seed", "2", "--method", "oracle", "-o", &b]);
    let mut text = String::from("x0,x1,x2,label\n");
    for (f, l) in [(&a, 0), (&b, 1)] {
        for line in fs::read_to_string(f).unwrap().lines().skip(1) {
            text.push_str(&format!("{line},{l}\n"));
        }
    }
    let out = path(d, "blobs.csv");
    fs::write(&out, text).unwrap();
    out
}

#[test]
fn cluster_writes_labels_model_and_indices() {
    let d = TempDir::new().unwrap();
    let data = labelled_blobs(&d);
    let out = path(&d, "out");
    run(&["cluster", &data, "-k", "2", "--seed", "5", "-o", &out]);
    let labels = fs::read_to_string(Path::new(&out).join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 81);
    let ix = json(Path::new(&out).join("indices.json"));
    assert_eq!(ix["jaccard"], 1.0);
    assert_eq!(ix["rand"], 1.0);
    let model = json(Path::new(&out).join("model.json"));
    assert_eq!(model["K"], 2);
    assert_eq!(model["scales"].as_array().unwrap().len(), 2);
    assert_eq!(json(Path::new(&out).join("meta.json"))["report"]["converged"], true);
}

#[test]
fn cluster_single_component() {
    let d = TempDir::new().unwrap();
    let data = labelled_blobs(&d);
    let out = bin().args(["cluster", &data, "-k", "1", "--format", "json"]).output().unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["labels"].as_array().unwrap().iter().all(|l| l == 0));
    assert_eq!(v["indices"]["nmi"], 0.0);
}

#[test]
fn cluster_more_components_than_points() {
    let d = TempDir::new().unwrap();
    let s = path(&d, "s.csv");
    run(&["sample", "--sigma", "0.5", "--n", "3", "-o", &s]);
    let err = run_err(&["cluster", &s, "-k", "4"]);
    assert!(err.contains("exceeds"), "{err}");
}

#[test]
fn smallmix_table_shape() {
    let d = TempDir::new().unwrap();
    let (t, r) = (path(&d, "t.csv"), path(&d, "runs.csv"));
    run(&["smallmix", "--repeats", "4", "--seed", "9", "-o", &t, "--runs", &r]);
    let text = fs::read_to_string(&t).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,K,jaccard,rand,nmi,perfect_fraction");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("moSL-soft,2,"));
    assert!(lines[4].starts_with("moSL-hard,2,"));
    assert_eq!(fs::read_to_string(&r).unwrap().lines().count(), 1 + 4 * 6);
    assert_eq!(json(format!("{t}.meta.json"))["config"]["repeats"], 4);
}

#[test]
fn household_from_file() {
    let d = TempDir::new().unwrap();
    let (data, t) = (path(&d, "hh.csv"), path(&d, "t.csv"));
    run(&["household", "--standin", "--seed", "4", "--repeats", "2", "--ks", "2", "--write-standin", &data, "-o", &t]);
    let from_standin = fs::read_to_string(&t).unwrap();
    let t2 = path(&d, "t2.csv");
    run(&["household", &data, "--seed", "4", "--repeats", "2", "--ks", "2", "--id", "id", "-o", &t2]);
    assert_eq!(fs::read_to_string(&t2).unwrap(), from_standin);
    assert_eq!(json(format!("{t2}.meta.json"))["report"]["n"], 40);
}

#[test]
fn household_input_errors() {
    let d = TempDir::new().unwrap();
    let f = path(&d, "hh.csv");
    fs::write(&f, "Food,Housing,gender\n1,2,f\n").unwrap();
    let err = run_err(&["household", &f]);
    assert!(err.contains("service") && err.contains("Housing"), "{err}");
    fs::write(&f, "id,food,housing,service,gender\na,1,1,2,f\nb,0,0,0,m\n").unwrap();
    let err = run_err(&["household", &f, "--id", "id"]);
    assert!(err.contains("row b"), "{err}");
    let err = run_err(&["household"]);
    assert!(err.contains("--standin"), "{err}");
}

#[test]
fn bench_tables() {
    let d = TempDir::new().unwrap();
    let (l, s) = (path(&d, "l.csv"), path(&d, "s.json"));
    let grid = ["--ps", "5", "--sigmas", "0.1,1", "--ns", "100", "--repeats", "5"];
    let mut args = vec!["bench-location"];
    args.extend(grid);
    args.extend(["-o", &l]);
    run(&args);
    let text = fs::read_to_string(&l).unwrap();
    assert!(text.starts_with("p,sigma0,n,weiszfeld_error,weiszfeld_time_ms,rgd_error,rgd_time_ms\n"));
    assert_eq!(text.lines().count(), 3);

    let mut args = vec!["bench-scale"];
    args.extend(grid);
    args.extend(["--format", "json", "-o", &s]);
    run(&args);
    let v = json(&s);
    assert_eq!(v["meta"]["report"]["solvers"]["NewtonE"], "NewtonExact");
    for row in v["rows"].as_array().unwrap() {
        let (e, a) = (
            row["newton_exact_error"].as_f64().unwrap(),
            row["newton_approx_error"].as_f64().unwrap(),
        );
        assert!((e - a).abs() < 0.01);
        assert!(row["roptim_error"].is_null());
    }
}
