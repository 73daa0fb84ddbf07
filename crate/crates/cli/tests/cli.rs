use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn ergobound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergobound"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

// Data rows of a verify CSV as (column name -> value) maps.
fn csv_rows(text: &str) -> Vec<Vec<(String, String)>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let head: Vec<String> = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    lines
        .map(|l| {
            head.iter()
                .cloned()
                .zip(l.split(',').map(str::to_string))
                .collect()
        })
        .collect()
}

fn field<'a>(row: &'a [(String, String)], name: &str) -> &'a str {
    &row.iter().find(|(k, _)| k == name).unwrap().1
}

#[test]
fn bound_reference_query() {
    let out = ergobound(&[
        "bound", "--t", "100", "--eps", "0.5", "--f-norm", "1", "--q-norm", "4",
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stderr.is_empty());
    let v = json_of(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["valid"], true);
    assert!(rel(v["exponent"].as_f64().unwrap(), -3528.0 / 8181.0) < 1e-12);
    assert!((v["bound"].as_f64().unwrap() - 0.649_70).abs() < 1e-5);
    assert!(rel(v["theta_star"].as_f64().unwrap(), 168.0 / 8181.0) < 1e-12);
}

#[test]
fn bound_below_threshold_exits_3() {
    let out = ergobound(&[
        "bound", "--t", "10", "--eps", "0.5", "--f-norm", "1", "--q-norm", "4",
    ]);
    assert_eq!(code(&out), 3);
    let v = json_of(&out);
    assert_eq!(v["valid"], false);
    assert_eq!(v["threshold"], 16.0);
    assert!(v["bound"].is_null());
}

#[test]
fn malformed_or_out_of_domain_exits_2() {
    for args in [
        vec![
            "bound", "--t", "-1", "--eps", "0.5", "--f-norm", "1", "--q-norm", "4",
        ],
        vec![
            "bound", "--t", "abc", "--eps", "0.5", "--f-norm", "1", "--q-norm", "4",
        ],
        vec!["bound", "--t", "100"],
        vec!["tav", "--model", "maoclass"],
        vec!["jacobi-bound", "--t", "100", "--eps", "0.5"],
        vec!["verify", "--threads", "0"],
        vec!["pi", "--model-file", "/nonexistent/model.json"],
    ] {
        let out = ergobound(&args);
        assert_eq!(
            code(&out),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn jacobi_bound_from_t_av_or_parameters() {
    let a = json_of(&ergobound(&[
        "jacobi-bound",
        "--t",
        "100",
        "--eps",
        "0.5",
        "--t-av",
        "1",
    ]));
    assert!((a["exponent"].as_f64().unwrap() + 4232.0 / 2525.0).abs() < 1e-12);
    let b = json_of(&ergobound(&[
        "jacobi-bound",
        "--t",
        "100",
        "--eps",
        "0.5",
        "--b",
        "2",
        "--sigma2",
        "2",
    ]));
    assert!((a["bound"].as_f64().unwrap() - b["bound"].as_f64().unwrap()).abs() < 1e-8);
}

#[test]
fn tanou_bound_modes_differ_for_negative_u() {
    let computed = json_of(&ergobound(&[
        "tanou-bound",
        "--t",
        "1000",
        "--eps",
        "0.5",
        "--u",
        "-1",
    ]));
    let paper = json_of(&ergobound(&[
        "tanou-bound",
        "--t",
        "1000",
        "--eps",
        "0.5",
        "--u",
        "-1",
        "--paper-constant",
    ]));
    assert_eq!(computed["mode"], "computed");
    assert_eq!(paper["mode"], "paper");
    assert!(computed["f_norm"].as_f64().unwrap() > 4.8);
    assert!(paper["f_norm"].as_f64().unwrap() < 0.21);
    let c = std::f64::consts::FRAC_PI_2.cosh() / 2.0;
    assert!((computed["centering_rate"].as_f64().unwrap() - c).abs() < 1e-9);
}

#[test]
fn model_queries() {
    let v = json_of(&ergobound(&["tav", "--model", "tanou", "--rho", "0.5"]));
    assert!((v["t_av"].as_f64().unwrap() - 2.0).abs() < 1e-9);

    let v = json_of(&ergobound(&[
        "check", "--model", "maoclass", "--gamma", "3",
    ]));
    assert_eq!(v["verdict"], "uniformly_ergodic");
    assert!((v["integral_value"].as_f64().unwrap() - 0.5).abs() < 1e-6);

    let v = json_of(&ergobound(&[
        "check", "--model", "maoclass", "--gamma", "2",
    ]));
    assert_eq!(v["integral_value"]["divergent"], true);
    assert_eq!(v["verdict"], "not_uniformly_ergodic");

    let v = json_of(&ergobound(&[
        "pi", "--model", "tanou", "--rho", "0.5", "--f", "exp", "--u", "0",
    ]));
    assert!((v["pi_f"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn custom_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ou.json");
    // Jacobi(a=1, b=2, sigma2=2) written out by hand.
    fs::write(
        &path,
        r#"{"model": "custom", "params": {
            "lower": 0.0, "upper": 1.0,
            "drift": {"poly": [1.0, -2.0]},
            "diffusion_sq": {"poly": [0.0, 2.0, -2.0]}
        }}"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let v = json_of(&ergobound(&[
        "pi",
        "--model-file",
        p,
        "--f",
        "indicator",
        "--lo",
        "0",
        "--hi",
        "0.25",
    ]));
    assert!((v["pi_f"].as_f64().unwrap() - 0.25).abs() < 1e-8);

    fs::write(&path, r#"{"model": "jacobi", "params": {"a": 1.0}}"#).unwrap();
    assert_eq!(code(&ergobound(&["pi", "--model-file", p])), 2);
}

#[test]
fn poisson_summary_and_grid() {
    let out = ergobound(&["poisson", "--model", "tanou", "--f", "sin", "--n", "512"]);
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert!(v["sup_norm"].as_f64().unwrap() <= v["norm_bound"].as_f64().unwrap());
    let out = ergobound(&[
        "poisson", "--model", "jacobi", "--f", "identity", "--n", "64", "--format", "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 65);
}

#[test]
fn simulate_modes() {
    let v = json_of(&ergobound(&["simulate", "--t", "10", "--paths", "50"]));
    assert_eq!(v["n_paths"], 50);
    assert!(v["mean"].as_f64().unwrap() > 0.0);
    let v = json_of(&ergobound(&[
        "simulate",
        "--mode",
        "hitting-time",
        "--t",
        "20",
        "--paths",
        "50",
    ]));
    assert!(v["hitting_time"]["mean"].as_f64().unwrap() > 0.0);
    let v = json_of(&ergobound(&[
        "simulate",
        "--mode",
        "histogram",
        "--t",
        "100",
        "--paths",
        "2",
        "--bins",
        "5",
    ]));
    let total: f64 = v["histogram"]["frequencies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(
        code(&ergobound(&[
            "simulate",
            "--mode",
            "histogram",
            "--t",
            "10"
        ])),
        2
    );
}

#[test]
fn clamp_without_margin_is_a_simulation_failure() {
    let out = ergobound(&[
        "simulate", "--model", "tanou", "--f", "const", "--t", "50", "--paths", "64", "--dt",
        "0.05", "--clamp", "0",
    ]);
    assert_eq!(code(&out), 5, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_below_threshold_is_vacuous() {
    let out = ergobound(&["verify", "--t", "10,20", "--eps", "0.05", "--paths", "20"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# seed="));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(field(r, "vacuous"), "true");
        assert_eq!(field(r, "dominated"), "true");
    }
}

#[test]
fn corrupted_bound_is_caught() {
    let out = ergobound(&[
        "verify",
        "--t",
        "100",
        "--eps",
        "0.1",
        "--paths",
        "200",
        "--bound-scale",
        "0.001",
    ]);
    assert_eq!(code(&out), 4);
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert!(rows.iter().any(|r| field(r, "dominated") == "false"));
}

#[test]
fn manifest_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    let out = ergobound(&[
        "verify",
        "--t",
        "5,10",
        "--eps",
        "0.1",
        "--paths",
        "64",
        "--seed",
        "7",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty() && out.stderr.is_empty());
    let manifest_path = dir.path().join("first.csv.manifest.json");
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["command"], "verify");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["outputs"][0], first.to_str().unwrap());
    assert!(manifest["timestamp"].is_string());

    let out = ergobound(&[
        "replay",
        manifest_path.to_str().unwrap(),
        "--to",
        second.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
}

#[test]
fn json_single_results_carry_schema_version() {
    let out = ergobound(&[
        "verify", "--t", "5", "--eps", "0.1", "--paths", "8", "--format", "json",
    ]);
    let v = json_of(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
}
