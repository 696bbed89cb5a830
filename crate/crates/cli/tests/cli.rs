use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/examples")
        .join(name)
}

fn gasflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gasflow"))
        .args(args)
        .env("GASFLOW_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn optimize_cc_writes_solution_and_pressure_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let net = example("single_pipe.json");
    let out = gasflow(&[
        "optimize",
        "--mode",
        "cc",
        "--network",
        arg(&net),
        "--cells",
        "100",
        "--epsilon",
        "0.05",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("status=Optimal"));
    assert!(stdout.contains("chance_slack="));

    let sol = read_json(&dir.path().join("solution.json"));
    for key in [
        "status",
        "objective",
        "expected_compressor_power",
        "expected_economic_value",
        "alpha",
        "d",
        "s",
        "cells",
        "lambda_d",
        "chance",
    ] {
        assert!(sol.get(key).is_some(), "missing {key}");
    }
    assert_eq!(sol["cells"].as_array().unwrap().len(), 100);
    let cell = &sol["cells"][0];
    for key in ["omega", "mass", "pressures", "flows", "lambda_q"] {
        assert!(cell.get(key).is_some(), "cell missing {key}");
    }
    assert!(sol["chance"][0]["sfv_expectation"].as_f64().unwrap() <= 0.05 + 1e-8);

    let cells = fs::read_to_string(dir.path().join("pressure_N3.csv")).unwrap();
    assert!(cells.starts_with("omega,mass,value\n"));
    assert_eq!(cells.lines().count(), 101);
    let density = fs::read_to_string(dir.path().join("pressure_N3_density.csv")).unwrap();
    assert!(density.starts_with("grid,density\n"));
}

#[test]
fn validate_is_reproducible_for_a_seed() {
    let net = example("single_pipe.json");
    let run = |dir: &Path| {
        let out = gasflow(&[
            "validate",
            "--network",
            arg(&net),
            "--cells",
            "40",
            "--mc-samples",
            "10000",
            "--seed",
            "7",
            "--out",
            arg(dir),
        ]);
        assert_eq!(out.status.code(), Some(0));
        (
            fs::read(dir.join("violation.json")).unwrap(),
            fs::read(dir.join("solution.json")).unwrap(),
            out.stdout,
        )
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(a.path()), run(b.path()));
    let v = read_json(&a.path().join("violation.json"));
    assert_eq!(v[0]["samples"], 10000);
    assert_eq!(v[0]["failures"], 0);
}

#[test]
fn deterministic_mode_warns_about_uncertainty() {
    let dir = tempfile::tempdir().unwrap();
    let out = gasflow(&[
        "--mode",
        "opt-det",
        "--network",
        arg(&example("single_pipe.json")),
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replaced by their means"));
    assert_eq!(
        read_json(&dir.path().join("solution.json"))["cells"]
            .as_array()
            .unwrap()
            .len(),
        1
    );
}

#[test]
fn sweep_over_epsilon_orders_the_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = gasflow(&[
        "sweep",
        "--network",
        arg(&example("single_pipe.json")),
        "--cells",
        "60",
        "--epsilons",
        "0.01,0.05,0.1",
        "--mc-samples",
        "2000",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epsilon,alpha_C1,objective,sfv_expectation,mc_violation,status"
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    let alpha: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(alpha.windows(2).all(|w| w[0] > w[1]), "{alpha:?}");
    assert!(rows.iter().all(|r| r[5] == "Optimal"));
}

#[test]
fn empty_sweep_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = gasflow(&[
        "sweep",
        "--network",
        arg(&example("single_pipe.json")),
        "--epsilons",
        "",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(
        text,
        "epsilon,alpha_C1,objective,sfv_expectation,mc_violation,status\n"
    );
}

#[test]
fn prices_report_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = gasflow(&[
        "prices",
        "--network",
        arg(&example("eight_node.json")),
        "--cells",
        "50",
        "--qmax",
        "J3=inf",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let kkt = read_json(&dir.path().join("kkt.json"));
    assert_eq!(kkt[0]["node"], "J3");
    assert_eq!(kkt[0]["passed"], true);
    assert!((kkt[0]["uniform_reference"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert!(dir.path().join("lambda_q_J5.csv").exists());
    assert!(dir.path().join("lambda_q_per_mass_J5.csv").exists());
}

#[test]
fn iteration_limit_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = gasflow(&[
        "optimize",
        "--network",
        arg(&example("single_pipe.json")),
        "--cells",
        "20",
        "--max-iter",
        "1",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("status=MaxIter"));
}

#[test]
fn input_errors_exit_with_one_and_name_the_culprit() {
    let dir = tempfile::tempdir().unwrap();
    let d = arg(dir.path());
    let net = example("single_pipe.json");
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (
            vec!["simulate", "--network", "/no/such/file.json", "--out", d],
            "network",
        ),
        (
            vec![
                "optimize",
                "--network",
                arg(&net),
                "--cells",
                "2",
                "--out",
                d,
            ],
            "N3",
        ),
        (
            vec![
                "optimize",
                "--network",
                arg(&net),
                "--qmax",
                "N9=5",
                "--out",
                d,
            ],
            "N9",
        ),
        (
            vec!["optimize", "--network", arg(&net), "--gamma=-3", "--out", d],
            "ogf",
        ),
        (vec!["--network", arg(&net), "--out", d], "mode"),
        (
            vec![
                "simulate",
                "--network",
                arg(&net),
                "--alpha",
                "3.0",
                "--out",
                d,
            ],
            "C1",
        ),
        (
            vec!["optimize", "--network", arg(&net), "--unknown-flag"],
            "unknown-flag",
        ),
    ];
    for (args, needle) in cases {
        let out = gasflow(&args);
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {stderr}");
        assert!(stderr.contains(needle), "{args:?}: {stderr}");
    }
}

#[test]
fn simulate_writes_the_steady_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = gasflow(&[
        "simulate",
        "--network",
        arg(&example("eight_node.json")),
        "--alpha",
        "1.2,1.1,1.05",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let st = read_json(&dir.path().join("steady.json"));
    assert_eq!(st["pressures"]["J1"].as_f64().unwrap(), 5.0e6);
    assert!(st["residual_norm"].as_f64().unwrap() < 1e-10);
}
