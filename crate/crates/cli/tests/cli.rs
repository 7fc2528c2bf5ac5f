use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lzfe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lzfe"))
        .args(args)
        .env_remove("LZFE_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let out = lzfe(args);
    let code = out.status.code().unwrap();
    let value = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    });
    (code, value)
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn simulate_reproduces_the_lz_formula() {
    let (code, v) = json(&["simulate", "--model", "lz", "--b", "1", "--g", "1"]);
    assert_eq!(code, 0);
    assert!((f(&v["records"]["p"]) - (-std::f64::consts::PI).exp()).abs() < 2e-4);
    assert_eq!(v["command"], "simulate");
    assert!(v["version"].is_string() && v["timestamp"].is_u64());

    let (code, v) = json(&["simulate", "--model", "lz", "--b", "1", "--g", "0"]);
    assert_eq!(code, 0);
    assert!((f(&v["records"]["p"]) - 1.0).abs() < 1e-12);
}

#[test]
fn simulate_full_matrix_is_doubly_stochastic() {
    let (code, v) = json(&[
        "simulate",
        "--model",
        "composite4",
        "--gamma",
        "0.5",
        "--full-matrix",
        "--T",
        "20",
    ]);
    assert_eq!(code, 0);
    let rows = v["records"]["transition_matrix"]["entries"]
        .as_array()
        .unwrap();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let sum: f64 = row.as_array().unwrap().iter().map(f).sum();
        assert!((sum - 1.0).abs() < 1e-7);
    }
}

#[test]
fn unknown_model_lists_the_registry() {
    let out = lzfe(&["simulate", "--model", "nosuch"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("three-level-tau") && err.contains("lz"),
        "{err}"
    );
}

#[test]
fn domain_errors_exit_with_two() {
    for args in [
        &["simulate", "--b", "-1"][..],
        &["simulate", "--level", "3"],
        &["simulate", "--g", "1", "--gamma", "1"],
        &["simulate", "--max-step", "0"],
        &["simulate", "--method", "euler"],
    ] {
        assert_eq!(lzfe(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn integrability_default_grid_passes() {
    let (code, v) = json(&["verify-integrability"]);
    assert_eq!(code, 0);
    assert!(f(&v["records"]["max_commutator"]) <= 1e-12);
    assert!(f(&v["records"]["max_compatibility"]) <= 1e-12);
    assert_eq!(v["passed"], true);
}

#[test]
fn corrupted_partner_fails_integrability() {
    let (code, v) = json(&["verify-integrability", "--corrupt-partner"]);
    assert_eq!(code, 1);
    assert!(f(&v["records"]["max_commutator"]) > 1e-3);
    assert_eq!(v["passed"], false);
    assert_eq!(
        lzfe(&["verify-integrability", "--model", "lz"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn integrability_grid_arithmetic() {
    let (code, v) = json(&["verify-integrability", "--grid", "t=-5:5:1,tau=0.5:4:0.5"]);
    assert_eq!(code, 0);
    // 11 values of t times 8 values of τ
    assert_eq!(v["records"]["grid"].as_array().unwrap().len(), 88);
    let (_, v) = json(&["verify-integrability", "--grid", "t=0:0:1,tau=1:1:1"]);
    assert_eq!(
        v["records"]["commutator_residuals"]
            .as_array()
            .unwrap()
            .len(),
        1
    );
    assert_eq!(
        lzfe(&["verify-integrability", "--grid", "t=0:1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn deformation_examples() {
    let (code, v) = json(&[
        "verify-deformation",
        "--gamma",
        "0.5",
        "--tau0",
        "8",
        "--T",
        "50",
    ]);
    assert_eq!(code, 0);
    assert!(f(&v["records"]["difference"]).abs() <= 1e-3);
    assert!(f(&v["records"]["vertical_off_diagonal"]) <= 1e-3);

    let (code, v) = json(&["verify-deformation", "--gamma", "0", "--T", "20"]);
    assert_eq!(code, 0);
    assert!(f(&v["records"]["difference"]).abs() < 1e-12);

    assert_eq!(
        lzfe(&["verify-deformation", "--tau0", "0.5"]).status.code(),
        Some(2)
    );
}

#[test]
fn functional_csv_schema() {
    let out = lzfe(&[
        "verify-functional",
        "--gammas",
        "0.25,0.5,1",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("gamma,p,p_error,p_double_gamma,residual")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        let residual: f64 = row[4].parse().unwrap();
        assert!(residual.abs() <= 5e-4);
        let p = row[1];
        let digits = p
            .split('e')
            .next()
            .unwrap()
            .chars()
            .filter(|c| c.is_ascii_digit())
            .collect::<String>();
        assert_eq!(digits.trim_start_matches('0').len(), 12, "{p}");
    }
    assert_eq!(rows[0][0], "0.250000000000");
}

#[test]
fn functional_edge_cases() {
    let out = lzfe(&["verify-functional", "--gammas", "0", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let row = stdout(&out).lines().nth(1).unwrap().to_string();
    let residual: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert!(residual.abs() < 1e-12);
    assert_eq!(
        lzfe(&["verify-functional", "--gammas", "-1"]).status.code(),
        Some(2)
    );
    // an impossible tolerance is a tolerance failure, not a usage error
    assert_eq!(
        lzfe(&[
            "verify-functional",
            "--gammas",
            "0.5",
            "--tolerance",
            "1e-12"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn functional_via_reduction() {
    let (code, v) = json(&[
        "verify-functional",
        "--gammas",
        "0.5",
        "--via-reduction",
        "--tau",
        "4",
    ]);
    assert_eq!(code, 0);
    assert!(f(&v["records"][0]["functional_residual"]).abs() <= 1e-3);
    assert_eq!(v["config_echo"]["via_reduction"], true);
}

#[test]
fn fit_examples() {
    let (code, v) = json(&["fit-exponent", "--gammas", "0.1,0.2,0.4,0.8"]);
    assert_eq!(code, 0);
    assert!((f(&v["records"]["fit"]["c_estimate"]) + std::f64::consts::PI).abs() < 0.01);

    let (code, v) = json(&["fit-exponent", "--synthetic", "exp:-2"]);
    assert_eq!(code, 0);
    assert!((f(&v["records"]["fit"]["c_estimate"]) + 2.0).abs() < 1e-12);

    assert_eq!(
        lzfe(&["fit-exponent", "--gammas", "0.1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        lzfe(&["fit-exponent", "--synthetic", "lin:2"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn recurrence_examples() {
    let (code, v) = json(&["recurrence", "--a1", "-1", "--n", "10"]);
    assert_eq!(code, 0);
    let matches = v["records"]["closed_form_match"].as_array().unwrap();
    assert_eq!(matches.len(), 11);
    assert!(matches.iter().all(|m| m == true));
    assert_eq!(v["records"]["coefficients"][5], "-1/120");

    let (_, v) = json(&["recurrence", "--a1", "0", "--n", "10"]);
    let coeffs = v["records"]["coefficients"].as_array().unwrap();
    assert!(coeffs[1..].iter().all(|c| c == "0"));

    assert_eq!(lzfe(&["recurrence", "--n", "0"]).status.code(), Some(2));
    assert_eq!(lzfe(&["recurrence", "--a1", "pi"]).status.code(), Some(2));
}

#[test]
fn no_timestamp_runs_are_byte_identical() {
    let args = ["verify-functional", "--gammas", "0.3,0.6", "--no-timestamp"];
    let a = lzfe(&args);
    let b = lzfe(&args);
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(v.get("timestamp").is_none());
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let out = lzfe(&[
        "simulate",
        "--gamma",
        "0.3",
        "--b",
        "2",
        "--no-timestamp",
        "--output",
        first.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let original: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();

    let second = dir.path().join("second.json");
    let out = lzfe(&[
        "simulate",
        "--config",
        first.to_str().unwrap(),
        "--no-timestamp",
        "--output",
        second.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let replay: Value = serde_json::from_str(&std::fs::read_to_string(&second).unwrap()).unwrap();
    assert_eq!(original["records"], replay["records"]);
    let mut echo = replay["config_echo"].clone();
    echo["output_path"] = original["config_echo"]["output_path"].clone();
    assert_eq!(original["config_echo"], echo);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "model = \"lz\"\nb = 1.0\ng = 0.0\nlimit_tolerance = 1e-5\n",
    )
    .unwrap();
    let (_, from_file) = json(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(from_file["config_echo"]["g"], 0.0);
    assert!((f(&from_file["records"]["p"]) - 1.0).abs() < 1e-12);

    let (_, overridden) = json(&["simulate", "--config", cfg.to_str().unwrap(), "--g", "1"]);
    assert_eq!(overridden["config_echo"]["g"], 1.0);
    assert_eq!(overridden["config_echo"]["limit_tolerance"], 1e-5);

    std::fs::write(&cfg, "nonsense = 3\n").unwrap();
    assert_eq!(
        lzfe(&["simulate", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lzfe"))
        .args(["recurrence", "--format", "csv"])
        .env("LZFE_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("recurrence.csv")).unwrap();
    assert!(text.starts_with("n,coefficient,closed_form_match\n"));
}

fn write_envelope(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let mut all = args.to_vec();
    all.extend(["--output", path.to_str().unwrap()]);
    let out = lzfe(&all);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    path.to_str().unwrap().to_string()
}

fn plot(input: &str, kind: &str, dir: &Path) -> (Option<i32>, String) {
    let svg = dir.join(format!("{kind}.svg"));
    let out = lzfe(&[
        "plot",
        "--input",
        input,
        "--kind",
        kind,
        "--output",
        svg.to_str().unwrap(),
    ]);
    (
        out.status.code(),
        std::fs::read_to_string(svg).unwrap_or_default(),
    )
}

#[test]
fn sweep_and_residual_plots() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write_envelope(
        dir.path(),
        "sweep.json",
        &["verify-functional", "--gammas", "0.2,0.4,0.6,0.8,1"],
    );

    let (code, svg) = plot(&sweep, "sweep", dir.path());
    assert_eq!(code, Some(0));
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<circle").count(), 5);
    assert_eq!(svg.matches(r#"class="reference""#).count(), 1);

    let (code, svg) = plot(&sweep, "residual", dir.path());
    assert_eq!(code, Some(0));
    assert_eq!(svg.matches("<circle").count(), 5);

    let (code, _) = plot(&sweep, "convergence", dir.path());
    assert_eq!(code, Some(2));
}

#[test]
fn curvature_and_convergence_plots() {
    let dir = tempfile::tempdir().unwrap();
    let curvature = write_envelope(dir.path(), "curv.json", &["verify-integrability"]);
    let (code, svg) = plot(&curvature, "residual", dir.path());
    assert_eq!(code, Some(0));
    assert_eq!(svg.matches("<circle").count(), 2 * 88);

    let sim = write_envelope(dir.path(), "sim.json", &["simulate", "--gamma", "0.5"]);
    let (code, svg) = plot(&sim, "convergence", dir.path());
    assert_eq!(code, Some(0));
    assert!(svg.matches("<circle").count() >= 4);
}

#[test]
fn plot_rejects_empty_and_foreign_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, r#"{"command": "verify-functional", "records": []}"#).unwrap();
    assert_eq!(
        plot(empty.to_str().unwrap(), "sweep", dir.path()).0,
        Some(2)
    );

    let csv = dir.path().join("x.csv");
    std::fs::write(&csv, "gamma,p\n0.1,0.7\n").unwrap();
    assert_eq!(plot(csv.to_str().unwrap(), "sweep", dir.path()).0, Some(2));
}
