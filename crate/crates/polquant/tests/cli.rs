//! CLI contract: subcommands, exit codes, CSV determinism and the
//! environment-variable truncation override.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_polquant")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

#[test]
fn star_prints_the_expected_coefficient_triple() {
    let out = run(&["star", "--f", "e(0,1)", "--g", "e(1,0)", "--order", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("hbar^0: (1.000000"));
    assert!(text.contains("hbar^1: (-6.283185"));
    assert!(text.contains("hbar^2: (19.739209"));
}

#[test]
fn classify_reports_witness_and_order() {
    let out = run(&["classify", "--f", "e(0,1)"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains(r#""status":"not_quantizable""#));
    assert!(text.contains(r#""witness":[1,0]"#));
    let out = run(&["classify", "--f", "e(1,0)"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains(r#""order":0"#));
}

#[test]
fn verify_algebra_and_fedosov_check_pass() {
    for sub in ["verify-algebra", "fedosov-check"] {
        let out = run(&[sub]);
        assert!(out.status.success(), "{sub} failed: {}", String::from_utf8_lossy(&out.stdout));
        assert!(String::from_utf8_lossy(&out.stdout).contains("[PASS]"));
    }
}

#[test]
fn sweep_writes_deterministic_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    let svg = dir.path().join("plot.svg");
    for (csv, with_plot) in [(&csv_a, true), (&csv_b, false)] {
        let mut args = vec![
            "toeplitz-sweep",
            "--f",
            "e(0,1)",
            "-N",
            "0",
            "--k",
            "4,8,16,32,64",
            "--seed",
            "7",
            "--out",
        ];
        args.push(csv.to_str().unwrap());
        let plot_arg;
        if with_plot {
            args.push("--plot");
            plot_arg = svg.to_str().unwrap().to_string();
            args.push(&plot_arg);
        }
        let out = run(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(&csv_a).unwrap();
    let b = std::fs::read(&csv_b).unwrap();
    assert_eq!(a, b, "identical config + seed must give byte-identical CSV");
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("k,N,m_class,remainder_abs,l1_norm,seminorm_N1,bound_ratio\n"));
    assert!(text.lines().last().unwrap().starts_with("# fitted_slope="));
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<svg"));
}

#[test]
fn malformed_config_exits_2_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"k_list\": [4,\n}").unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "verify-algebra"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "diagnostics missing: {err}");
    // semantically invalid (k_list not increasing) also exits 2
    std::fs::write(&path, r#"{"k_list": [8, 4]}"#).unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "verify-algebra"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_flag_expression_exits_2() {
    let out = run(&["classify", "--f", "e(1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_drives_a_sweep(){
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{
  "dimension": 1,
  "geometry": "torus",
  "functions": {{ "f": [ {{"qx":[0], "py":[1], "re":1.0}}, {{"qx":[0], "py":[-1], "re":1.0}} ] }},
  "tau": {{ "template": {{ "center": [0.55], "alpha": 1.8 }} }},
  "k_list": [4, 8, 16],
  "N": 0,
  "grid": {{ "step": 0.001 }},
  "out_csv": {:?},
  "seed": 3
}}"#,
            csv.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "toeplitz-sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4); // header + 3 rows
}

#[test]
fn env_var_overrides_truncation_weight() {
    let out = Command::new(bin())
        .args(["jet", "--f", "e(0,1)"])
        .env("POLQUANT_MAX_WEIGHT", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("total weight <= 2"));
    assert!(!text.contains("cu^[3]"));
}

#[test]
fn jet_command_checks_pass() {
    let out = run(&["jet", "--f", "e(1,1)"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[PASS] jet-d-flatness"));
    assert!(text.contains("[PASS] jet-oracle-agreement"));
    assert!(Path::new(bin()).exists());
}
