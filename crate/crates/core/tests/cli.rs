//! End-to-end tests of the hjgraph binary: exit-code contract, output
//! determinism, and the shape of the emitted CSV files.

use std::path::{Path, PathBuf};
use std::process::Output;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_hjgraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, cmd: &str, scn: &Path) -> Output {
    let out = dir.join("out");
    run(&[cmd, scn.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

#[test]
fn verify_constant_scenario_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "verify", &scenario("constant.scn"));
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in ["value_grid.csv", "report.csv", "report.txt", "modulus.csv"] {
        assert!(dir.path().join("out").join(file).exists(), "{file} missing");
    }
    let report = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    assert!(report.lines().count() > 5);
    assert!(!report.contains(",false"));
}

#[test]
fn corrupted_scenario_exits_one_with_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "verify", &scenario("corrupted_star.scn"));
    assert_eq!(out.status.code(), Some(1));
    // The report is still written and a counterexample is replayable.
    let report = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    assert!(report.contains(",false"));
    let cex = dir.path().join("out/counterexample_superoptimality.txt");
    assert!(cex.exists());
    let text = std::fs::read_to_string(cex).unwrap();
    assert!(text.contains("start"));
}

#[test]
fn transform_matches_quadratic_conjugate() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("quad.scn");
    std::fs::write(
        &scn,
        "vertices = 0 1\nedge = 0 1 1.0\nhamiltonian.form = composite\n\
         hamiltonian.h = quadratic\ninitial = constant 0.0\n\
         solver.T = 0.2\nsolver.dt = 0.1\nsolver.dx = 0.25\n\
         transform.v_max = 5.0\ntransform.n_v = 200\n",
    )
    .unwrap();
    let out = run_in(dir.path(), "transform", &scn);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("out/legendre.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let v: f64 = cols[1].parse().unwrap();
        let l: f64 = cols[2].parse().unwrap();
        let err: f64 = cols[3].parse().unwrap();
        assert!((l - 0.5 * v * v).abs() <= 1e-9, "L({v}) = {l}");
        assert!(err <= 5e-3, "roundtrip err {err}");
        rows += 1;
    }
    assert_eq!(rows, 5 * 201); // 5 lattice nodes x 201 v samples
}

#[test]
fn eikonal_transform_serializes_infinity() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("eik.scn");
    std::fs::write(
        &scn,
        "vertices = 0 1\nedge = 0 1 1.0\nhamiltonian.form = composite\n\
         hamiltonian.h = linear\ninitial = constant 0.0\n\
         solver.T = 0.2\nsolver.dt = 0.1\nsolver.dx = 0.5\n\
         transform.v_max = 2.0\ntransform.n_v = 4\n",
    )
    .unwrap();
    let out = run_in(dir.path(), "transform", &scn);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("out/legendre.csv")).unwrap();
    // v = 1.5 and 2.0 lie beyond the eikonal domain: literal `inf`.
    assert!(csv.contains(",inf,"));
}

#[test]
fn solve_outputs_are_byte_identical_across_runs() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    assert!(run_in(dir_a.path(), "verify", &scenario("constant.scn"))
        .status
        .success());
    assert!(run_in(dir_b.path(), "verify", &scenario("constant.scn"))
        .status
        .success());
    for file in ["value_grid.csv", "report.csv", "modulus.csv"] {
        let a = std::fs::read(dir_a.path().join("out").join(file)).unwrap();
        let b = std::fs::read(dir_b.path().join("out").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
}

#[test]
fn solve_emits_probe_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "solve", &scenario("eikonal_star.scn"));
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("out/trajectory_0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "h,edge_id,offset,speed");
    assert!(lines.len() > 10);
}

#[test]
fn converge_emits_monotone_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "converge", &scenario("eikonal_converge.scn"));
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("out/convergence.csv")).unwrap();
    let errors: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(errors.len(), 3);
    for w in errors.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn zero_dt_is_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("bad.scn");
    std::fs::write(
        &scn,
        "vertices = 0 1\nedge = 0 1 1.0\nhamiltonian.form = composite\n\
         hamiltonian.h = linear\ninitial = constant 0.0\n\
         solver.T = 0.2\nsolver.dt = 0\nsolver.dx = 0.5\n",
    )
    .unwrap();
    let out = run_in(dir.path(), "solve", &scn);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver.dt"));
}

#[test]
fn unknown_key_is_config_error_listing_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("bad.scn");
    std::fs::write(
        &scn,
        "vertices = 0 1\nedge = 0 1 1.0\nwibble = 3\nhamiltonian.form = composite\n\
         hamiltonian.h = linear\ninitial = constant 0.0\n\
         solver.T = 0.2\nsolver.dt = 0.1\nsolver.dx = 0.5\n",
    )
    .unwrap();
    let out = run_in(dir.path(), "solve", &scn);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wibble"));
}

#[test]
fn unknown_command_is_config_error() {
    let out = run(&["frobnicate", scenario("constant.scn").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn max_orientation_round_trips_the_initial_layer() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "solve",
        scenario("constant.scn").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--orientation",
        "max",
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(out_dir.join("value_grid.csv")).unwrap();
    // At t = 0 the emitted values equal the configured datum (0.5):
    // the internal negation and the output sign cancel.
    let first = csv.lines().nth(1).unwrap();
    let u: f64 = first.split(',').nth(4).unwrap().parse().unwrap();
    assert!((u - 0.5).abs() < 1e-12);
}
