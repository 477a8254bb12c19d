//! Command dispatch and output emission for the solve / verify /
//! transform / converge workflows. All outputs are plain CSV (or the
//! curve text format for counterexamples) and are byte-deterministic for
//! a fixed scenario: every random draw is seeded from the scenario and
//! floats print through the shortest round-trip formatter, with `inf` as
//! the literal spelling of +∞.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::GraphPoint;
use crate::hamiltonian::dual_roundtrip;
use crate::scenario::Scenario;
use crate::solver::{refine_study, solve, ValueGrid};
use crate::verification::{
    run_full_verification, tolerance_scale, SamplerConfig, VerificationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    Transform,
    Converge,
}

impl Command {
    pub fn parse(name: &str) -> Result<Command> {
        match name {
            "solve" => Ok(Command::Solve),
            "verify" => Ok(Command::Verify),
            "transform" => Ok(Command::Transform),
            "converge" => Ok(Command::Converge),
            _ => Err(Error::invalid_input(format!(
                "unknown command `{name}` (expected solve | verify | transform | converge)"
            ))),
        }
    }
}

/// Runs a command; `Ok(true)` means success, `Ok(false)` means the verify
/// report has failing checks (exit 1, report still written).
pub fn run(cmd: Command, scenario: &Scenario, out_dir: &Path) -> Result<bool> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    match cmd {
        Command::Solve => {
            let grid = solve_scenario(scenario)?;
            emit_value_grid(scenario, &grid, out_dir)?;
            emit_probe_trajectories(scenario, &grid, out_dir)?;
            Ok(true)
        }
        Command::Verify => {
            let mut grid = solve_scenario(scenario)?;
            emit_value_grid(scenario, &grid, out_dir)?;
            emit_probe_trajectories(scenario, &grid, out_dir)?;
            let mut extra_probes = Vec::new();
            if scenario.verify.inject_corruption {
                extra_probes.push(inject_corruption(scenario, &mut grid));
            }
            let cfg = SamplerConfig {
                seed: scenario.verify.seed,
                curve_samples: scenario.verify.curve_samples,
                triple_samples: scenario.verify.triple_samples,
                trajectory_samples: scenario.verify.trajectory_samples,
                viscosity_curves: scenario.verify.viscosity_curves,
            };
            let (report, modulus) = run_full_verification(
                &grid,
                &scenario.ham,
                &scenario.lag,
                &scenario.u0,
                &cfg,
                scenario.verify.viscosity_c2,
                &extra_probes,
            );
            emit_report(&report, &modulus, out_dir)?;
            Ok(report.all_passed())
        }
        Command::Transform => {
            emit_legendre_table(scenario, out_dir)?;
            Ok(true)
        }
        Command::Converge => {
            let setup = scenario.refine_setup()?;
            let rows = refine_study(&setup, scenario.converge.levels)?;
            let mut csv = String::from("level,dx,dt,max_error,observed_order\n");
            for r in &rows {
                let order = r
                    .observed_order
                    .map(fmt_f64)
                    .unwrap_or_default();
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    r.level,
                    fmt_f64(r.dx),
                    fmt_f64(r.dt),
                    fmt_f64(r.max_error),
                    order
                );
            }
            write_out(out_dir, "convergence.csv", &csv)?;
            Ok(true)
        }
    }
}

fn solve_scenario(scenario: &Scenario) -> Result<ValueGrid> {
    solve(
        &scenario.lattice,
        &scenario.lag,
        &scenario.u0,
        scenario.t_horizon,
        scenario.dt,
        scenario.speed_grid(),
    )
}

/// Lowers one interior entry by ten super-optimality tolerances so the
/// verifier has something real to catch; returns the probe to aim at it.
fn inject_corruption(scenario: &Scenario, grid: &mut ValueGrid) -> (usize, usize) {
    let node = grid.lattice().num_nodes() / 2;
    let k = grid.num_steps();
    let res = scenario.dx + scenario.dt;
    let eps = 5.0 * res * tolerance_scale(&scenario.lag, &scenario.u0);
    let v = grid.value(node, k);
    grid.set_value(node, k, v - 10.0 * eps);
    (node, k)
}

/// `inf` for +∞, shortest round-trip decimal otherwise.
fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x}")
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn output_sign(scenario: &Scenario) -> f64 {
    if scenario.negate_output {
        -1.0
    } else {
        1.0
    }
}

/// value_grid.csv: (node_id, edge_id, offset, t, U).
fn emit_value_grid(scenario: &Scenario, grid: &ValueGrid, out_dir: &Path) -> Result<()> {
    let lattice = grid.lattice();
    let sign = output_sign(scenario);
    let mut csv = String::from("node_id,edge_id,offset,t,U\n");
    for k in 0..=grid.num_steps() {
        let t = k as f64 * grid.dt();
        for i in 0..lattice.num_nodes() {
            let p = lattice.node_point(i);
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                i,
                p.edge.0,
                fmt_f64(p.offset),
                fmt_f64(t),
                fmt_f64(sign * grid.value(i, k))
            );
        }
    }
    write_out(out_dir, "value_grid.csv", &csv)?;
    Ok(())
}

/// trajectory_<i>.csv per probe: (h, edge_id, offset, speed).
fn emit_probe_trajectories(
    scenario: &Scenario,
    grid: &ValueGrid,
    out_dir: &Path,
) -> Result<()> {
    for (i, &(edge, offset, t)) in scenario.probes.iter().enumerate() {
        let x = GraphPoint::new(edge, offset);
        // Snap the probe onto the grid.
        let node = match grid.lattice().node_at(x) {
            Some(n) => n,
            None => grid.lattice().locate(x).0,
        };
        let snapped = grid.lattice().node_point(node);
        let k = ((t / grid.dt()).round() as usize).min(grid.num_steps()).max(1);
        let curve = grid.extract_trajectory(snapped, k as f64 * grid.dt())?;
        let mut csv = String::from("h,edge_id,offset,speed\n");
        for j in 0..=k {
            let h = j as f64 * grid.dt();
            let p = curve.evaluate(h);
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                fmt_f64(h),
                p.edge.0,
                fmt_f64(p.offset),
                fmt_f64(curve.speed_at(h))
            );
        }
        write_out(out_dir, &format!("trajectory_{i}.csv"), &csv)?;
    }
    Ok(())
}

fn emit_report(
    report: &VerificationReport,
    modulus: &[(f64, f64)],
    out_dir: &Path,
) -> Result<()> {
    write_out(out_dir, "report.csv", &report.to_csv())?;
    write_out(out_dir, "report.txt", &report.to_text())?;
    let mut csv = String::from("delta,omega\n");
    for &(d, o) in modulus {
        let _ = writeln!(csv, "{},{}", fmt_f64(d), fmt_f64(o));
    }
    write_out(out_dir, "modulus.csv", &csv)?;
    for rec in &report.records {
        if let Some(cex) = &rec.counterexample {
            let mut text = String::new();
            let _ = writeln!(
                text,
                "# check {} at x = ({}, {}), t = {}, h = {}",
                rec.name,
                cex.x.edge.0,
                fmt_f64(cex.x.offset),
                fmt_f64(cex.t),
                fmt_f64(cex.h)
            );
            text.push_str(&cex.curve_text);
            write_out(out_dir, &format!("counterexample_{}.txt", rec.name), &text)?;
        }
    }
    Ok(())
}

/// legendre.csv: (node_id, v, L, roundtrip_err) with `inf` literals; the
/// error column compares the re-conjugated Lagrangian with H at the
/// matching p sample.
fn emit_legendre_table(scenario: &Scenario, out_dir: &Path) -> Result<()> {
    let lattice = &scenario.lattice;
    let lag = &scenario.lag;
    let n_v = scenario.transform.n_v;
    let v_max = scenario.transform.v_max;
    let p_max = v_max; // matching sample ranges for the round-trip column
    let mut csv = String::from("node_id,v,L,roundtrip_err\n");
    for i in 0..lattice.num_nodes() {
        let x = lattice.node_point(i);
        for j in 0..=n_v {
            let v = v_max * j as f64 / n_v as f64;
            let l = lag.eval(x, v);
            let p = p_max * j as f64 / n_v as f64;
            let rt = dual_roundtrip(lag, x, p, v_max, n_v)?;
            let err = (rt - scenario.ham.eval(x, p)).abs();
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                i,
                fmt_f64(v),
                fmt_f64(l),
                fmt_f64(err)
            );
        }
    }
    write_out(out_dir, "legendre.csv", &csv)?;
    Ok(())
}
