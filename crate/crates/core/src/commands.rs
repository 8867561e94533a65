//! Implementations of the command-line entry points.
//!
//! Each command reads a validated [`SimConfig`], writes its artifacts into an
//! output directory and returns a short human-readable summary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::identity_series;
use crate::error::{Error, Result};
use crate::flow::{run, FilmState, RunOptions, RunStatus};
use crate::geometry::HeightField;
use crate::io::{fmt_f64, height_file_name, scan_csv, trajectory_csv, HeightSnapshot, SimConfig};
use crate::stability::{flat_scan, stability_report, Parity, QuadraticFormAssembly};

/// Result of a command: the process exit code and the text printed on stdout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandOutput {
    pub exit_code: i32,
    pub summary: String,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Json(_)
        | Error::InvalidGrid(_)
        | Error::InvalidArgument(_)
        | Error::NotZeroMean { .. }
        | Error::GridMismatch { .. }
        | Error::UnequalSteps(..) => 2,
        Error::DegenerateGeometry { .. } => RunStatus::PinchOff.exit_code(),
        Error::SolverNonConvergence { .. }
        | Error::CouplingNonConvergence { .. }
        | Error::NonFinite { .. }
        | Error::EnergyIncrease { .. } => RunStatus::SolverFailure.exit_code(),
        Error::Io(_) | Error::Format(_) => 1,
    }
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

/// Integrates the flow and writes `trajectory.csv`, `height_####.bin`,
/// `final_state.bin` and `summary.json`.
pub fn simulate(cfg: &SimConfig, out: &Path) -> Result<CommandOutput> {
    prepare(out)?;
    let grid = cfg.grid()?;
    let model = cfg.elastic_model()?;
    let initial = cfg.initial_height(&grid)?;
    let opts = RunOptions {
        t_end: cfg.t_end,
        checkpoint_every: cfg.output.checkpoint_every,
        d_ref: cfg.d,
        max_steps: cfg.max_steps,
    };
    let traj = run(&grid, initial, &model, &cfg.stepper_config(), &opts)?;
    fs::write(out.join("trajectory.csv"), trajectory_csv(&traj.rows))?;
    for (i, (_, t, h)) in traj.snapshots.iter().enumerate() {
        HeightSnapshot::new(&grid, *t, h.values()).write(&out.join(height_file_name(i)))?;
    }
    let last = &traj.final_state;
    HeightSnapshot::new(&grid, last.t, last.h().values()).write(&out.join("final_state.bin"))?;
    let status = match traj.status {
        RunStatus::Completed => "completed",
        RunStatus::PinchOff => "pinch-off",
        RunStatus::SolverFailure => "solver-failure",
    };
    let summary_json = serde_json::json!({
        "status": status,
        "steps": traj.steps,
        "t_final": last.t,
        "failure": traj.failure,
        "checkpoints": traj.snapshots.len(),
    });
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary_json)? + "\n")?;

    let row = traj.rows.last().expect("a trajectory has at least one row");
    let mut summary = String::new();
    let _ = writeln!(summary, "status: {status}");
    let _ = writeln!(summary, "steps: {}  t: {:.6e}", traj.steps, last.t);
    let _ = writeln!(summary, "energy_total: {:.12e}  lyapunov: {:.6e}", row.energy_total, row.lyapunov);
    let _ = writeln!(summary, "h_dev_l2: {:.6e}", row.h_dev_l2);
    if let Some(f) = &traj.failure {
        let _ = writeln!(summary, "reason: {f}");
    }
    Ok(CommandOutput { exit_code: traj.status.exit_code(), summary })
}

/// Scans flat films over `scan.d_list` and writes `scan.csv`.
pub fn flat_scan_cmd(cfg: &SimConfig, out: &Path) -> Result<CommandOutput> {
    let scan_cfg = cfg.scan.as_ref().ok_or_else(|| Error::Config("flat-scan needs a \"scan\" section".into()))?;
    prepare(out)?;
    let grid = cfg.grid()?;
    let result = flat_scan(&grid, &scan_cfg.d_list, &cfg.scan_setup(scan_cfg.cutoff)?)?;
    fs::write(out.join("scan.csv"), scan_csv(&result))?;
    let mut summary = String::new();
    for r in &result.rows {
        let _ = writeln!(summary, "d = {:.6e}: min_eig_L2 = {:.6e}, min_eig_H1 = {:.6e}", r.d, r.min_eig_l2, r.min_eig_h1);
    }
    match (result.bracket, result.threshold_estimate()) {
        (Some((lo, hi)), Some(est)) => {
            let _ = writeln!(summary, "sign change in [{lo:.6e}, {hi:.6e}], d0 ~ {est:.6e} ({} changes)", result.sign_changes);
        }
        _ => {
            let _ = writeln!(summary, "no sign change");
        }
    }
    Ok(CommandOutput { exit_code: 0, summary })
}

/// Evaluates the second variation on a Fourier basis at the initial profile,
/// compares each mode with finite differences of the energy, and writes
/// `second_variation.csv`.
pub fn second_variation_cmd(cfg: &SimConfig, out: &Path) -> Result<CommandOutput> {
    let sv = cfg
        .second_variation
        .as_ref()
        .ok_or_else(|| Error::Config("second-variation needs a \"second_variation\" section".into()))?;
    prepare(out)?;
    let grid = cfg.grid()?;
    let model = cfg.elastic_model()?;
    let h = cfg.initial_height(&grid)?;
    let film = FilmState::evaluate(&model, &grid, h.clone(), None)?;
    let asm = QuadraticFormAssembly::assemble(&film, cfg.sigma, sv.cutoff)?;
    let energy = |values: Vec<f64>| -> Result<f64> {
        let hf = HeightField::new(&grid, values)?;
        Ok(FilmState::evaluate(&model, &grid, hf, Some(&film.displacement))?.energy().total)
    };
    let j0 = film.energy().total;
    let mut csv = String::from("k1,k2,parity,value,finite_difference\n");
    for (a, mode) in asm.modes.iter().enumerate() {
        let psi = &asm.basis[a];
        let eps = sv.fd_eps;
        let plus = energy(h.values().iter().zip(psi).map(|(x, p)| x + eps * p).collect())?;
        let minus = energy(h.values().iter().zip(psi).map(|(x, p)| x - eps * p).collect())?;
        let fd = (plus - 2.0 * j0 + minus) / (eps * eps);
        let parity = match mode.parity {
            Parity::Cos => "cos",
            Parity::Sin => "sin",
        };
        let _ = writeln!(
            csv,
            "{},{},{parity},{},{}",
            mode.wavevector[0],
            mode.wavevector[1],
            fmt_f64(asm.form[(a, a)]),
            fmt_f64(fd)
        );
    }
    fs::write(out.join("second_variation.csv"), csv)?;
    let report = stability_report(&film, cfg.sigma, sv.cutoff, 1e-8)?;
    let mut summary = String::new();
    let _ = writeln!(summary, "stationary: {}", report.is_stationary);
    let _ = writeln!(summary, "min_eig_L2: {:.6e}", report.min_eig_l2);
    let _ = writeln!(summary, "min_eig_H1: {:.6e}", report.min_eig_h1);
    let _ = writeln!(summary, "verdict: {:?}", report.verdict);
    Ok(CommandOutput { exit_code: 0, summary })
}

/// Runs the energy-identity check along a trajectory and writes `identity.csv`.
pub fn energy_identity_cmd(cfg: &SimConfig, out: &Path) -> Result<CommandOutput> {
    let id = cfg.identity.as_ref().ok_or_else(|| Error::Config("energy-identity needs an \"identity\" section".into()))?;
    prepare(out)?;
    let grid = cfg.grid()?;
    let model = cfg.elastic_model()?;
    let h = cfg.initial_height(&grid)?;
    let records = identity_series(&grid, h, &model, &cfg.stepper_config(), id.steps, id.every)?;
    let mut csv = String::from("t,lhs,rhs,mismatch\n");
    for r in &records {
        let c = r.check;
        let _ = writeln!(csv, "{},{},{},{}", fmt_f64(r.t), fmt_f64(c.lhs), fmt_f64(c.rhs), fmt_f64(c.mismatch));
    }
    fs::write(out.join("identity.csv"), csv)?;
    let max = records.iter().map(|r| r.check.mismatch).fold(0.0, f64::max);
    let mut summary = String::new();
    let _ = writeln!(summary, "windows: {}", records.len());
    let _ = writeln!(summary, "max relative mismatch: {max:.6e}");
    Ok(CommandOutput { exit_code: 0, summary })
}
