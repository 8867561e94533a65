//! Time integration of `(1/J) ∂_t h = Δ_g (H + σ q + f)`.
//!
//! Each step treats the flat bilaplacian implicitly and everything else
//! explicitly:
//!
//! ```text
//! ĥ_{n+1}(k) = (ĥ_n(k) + τ N̂(k)) / (1 + τ |2πk|⁴),     N = rhs(h_n) + Δ² h_n.
//! ```
//!
//! The zero mode of `h` is copied unchanged, so the film volume is conserved
//! up to round-off regardless of the coupling error.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRow};
use crate::elasticity::{BulkDisplacement, ElasticModel, ElasticSystem, ElasticTrace};
use crate::error::{check_finite, Error, Result};
use crate::geometry::{compute_geometry, HeightField, SurfaceGeometry};
use crate::spectral::Grid;

/// A film profile together with its geometry and elastic equilibrium.
#[derive(Clone, Debug)]
pub struct FilmState {
    pub h: HeightField,
    pub geometry: SurfaceGeometry,
    pub elastic: ElasticSystem,
    pub displacement: BulkDisplacement,
    pub trace: ElasticTrace,
}

/// Bulk, surface and total energy of a film.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energy {
    pub bulk: f64,
    pub surface: f64,
    pub total: f64,
}

impl FilmState {
    /// Solves the elastic equilibrium for `h`, warm-starting from `warm` when given.
    pub fn evaluate(model: &ElasticModel, grid: &Grid, h: HeightField, warm: Option<&BulkDisplacement>) -> Result<Self> {
        let geometry = compute_geometry(&h, grid)?;
        let elastic = ElasticSystem::assemble(model, grid, &h)?;
        let displacement = elastic.solve_equilibrium(warm)?;
        let trace = elastic.boundary_traces(&displacement, &geometry)?;
        Ok(Self { h, geometry, elastic, displacement, trace })
    }

    pub fn grid(&self) -> &Grid {
        self.geometry.grid()
    }

    pub fn energy(&self) -> Energy {
        let bulk = self.elastic.bulk_energy(&self.displacement);
        let surface = self.geometry.area();
        Energy { bulk, surface, total: bulk + surface }
    }

    /// Chemical potential `R = H + σ q`.
    pub fn potential(&self, sigma: f64) -> Vec<f64> {
        self.geometry.mean_curvature.iter().zip(&self.trace.q).map(|(h, q)| h + sigma * q).collect()
    }
}

/// Prescribed surface forcing `f(x, t) = a · sin(2π k·x) · e^{−r t}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Forcing {
    pub amplitude: f64,
    pub wavevector: [i64; 2],
    #[serde(default)]
    pub decay: f64,
}

impl Forcing {
    pub fn sample(&self, grid: &Grid, t: f64) -> Vec<f64> {
        let k = self.wavevector;
        let scale = self.amplitude * (-self.decay * t).exp();
        grid.sample(|x| scale * (std::f64::consts::TAU * (k[0] as f64 * x[0] + k[1] as f64 * x[1])).sin())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coupling {
    /// Elastic trace frozen at the start of the step.
    Lagged,
    /// Fixed-point iteration on the trace until `‖q^{(m+1)} − q^{(m)}‖_{L²} < tol`.
    Picard { tol: f64, max_iter: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    pub tau0: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Factor applied to `τ` after each accepted step (capped at `tau_max`).
    #[serde(default = "default_growth")]
    pub growth: f64,
    #[serde(default = "default_coupling")]
    pub coupling: Coupling,
    /// `+1` for the film orientation; `−1` flips the sign of the elastic potential.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub forcing: Option<Forcing>,
    /// Accepted energy increase per step before a rejection.
    #[serde(default = "default_energy_slack")]
    pub energy_slack: f64,
    /// Evaluate the explicit remainder on a 3/2-padded grid.
    #[serde(default = "default_true")]
    pub dealias: bool,
}

fn default_growth() -> f64 {
    1.0
}
fn default_coupling() -> Coupling {
    Coupling::Lagged
}
fn default_sigma() -> f64 {
    1.0
}
fn default_energy_slack() -> f64 {
    1e-10
}
fn default_true() -> bool {
    true
}

impl StepperConfig {
    pub fn fixed(tau: f64) -> Self {
        Self {
            tau0: tau,
            tau_min: tau * 1e-6,
            tau_max: tau,
            growth: 1.0,
            coupling: Coupling::Lagged,
            sigma: 1.0,
            forcing: None,
            energy_slack: 1e-10,
            dealias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.tau_min > 0.0 && self.tau_min <= self.tau0 && self.tau0 <= self.tau_max) {
            return bad(format!(
                "need 0 < tau_min <= tau0 <= tau_max, got {} / {} / {}",
                self.tau_min, self.tau0, self.tau_max
            ));
        }
        if !(self.growth >= 1.0 && self.growth.is_finite()) {
            return bad(format!("growth must be >= 1, got {}", self.growth));
        }
        if self.sigma != 1.0 && self.sigma != -1.0 {
            return bad(format!("sigma must be +1 or -1, got {}", self.sigma));
        }
        if let Coupling::Picard { tol, max_iter } = self.coupling {
            if !(tol > 0.0) || max_iter == 0 {
                return bad(format!("picard needs tol > 0 and max_iter >= 1, got {tol} / {max_iter}"));
            }
        }
        if !(self.energy_slack >= 0.0) {
            return bad(format!("energy_slack must be non-negative, got {}", self.energy_slack));
        }
        Ok(())
    }

    /// Energy monotonicity is only expected for the unforced film orientation.
    fn checks_energy(&self) -> bool {
        self.forcing.is_none() && self.sigma == 1.0
    }
}

/// Bookkeeping of the most recent accepted step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub tau: f64,
    pub rejects: usize,
    pub coupling_iters: usize,
    /// Final `‖q^{(m+1)} − q^{(m)}‖_{L²}` for Picard coupling, zero when lagged.
    pub coupling_residual: f64,
    pub cg_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub film: FilmState,
    pub energy: Energy,
    pub last_step: StepInfo,
    /// Step size proposed for the next step.
    pub next_tau: f64,
}

impl FlowState {
    pub fn new(model: &ElasticModel, grid: &Grid, h: HeightField, cfg: &StepperConfig) -> Result<Self> {
        let film = FilmState::evaluate(model, grid, h, None)?;
        let energy = film.energy();
        Ok(Self { t: 0.0, film, energy, last_step: StepInfo::default(), next_tau: cfg.tau0 })
    }

    pub fn h(&self) -> &HeightField {
        &self.film.h
    }
}

/// `J · Δ_g (H + f_total) = ∂_i (J g^{ij} ∂_j (H + f_total))`, i.e. `∂_t h`.
pub fn rhs(h: &HeightField, f_total: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    grid.check_field(f_total)?;
    let geom = compute_geometry(h, grid)?;
    let potential: Vec<f64> = geom.mean_curvature.iter().zip(f_total).map(|(a, b)| a + b).collect();
    let grad = grid.gradient(&potential);
    let mut out = vec![0.0; grid.len()];
    for a in 0..grid.dim() {
        let flux: Vec<f64> = (0..grid.len())
            .map(|i| {
                let gi = geom.metric_inv[i];
                geom.jacobian[i] * (0..grid.dim()).map(|b| gi[a][b] * grad[b][i]).sum::<f64>()
            })
            .collect();
        for (o, v) in out.iter_mut().zip(grid.derivative(&flux, a)) {
            *o += v;
        }
    }
    Ok(out)
}

/// [`rhs`] evaluated on the 3/2-padded grid and truncated back.
pub fn rhs_dealiased(h: &HeightField, f_total: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    let fine = grid.dealiased();
    let hf = HeightField::new(&fine, grid.resample(h.values(), &fine))?;
    let ff = grid.resample(f_total, &fine);
    let r = rhs(&hf, &ff, &fine)?;
    Ok(fine.resample(&r, grid))
}

/// One IMEX step with the explicit potential `f_total` held fixed.
pub fn forced_step(h: &HeightField, f_total: &[f64], tau: f64, grid: &Grid, h_min: f64, dealias: bool) -> Result<HeightField> {
    let r = if dealias { rhs_dealiased(h, f_total, grid)? } else { rhs(h, f_total, grid)? };
    let b = grid.bilaplacian(h.values());
    let remainder: Vec<f64> = r.iter().zip(&b).map(|(x, y)| x + y).collect();
    let hs = grid.forward(h.values());
    let ns = grid.forward(&remainder);
    let zero = Complex64::new(0.0, 0.0);
    let next: Vec<Complex64> = (0..grid.len())
        .map(|idx| {
            if idx == 0 {
                hs[0]
            } else if grid.touches_nyquist(idx) {
                zero
            } else {
                let k2 = grid.wavenumber_sq(idx);
                (hs[idx] + ns[idx] * tau) / (1.0 + tau * k2 * k2)
            }
        })
        .collect();
    let values = grid.inverse(&next);
    check_finite("height update", &values)?;
    let h_new = HeightField::new(grid, values)?;
    h_new.check_film(h_min)?;
    Ok(h_new)
}

/// `∫ h dx` over the unit cell.
pub fn volume(h: &HeightField, grid: &Grid) -> f64 {
    grid.integrate(h.values())
}

fn explicit_potential(film: &FilmState, cfg: &StepperConfig, t: f64) -> Vec<f64> {
    let mut f: Vec<f64> = film.trace.q.iter().map(|q| cfg.sigma * q).collect();
    if let Some(force) = &cfg.forcing {
        for (a, b) in f.iter_mut().zip(force.sample(film.grid(), t)) {
            *a += b;
        }
    }
    f
}

/// Attempts one step of size `tau`; returns the new film and coupling statistics.
fn attempt(state: &FlowState, model: &ElasticModel, cfg: &StepperConfig, tau: f64) -> Result<(FilmState, usize, f64)> {
    let grid = state.film.grid().clone();
    let f0 = explicit_potential(&state.film, cfg, state.t);
    let h1 = forced_step(&state.film.h, &f0, tau, &grid, model.h_min, cfg.dealias)?;
    let mut film = FilmState::evaluate(model, &grid, h1, Some(&state.film.displacement))?;
    match cfg.coupling {
        Coupling::Lagged => Ok((film, 1, 0.0)),
        Coupling::Picard { tol, max_iter } => {
            let mut residual = f64::INFINITY;
            for iter in 1..=max_iter {
                let f = explicit_potential(&film, cfg, state.t);
                let h_next = forced_step(&state.film.h, &f, tau, &grid, model.h_min, cfg.dealias)?;
                let next = FilmState::evaluate(model, &grid, h_next, Some(&film.displacement))?;
                let dq: Vec<f64> = next.trace.q.iter().zip(&film.trace.q).map(|(a, b)| a - b).collect();
                residual = grid.l2_norm(&dq);
                film = next;
                if residual < tol {
                    return Ok((film, iter, residual));
                }
            }
            Err(Error::CouplingNonConvergence { iterations: max_iter, residual })
        }
    }
}

/// Advances `state` by one accepted step, halving `τ` on rejection.
pub fn step_coupled(state: &FlowState, model: &ElasticModel, cfg: &StepperConfig, t_end: Option<f64>) -> Result<FlowState> {
    let mut tau = state.next_tau;
    let mut rejects = 0;
    loop {
        let step_tau = match t_end {
            Some(end) if state.t + tau > end => end - state.t,
            _ => tau,
        };
        let failure = match attempt(state, model, cfg, step_tau) {
            Ok((film, coupling_iters, coupling_residual)) => {
                let energy = film.energy();
                let rising = energy.total - state.energy.total > cfg.energy_slack * state.energy.total.abs().max(1.0);
                if !(cfg.checks_energy() && rising) {
                    let cg_iterations = film.displacement.solve.iterations;
                    return Ok(FlowState {
                        t: state.t + step_tau,
                        film,
                        energy,
                        last_step: StepInfo { tau: step_tau, rejects, coupling_iters, coupling_residual, cg_iterations },
                        next_tau: (tau * cfg.growth).min(cfg.tau_max),
                    });
                }
                Error::EnergyIncrease { before: state.energy.total, after: energy.total }
            }
            Err(e @ (Error::NonFinite { .. }
            | Error::DegenerateGeometry { .. }
            | Error::SolverNonConvergence { .. }
            | Error::CouplingNonConvergence { .. })) => e,
            Err(e) => return Err(e),
        };
        rejects += 1;
        tau *= 0.5;
        if tau < cfg.tau_min {
            return Err(failure);
        }
    }
}

/// Outcome of a [`run`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    PinchOff,
    SolverFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Completed => 0,
            Self::PinchOff => 3,
            Self::SolverFailure => 4,
        }
    }
}

/// Diagnostics rows and recorded height fields of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub rows: Vec<DiagnosticsRow>,
    /// `(step index, t, h)` at every checkpoint.
    pub snapshots: Vec<(usize, f64, HeightField)>,
    pub status: RunStatus,
    /// Error that ended the run early, if any.
    pub failure: Option<String>,
    pub steps: usize,
    pub final_state: FlowState,
}

/// Run parameters beyond the step control.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub t_end: f64,
    /// Record a row and a snapshot every this many accepted steps (0 = only first and last).
    pub checkpoint_every: usize,
    /// Reference thickness for the distance diagnostics.
    pub d_ref: f64,
    /// Hard cap on accepted steps.
    pub max_steps: usize,
}

/// Integrates from `initial` until `t_end`, pinch-off or solver failure.
///
/// Failures after the initial evaluation end the run with the matching
/// status and keep the partial trajectory.
pub fn run(grid: &Grid, initial: HeightField, model: &ElasticModel, cfg: &StepperConfig, opts: &RunOptions) -> Result<Trajectory> {
    cfg.validate()?;
    let mut state = FlowState::new(model, grid, initial, cfg)?;
    let record = |state: &FlowState, step: usize, rows: &mut Vec<DiagnosticsRow>, snaps: &mut Vec<(usize, f64, HeightField)>| {
        rows.push(diagnostics::row(state, cfg.sigma, opts.d_ref));
        snaps.push((step, state.t, state.film.h.clone()));
    };
    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    record(&state, 0, &mut rows, &mut snapshots);
    let mut steps = 0;
    let mut status = RunStatus::Completed;
    let mut failure = None;
    let end_tol = 1e-12 * opts.t_end.abs().max(1.0);
    while state.t < opts.t_end - end_tol && steps < opts.max_steps {
        match step_coupled(&state, model, cfg, Some(opts.t_end)) {
            Ok(next) => {
                state = next;
                steps += 1;
                let last = state.t >= opts.t_end - end_tol || steps == opts.max_steps;
                if last || (opts.checkpoint_every > 0 && steps % opts.checkpoint_every == 0) {
                    record(&state, steps, &mut rows, &mut snapshots);
                }
            }
            Err(e) => {
                status = match e {
                    Error::DegenerateGeometry { .. } => RunStatus::PinchOff,
                    _ => RunStatus::SolverFailure,
                };
                failure = Some(e.to_string());
                if snapshots.last().map(|s| s.0) != Some(steps) {
                    record(&state, steps, &mut rows, &mut snapshots);
                }
                break;
            }
        }
    }
    Ok(Trajectory { rows, snapshots, status, failure, steps, final_state: state })
}
