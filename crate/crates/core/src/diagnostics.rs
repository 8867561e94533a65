//! Energies, residuals and consistency checks evaluated on film states.

use crate::elasticity::{ElasticModel, ElasticTrace};
use crate::error::{Error, Result};
use crate::flow::{step_coupled, volume, Energy, FilmState, FlowState, StepperConfig};
use crate::geometry::{laplace_beltrami, tangential_gradient_squared, HeightField, SurfaceGeometry};
use crate::spectral::Grid;
use crate::stability::second_variation_apply;

/// Floor added to denominators of relative comparisons.
pub const MISMATCH_FLOOR: f64 = 1e-14;

/// Column names of `trajectory.csv`, in order.
pub const TRAJECTORY_COLUMNS: [&str; 11] = [
    "t",
    "volume",
    "energy_bulk",
    "energy_surface",
    "energy_total",
    "lyapunov",
    "stationarity_residual",
    "h_dev_l2",
    "d_distance",
    "tau",
    "coupling_iters",
];

/// One checkpoint of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub volume: f64,
    pub energy_bulk: f64,
    pub energy_surface: f64,
    pub energy_total: f64,
    pub lyapunov: f64,
    pub stationarity_residual: f64,
    pub h_dev_l2: f64,
    pub d_distance: f64,
    pub tau: f64,
    pub coupling_iters: usize,
    /// `|h|_{H³}`, monitored but not written to the trajectory file.
    pub sobolev_h3: f64,
}

/// Builds the diagnostics row of a flow state.
pub fn row(state: &FlowState, sigma: f64, d_ref: f64) -> DiagnosticsRow {
    let film = &state.film;
    let grid = film.grid();
    let h = &film.h;
    DiagnosticsRow {
        t: state.t,
        volume: volume(h, grid),
        energy_bulk: state.energy.bulk,
        energy_surface: state.energy.surface,
        energy_total: state.energy.total,
        lyapunov: lyapunov(&film.geometry, &film.trace, sigma).expect("state fields share the grid"),
        stationarity_residual: stationarity_residual(&film.geometry, &film.trace, sigma),
        h_dev_l2: h_dev_l2(h, grid),
        d_distance: d_distance(h, grid, d_ref),
        tau: state.last_step.tau,
        coupling_iters: state.last_step.coupling_iters,
        sobolev_h3: sobolev_seminorm(h, grid, 3).expect("order 3 is supported"),
    }
}

pub fn total_energy(film: &FilmState) -> Energy {
    film.energy()
}

fn potential(geom: &SurfaceGeometry, trace: &ElasticTrace, sigma: f64) -> Vec<f64> {
    geom.mean_curvature.iter().zip(&trace.q).map(|(h, q)| h + sigma * q).collect()
}

/// `‖R − mean_Γ R‖_{L²(Γ)}` with `R = H + σ q`.
pub fn stationarity_residual(geom: &SurfaceGeometry, trace: &ElasticTrace, sigma: f64) -> f64 {
    let r = potential(geom, trace, sigma);
    let mean = geom.surface_mean(&r);
    let dev: Vec<f64> = r.iter().map(|v| v - mean).collect();
    geom.l2_norm(&dev)
}

/// Per-component means `λ_i` of `R`; a periodic graph film has one component.
pub fn component_means(geom: &SurfaceGeometry, trace: &ElasticTrace, sigma: f64) -> Vec<f64> {
    vec![geom.surface_mean(&potential(geom, trace, sigma))]
}

/// `∫_Γ |∇_g R|² dμ`.
pub fn lyapunov(geom: &SurfaceGeometry, trace: &ElasticTrace, sigma: f64) -> Result<f64> {
    let r = potential(geom, trace, sigma);
    Ok(geom.integrate(&tangential_gradient_squared(&r, geom)?))
}

/// `‖h − h̄‖_{L²}` over the flat cell.
pub fn h_dev_l2(h: &HeightField, grid: &Grid) -> f64 {
    let mean = grid.mean(h.values());
    let dev: Vec<f64> = h.values().iter().map(|v| v - mean).collect();
    grid.l2_norm(&dev)
}

/// `D = ∫_{F Δ G} dist(x, Σ) dx` against the flat film of thickness `d_ref`, i.e. `½ ∫ (h − d_ref)² dx`.
pub fn d_distance(h: &HeightField, grid: &Grid, d_ref: f64) -> f64 {
    let sq: Vec<f64> = h.values().iter().map(|v| (v - d_ref) * (v - d_ref)).collect();
    0.5 * grid.integrate(&sq)
}

/// `|h|_{H^k} = ‖∇^k h‖_{L²}` for `k ≤ 3`, evaluated by Parseval.
pub fn sobolev_seminorm(h: &HeightField, grid: &Grid, k: u32) -> Result<f64> {
    if k > 3 {
        return Err(Error::InvalidArgument(format!("seminorm order must be at most 3, got {k}")));
    }
    grid.check_field(h.values())?;
    let spec = grid.forward(h.values());
    let norm = grid.len() as f64;
    let sum: f64 = spec
        .iter()
        .enumerate()
        .map(|(idx, c)| grid.wavenumber_sq(idx).powi(k as i32) * c.norm_sqr())
        .sum();
    Ok((sum).sqrt() / norm)
}

/// Both sides of the energy identity at the middle of a three-state window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityCheck {
    /// Centered difference of the Lyapunov quantity.
    pub lhs: f64,
    /// `−2∂²J[Δ_Γ R] − 2∫B[∇R,∇R] Δ_Γ R + ∫H |∇R|² Δ_Γ R`.
    pub rhs: f64,
    pub mismatch: f64,
}

/// Right-hand side of the energy identity for a single state.
pub fn identity_rhs(film: &FilmState, sigma: f64) -> Result<f64> {
    let geom = &film.geometry;
    let r = film.potential(sigma);
    let lap = laplace_beltrami(&r, geom)?;
    let second = second_variation_apply(&lap, film, sigma)?;
    let b_grad = geom.second_fundamental_on_gradient(&r)?;
    let grad_sq = tangential_gradient_squared(&r, geom)?;
    let cubic: Vec<f64> = (0..lap.len())
        .map(|i| (-2.0 * b_grad[i] + geom.mean_curvature[i] * grad_sq[i]) * lap[i])
        .collect();
    Ok(-2.0 * second + geom.integrate(&cubic))
}

/// Compares `d/dt ∫|∇R|²` (centered difference over `window`) with the identity's right-hand side.
///
/// `taus` are the step sizes from `window[0]` to `window[1]` and from
/// `window[1]` to `window[2]`; they must agree to 1e−12 relative.
pub fn energy_identity_check(window: [&FilmState; 3], taus: [f64; 2], sigma: f64) -> Result<IdentityCheck> {
    if (taus[0] - taus[1]).abs() > 1e-12 * taus[0].abs().max(taus[1].abs()) {
        return Err(Error::UnequalSteps(taus[0], taus[1]));
    }
    let l = |f: &FilmState| lyapunov(&f.geometry, &f.trace, sigma);
    let lhs = (l(window[2])? - l(window[0])?) / (taus[0] + taus[1]);
    let rhs = identity_rhs(window[1], sigma)?;
    Ok(IdentityCheck { lhs, rhs, mismatch: (lhs - rhs).abs() / (rhs.abs() + MISMATCH_FLOOR) })
}

/// Defect of `∫_Γ f div_g X dμ = −∫_Γ g(∇f, X) dμ`, relative to the size of either side.
pub fn integration_by_parts_defect(f: &[f64], x: &[[f64; 2]], geom: &SurfaceGeometry) -> Result<f64> {
    let div = geom.divergence(x)?;
    let grad = geom.gradient(f)?;
    let left: Vec<f64> = f.iter().zip(&div).map(|(a, b)| a * b).collect();
    let right = geom.inner(&grad, x);
    let (l, r) = (geom.integrate(&left), geom.integrate(&right));
    let scale = geom.integrate(&left.iter().map(|v| v.abs()).collect::<Vec<_>>());
    Ok((l + r).abs() / (scale + MISMATCH_FLOOR))
}

/// Quantities entering `‖∇_g f‖ ≤ C ‖Δ_g f‖` for a field made zero-mean on `Γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoincareSample {
    pub grad_norm: f64,
    pub laplacian_norm: f64,
    /// Relative defect of Green's identity `∫|∇f|² = −∫ f Δ_g f`.
    pub green_defect: f64,
}

impl PoincareSample {
    pub fn ratio(&self) -> f64 {
        self.grad_norm / self.laplacian_norm
    }
}

pub fn poincare_sample(f: &[f64], geom: &SurfaceGeometry) -> Result<PoincareSample> {
    let mean = geom.surface_mean(f);
    let f0: Vec<f64> = f.iter().map(|v| v - mean).collect();
    let grad_sq = geom.integrate(&tangential_gradient_squared(&f0, geom)?);
    let lap = laplace_beltrami(&f0, geom)?;
    let green: Vec<f64> = f0.iter().zip(&lap).map(|(a, b)| a * b).collect();
    let green = geom.integrate(&green);
    Ok(PoincareSample {
        grad_norm: grad_sq.sqrt(),
        laplacian_norm: geom.l2_norm(&lap),
        green_defect: (grad_sq + green).abs() / (grad_sq + MISMATCH_FLOOR),
    })
}

/// Identity check attached to the time of the middle state of its window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityRecord {
    pub t: f64,
    pub check: IdentityCheck,
}

/// Integrates `steps` accepted steps and checks the energy identity every `every` steps.
///
/// Windows whose two steps differ in size (after a rejection) are skipped.
pub fn identity_series(
    grid: &Grid,
    initial: HeightField,
    model: &ElasticModel,
    cfg: &StepperConfig,
    steps: usize,
    every: usize,
) -> Result<Vec<IdentityRecord>> {
    cfg.validate()?;
    let first = FlowState::new(model, grid, initial, cfg)?;
    let second = step_coupled(&first, model, cfg, None)?;
    let mut window = std::collections::VecDeque::from([first, second]);
    let mut out = Vec::new();
    for k in 2..=steps {
        let next = step_coupled(window.back().expect("window is never empty"), model, cfg, None)?;
        window.push_back(next);
        if window.len() > 3 {
            window.pop_front();
        }
        if (k - 1) % every.max(1) == 0 {
            let taus = [window[1].last_step.tau, window[2].last_step.tau];
            match energy_identity_check([&window[0].film, &window[1].film, &window[2].film], taus, cfg.sigma) {
                Ok(check) => out.push(IdentityRecord { t: window[1].t, check }),
                Err(Error::UnequalSteps(..)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::compute_geometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    #[test]
    fn distance_of_shifted_film() {
        let grid = Grid::new(1, 16).unwrap();
        assert_eq!(d_distance(&HeightField::flat(&grid, 0.2), &grid, 0.2), 0.0);
        let h = HeightField::flat(&grid, 0.2 + 1e-3);
        assert!((d_distance(&h, &grid, 0.2) - 0.5e-6).abs() < 1e-18);
    }

    #[test]
    fn distance_matches_slab_quadrature() {
        // Integrate dist(x, Σ) = |x_3 − d| over the symmetric difference column by column.
        let grid = Grid::new(1, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = HeightField::new(&grid, (0..32).map(|_| 0.5 + rng.gen_range(-0.1..0.1)).collect()).unwrap();
        let slab: f64 = h
            .values()
            .iter()
            .map(|&hv| {
                let (lo, hi) = if hv > 0.5 { (0.5, hv) } else { (hv, 0.5) };
                let m = 2000;
                let dz = (hi - lo) / m as f64;
                (0..m).map(|j| (lo + (j as f64 + 0.5) * dz - 0.5).abs() * dz).sum::<f64>()
            })
            .sum::<f64>()
            * grid.node_weight();
        assert!((slab - d_distance(&h, &grid, 0.5)).abs() < 1e-10);
    }

    #[test]
    fn seminorm_of_sine() {
        let grid = Grid::new(1, 32).unwrap();
        let eps = 0.01;
        let h = HeightField::from_fn(&grid, |x| eps * (TAU * x[0]).sin()).unwrap();
        let s1 = sobolev_seminorm(&h, &grid, 1).unwrap();
        assert!((s1 - eps * TAU / 2f64.sqrt()).abs() < 1e-14);
        let c = HeightField::flat(&grid, 0.7);
        for k in 1..=3 {
            assert!(sobolev_seminorm(&c, &grid, k).unwrap() < 1e-14);
        }
        assert!(sobolev_seminorm(&h, &grid, 4).is_err());
    }

    #[test]
    fn seminorm_satisfies_parseval() {
        let grid = Grid::new(2, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = HeightField::new(&grid, (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let direct: f64 = grid.gradient(h.values()).iter().map(|d| grid.l2_norm(d).powi(2)).sum();
        let s1 = sobolev_seminorm(&h, &grid, 1).unwrap();
        assert!((s1 * s1 - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn calculus_identities_on_a_wavy_graph() {
        let grid = Grid::new(2, 32).unwrap();
        let h = HeightField::from_fn(&grid, |x| 0.4 + 0.05 * (TAU * x[0]).sin() * (TAU * x[1]).cos()).unwrap();
        let geom = compute_geometry(&h, &grid).unwrap();
        let f = grid.sample(|x| (TAU * (x[0] + x[1])).cos() + 0.3 * (2.0 * TAU * x[0]).sin());
        let x: Vec<[f64; 2]> = grid
            .sample(|x| (TAU * x[1]).sin())
            .into_iter()
            .zip(grid.sample(|x| (TAU * x[0]).cos()))
            .map(|(a, b)| [a, b])
            .collect();
        assert!(integration_by_parts_defect(&f, &x, &geom).unwrap() < 1e-12);
        let p = poincare_sample(&f, &geom).unwrap();
        assert!(p.green_defect < 1e-12);
        assert!(p.ratio() < 1.1 / TAU);
    }
}
