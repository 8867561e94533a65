//! Second variation of the film energy on volume-preserving perturbations.
//!
//! For a zero-mean normal velocity `ψ` on `Γ`,
//!
//! ```text
//! ∂²J[ψ] = ∫_Γ (|∇ψ|² − |B|² ψ²) dμ − 2 ∫_Ω Q(E(u_ψ)) dx + σ ∫_Γ ∂_ν Q(E(u)) ψ² dμ
//! ```
//!
//! where `u_ψ` solves the linearized elastic problem driven by `ψ` and `ν`
//! is the upward normal. The form is assembled on a real Fourier basis and
//! its extreme eigenvalues are computed relative to the `L²(Γ)` and `H¹(Γ)`
//! Gram matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::diagnostics::{stationarity_residual, MISMATCH_FLOOR};
use crate::elasticity::{dot, ElasticModel, ElasticTensor, ElasticTrace};
use crate::error::{Error, Result};
use crate::flow::FilmState;
use crate::geometry::{tangential_gradient_squared, HeightField, SurfaceGeometry};
use crate::spectral::Grid;

/// Relative mean `|∫ψ dμ| / ∫|ψ| dμ` above which a test function is rejected.
pub const ZERO_MEAN_TOL: f64 = 1e-8;

/// Eigenvalues within this distance of zero are reported as inconclusive.
pub const STRICTNESS_THRESHOLD: f64 = 1e-8;

fn check_zero_mean(psi: &[f64], geom: &SurfaceGeometry) -> Result<()> {
    let abs: Vec<f64> = psi.iter().map(|v| v.abs()).collect();
    let mean = geom.integrate(psi) / (geom.integrate(&abs) + MISMATCH_FLOOR);
    if mean.abs() > ZERO_MEAN_TOL {
        return Err(Error::NotZeroMean { mean });
    }
    Ok(())
}

/// `∂²J[ψ]` for a single zero-mean `ψ`.
pub fn second_variation_apply(psi: &[f64], film: &FilmState, sigma: f64) -> Result<f64> {
    let geom = &film.geometry;
    geom.grid().check_field(psi)?;
    check_zero_mean(psi, geom)?;
    let u_psi = film.elastic.solve_linearized(psi, &film.trace, geom)?;
    let grad_sq = tangential_gradient_squared(psi, geom)?;
    let b_sq = geom.second_fundamental_sq();
    let density: Vec<f64> = (0..psi.len())
        .map(|i| grad_sq[i] - b_sq[i] * psi[i] * psi[i] + sigma * film.trace.dq_dn[i] * psi[i] * psi[i])
        .collect();
    Ok(geom.integrate(&density) - 2.0 * film.elastic.bulk_energy(&u_psi))
}

/// Trigonometric factor of a basis function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Cos,
    Sin,
}

/// Real Fourier mode `cos(2π k·x)` or `sin(2π k·x)`, projected to zero mean on `Γ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisMode {
    pub wavevector: [i64; 2],
    pub parity: Parity,
}

impl BasisMode {
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        let k = self.wavevector;
        grid.sample(|x| {
            let phase = std::f64::consts::TAU * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
            match self.parity {
                Parity::Cos => phase.cos(),
                Parity::Sin => phase.sin(),
            }
        })
    }
}

/// Modes with `max |k_i| ≤ cutoff`, one representative of each `±k` pair.
pub fn fourier_basis(dim: usize, cutoff: usize) -> Vec<BasisMode> {
    let c = cutoff as i64;
    let mut ks = Vec::new();
    match dim {
        1 => ks.extend((1..=c).map(|k| [k, 0])),
        _ => {
            for k1 in 0..=c {
                for k2 in -c..=c {
                    if k1 > 0 || k2 > 0 {
                        ks.push([k1, k2]);
                    }
                }
            }
        }
    }
    ks.into_iter()
        .flat_map(|k| [Parity::Cos, Parity::Sin].map(|parity| BasisMode { wavevector: k, parity }))
        .collect()
}

/// Matrix of `∂²J` on a Fourier basis together with the Gram matrices.
#[derive(Clone, Debug)]
pub struct QuadraticFormAssembly {
    pub modes: Vec<BasisMode>,
    /// Nodal values of the zero-mean basis functions.
    pub basis: Vec<Vec<f64>>,
    pub form: DMatrix<f64>,
    pub mass_l2: DMatrix<f64>,
    pub mass_h1: DMatrix<f64>,
}

impl QuadraticFormAssembly {
    pub fn assemble(film: &FilmState, sigma: f64, cutoff: usize) -> Result<Self> {
        let geom = &film.geometry;
        let grid = geom.grid();
        if cutoff == 0 || 3 * cutoff > grid.n() {
            return Err(Error::InvalidArgument(format!(
                "cutoff must lie in 1..={}, got {cutoff}",
                grid.n() / 3
            )));
        }
        let modes = fourier_basis(grid.dim(), cutoff);
        let basis: Vec<Vec<f64>> = modes
            .iter()
            .map(|m| {
                let f = m.sample(grid);
                let mean = geom.surface_mean(&f);
                f.into_iter().map(|v| v - mean).collect()
            })
            .collect();

        let solves = basis
            .par_iter()
            .map(|psi| {
                let u = film.elastic.solve_linearized(psi, &film.trace, geom)?;
                let mut ku = vec![0.0; u.fluctuation.len()];
                film.elastic.stiffness().matvec(&u.fluctuation, &mut ku);
                Ok((u, ku))
            })
            .collect::<Result<Vec<_>>>()?;
        let grads: Vec<Vec<[f64; 2]>> = basis.iter().map(|b| geom.gradient(b)).collect::<Result<_>>()?;
        let b_sq = geom.second_fundamental_sq();

        let m = basis.len();
        let mut form = DMatrix::zeros(m, m);
        let mut mass_l2 = DMatrix::zeros(m, m);
        let mut mass_h1 = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let ga = geom.inner(&grads[a], &grads[b]);
                let (pa, pb) = (&basis[a], &basis[b]);
                let prod: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x * y).collect();
                let local: Vec<f64> = (0..prod.len())
                    .map(|i| ga[i] + (sigma * film.trace.dq_dn[i] - b_sq[i]) * prod[i])
                    .collect();
                let elastic = dot(&solves[a].0.fluctuation, &solves[b].1);
                let value = geom.integrate(&local) - elastic;
                let l2 = geom.integrate(&prod);
                let h1 = l2 + geom.integrate(&ga);
                for (mat, v) in [(&mut form, value), (&mut mass_l2, l2), (&mut mass_h1, h1)] {
                    mat[(a, b)] = v;
                    mat[(b, a)] = v;
                }
            }
        }
        Ok(Self { modes, basis, form, mass_l2, mass_h1 })
    }

    /// `∂²J[Σ c_a ψ_a]` from the assembled matrix.
    pub fn evaluate(&self, coeffs: &[f64]) -> f64 {
        let c = nalgebra::DVector::from_column_slice(coeffs);
        (c.transpose() * &self.form * &c)[(0, 0)]
    }

    /// Generalized eigenvalues of `(form, mass)` in ascending order.
    pub fn spectrum(&self, norm: Norm) -> Result<Vec<f64>> {
        let mass = match norm {
            Norm::L2 => &self.mass_l2,
            Norm::H1 => &self.mass_h1,
        };
        generalized_eigenvalues(&self.form, mass)
    }

    pub fn min_eigenvalue(&self, norm: Norm) -> Result<f64> {
        Ok(self.spectrum(norm)?[0])
    }
}

/// Normalization of the Rayleigh quotient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L2,
    H1,
}

fn generalized_eigenvalues(a: &DMatrix<f64>, mass: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = nalgebra::Cholesky::new(mass.clone())
        .ok_or_else(|| Error::InvalidArgument("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let left = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::InvalidArgument("singular mass factor".into()))?;
    let c = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::InvalidArgument("singular mass factor".into()))?;
    let sym = (&c + c.transpose()) * 0.5;
    let mut values: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    values.sort_by(|x, y| x.total_cmp(y));
    Ok(values)
}

/// Sign classification of the smallest `H¹` eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    StrictlyStable,
    Unstable,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub min_eig_l2: f64,
    pub min_eig_h1: f64,
    pub is_stationary: bool,
    pub verdict: Verdict,
    /// Smallest few `H¹` eigenvalues, ascending.
    pub spectrum_head: Vec<f64>,
}

impl StabilityReport {
    pub fn is_strictly_stable(&self) -> bool {
        self.verdict == Verdict::StrictlyStable
    }
}

fn classify(min_eig_h1: f64) -> Verdict {
    if min_eig_h1 > STRICTNESS_THRESHOLD {
        Verdict::StrictlyStable
    } else if min_eig_h1 < -STRICTNESS_THRESHOLD {
        Verdict::Unstable
    } else {
        Verdict::Inconclusive
    }
}

/// Assembles `∂²J` with the given cutoff and reports its extreme eigenvalues.
pub fn stability_report(film: &FilmState, sigma: f64, cutoff: usize, stationarity_tol: f64) -> Result<StabilityReport> {
    let asm = QuadraticFormAssembly::assemble(film, sigma, cutoff)?;
    let h1 = asm.spectrum(Norm::H1)?;
    let min_eig_l2 = asm.min_eigenvalue(Norm::L2)?;
    Ok(StabilityReport {
        min_eig_l2,
        min_eig_h1: h1[0],
        is_stationary: is_stationary(&film.geometry, &film.trace, sigma, stationarity_tol),
        verdict: classify(h1[0]),
        spectrum_head: h1.iter().take(6).copied().collect(),
    })
}

/// `stationarity_residual ≤ tol`.
pub fn is_stationary(geom: &SurfaceGeometry, trace: &ElasticTrace, sigma: f64, tol: f64) -> bool {
    stationarity_residual(geom, trace, sigma) <= tol
}

/// Material and discretization data shared by every point of a flat scan.
#[derive(Clone, Debug)]
pub struct ScanSetup {
    pub tensor: ElasticTensor,
    pub e0: f64,
    pub layers: usize,
    pub sigma: f64,
    pub cutoff: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow {
    pub d: f64,
    pub min_eig_l2: f64,
    pub min_eig_h1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    /// Number of sign changes of `min_eig_h1` along the (sorted) scan.
    pub sign_changes: usize,
    /// Consecutive thicknesses enclosing the first sign change.
    pub bracket: Option<(f64, f64)>,
}

impl ScanResult {
    /// Linear interpolation of the first zero crossing inside the bracket.
    pub fn threshold_estimate(&self) -> Option<f64> {
        let (lo, hi) = self.bracket?;
        let a = self.rows.iter().find(|r| r.d == lo)?;
        let b = self.rows.iter().find(|r| r.d == hi)?;
        Some(a.d + (b.d - a.d) * a.min_eig_h1 / (a.min_eig_h1 - b.min_eig_h1))
    }
}

/// Smallest eigenvalues of `∂²J` at flat films of thickness `d` for every `d` in `d_list`.
pub fn flat_scan(grid: &Grid, d_list: &[f64], setup: &ScanSetup) -> Result<ScanResult> {
    let mut ds = d_list.to_vec();
    if ds.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidArgument("scan thicknesses must be positive".into()));
    }
    ds.sort_by(|a, b| a.total_cmp(b));
    let mut rows = Vec::with_capacity(ds.len());
    for d in ds {
        let model = ElasticModel::new(setup.tensor.clone(), setup.e0, setup.layers, 1e-3 * d);
        let film = FilmState::evaluate(&model, grid, HeightField::flat(grid, d), None)?;
        let asm = QuadraticFormAssembly::assemble(&film, setup.sigma, setup.cutoff)?;
        rows.push(ScanRow { d, min_eig_l2: asm.min_eigenvalue(Norm::L2)?, min_eig_h1: asm.min_eigenvalue(Norm::H1)? });
    }
    let mut sign_changes = 0;
    let mut bracket = None;
    for w in rows.windows(2) {
        if (w[0].min_eig_h1 > 0.0) != (w[1].min_eig_h1 > 0.0) {
            sign_changes += 1;
            bracket.get_or_insert((w[0].d, w[1].d));
        }
    }
    Ok(ScanResult { rows, sign_changes, bracket })
}

#[cfg(test)]
mod tests;
