//! Differential geometry of periodic graphs `Γ_h = {(x, h(x))}` over the flat torus.
//!
//! Everything is expressed in the graph chart `x ↦ (x, h(x))`. With `p = ∇h`
//! the pulled-back metric is `g_ij = δ_ij + p_i p_j`, its determinant is
//! `J² = 1 + |p|²` and the inverse is `g^ij = δ_ij − p_i p_j / J²`.
//!
//! Orientation: the normal points up, out of the film. With that choice the
//! mean curvature is `H = −div(∇h / J)`, which is positive at the apex of a
//! concave bump, and the second fundamental form is `B_ij = −∂_ij h / J` so
//! that `H = g^ij B_ij`.
//!
//! Tensors are stored nodewise as fixed `2×2` arrays; in surface dimension
//! one only the `[0][0]` entries are meaningful.

use crate::error::{check_finite, Error, Result};
use crate::spectral::Grid;

pub type Tensor2 = [[f64; 2]; 2];

/// Nodal samples of the film height on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightField {
    values: Vec<f64>,
}

impl HeightField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_field(&values)?;
        check_finite("height field", &values)?;
        Ok(Self { values })
    }

    pub fn flat(grid: &Grid, thickness: f64) -> Self {
        Self { values: vec![thickness; grid.len()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        Self::new(grid, grid.sample(f))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Film mode requires the film to cover the substrate everywhere.
    pub fn check_film(&self, h_min: f64) -> Result<()> {
        let min_h = self.min();
        if min_h <= h_min {
            return Err(Error::DegenerateGeometry { min_h, h_min });
        }
        Ok(())
    }
}

/// Metric data of `Γ_h` at every grid node.
#[derive(Clone, Debug)]
pub struct SurfaceGeometry {
    grid: Grid,
    /// `∇h`
    pub slope: Vec<[f64; 2]>,
    /// `∂_ij h`
    pub hessian: Vec<Tensor2>,
    pub metric: Vec<Tensor2>,
    pub metric_inv: Vec<Tensor2>,
    /// `√det g`, computed from the determinant of `metric`.
    pub sqrt_det: Vec<f64>,
    /// `Γ^k_ij` indexed `[k][i][j]`.
    pub christoffel: Vec<[Tensor2; 2]>,
    /// Covariant components of the second fundamental form.
    pub second_fundamental: Vec<Tensor2>,
    pub mean_curvature: Vec<f64>,
    /// Tangential Jacobian `√(1+|∇h|²)`.
    pub jacobian: Vec<f64>,
}

pub fn compute_geometry(h: &HeightField, grid: &Grid) -> Result<SurfaceGeometry> {
    grid.check_field(h.values())?;
    check_finite("height field", h.values())?;
    let dim = grid.dim();
    let len = grid.len();

    let grad = grid.gradient(h.values());
    let mut slope = vec![[0.0; 2]; len];
    for (a, comp) in grad.iter().enumerate() {
        for (s, v) in slope.iter_mut().zip(comp) {
            s[a] = *v;
        }
    }
    let mut hessian = vec![[[0.0; 2]; 2]; len];
    for a in 0..dim {
        for b in a..dim {
            let hab = grid.derivative(&grad[a], b);
            for (t, v) in hessian.iter_mut().zip(&hab) {
                t[a][b] = *v;
                t[b][a] = *v;
            }
        }
    }

    let mut metric = vec![[[0.0; 2]; 2]; len];
    let mut metric_inv = vec![[[0.0; 2]; 2]; len];
    let mut sqrt_det = vec![0.0; len];
    let mut jacobian = vec![0.0; len];
    let mut christoffel = vec![[[[0.0; 2]; 2]; 2]; len];
    let mut second_fundamental = vec![[[0.0; 2]; 2]; len];
    for i in 0..len {
        let p = slope[i];
        let p2: f64 = p[..dim].iter().map(|v| v * v).sum();
        let jac = (1.0 + p2).sqrt();
        jacobian[i] = jac;
        let g = &mut metric[i];
        for a in 0..dim {
            for b in 0..dim {
                g[a][b] = if a == b { 1.0 } else { 0.0 } + p[a] * p[b];
            }
        }
        let det = if dim == 1 { g[0][0] } else { g[0][0] * g[1][1] - g[0][1] * g[1][0] };
        sqrt_det[i] = det.sqrt();
        let gi = &mut metric_inv[i];
        if dim == 1 {
            gi[0][0] = 1.0 / g[0][0];
        } else {
            gi[0][0] = g[1][1] / det;
            gi[1][1] = g[0][0] / det;
            gi[0][1] = -g[0][1] / det;
            gi[1][0] = -g[1][0] / det;
        }
        let hs = hessian[i];
        for k in 0..dim {
            for a in 0..dim {
                for b in 0..dim {
                    christoffel[i][k][a][b] = p[k] * hs[a][b] / (jac * jac);
                }
            }
        }
        for a in 0..dim {
            for b in 0..dim {
                second_fundamental[i][a][b] = -hs[a][b] / jac;
            }
        }
    }

    // H = −div(∇h/J) in divergence form: the exact variational derivative of
    // the spectral area functional.
    let mut mean_curvature = vec![0.0; len];
    for (a, comp) in grad.iter().enumerate() {
        let flux: Vec<f64> = comp.iter().zip(&jacobian).map(|(p, j)| p / j).collect();
        let d = grid.derivative(&flux, a);
        for (hc, v) in mean_curvature.iter_mut().zip(&d) {
            *hc -= v;
        }
    }

    Ok(SurfaceGeometry {
        grid: grid.clone(),
        slope,
        hessian,
        metric,
        metric_inv,
        sqrt_det,
        christoffel,
        second_fundamental,
        mean_curvature,
        jacobian,
    })
}

impl SurfaceGeometry {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Unit normal in bulk coordinate order `(x_1, [x_2,] x_3)`; unused slots are zero.
    pub fn normal(&self, idx: usize) -> [f64; 3] {
        let p = self.slope[idx];
        let j = self.jacobian[idx];
        match self.dim() {
            1 => [-p[0] / j, 1.0 / j, 0.0],
            _ => [-p[0] / j, -p[1] / j, 1.0 / j],
        }
    }

    /// Coordinate tangent vector `∂_a (x, h(x))` in bulk coordinate order.
    pub fn tangent(&self, idx: usize, a: usize) -> [f64; 3] {
        let p = self.slope[idx];
        match self.dim() {
            1 => [1.0, p[0], 0.0],
            _ => {
                let mut t = [0.0; 3];
                t[a] = 1.0;
                t[2] = p[a];
                t
            }
        }
    }

    /// Contravariant components of the tangential gradient `g^ij ∂_j f`.
    pub fn gradient(&self, f: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.grid.check_field(f)?;
        let dim = self.dim();
        let df = self.grid.gradient(f);
        Ok((0..self.grid.len())
            .map(|i| {
                let gi = self.metric_inv[i];
                let mut out = [0.0; 2];
                for a in 0..dim {
                    for b in 0..dim {
                        out[a] += gi[a][b] * df[b][i];
                    }
                }
                out
            })
            .collect())
    }

    /// `div_g X = (1/√g) ∂_i(√g X^i)` for a tangential field given by contravariant components.
    pub fn divergence(&self, x: &[[f64; 2]]) -> Result<Vec<f64>> {
        if x.len() != self.grid.len() {
            return Err(Error::GridMismatch { expected: self.grid.len(), found: x.len() });
        }
        let mut out = vec![0.0; self.grid.len()];
        for a in 0..self.dim() {
            let flux: Vec<f64> = x.iter().zip(&self.sqrt_det).map(|(v, s)| v[a] * s).collect();
            let d = self.grid.derivative(&flux, a);
            for (o, v) in out.iter_mut().zip(&d) {
                *o += v;
            }
        }
        for (o, s) in out.iter_mut().zip(&self.sqrt_det) {
            *o /= s;
        }
        Ok(out)
    }

    /// `g(X, Y)` for two contravariant fields, nodewise.
    pub fn inner(&self, x: &[[f64; 2]], y: &[[f64; 2]]) -> Vec<f64> {
        let dim = self.dim();
        (0..self.grid.len())
            .map(|i| {
                let g = self.metric[i];
                let mut s = 0.0;
                for a in 0..dim {
                    for b in 0..dim {
                        s += g[a][b] * x[i][a] * y[i][b];
                    }
                }
                s
            })
            .collect()
    }

    /// `|B|²_g = g^ac g^bd B_ab B_cd`.
    pub fn second_fundamental_sq(&self) -> Vec<f64> {
        let dim = self.dim();
        (0..self.grid.len())
            .map(|i| {
                let gi = self.metric_inv[i];
                let b = self.second_fundamental[i];
                let mut s = 0.0;
                for a in 0..dim {
                    for bb in 0..dim {
                        for c in 0..dim {
                            for d in 0..dim {
                                s += gi[a][c] * gi[bb][d] * b[a][bb] * b[c][d];
                            }
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// `B(grad f, grad f)` nodewise, with `grad f` the tangential gradient.
    pub fn second_fundamental_on_gradient(&self, f: &[f64]) -> Result<Vec<f64>> {
        let grad = self.gradient(f)?;
        let dim = self.dim();
        Ok((0..self.grid.len())
            .map(|i| {
                let b = self.second_fundamental[i];
                let mut s = 0.0;
                for a in 0..dim {
                    for c in 0..dim {
                        s += b[a][c] * grad[i][a] * grad[i][c];
                    }
                }
                s
            })
            .collect())
    }

    /// `∫_Γ f dμ = ∫ f J dx`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.jacobian).map(|(v, j)| v * j).sum::<f64>() * self.grid.node_weight()
    }

    /// Area of `Γ_h` over the unit cell.
    pub fn area(&self) -> f64 {
        self.jacobian.iter().sum::<f64>() * self.grid.node_weight()
    }

    /// Mean of `f` with respect to the surface measure.
    pub fn surface_mean(&self, f: &[f64]) -> f64 {
        self.integrate(f) / self.area()
    }

    /// `(∫_Γ f² dμ)^{1/2}`.
    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        self.integrate(&sq).sqrt()
    }
}

/// `Δ_g f = (1/√g) ∂_i(√g g^ij ∂_j f)`.
pub fn laplace_beltrami(f: &[f64], geom: &SurfaceGeometry) -> Result<Vec<f64>> {
    let grad = geom.gradient(f)?;
    geom.divergence(&grad)
}

/// `|∇f|²_g = g^ij ∂_i f ∂_j f`.
pub fn tangential_gradient_squared(f: &[f64], geom: &SurfaceGeometry) -> Result<Vec<f64>> {
    geom.grid.check_field(f)?;
    let dim = geom.dim();
    let df = geom.grid.gradient(f);
    Ok((0..geom.grid.len())
        .map(|i| {
            let gi = geom.metric_inv[i];
            let mut s = 0.0;
            for a in 0..dim {
                for b in 0..dim {
                    s += gi[a][b] * df[a][i] * df[b][i];
                }
            }
            s.max(0.0)
        })
        .collect())
}

/// `∫_Γ f dH`.
pub fn surface_integral(f: &[f64], geom: &SurfaceGeometry) -> Result<f64> {
    geom.grid.check_field(f)?;
    Ok(geom.integrate(f))
}
