//! Periodic grids on the unit torus and Fourier pseudo-spectral kernels.
//!
//! Fields are stored as flat `Vec<f64>` in row-major order: in two
//! dimensions the sample at `(i1, i2)` lives at `i1 * n + i2`, so axis 0 is
//! the slow index. All derivative kernels zero the Nyquist mode, which makes
//! every first-derivative operator exactly skew-adjoint on the grid.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// A uniform periodic grid over the unit cell `[0,1)^dim`, `dim` in {1, 2}.
#[derive(Clone)]
pub struct Grid {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("dim", &self.dim).field("n", &self.n).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("surface dimension must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n must be even and >= 8, got {n}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            dim,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per periodic direction.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Quadrature weight of a single node (the cell has unit measure).
    pub fn node_weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// The grid used for 3/2-rule dealiased products: `ceil(3n/2)` rounded up to even.
    pub fn dealiased(&self) -> Grid {
        let m = (3 * self.n).div_ceil(2);
        let m = m + m % 2;
        Grid::new(self.dim, m).expect("padded grid is valid")
    }

    /// Integer multi-index of node `idx`.
    pub fn node_index(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.n, idx % self.n],
        }
    }

    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let [a, b] = self.node_index(idx);
        [a as f64 * self.spacing(), b as f64 * self.spacing()]
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.coords(i))).collect()
    }

    /// Signed integer frequency of FFT bin `j` (Nyquist reported as `+n/2`).
    pub fn frequency(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    fn is_nyquist_bin(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// Frequency vector of the flat spectral index `idx`.
    pub fn wavevector(&self, idx: usize) -> [i64; 2] {
        let [a, b] = self.node_index(idx);
        match self.dim {
            1 => [self.frequency(a), 0],
            _ => [self.frequency(a), self.frequency(b)],
        }
    }

    /// True when any component of the spectral index sits on a Nyquist bin.
    pub fn touches_nyquist(&self, idx: usize) -> bool {
        let [a, b] = self.node_index(idx);
        self.is_nyquist_bin(a) || (self.dim == 2 && self.is_nyquist_bin(b))
    }

    /// Angular wavevector `2πk` with Nyquist components set to zero.
    pub fn angular_wavevector(&self, idx: usize) -> [f64; 2] {
        let [a, b] = self.node_index(idx);
        let comp = |j: usize| {
            if self.is_nyquist_bin(j) {
                0.0
            } else {
                2.0 * PI * self.frequency(j) as f64
            }
        };
        match self.dim {
            1 => [comp(a), 0.0],
            _ => [comp(a), comp(b)],
        }
    }

    /// `|2πk|^2` with the Nyquist convention of the derivative kernels.
    pub fn wavenumber_sq(&self, idx: usize) -> f64 {
        let [a, b] = self.angular_wavevector(idx);
        a * a + b * b
    }

    pub fn check_field(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::GridMismatch { expected: self.len(), found: f.len() });
        }
        Ok(())
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        plan.process(data);
        if self.dim == 2 {
            let mut col = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    col[j * n + i] = data[i * n + j];
                }
            }
            plan.process(&mut col);
            for i in 0..n {
                for j in 0..n {
                    data[i * n + j] = col[j * n + i];
                }
            }
        }
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(f.len(), self.len());
        let mut data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform, normalized, returning the real part.
    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(spec.len(), self.len());
        let mut data = spec.to_vec();
        self.transform(&mut data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }

    /// Multiplies the spectrum of `f` by `symbol(idx)` and transforms back.
    pub fn apply_symbol(&self, f: &[f64], symbol: impl Fn(usize) -> Complex64) -> Vec<f64> {
        let mut spec = self.forward(f);
        for (idx, c) in spec.iter_mut().enumerate() {
            *c *= symbol(idx);
        }
        self.inverse(&spec)
    }

    /// Spectral first derivative along `axis`.
    pub fn derivative(&self, f: &[f64], axis: usize) -> Vec<f64> {
        assert!(axis < self.dim, "axis {axis} out of range");
        self.apply_symbol(f, |idx| Complex64::new(0.0, self.angular_wavevector(idx)[axis]))
    }

    pub fn gradient(&self, f: &[f64]) -> Vec<Vec<f64>> {
        let spec = self.forward(f);
        (0..self.dim)
            .map(|axis| {
                let d: Vec<Complex64> = spec
                    .iter()
                    .enumerate()
                    .map(|(idx, c)| c * Complex64::new(0.0, self.angular_wavevector(idx)[axis]))
                    .collect();
                self.inverse(&d)
            })
            .collect()
    }

    /// Flat Laplacian, consistent with composing two [`Grid::derivative`] calls.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.apply_symbol(f, |idx| Complex64::new(-self.wavenumber_sq(idx), 0.0))
    }

    /// Flat bilaplacian `Δ²`.
    pub fn bilaplacian(&self, f: &[f64]) -> Vec<f64> {
        self.apply_symbol(f, |idx| {
            let k2 = self.wavenumber_sq(idx);
            Complex64::new(k2 * k2, 0.0)
        })
    }

    /// `∫ f dx` over the unit cell (exact for band-limited integrands).
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.node_weight()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        self.integrate(f)
    }

    /// Flat `L²` norm over the cell.
    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        (f.iter().map(|v| v * v).sum::<f64>() * self.node_weight()).sqrt()
    }

    /// Removes the Nyquist content of `f`.
    pub fn remove_nyquist(&self, f: &[f64]) -> Vec<f64> {
        self.apply_symbol(f, |idx| {
            if self.touches_nyquist(idx) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
    }

    /// Spectral interpolation (zero padding) or truncation of `f` onto `target`.
    ///
    /// Nyquist content of the source is discarded in both directions.
    pub fn resample(&self, f: &[f64], target: &Grid) -> Vec<f64> {
        assert_eq!(self.dim, target.dim, "resample across dimensions");
        if target.n == self.n {
            return f.to_vec();
        }
        let spec = self.forward(f);
        let mut out = vec![Complex64::new(0.0, 0.0); target.len()];
        let scale = target.len() as f64 / self.len() as f64;
        let limit = (self.n.min(target.n) / 2) as i64;
        let bin = |k: i64, n: usize| -> usize {
            if k >= 0 {
                k as usize
            } else {
                (k + n as i64) as usize
            }
        };
        for (idx, c) in spec.iter().enumerate() {
            let k = self.wavevector(idx);
            let keep = |kk: i64| kk.abs() < limit;
            match self.dim {
                1 => {
                    if keep(k[0]) {
                        out[bin(k[0], target.n)] = c * scale;
                    }
                }
                _ => {
                    if keep(k[0]) && keep(k[1]) {
                        out[bin(k[0], target.n) * target.n + bin(k[1], target.n)] = c * scale;
                    }
                }
            }
        }
        target.inverse(&out)
    }

    /// Cyclic shift of a nodal field by whole grid cells.
    pub fn roll(&self, f: &[f64], shift: [usize; 2]) -> Vec<f64> {
        let n = self.n;
        (0..self.len())
            .map(|idx| {
                let [a, b] = self.node_index(idx);
                let a = (a + n - shift[0] % n) % n;
                match self.dim {
                    1 => f[a],
                    _ => f[a * n + (b + n - shift[1] % n) % n],
                }
            })
            .collect()
    }
}
