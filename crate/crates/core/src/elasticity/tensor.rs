use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Small dense matrix in bulk coordinates `(x_1, [x_2,] x_3)`; the upper-left
/// `dim × dim` block is used.
pub type Mat3 = [[f64; 3]; 3];

/// Elasticity tensor acting on (the symmetric part of) displacement gradients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ElasticTensor {
    /// `ℂA = λ tr(A) I + 2μ sym(A)`; plane strain in two bulk dimensions.
    Isotropic { lambda: f64, mu: f64 },
    /// Fourth-order array `C_ijkl` stored at `((i*dim + j)*dim + k)*dim + l`.
    General { dim: usize, entries: Vec<f64> },
}

impl ElasticTensor {
    pub fn isotropic(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0 && mu > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Lamé moduli must be positive, got lambda={lambda}, mu={mu}"
            )));
        }
        Ok(Self::Isotropic { lambda, mu })
    }

    /// Validates minor and major symmetries and positivity on symmetric matrices.
    pub fn general(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument(format!("bulk dimension must be 2 or 3, got {dim}")));
        }
        if entries.len() != dim.pow(4) {
            return Err(Error::InvalidArgument(format!(
                "expected {} tensor entries, got {}",
                dim.pow(4),
                entries.len()
            )));
        }
        let at = |i: usize, j: usize, k: usize, l: usize| entries[((i * dim + j) * dim + k) * dim + l];
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        let c = at(i, j, k, l);
                        let tol = 1e-12 * (1.0 + c.abs());
                        if (c - at(j, i, k, l)).abs() > tol
                            || (c - at(i, j, l, k)).abs() > tol
                            || (c - at(k, l, i, j)).abs() > tol
                        {
                            return Err(Error::InvalidArgument(format!(
                                "tensor lacks symmetry at ({i},{j},{k},{l})"
                            )));
                        }
                    }
                }
            }
        }
        // Positivity: the Voigt-style matrix on symmetric basis elements must be SPD.
        let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
        let basis = |(i, j): (usize, usize)| {
            let mut a = [[0.0; 3]; 3];
            a[i][j] = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
            a[j][i] = a[i][j];
            a
        };
        let tensor = Self::General { dim, entries };
        let m = nalgebra::DMatrix::from_fn(pairs.len(), pairs.len(), |r, c| {
            contract(&tensor.apply(&basis(pairs[r]), dim), &basis(pairs[c]), dim)
        });
        if nalgebra::Cholesky::new(m).is_none() {
            return Err(Error::InvalidArgument("tensor is not positive on symmetric matrices".into()));
        }
        Ok(tensor)
    }

    /// `ℂ sym(A)`.
    pub fn apply(&self, a: &Mat3, dim: usize) -> Mat3 {
        let mut e = [[0.0; 3]; 3];
        for i in 0..dim {
            for j in 0..dim {
                e[i][j] = 0.5 * (a[i][j] + a[j][i]);
            }
        }
        let mut out = [[0.0; 3]; 3];
        match self {
            Self::Isotropic { lambda, mu } => {
                let tr: f64 = (0..dim).map(|i| e[i][i]).sum();
                for i in 0..dim {
                    for j in 0..dim {
                        out[i][j] = 2.0 * mu * e[i][j];
                    }
                    out[i][i] += lambda * tr;
                }
            }
            Self::General { dim: d, entries } => {
                assert_eq!(*d, dim, "general tensor built for a different bulk dimension");
                for i in 0..dim {
                    for j in 0..dim {
                        let mut s = 0.0;
                        for k in 0..dim {
                            for l in 0..dim {
                                s += entries[((i * dim + j) * dim + k) * dim + l] * e[k][l];
                            }
                        }
                        out[i][j] = s;
                    }
                }
            }
        }
        out
    }

    /// Elastic energy density `Q(A) = ½ ℂA : A`.
    pub fn energy_density(&self, a: &Mat3, dim: usize) -> f64 {
        0.5 * contract(&self.apply(a, dim), a, dim)
    }

    /// Bulk dimension the tensor is restricted to, if fixed.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            Self::Isotropic { .. } => None,
            Self::General { dim, .. } => Some(*dim),
        }
    }
}

/// `A : B` over the leading `dim × dim` block.
pub fn contract(a: &Mat3, b: &Mat3, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += a[i][j] * b[i][j];
        }
    }
    s
}
