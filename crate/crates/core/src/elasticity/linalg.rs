//! Node-blocked sparse matrices and Jacobi-preconditioned conjugate gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse matrix with dense `block × block` entries per node pair.
#[derive(Clone, Debug)]
pub struct BlockCsr {
    block: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl BlockCsr {
    /// Builds an all-zero matrix with the given per-row neighbor lists.
    pub fn from_pattern(block: usize, mut neighbors: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(neighbors.len() + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for row in neighbors.iter_mut() {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        let values = vec![0.0; cols.len() * block * block];
        Self { block, row_ptr, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Number of scalar unknowns.
    pub fn size(&self) -> usize {
        self.rows() * self.block
    }

    fn position(&self, row: usize, col: usize) -> usize {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(k) => range.start + k,
            Err(_) => panic!("entry ({row}, {col}) outside the sparsity pattern"),
        }
    }

    /// Adds `entry(i, k)` into block `(row, col)`.
    pub fn add_block(&mut self, row: usize, col: usize, entry: impl Fn(usize, usize) -> f64) {
        let b = self.block;
        let base = self.position(row, col) * b * b;
        for i in 0..b {
            for k in 0..b {
                self.values[base + i * b + k] += entry(i, k);
            }
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let b = self.block;
        y.par_chunks_mut(b).enumerate().for_each(|(row, out)| {
            out.iter_mut().for_each(|v| *v = 0.0);
            for p in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.cols[p];
                let blk = &self.values[p * b * b..(p + 1) * b * b];
                let xc = &x[col * b..(col + 1) * b];
                for i in 0..b {
                    let mut s = 0.0;
                    for k in 0..b {
                        s += blk[i * b + k] * xc[k];
                    }
                    out[i] += s;
                }
            }
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let b = self.block;
        let mut d = vec![0.0; self.size()];
        for row in 0..self.rows() {
            let p = self.position(row, row);
            for i in 0..b {
                d[row * b + i] = self.values[p * b * b + i * b + i];
            }
        }
        d
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut ay = vec![0.0; self.size()];
        self.matvec(y, &mut ay);
        dot(x, &ay)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgSettings {
    /// Stop when `‖b − Ax‖ ≤ rel_tol · ‖b‖`.
    pub rel_tol: f64,
    /// Iteration cap as a multiple of the unknown count.
    pub max_iter_factor: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_iter_factor: 10 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// True relative residual `‖b − Ax‖ / ‖b‖` at exit.
    pub rel_residual: f64,
}

/// Solves `A x = b` for SPD `A`, starting from the content of `x`.
pub fn pcg(a: &BlockCsr, b: &[f64], x: &mut [f64], settings: &CgSettings) -> Result<CgOutcome> {
    let n = a.size();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome::default());
    }
    let max_iter = settings.max_iter_factor.max(1) * n;
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();

    let mut ax = vec![0.0; n];
    let true_residual = |x: &[f64], ax: &mut Vec<f64>, r: &mut Vec<f64>| {
        a.matvec(x, ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        norm(r) / b_norm
    };
    let mut r = vec![0.0; n];
    let mut rel = true_residual(x, &mut ax, &mut r);
    if rel <= settings.rel_tol {
        return Ok(CgOutcome { iterations: 0, rel_residual: rel });
    }

    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iter {
        a.matvec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        if norm(&r) / b_norm <= settings.rel_tol {
            // Guard against drift of the recursive residual.
            rel = true_residual(x, &mut ax, &mut r);
            if rel <= settings.rel_tol {
                return Ok(CgOutcome { iterations, rel_residual: rel });
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    rel = true_residual(x, &mut ax, &mut r);
    Err(Error::SolverNonConvergence { iterations, residual: rel })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-D Dirichlet Laplacian in 2×2 blocks (two decoupled chains).
    fn chain(rows: usize) -> BlockCsr {
        let neighbors = (0..rows)
            .map(|r| {
                let mut v = vec![r];
                if r > 0 {
                    v.push(r - 1);
                }
                if r + 1 < rows {
                    v.push(r + 1);
                }
                v
            })
            .collect();
        let mut a = BlockCsr::from_pattern(2, neighbors);
        for r in 0..rows {
            a.add_block(r, r, |i, k| if i == k { 2.0 + i as f64 } else { 0.0 });
            if r > 0 {
                a.add_block(r, r - 1, |i, k| if i == k { -1.0 } else { 0.0 });
            }
            if r + 1 < rows {
                a.add_block(r, r + 1, |i, k| if i == k { -1.0 } else { 0.0 });
            }
        }
        a
    }

    #[test]
    fn solves_spd_system() {
        let a = chain(50);
        let exact: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut b = vec![0.0; 100];
        a.matvec(&exact, &mut b);
        let mut x = vec![0.0; 100];
        let out = pcg(&a, &b, &mut x, &CgSettings::default()).unwrap();
        assert!(out.rel_residual <= 1e-10);
        for (u, v) in x.iter().zip(&exact) {
            assert!((u - v).abs() < 1e-7);
        }
        // Warm start from the solution exits immediately.
        let again = pcg(&a, &b, &mut x, &CgSettings::default()).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = chain(4);
        let mut x = vec![1.0; 8];
        pcg(&a, &[0.0; 8], &mut x, &CgSettings::default()).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reports_iteration_cap() {
        let a = chain(40);
        let b = vec![1.0; 80];
        let mut x = vec![0.0; 80];
        let tight = CgSettings { rel_tol: 1e-30, max_iter_factor: 1 };
        assert!(matches!(pcg(&a, &b, &mut x, &tight), Err(Error::SolverNonConvergence { .. })));
    }
}
