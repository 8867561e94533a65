//! The film `Ω_h` as the image of a fixed tensor strip under `(x, s) ↦ (x, s·h(x))`.
//!
//! Nodes sit on the surface grid laterally and on `m + 1` uniform levels
//! `s_j = j/m` vertically. Level 0 is the substrate, where the fluctuation is
//! clamped, so only levels `1..=m` carry unknowns. Elements are isoparametric
//! multilinear bricks (quadrilaterals when the surface is a curve).

use super::linalg::BlockCsr;
use super::tensor::{ElasticTensor, Mat3};

pub(crate) const GAUSS: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

#[derive(Clone, Debug)]
pub struct StripMesh {
    surface_dim: usize,
    n: usize,
    layers: usize,
    heights: Vec<f64>,
}

/// One corner of a bulk element.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Corner {
    pub surface: usize,
    pub level: usize,
    /// Reference coordinates in `{−1, 1}^dim`, vertical last.
    pub reference: [f64; 3],
    /// Physical position (laterally unwrapped).
    pub position: [f64; 3],
}

/// Shape-function data at one point of an element.
pub(crate) struct PointData {
    /// Physical gradients `∂N_a/∂x_k`, `[a][k]`.
    pub grad: Vec<[f64; 3]>,
    pub det: f64,
}

impl StripMesh {
    pub fn new(surface_dim: usize, n: usize, layers: usize, heights: Vec<f64>) -> Self {
        assert_eq!(heights.len(), n.pow(surface_dim as u32));
        assert!(layers >= 3, "the strip needs at least three layers");
        Self { surface_dim, n, layers, heights }
    }

    pub fn surface_dim(&self) -> usize {
        self.surface_dim
    }

    pub fn bulk_dim(&self) -> usize {
        self.surface_dim + 1
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn surface_nodes(&self) -> usize {
        self.heights.len()
    }

    pub fn free_nodes(&self) -> usize {
        self.surface_nodes() * self.layers
    }

    pub fn unknowns(&self) -> usize {
        self.free_nodes() * self.bulk_dim()
    }

    pub fn corners_per_element(&self) -> usize {
        1 << self.bulk_dim()
    }

    /// Row of node `(surface, level)` in the unknown vector; `None` on the substrate.
    pub fn node_id(&self, surface: usize, level: usize) -> Option<usize> {
        (level > 0).then(|| surface * self.layers + level - 1)
    }

    fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n as isize) as usize
    }

    fn surface_index(&self, i: [isize; 2]) -> usize {
        match self.surface_dim {
            1 => self.wrap(i[0]),
            _ => self.wrap(i[0]) * self.n + self.wrap(i[1]),
        }
    }

    fn surface_coords(&self, s: usize) -> [usize; 2] {
        match self.surface_dim {
            1 => [s, 0],
            _ => [s / self.n, s % self.n],
        }
    }

    /// Surface nodes at the corners of surface cell `cell`, in the bit order
    /// used for element corners (bit 0 → axis 0, bit 1 → axis 1).
    pub(crate) fn cell_corners(&self, cell: usize) -> Vec<(usize, [usize; 2])> {
        let [i0, i1] = self.surface_coords(cell);
        (0..(1usize << self.surface_dim))
            .map(|bits| {
                let off = [bits & 1, (bits >> 1) & 1];
                let idx = self.surface_index([(i0 + off[0]) as isize, (i1 + off[1]) as isize]);
                (idx, [i0 + off[0], i1 + off[1]])
            })
            .collect()
    }

    /// Surface cells touching surface node `s`.
    pub(crate) fn cells_around(&self, s: usize) -> Vec<usize> {
        let [i0, i1] = self.surface_coords(s);
        let (i0, i1) = (i0 as isize, i1 as isize);
        match self.surface_dim {
            1 => vec![self.surface_index([i0 - 1, 0]), self.surface_index([i0, 0])],
            _ => vec![
                self.surface_index([i0 - 1, i1 - 1]),
                self.surface_index([i0, i1 - 1]),
                self.surface_index([i0 - 1, i1]),
                self.surface_index([i0, i1]),
            ],
        }
    }

    pub(crate) fn corners(&self, cell: usize, layer: usize) -> Vec<Corner> {
        let h = 1.0 / self.n as f64;
        let ds = 1.0 / self.layers as f64;
        let surf = self.cell_corners(cell);
        let vertical_bit = self.surface_dim;
        (0..self.corners_per_element())
            .map(|bits| {
                let (s, lattice) = surf[bits & ((1 << self.surface_dim) - 1)];
                let up = (bits >> vertical_bit) & 1;
                let level = layer + up;
                let mut reference = [0.0; 3];
                let mut position = [0.0; 3];
                for a in 0..self.surface_dim {
                    reference[a] = if (bits >> a) & 1 == 1 { 1.0 } else { -1.0 };
                    position[a] = lattice[a] as f64 * h;
                }
                reference[vertical_bit] = if up == 1 { 1.0 } else { -1.0 };
                position[vertical_bit] = level as f64 * ds * self.heights[s];
                Corner { surface: s, level, reference, position }
            })
            .collect()
    }

    /// Neighbor lists of the free nodes for the stiffness pattern.
    pub(crate) fn pattern(&self) -> Vec<Vec<usize>> {
        let mut rows = vec![Vec::new(); self.free_nodes()];
        for s in 0..self.surface_nodes() {
            let mut lateral = Vec::new();
            for cell in self.cells_around(s) {
                lateral.extend(self.cell_corners(cell).into_iter().map(|(t, _)| t));
            }
            lateral.sort_unstable();
            lateral.dedup();
            for level in 1..=self.layers {
                let row = self.node_id(s, level).unwrap();
                for &t in &lateral {
                    for l in level.saturating_sub(1)..=(level + 1).min(self.layers) {
                        if let Some(col) = self.node_id(t, l) {
                            rows[row].push(col);
                        }
                    }
                }
            }
        }
        rows
    }

    /// Physical shape-function gradients and Jacobian determinant at reference point `xi`.
    pub(crate) fn point_data(&self, corners: &[Corner], xi: [f64; 3]) -> PointData {
        let d = self.bulk_dim();
        let mut ref_grad = Vec::with_capacity(corners.len());
        for c in corners {
            let factors: Vec<f64> = (0..d).map(|k| 0.5 * (1.0 + c.reference[k] * xi[k])).collect();
            let mut g = [0.0; 3];
            for k in 0..d {
                let mut v = 0.5 * c.reference[k];
                for (l, f) in factors.iter().enumerate() {
                    if l != k {
                        v *= f;
                    }
                }
                g[k] = v;
            }
            ref_grad.push(g);
        }
        // jac[k][l] = ∂x_k/∂ξ_l
        let mut jac = [[0.0; 3]; 3];
        for (c, g) in corners.iter().zip(&ref_grad) {
            for k in 0..d {
                for l in 0..d {
                    jac[k][l] += c.position[k] * g[l];
                }
            }
        }
        let (det, inv) = invert(&jac, d);
        let grad = ref_grad
            .iter()
            .map(|g| {
                let mut out = [0.0; 3];
                for k in 0..d {
                    for l in 0..d {
                        out[k] += g[l] * inv[l][k];
                    }
                }
                out
            })
            .collect();
        PointData { grad, det }
    }

    /// Tensor-product Gauss points of the reference brick with unit weights.
    pub(crate) fn gauss_points(&self) -> Vec<[f64; 3]> {
        let d = self.bulk_dim();
        (0..(1usize << d))
            .map(|bits| {
                let mut xi = [0.0; 3];
                for (k, v) in xi.iter_mut().enumerate().take(d) {
                    *v = GAUSS[(bits >> k) & 1];
                }
                xi
            })
            .collect()
    }

    /// Assembles the stiffness matrix, the load from the affine mismatch
    /// strain `e0`, and the quadrature volume of the film.
    pub(crate) fn assemble(&self, tensor: &ElasticTensor, e0: f64) -> (BlockCsr, Vec<f64>, f64) {
        let d = self.bulk_dim();
        let mut k = BlockCsr::from_pattern(d, self.pattern());
        let mut load = vec![0.0; self.unknowns()];
        let mut volume = 0.0;
        let stress0 = tensor.apply(&mismatch_strain(e0, d), d);
        let gauss = self.gauss_points();
        let nc = self.corners_per_element();
        for cell in 0..self.surface_nodes() {
            for layer in 0..self.layers {
                let corners = self.corners(cell, layer);
                let mut ke = vec![[[0.0; 3]; 3]; nc * nc];
                let mut fe = vec![[0.0; 3]; nc];
                for xi in &gauss {
                    let pd = self.point_data(&corners, *xi);
                    volume += pd.det;
                    for b in 0..nc {
                        for kk in 0..d {
                            let mut grad_b = [[0.0; 3]; 3];
                            grad_b[kk] = pd.grad[b];
                            let s = tensor.apply(&grad_b, d);
                            for a in 0..nc {
                                let ga = pd.grad[a];
                                let blk = &mut ke[a * nc + b];
                                for i in 0..d {
                                    let mut v = 0.0;
                                    for j in 0..d {
                                        v += s[i][j] * ga[j];
                                    }
                                    blk[i][kk] += v * pd.det;
                                }
                            }
                        }
                    }
                    for a in 0..nc {
                        for i in 0..d {
                            let mut v = 0.0;
                            for j in 0..d {
                                v += stress0[i][j] * pd.grad[a][j];
                            }
                            fe[a][i] -= v * pd.det;
                        }
                    }
                }
                for a in 0..nc {
                    let Some(ra) = self.node_id(corners[a].surface, corners[a].level) else { continue };
                    for i in 0..d {
                        load[ra * d + i] += fe[a][i];
                    }
                    for b in 0..nc {
                        let Some(cb) = self.node_id(corners[b].surface, corners[b].level) else { continue };
                        let blk = ke[a * nc + b];
                        k.add_block(ra, cb, |i, kk| blk[i][kk]);
                    }
                }
            }
        }
        (k, load, volume)
    }

    /// Gradient of the fluctuation `ũ` at reference point `xi` of an element.
    pub(crate) fn fluctuation_gradient(&self, corners: &[Corner], xi: [f64; 3], fluct: &[f64]) -> Mat3 {
        let d = self.bulk_dim();
        let pd = self.point_data(corners, xi);
        let mut g = [[0.0; 3]; 3];
        for (c, grad) in corners.iter().zip(&pd.grad) {
            if let Some(id) = self.node_id(c.surface, c.level) {
                for i in 0..d {
                    for k in 0..d {
                        g[i][k] += fluct[id * d + i] * grad[k];
                    }
                }
            }
        }
        g
    }
}

/// `E_0 = e0 · diag(1, …, 1, 0)`: the strain of the affine lift `e0·(x, 0)`.
pub fn mismatch_strain(e0: f64, bulk_dim: usize) -> Mat3 {
    let mut e = [[0.0; 3]; 3];
    for (i, row) in e.iter_mut().enumerate().take(bulk_dim - 1) {
        row[i] = e0;
    }
    e
}

fn invert(m: &Mat3, d: usize) -> (f64, Mat3) {
    let mut inv = [[0.0; 3]; 3];
    if d == 2 {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        inv[0][0] = m[1][1] / det;
        inv[1][1] = m[0][0] / det;
        inv[0][1] = -m[0][1] / det;
        inv[1][0] = -m[1][0] / det;
        (det, inv)
    } else {
        let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
        let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
        let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
        let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
        inv[0][0] = c00 / det;
        inv[1][0] = c01 / det;
        inv[2][0] = c02 / det;
        inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
        inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
        inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
        inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
        inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
        inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
        (det, inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_volume_of_flat_strip() {
        for sd in [1, 2] {
            let n = 8;
            let mesh = StripMesh::new(sd, n, 4, vec![0.3; n.pow(sd as u32)]);
            let t = ElasticTensor::isotropic(1.0, 1.0).unwrap();
            let (_, _, vol) = mesh.assemble(&t, 0.1);
            assert!((vol - 0.3).abs() < 1e-13);
        }
    }

    #[test]
    fn shape_gradients_reproduce_linear_fields() {
        let mesh = StripMesh::new(2, 8, 3, (0..64).map(|i| 0.5 + 0.01 * i as f64).collect());
        let corners = mesh.corners(9, 1);
        let pd = mesh.point_data(&corners, [0.2, -0.4, 0.7]);
        // f(x) = 2x_1 − x_2 + 3x_3 has gradient (2, −1, 3) on any isoparametric brick.
        let mut g = [0.0; 3];
        for (c, gr) in corners.iter().zip(&pd.grad) {
            let f = 2.0 * c.position[0] - c.position[1] + 3.0 * c.position[2];
            for k in 0..3 {
                g[k] += f * gr[k];
            }
        }
        assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 1.0).abs() < 1e-12 && (g[2] - 3.0).abs() < 1e-12);
        // Constants have zero gradient.
        for k in 0..3 {
            assert!(pd.grad.iter().map(|g| g[k]).sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn stiffness_is_symmetric() {
        let mesh = StripMesh::new(1, 8, 3, (0..8).map(|i| 0.4 + 0.05 * (i as f64).sin()).collect());
        let t = ElasticTensor::isotropic(1.5, 0.8).unwrap();
        let (k, _, _) = mesh.assemble(&t, 0.2);
        let n = k.size();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.91).cos()).collect();
        assert!((k.bilinear(&x, &y) - k.bilinear(&y, &x)).abs() < 1e-10);
        assert!(k.bilinear(&x, &x) > 0.0);
    }
}
