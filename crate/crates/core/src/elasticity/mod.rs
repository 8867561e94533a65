//! Linear-elastic equilibrium of the film `Ω_h` on a rigid substrate.
//!
//! The displacement is split as `u = e0·(x, 0) + ũ`. The affine lift carries
//! the mismatch; the fluctuation `ũ` is laterally periodic, vanishes on the
//! substrate, and leaves the film surface traction free through the natural
//! boundary condition of the weak form
//!
//! ```text
//! ∫ ℂE(ũ) : E(φ) dx = −∫ ℂE_0 : E(φ) dx      for all admissible φ.
//! ```
//!
//! Surface traces (`Q(E(u))`, its normal derivative and the surface stress)
//! are recovered from element-centroid gradients of the top three layers by
//! quadratic extrapolation along the mapped vertical lines.

mod linalg;
mod mesh;
mod tensor;

pub use linalg::{dot, pcg, BlockCsr, CgOutcome, CgSettings};
pub use mesh::{mismatch_strain, StripMesh};
pub use tensor::{contract, ElasticTensor, Mat3};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HeightField, SurfaceGeometry};
use crate::spectral::Grid;
use mesh::GAUSS;

/// Material and discretization parameters of the elastic subproblem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticModel {
    pub tensor: ElasticTensor,
    /// Mismatch strain imposed at the substrate.
    pub e0: f64,
    /// Element layers across the film thickness.
    pub layers: usize,
    /// Heights at or below this value are rejected.
    pub h_min: f64,
    #[serde(default)]
    pub cg: CgSettings,
}

impl ElasticModel {
    pub fn new(tensor: ElasticTensor, e0: f64, layers: usize, h_min: f64) -> Self {
        Self { tensor, e0, layers, h_min, cg: CgSettings::default() }
    }

    /// Isotropic film with `h_min = 1e-3·d`.
    pub fn isotropic(lambda: f64, mu: f64, e0: f64, layers: usize, thickness: f64) -> Result<Self> {
        Ok(Self::new(ElasticTensor::isotropic(lambda, mu)?, e0, layers, 1e-3 * thickness))
    }

    /// Energy density `Q*` of the flat-film affine solution.
    pub fn flat_energy_density(&self, bulk_dim: usize) -> f64 {
        let strain = self.flat_strain(bulk_dim);
        self.tensor.energy_density(&strain, bulk_dim)
    }

    /// Strain of the flat-film solution; the vertical component follows from `σ_33 = 0`.
    pub fn flat_strain(&self, bulk_dim: usize) -> Mat3 {
        let mut e = mismatch_strain(self.e0, bulk_dim);
        let v = bulk_dim - 1;
        let mut unit = [[0.0; 3]; 3];
        unit[v][v] = 1.0;
        let s0 = self.tensor.apply(&e, bulk_dim)[v][v];
        let s1 = self.tensor.apply(&unit, bulk_dim)[v][v];
        e[v][v] = -s0 / s1;
        e
    }
}

/// Whether a displacement carries the affine mismatch lift.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DisplacementKind {
    Equilibrium,
    /// Solution of the linearized problem; homogeneous on the substrate.
    Linearized,
}

/// Displacement on the strip: affine lift plus nodal fluctuation.
#[derive(Clone, Debug)]
pub struct BulkDisplacement {
    pub kind: DisplacementKind,
    pub e0: f64,
    /// Fluctuation `ũ` at the free nodes, node-major.
    pub fluctuation: Vec<f64>,
    pub solve: CgOutcome,
}

/// Boundary quantities of an equilibrium on `Γ_h`, sampled at the surface grid nodes.
#[derive(Clone, Debug)]
pub struct ElasticTrace {
    /// `Q(E(u))` on the film surface.
    pub q: Vec<f64>,
    /// `∂_ν Q(E(u))` along the upward unit normal.
    pub dq_dn: Vec<f64>,
    /// `ℂE(u)` on the film surface.
    pub stress: Vec<Mat3>,
    pub strain: Vec<Mat3>,
    /// `|ℂE(u)[ν]|` nodewise.
    pub traction: Vec<f64>,
}

/// Assembled elastic problem for one film profile.
#[derive(Clone, Debug)]
pub struct ElasticSystem {
    model: ElasticModel,
    grid: Grid,
    mesh: StripMesh,
    stiffness: BlockCsr,
    load: Vec<f64>,
    volume: f64,
}

impl ElasticSystem {
    pub fn assemble(model: &ElasticModel, grid: &Grid, h: &HeightField) -> Result<Self> {
        grid.check_field(h.values())?;
        h.check_film(model.h_min)?;
        if model.layers < 3 {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 element layers, got {}",
                model.layers
            )));
        }
        let bulk_dim = grid.dim() + 1;
        if let Some(d) = model.tensor.fixed_dim() {
            if d != bulk_dim {
                return Err(Error::InvalidArgument(format!(
                    "elastic tensor is {d}-dimensional but the bulk is {bulk_dim}-dimensional"
                )));
            }
        }
        let mesh = StripMesh::new(grid.dim(), grid.n(), model.layers, h.values().to_vec());
        let (stiffness, load, volume) = mesh.assemble(&model.tensor, model.e0);
        Ok(Self { model: model.clone(), grid: grid.clone(), mesh, stiffness, load, volume })
    }

    pub fn model(&self) -> &ElasticModel {
        &self.model
    }

    pub fn mesh(&self) -> &StripMesh {
        &self.mesh
    }

    pub fn stiffness(&self) -> &BlockCsr {
        &self.stiffness
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Quadrature volume of `Ω_h`.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    fn bulk_dim(&self) -> usize {
        self.mesh.bulk_dim()
    }

    /// Solves the equilibrium, optionally warm-started from a previous fluctuation.
    pub fn solve_equilibrium(&self, warm: Option<&BulkDisplacement>) -> Result<BulkDisplacement> {
        let mut x = match warm {
            Some(w) if w.fluctuation.len() == self.load.len() && w.e0 == self.model.e0 => w.fluctuation.clone(),
            _ => vec![0.0; self.load.len()],
        };
        let solve = pcg(&self.stiffness, &self.load, &mut x, &self.model.cg)?;
        Ok(BulkDisplacement { kind: DisplacementKind::Equilibrium, e0: self.model.e0, fluctuation: x, solve })
    }

    /// Relative residual `‖f − Kũ‖/‖f‖` of the discrete weak form.
    pub fn residual(&self, u: &BulkDisplacement) -> f64 {
        let mut ku = vec![0.0; self.load.len()];
        self.stiffness.matvec(&u.fluctuation, &mut ku);
        let rhs: Vec<f64> = match u.kind {
            DisplacementKind::Equilibrium => self.load.clone(),
            DisplacementKind::Linearized => vec![0.0; self.load.len()],
        };
        let r: f64 = rhs.iter().zip(&ku).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale = linalg::norm(&rhs);
        if scale == 0.0 {
            r
        } else {
            r / scale
        }
    }

    /// `∫_{Ω_h} Q(E(u)) dx` including the affine lift of equilibrium displacements.
    pub fn bulk_energy(&self, u: &BulkDisplacement) -> f64 {
        self.energy_of_fluctuation(&u.fluctuation, u.kind)
    }

    /// Energy of an arbitrary admissible fluctuation; not required to be an equilibrium.
    pub fn energy_of_fluctuation(&self, fluct: &[f64], kind: DisplacementKind) -> f64 {
        let quad = 0.5 * self.stiffness.bilinear(fluct, fluct);
        match kind {
            DisplacementKind::Linearized => quad,
            DisplacementKind::Equilibrium => {
                let d = self.bulk_dim();
                let q0 = self.model.tensor.energy_density(&mismatch_strain(self.model.e0, d), d);
                q0 * self.volume - dot(&self.load, fluct) + quad
            }
        }
    }

    /// `∫ ℂE(u_a) : E(u_b) dx` for two fluctuations (affine lifts excluded).
    pub fn pairing(&self, a: &BulkDisplacement, b: &BulkDisplacement) -> f64 {
        self.stiffness.bilinear(&a.fluctuation, &b.fluctuation)
    }

    /// Total displacement at mesh node `(surface, level)`.
    pub fn nodal_displacement(&self, u: &BulkDisplacement, surface: usize, level: usize) -> [f64; 3] {
        let d = self.bulk_dim();
        let mut out = [0.0; 3];
        if u.kind == DisplacementKind::Equilibrium {
            let x = self.grid.coords(surface);
            for (a, o) in out.iter_mut().enumerate().take(d - 1) {
                *o = u.e0 * x[a];
            }
        }
        if let Some(id) = self.mesh.node_id(surface, level) {
            for (i, o) in out.iter_mut().enumerate().take(d) {
                *o += u.fluctuation[id * d + i];
            }
        }
        out
    }

    /// Total strain at the centroid of every element of a layer (0 = substrate layer).
    fn layer_centroid_strain(&self, u: &BulkDisplacement, layer: usize) -> Vec<Mat3> {
        let d = self.bulk_dim();
        let base = match u.kind {
            DisplacementKind::Equilibrium => mismatch_strain(u.e0, d),
            DisplacementKind::Linearized => [[0.0; 3]; 3],
        };
        (0..self.mesh.surface_nodes())
            .map(|cell| {
                let corners = self.mesh.corners(cell, layer);
                let g = self.mesh.fluctuation_gradient(&corners, [0.0; 3], &u.fluctuation);
                let mut e = base;
                for i in 0..d {
                    for k in 0..d {
                        e[i][k] += 0.5 * (g[i][k] + g[k][i]);
                    }
                }
                e
            })
            .collect()
    }

    /// Strain along the top three centroid levels, averaged onto surface nodes.
    fn top_strain_levels(&self, u: &BulkDisplacement) -> [Vec<Mat3>; 3] {
        let m = self.mesh.layers();
        let d = self.bulk_dim();
        let level = |l: usize| {
            let cells = self.layer_centroid_strain(u, m - 1 - l);
            (0..self.mesh.surface_nodes())
                .map(|s| {
                    let around = self.mesh.cells_around(s);
                    let w = 1.0 / around.len() as f64;
                    let mut e = [[0.0; 3]; 3];
                    for c in around {
                        for i in 0..d {
                            for k in 0..d {
                                e[i][k] += w * cells[c][i][k];
                            }
                        }
                    }
                    e
                })
                .collect::<Vec<Mat3>>()
        };
        [level(0), level(1), level(2)]
    }

    /// Surface traces `Q(E(u))`, `∂_ν Q`, stress and traction residual.
    pub fn boundary_traces(&self, u: &BulkDisplacement, geom: &SurfaceGeometry) -> Result<ElasticTrace> {
        self.check_geometry(geom)?;
        let d = self.bulk_dim();
        let ds = 1.0 / self.mesh.layers() as f64;
        let levels = self.top_strain_levels(u);
        let len = self.mesh.surface_nodes();
        // Centroids sit at depths 0.5, 1.5, 2.5 layers below the surface.
        const EXTRAP: [f64; 3] = [1.875, -1.25, 0.375];
        const SLOPE: [f64; 3] = [2.0, -3.0, 1.0];

        let mut strain = vec![[[0.0; 3]; 3]; len];
        let mut stress = vec![[[0.0; 3]; 3]; len];
        let mut q = vec![0.0; len];
        let mut dq_ds = vec![0.0; len];
        for s in 0..len {
            let e = &mut strain[s];
            for (l, w) in EXTRAP.iter().enumerate() {
                for i in 0..d {
                    for k in 0..d {
                        e[i][k] += w * levels[l][s][i][k];
                    }
                }
            }
            stress[s] = self.model.tensor.apply(e, d);
            q[s] = 0.5 * contract(&stress[s], e, d);
            dq_ds[s] = SLOPE
                .iter()
                .enumerate()
                .map(|(l, w)| w * self.model.tensor.energy_density(&levels[l][s], d))
                .sum::<f64>()
                / ds;
        }

        // Chain rule from the mapped vertical line to the unit normal.
        let h = self.mesh.heights();
        let dq_dx = self.grid.gradient(&q);
        let mut dq_dn = vec![0.0; len];
        let mut traction = vec![0.0; len];
        for s in 0..len {
            let dz = dq_ds[s] / h[s];
            let p = geom.slope[s];
            let mut along = dz;
            for a in 0..self.grid.dim() {
                let dxa = dq_dx[a][s] - p[a] * dz;
                along -= p[a] * dxa;
            }
            dq_dn[s] = along / geom.jacobian[s];
            let nu = geom.normal(s);
            let mut t2 = 0.0;
            for i in 0..d {
                let ti: f64 = (0..d).map(|j| stress[s][i][j] * nu[j]).sum();
                t2 += ti * ti;
            }
            traction[s] = t2.sqrt();
        }
        Ok(ElasticTrace { q, dq_dn, stress, strain, traction })
    }

    fn check_geometry(&self, geom: &SurfaceGeometry) -> Result<()> {
        if geom.grid() != &self.grid {
            return Err(Error::GridMismatch { expected: self.grid.len(), found: geom.grid().len() });
        }
        Ok(())
    }

    /// Load of the linearized problem: `b(φ) = −∫_Γ ψ ℂE(u) : ∇_τ φ dH`.
    ///
    /// Assembled per top face with multilinear interpolation of `ψ` and of the
    /// surface stress rows, integrated by tensor Gauss quadrature.
    pub fn linearized_load(&self, psi: &[f64], trace: &ElasticTrace, geom: &SurfaceGeometry) -> Result<Vec<f64>> {
        self.check_geometry(geom)?;
        self.grid.check_field(psi)?;
        let sd = self.grid.dim();
        let d = sd + 1;
        let len = self.mesh.surface_nodes();
        // w[s][a][i] = J Σ_b g^{ab} (σ t_b)_i
        let rows: Vec<[[f64; 3]; 2]> = (0..len)
            .map(|s| {
                let gi = geom.metric_inv[s];
                let mut w = [[0.0; 3]; 2];
                for b in 0..sd {
                    let t = geom.tangent(s, b);
                    let st: Vec<f64> = (0..d).map(|i| (0..d).map(|j| trace.stress[s][i][j] * t[j]).sum()).collect();
                    for (a, wa) in w.iter_mut().enumerate().take(sd) {
                        for i in 0..d {
                            wa[i] += geom.jacobian[s] * gi[a][b] * st[i];
                        }
                    }
                }
                w
            })
            .collect();

        let spacing = self.grid.spacing();
        let top = self.mesh.layers();
        let mut load = vec![0.0; self.mesh.unknowns()];
        let npts = 1usize << sd;
        let weight = (0.5 * spacing).powi(sd as i32);
        for cell in 0..len {
            let corners = self.mesh.cell_corners(cell);
            for gp in 0..npts {
                let eta = [GAUSS[gp & 1], GAUSS[(gp >> 1) & 1]];
                let mut shape = vec![0.0; corners.len()];
                let mut dshape = vec![[0.0; 2]; corners.len()];
                for (c, _) in corners.iter().enumerate() {
                    let sign = [if c & 1 == 1 { 1.0 } else { -1.0 }, if (c >> 1) & 1 == 1 { 1.0 } else { -1.0 }];
                    let f: Vec<f64> = (0..sd).map(|k| 0.5 * (1.0 + sign[k] * eta[k])).collect();
                    shape[c] = f.iter().product();
                    for k in 0..sd {
                        let mut v = 0.5 * sign[k] * 2.0 / spacing;
                        for (l, fl) in f.iter().enumerate() {
                            if l != k {
                                v *= fl;
                            }
                        }
                        dshape[c][k] = v;
                    }
                }
                let psi_q: f64 = corners.iter().zip(&shape).map(|((s, _), n)| n * psi[*s]).sum();
                let mut w_q = [[0.0; 3]; 2];
                for ((s, _), n) in corners.iter().zip(&shape) {
                    for a in 0..sd {
                        for i in 0..d {
                            w_q[a][i] += n * rows[*s][a][i];
                        }
                    }
                }
                for (c, (s, _)) in corners.iter().enumerate() {
                    let id = self.mesh.node_id(*s, top).expect("top node is free");
                    for i in 0..d {
                        let mut v = 0.0;
                        for a in 0..sd {
                            v += w_q[a][i] * dshape[c][a];
                        }
                        load[id * d + i] -= weight * psi_q * v;
                    }
                }
            }
        }
        Ok(load)
    }

    /// Solves the linearized problem driven by the normal velocity `psi`.
    pub fn solve_linearized(&self, psi: &[f64], trace: &ElasticTrace, geom: &SurfaceGeometry) -> Result<BulkDisplacement> {
        let load = self.linearized_load(psi, trace, geom)?;
        let mut x = vec![0.0; load.len()];
        let solve = pcg(&self.stiffness, &load, &mut x, &self.model.cg)?;
        Ok(BulkDisplacement { kind: DisplacementKind::Linearized, e0: 0.0, fluctuation: x, solve })
    }
}

/// Equilibrium displacement for profile `h`.
pub fn solve_equilibrium(model: &ElasticModel, grid: &Grid, h: &HeightField) -> Result<(ElasticSystem, BulkDisplacement)> {
    let system = ElasticSystem::assemble(model, grid, h)?;
    let u = system.solve_equilibrium(None)?;
    Ok((system, u))
}

/// Convenience wrapper around [`ElasticSystem::boundary_traces`].
pub fn boundary_traces(system: &ElasticSystem, u: &BulkDisplacement, geom: &SurfaceGeometry) -> Result<ElasticTrace> {
    system.boundary_traces(u, geom)
}

pub fn bulk_energy(system: &ElasticSystem, u: &BulkDisplacement) -> f64 {
    system.bulk_energy(u)
}

pub fn solve_linearized(
    system: &ElasticSystem,
    psi: &[f64],
    trace: &ElasticTrace,
    geom: &SurfaceGeometry,
) -> Result<BulkDisplacement> {
    system.solve_linearized(psi, trace, geom)
}
