//! Configuration files, CSV tables and binary height snapshots.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsRow, TRAJECTORY_COLUMNS};
use crate::elasticity::{CgSettings, ElasticModel, ElasticTensor};
use crate::error::{Error, Result};
use crate::flow::{Coupling, Forcing, StepperConfig};
use crate::geometry::HeightField;
use crate::spectral::Grid;
use crate::stability::{ScanResult, ScanSetup};

/// Surface dimension selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Curves over the unit interval (two-dimensional bulk).
    Reduced,
    /// Surfaces over the unit square (three-dimensional bulk).
    Full,
}

impl Mode {
    pub fn surface_dim(self) -> usize {
        match self {
            Self::Reduced => 1,
            Self::Full => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lame {
    pub lambda: f64,
    pub mu: f64,
}

/// Step control; the orientation sign and forcing live at the top level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepControl {
    pub tau0: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    #[serde(default = "one")]
    pub growth: f64,
    #[serde(default = "lagged")]
    pub coupling: Coupling,
    #[serde(default = "energy_slack")]
    pub energy_slack: f64,
    #[serde(default = "yes")]
    pub dealias: bool,
}

fn one() -> f64 {
    1.0
}
fn lagged() -> Coupling {
    Coupling::Lagged
}
fn energy_slack() -> f64 {
    1e-10
}
fn yes() -> bool {
    true
}

/// Initial deviation from the flat film of thickness `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    None,
    /// `amplitude · cos(2π k·x)`.
    SingleMode { k: [i64; 2], amplitude: f64 },
    /// Random combination of the modes with `band[0] ≤ max|k_i| ≤ band[1]`, scaled to the given `L²` norm.
    Random { seed: u64, amplitude: f64, band: [usize; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Accepted steps between checkpoints; 0 records only the first and last state.
    pub checkpoint_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub d_list: Vec<f64>,
    pub cutoff: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondVariationConfig {
    /// Fourier cutoff of the basis.
    pub cutoff: usize,
    /// Step of the finite-difference comparison.
    #[serde(default = "fd_eps")]
    pub fd_eps: f64,
}

fn fd_eps() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityConfig {
    /// Accepted steps to integrate.
    pub steps: usize,
    /// Evaluate the identity every this many steps.
    pub every: usize,
}

/// Complete description of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mode: Mode,
    pub n: usize,
    /// Element layers across the film thickness.
    pub m: usize,
    pub d: f64,
    pub e0: f64,
    pub lame: Lame,
    #[serde(default = "one")]
    pub sigma: f64,
    pub stepper: StepControl,
    pub t_end: f64,
    #[serde(default = "max_steps")]
    pub max_steps: usize,
    pub perturbation: Perturbation,
    #[serde(default)]
    pub forcing: Option<Forcing>,
    pub output: OutputConfig,
    /// Defaults to `1e-3·d`.
    #[serde(default)]
    pub h_min: Option<f64>,
    #[serde(default)]
    pub cg: Option<CgSettings>,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub second_variation: Option<SecondVariationConfig>,
    #[serde(default)]
    pub identity: Option<IdentityConfig>,
}

fn max_steps() -> usize {
    10_000_000
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 || !self.n.is_multiple_of(2) {
            return Err(Error::Config(format!("n must be even and >= 8, got {}", self.n)));
        }
        if self.m < 3 {
            return Err(Error::Config(format!("m must be at least 3, got {}", self.m)));
        }
        positive("d", self.d)?;
        positive("lame.lambda", self.lame.lambda)?;
        positive("lame.mu", self.lame.mu)?;
        if !self.e0.is_finite() {
            return Err(Error::Config("e0 must be finite".into()));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if let Some(h_min) = self.h_min {
            positive("h_min", h_min)?;
            if h_min >= self.d {
                return Err(Error::Config(format!("h_min {h_min} must be below d {}", self.d)));
            }
        }
        if let Some(cg) = &self.cg {
            positive("cg.rel_tol", cg.rel_tol)?;
            if cg.max_iter_factor == 0 {
                return Err(Error::Config("cg.max_iter_factor must be at least 1".into()));
            }
        }
        match &self.perturbation {
            Perturbation::None => {}
            Perturbation::SingleMode { k, amplitude } => {
                self.check_wavevector(*k)?;
                self.check_amplitude(*amplitude)?;
            }
            Perturbation::Random { amplitude, band, .. } => {
                self.check_amplitude(*amplitude)?;
                if band[0] == 0 || band[0] > band[1] || 2 * band[1] >= self.n {
                    return Err(Error::Config(format!(
                        "random band must satisfy 1 <= band[0] <= band[1] < n/2, got {band:?}"
                    )));
                }
            }
        }
        if let Some(f) = &self.forcing {
            self.check_wavevector(f.wavevector)?;
            if !f.amplitude.is_finite() || !f.decay.is_finite() {
                return Err(Error::Config("forcing parameters must be finite".into()));
            }
        }
        if let Some(scan) = &self.scan {
            if scan.d_list.is_empty() {
                return Err(Error::Config("scan.d_list is empty".into()));
            }
            for d in &scan.d_list {
                positive("scan.d_list entry", *d)?;
            }
            self.check_cutoff(scan.cutoff)?;
        }
        if let Some(sv) = &self.second_variation {
            self.check_cutoff(sv.cutoff)?;
            positive("second_variation.fd_eps", sv.fd_eps)?;
        }
        if let Some(id) = &self.identity {
            if id.steps < 2 || id.every == 0 {
                return Err(Error::Config("identity needs steps >= 2 and every >= 1".into()));
            }
        }
        self.stepper_config().validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("stepper: {m}")),
            other => other,
        })
    }

    fn check_wavevector(&self, k: [i64; 2]) -> Result<()> {
        let limit = (self.n / 2) as i64;
        let dim_ok = self.mode == Mode::Full || k[1] == 0;
        if !dim_ok || k.iter().any(|c| c.abs() >= limit) || k == [0, 0] {
            return Err(Error::Config(format!("wavevector {k:?} is not resolved by the grid")));
        }
        Ok(())
    }

    fn check_amplitude(&self, a: f64) -> Result<()> {
        if !a.is_finite() || a.abs() >= self.d {
            return Err(Error::Config(format!("perturbation amplitude {a} must be finite and below d")));
        }
        Ok(())
    }

    fn check_cutoff(&self, cutoff: usize) -> Result<()> {
        if cutoff == 0 || 3 * cutoff > self.n {
            return Err(Error::Config(format!("cutoff must lie in 1..={}, got {cutoff}", self.n / 3)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.mode.surface_dim(), self.n)
    }

    pub fn tensor(&self) -> Result<ElasticTensor> {
        ElasticTensor::isotropic(self.lame.lambda, self.lame.mu)
    }

    pub fn h_min(&self) -> f64 {
        self.h_min.unwrap_or(1e-3 * self.d)
    }

    pub fn elastic_model(&self) -> Result<ElasticModel> {
        let mut model = ElasticModel::new(self.tensor()?, self.e0, self.m, self.h_min());
        if let Some(cg) = self.cg {
            model.cg = cg;
        }
        Ok(model)
    }

    pub fn stepper_config(&self) -> StepperConfig {
        let s = &self.stepper;
        StepperConfig {
            tau0: s.tau0,
            tau_min: s.tau_min,
            tau_max: s.tau_max,
            growth: s.growth,
            coupling: s.coupling,
            sigma: self.sigma,
            forcing: self.forcing.clone(),
            energy_slack: s.energy_slack,
            dealias: s.dealias,
        }
    }

    pub fn scan_setup(&self, cutoff: usize) -> Result<ScanSetup> {
        Ok(ScanSetup { tensor: self.tensor()?, e0: self.e0, layers: self.m, sigma: self.sigma, cutoff })
    }

    /// Replaces the seed of a random perturbation.
    pub fn override_seed(&mut self, seed: u64) {
        if let Perturbation::Random { seed: s, .. } = &mut self.perturbation {
            *s = seed;
        }
    }

    /// Initial height field `d + perturbation`.
    pub fn initial_height(&self, grid: &Grid) -> Result<HeightField> {
        let base = vec![self.d; grid.len()];
        let dev = match &self.perturbation {
            Perturbation::None => vec![0.0; grid.len()],
            Perturbation::SingleMode { k, amplitude } => grid.sample(|x| {
                amplitude * (std::f64::consts::TAU * (k[0] as f64 * x[0] + k[1] as f64 * x[1])).cos()
            }),
            Perturbation::Random { seed, amplitude, band } => random_band(grid, *seed, *amplitude, *band),
        };
        let values: Vec<f64> = base.iter().zip(&dev).map(|(a, b)| a + b).collect();
        let h = HeightField::new(grid, values)?;
        h.check_film(self.h_min()).map_err(|e| Error::Config(format!("initial height: {e}")))?;
        Ok(h)
    }
}

/// Band-limited zero-mean random field with `L²` norm `amplitude`.
pub fn random_band(grid: &Grid, seed: u64, amplitude: f64, band: [usize; 2]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (band[0] as i64, band[1] as i64);
    let mut modes = Vec::new();
    match grid.dim() {
        1 => modes.extend((lo..=hi).map(|k| [k, 0])),
        _ => {
            for k1 in 0..=hi {
                for k2 in -hi..=hi {
                    let m = k1.abs().max(k2.abs());
                    if (k1 > 0 || k2 > 0) && m >= lo {
                        modes.push([k1, k2]);
                    }
                }
            }
        }
    }
    let mut f = vec![0.0; grid.len()];
    for k in modes {
        let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        for (i, v) in f.iter_mut().enumerate() {
            let x = grid.coords(i);
            let phase = std::f64::consts::TAU * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
            *v += a * phase.cos() + b * phase.sin();
        }
    }
    let norm = grid.l2_norm(&f);
    if norm > 0.0 {
        f.iter_mut().for_each(|v| *v *= amplitude / norm);
    }
    f
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders `trajectory.csv`.
pub fn trajectory_csv(rows: &[DiagnosticsRow]) -> String {
    let mut out = TRAJECTORY_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let floats = [
            r.t,
            r.volume,
            r.energy_bulk,
            r.energy_surface,
            r.energy_total,
            r.lyapunov,
            r.stationarity_residual,
            r.h_dev_l2,
            r.d_distance,
            r.tau,
        ];
        let cells: Vec<String> = floats.iter().map(|v| fmt_f64(*v)).collect();
        let _ = writeln!(out, "{},{}", cells.join(","), r.coupling_iters);
    }
    out
}

pub const SCAN_COLUMNS: [&str; 3] = ["d", "min_eig_L2", "min_eig_H1"];

/// Renders `scan.csv`.
pub fn scan_csv(scan: &ScanResult) -> String {
    let mut out = SCAN_COLUMNS.join(",");
    out.push('\n');
    for r in &scan.rows {
        let _ = writeln!(out, "{},{},{}", fmt_f64(r.d), fmt_f64(r.min_eig_l2), fmt_f64(r.min_eig_h1));
    }
    out
}

/// Parsed numeric CSV: header names and rows.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|e| Error::Format(format!("row {}: {e}", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Format(format!("row {} has {} cells, expected {}", i + 1, row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub const HEIGHT_MAGIC: &[u8; 4] = b"ELFH";
pub const HEIGHT_VERSION: u32 = 1;
pub const HEIGHT_HEADER_LEN: usize = 32;

/// A height snapshot as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightSnapshot {
    /// `[rows, cols]`; a curve is stored as one row of `n` samples.
    pub dims: [u64; 2],
    pub t: f64,
    pub values: Vec<f64>,
}

impl HeightSnapshot {
    pub fn new(grid: &Grid, t: f64, values: &[f64]) -> Self {
        let n = grid.n() as u64;
        let dims = if grid.dim() == 1 { [1, n] } else { [n, n] };
        Self { dims, t, values: values.to_vec() }
    }

    /// Header: magic, version (u32), rows (u64), cols (u64), time (f64); little endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEIGHT_HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(HEIGHT_MAGIC);
        out.extend_from_slice(&HEIGHT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.dims[0].to_le_bytes());
        out.extend_from_slice(&self.dims[1].to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEIGHT_HEADER_LEN {
            return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[0..4] != HEIGHT_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != HEIGHT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dims = [u64_at(8), u64_at(16)];
        let t = f64::from_bits(u64_at(24));
        let count = dims[0]
            .checked_mul(dims[1])
            .ok_or_else(|| Error::Format("dimension overflow".into()))? as usize;
        let body = &bytes[HEIGHT_HEADER_LEN..];
        if body.len() != 8 * count {
            return Err(Error::Format(format!("expected {} data bytes, found {}", 8 * count, body.len())));
        }
        let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(Self { dims, t, values })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// File name of the `index`-th checkpoint.
pub fn height_file_name(index: usize) -> String {
    format!("height_{index:04}.bin")
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_config() -> String {
        r#"{
            "mode": "reduced", "n": 32, "m": 4, "d": 0.2, "e0": 0.3,
            "lame": {"lambda": 1.0, "mu": 1.0},
            "stepper": {"tau0": 1e-5, "tau_min": 1e-9, "tau_max": 1e-5},
            "t_end": 1e-4,
            "perturbation": {"kind": "random", "seed": 7, "amplitude": 1e-3, "band": [1, 4]},
            "output": {"dir": "out", "checkpoint_every": 2}
        }"#
        .to_owned()
    }

    #[test]
    fn parses_and_validates() {
        let cfg = SimConfig::from_json(&sample_config()).unwrap();
        assert_eq!(cfg.sigma, 1.0);
        assert_eq!(cfg.h_min(), 2e-4);
        let grid = cfg.grid().unwrap();
        let h = cfg.initial_height(&grid).unwrap();
        let dev: Vec<f64> = h.values().iter().map(|v| v - 0.2).collect();
        assert!((grid.l2_norm(&dev) - 1e-3).abs() < 1e-15);
        assert!(grid.mean(&dev).abs() < 1e-17);
    }

    #[test]
    fn rejects_invalid_configs() {
        let base = sample_config();
        for (from, to) in [
            ("\"n\": 32", "\"n\": 33"),
            ("\"d\": 0.2", "\"d\": -0.2"),
            ("\"tau_min\": 1e-9", "\"tau_min\": 1e-3"),
            ("\"band\": [1, 4]", "\"band\": [0, 4]"),
            ("\"amplitude\": 1e-3", "\"amplitude\": 0.5"),
            ("\"m\": 4", "\"m\": 4, \"extra\": 1"),
            ("\"mode\": \"reduced\"", "\"mode\": \"cubic\""),
        ] {
            let text = base.replace(from, to);
            assert!(matches!(SimConfig::from_json(&text), Err(Error::Config(_))), "{to}");
        }
    }

    #[test]
    fn random_perturbation_is_seeded() {
        let grid = Grid::new(2, 16).unwrap();
        let a = random_band(&grid, 3, 1e-3, [1, 3]);
        assert_eq!(a, random_band(&grid, 3, 1e-3, [1, 3]));
        assert_ne!(a, random_band(&grid, 4, 1e-3, [1, 3]));
    }

    #[test]
    fn height_snapshot_round_trips() {
        let grid = Grid::new(2, 8).unwrap();
        let values: Vec<f64> = (0..64).map(|i| (i as f64).sqrt() * 1e-3 + 0.1).collect();
        let snap = HeightSnapshot::new(&grid, 0.125, &values);
        let bytes = snap.to_bytes();
        assert_eq!(&bytes[..4], b"ELFH");
        assert_eq!(bytes.len(), 32 + 64 * 8);
        assert_eq!(HeightSnapshot::from_bytes(&bytes).unwrap(), snap);
        assert!(HeightSnapshot::from_bytes(&bytes[..40]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(HeightSnapshot::from_bytes(&bad).is_err());
    }

    #[test]
    fn csv_formatting_round_trips() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        let row = DiagnosticsRow {
            t: 0.1,
            volume: 0.2,
            energy_bulk: 1.0 / 3.0,
            energy_surface: 1.0,
            energy_total: 4.0 / 3.0,
            lyapunov: 1e-300,
            stationarity_residual: 0.0,
            h_dev_l2: 2e-3,
            d_distance: 2e-6,
            tau: 1e-5,
            coupling_iters: 1,
            sobolev_h3: 0.0,
        };
        let text = trajectory_csv(std::slice::from_ref(&row));
        let (header, rows) = parse_csv(&text).unwrap();
        assert_eq!(header, TRAJECTORY_COLUMNS);
        assert_eq!(rows[0][2], 1.0 / 3.0);
        assert_eq!(rows[0][5], 1e-300);
        assert_eq!(rows[0][10], 1.0);
    }
}
