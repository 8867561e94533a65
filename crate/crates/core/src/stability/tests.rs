use super::*;
use std::f64::consts::TAU;

fn flat_film(grid: &Grid, d: f64, e0: f64, layers: usize) -> FilmState {
    let model = ElasticModel::isotropic(1.0, 1.0, e0, layers, d).unwrap();
    FilmState::evaluate(&model, grid, HeightField::flat(grid, d), None).unwrap()
}

fn cosine(grid: &Grid, k: f64) -> Vec<f64> {
    grid.sample(|x| (k * TAU * x[0]).cos())
}

#[test]
fn stress_free_flat_film_gives_perimeter_spectrum() {
    let grid = Grid::new(1, 32).unwrap();
    let film = flat_film(&grid, 0.2, 0.0, 4);
    for k in 1..5 {
        let v = second_variation_apply(&cosine(&grid, k as f64), &film, 1.0).unwrap();
        let expected = (TAU * k as f64).powi(2) / 2.0;
        assert!((v - expected).abs() < 1e-10 * expected);
    }
    let asm = QuadraticFormAssembly::assemble(&film, 1.0, 4).unwrap();
    let l2 = asm.min_eigenvalue(Norm::L2).unwrap();
    let h1 = asm.min_eigenvalue(Norm::H1).unwrap();
    assert!((l2 - TAU * TAU).abs() < 1e-9);
    assert!((h1 - TAU * TAU / (TAU * TAU + 1.0)).abs() < 1e-12);
}

#[test]
fn elastic_correction_is_negative_and_quadratic_in_mismatch() {
    let grid = Grid::new(1, 32).unwrap();
    let psi = cosine(&grid, 2.0);
    let base = (2.0 * TAU).powi(2) / 2.0;
    let c1 = second_variation_apply(&psi, &flat_film(&grid, 0.2, 0.3, 6), 1.0).unwrap() - base;
    let c2 = second_variation_apply(&psi, &flat_film(&grid, 0.2, 0.6, 6), 1.0).unwrap() - base;
    assert!(c1 < 0.0);
    assert!((c2 / c1 - 4.0).abs() < 1e-6, "{}", c2 / c1);
}

#[test]
fn flat_value_matches_fine_mesh() {
    let value = |n: usize, layers: usize| {
        let grid = Grid::new(1, n).unwrap();
        second_variation_apply(&cosine(&grid, 2.0), &flat_film(&grid, 0.2, 1.0, layers), 1.0).unwrap()
    };
    let base = (2.0 * TAU).powi(2) / 2.0;
    let (desk, fine) = (value(128, 16), value(256, 32));
    assert!(((desk - base) / (fine - base) - 1.0).abs() < 0.02, "{desk} vs {fine}");
}

#[test]
fn matches_finite_differences_of_the_energy_at_a_flat_film() {
    let grid = Grid::new(1, 64).unwrap();
    let (d, e0, layers) = (0.2, 0.8, 8);
    let model = ElasticModel::isotropic(1.0, 1.0, e0, layers, d).unwrap();
    let film = flat_film(&grid, d, e0, layers);
    let energy = |h: Vec<f64>| {
        FilmState::evaluate(&model, &grid, HeightField::new(&grid, h).unwrap(), None).unwrap().energy().total
    };
    let eps = 1e-3;
    let j0 = film.energy().total;
    for k in [1.0, 3.0] {
        let psi = cosine(&grid, k);
        let plus = energy(psi.iter().map(|p| d + eps * p).collect());
        let minus = energy(psi.iter().map(|p| d - eps * p).collect());
        let fd = (plus - 2.0 * j0 + minus) / (eps * eps);
        let v = second_variation_apply(&psi, &film, 1.0).unwrap();
        assert!((fd - v).abs() <= (1e-3 * v.abs()).max(1e-6), "k={k}: {fd} vs {v}");
    }
}

#[test]
fn assembled_form_is_symmetric_and_consistent() {
    let grid = Grid::new(1, 32).unwrap();
    let model = ElasticModel::isotropic(1.0, 1.0, 0.5, 4, 0.2).unwrap();
    let h = HeightField::from_fn(&grid, |x| 0.2 + 0.01 * (TAU * x[0]).sin()).unwrap();
    let film = FilmState::evaluate(&model, &grid, h, None).unwrap();
    let asm = QuadraticFormAssembly::assemble(&film, 1.0, 4).unwrap();
    let coeffs = [0.3, -0.2, 0.5, 0.1, -0.4, 0.25, 0.05, -0.15];
    let psi: Vec<f64> = (0..grid.len()).map(|i| asm.basis.iter().zip(&coeffs).map(|(b, c)| c * b[i]).sum()).collect();
    let direct = second_variation_apply(&psi, &film, 1.0).unwrap();
    assert!((asm.evaluate(&coeffs) - direct).abs() < 1e-8 * direct.abs());
}

#[test]
fn flat_form_decouples_fourier_modes() {
    let grid = Grid::new(1, 32).unwrap();
    let asm = QuadraticFormAssembly::assemble(&flat_film(&grid, 0.2, 0.8, 4), 1.0, 5).unwrap();
    let scale = asm.form.amax();
    for a in 0..asm.modes.len() {
        for b in 0..asm.modes.len() {
            if a != b {
                assert!(asm.form[(a, b)].abs() < 1e-8 * scale);
            }
        }
    }
}

#[test]
fn rejects_functions_with_nonzero_mean() {
    let grid = Grid::new(1, 16).unwrap();
    let film = flat_film(&grid, 0.2, 0.1, 4);
    let psi: Vec<f64> = cosine(&grid, 1.0).iter().map(|v| v + 0.1).collect();
    assert!(matches!(second_variation_apply(&psi, &film, 1.0), Err(Error::NotZeroMean { .. })));
    assert!(QuadraticFormAssembly::assemble(&film, 1.0, 6).is_err());
}

#[test]
fn stationarity_classification() {
    let grid = Grid::new(1, 32).unwrap();
    let flat = flat_film(&grid, 0.2, 0.5, 4);
    assert!(is_stationary(&flat.geometry, &flat.trace, 1.0, 1e-8));
    let free = flat_film(&grid, 0.2, 0.0, 4);
    assert_eq!(stationarity_residual(&free.geometry, &free.trace, 1.0), 0.0);
    let model = ElasticModel::isotropic(1.0, 1.0, 0.5, 4, 0.2).unwrap();
    let h = HeightField::from_fn(&grid, |x| 0.2 + 0.1 * (TAU * x[0]).sin()).unwrap();
    let wavy = FilmState::evaluate(&model, &grid, h, None).unwrap();
    assert!(!is_stationary(&wavy.geometry, &wavy.trace, 1.0, 1e-8));
}

#[test]
fn scan_without_mismatch_is_stable_everywhere() {
    let grid = Grid::new(1, 16).unwrap();
    let setup = ScanSetup { tensor: ElasticTensor::isotropic(1.0, 1.0).unwrap(), e0: 0.0, layers: 4, sigma: 1.0, cutoff: 3 };
    let scan = flat_scan(&grid, &[0.3, 0.1, 0.2], &setup).unwrap();
    assert_eq!(scan.rows.iter().map(|r| r.d).collect::<Vec<_>>(), vec![0.1, 0.2, 0.3]);
    assert!(scan.rows.iter().all(|r| r.min_eig_h1 > 0.0));
    assert_eq!(scan.sign_changes, 0);
    assert!(scan.bracket.is_none());
}
