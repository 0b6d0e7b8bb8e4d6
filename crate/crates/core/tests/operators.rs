use proptest::prelude::*;
use quasiherm::c64;
use quasiherm::frozen::decompose;
use quasiherm::operators::{
    assemble_fv, assemble_fv_metric, build_kleingordon, build_laplacian, build_parity, build_schrodinger,
    intertwining_residual, Grid, MassModel, MassSquaredFn,
};
use quasiherm::{Error, OperatorMatrix};

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// diagonal `d` and constant off-diagonal `e`, by Sturm sequence.
fn sturm_count(d: &[f64], e: f64, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (i, &di) in d.iter().enumerate() {
        let off = if i == 0 { 0.0 } else { e * e / q };
        q = di - x - off;
        if q == 0.0 {
            q = -f64::EPSILON * (di.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// k-th smallest eigenvalue by bisection on the Sturm count.
fn sturm_eigenvalue(d: &[f64], e: f64, k: usize) -> f64 {
    let radius = d.iter().fold(0.0_f64, |m, v| m.max(v.abs())) + 2.0 * e.abs();
    let (mut lo, mut hi) = (-radius, radius);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn harmonic_lowest(n_points: usize) -> f64 {
    let grid = Grid::new(-10.0, 10.0, n_points).unwrap();
    let h = grid.spacing();
    let d: Vec<f64> = grid.points().map(|x| 2.0 / (h * h) + x * x).collect();
    sturm_eigenvalue(&d, -1.0 / (h * h), 0)
}

#[test]
fn harmonic_ground_state_converges_to_one() {
    let grid = Grid::new(-10.0, 10.0, 201).unwrap();
    let model = MassModel::constant(0.5).unwrap();
    let h = build_schrodinger(&grid, &model, 0.0).unwrap();
    let lowest = h.hermitian_eigenvalues().unwrap()[0];
    assert!((lowest - 1.0).abs() < 1e-3, "lowest = {lowest}");
    assert!((lowest - harmonic_lowest(201)).abs() < 1e-9);

    // the error shrinks as the grid is refined
    let errors: Vec<f64> = [101, 201, 401]
        .iter()
        .map(|&n| (harmonic_lowest(n) - 1.0).abs())
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn schrodinger_ho_lowest_eigenvalue_matches_tridiagonal_oracle() {
    let grid = Grid::new(-12.0, 12.0, 400).unwrap();
    let model = MassModel::ho_quadratic(1.0, 0.0).unwrap();
    let z = 2.0;
    let h = build_schrodinger(&grid, &model, z).unwrap();
    let lowest = h.hermitian_eigenvalues().unwrap()[0];

    // 1/(2m) = 1/(A²z²) = 1/4
    let step = grid.spacing();
    let kinetic = 0.25 / (step * step);
    let d: Vec<f64> = grid.points().map(|x| 2.0 * kinetic + x * x).collect();
    let oracle = sturm_eigenvalue(&d, -kinetic, 0);
    assert!((lowest - oracle).abs() < 1e-9);
    // continuum value of the ground state of (1/4)p² + x² is 1/2
    assert!((lowest - 0.5).abs() < 1e-3, "lowest = {lowest}");
}

#[test]
fn degenerate_mass_at_singular_point() {
    let grid = Grid::new(-5.0, 5.0, 11).unwrap();
    let model = MassModel::ho_quadratic(1.0, 0.0).unwrap();
    assert!(matches!(
        build_schrodinger(&grid, &model, 0.0),
        Err(Error::DegenerateMass { .. })
    ));
}

#[test]
fn kleingordon_models() {
    let grid = Grid::new(-2.0, 2.0, 9).unwrap();
    let lap = build_laplacian(&grid);

    let constant = build_kleingordon(&grid, &MassModel::constant(3.0).unwrap(), 0.7).unwrap();
    let expected = &lap + &OperatorMatrix::identity(9).scaled(c64::new(9.0, 0.0));
    assert!((&constant - &expected).norm() < 1e-12);

    let harmonic = MassModel::general(MassSquaredFn::real(|_, x| x * x));
    let kg = build_kleingordon(&grid, &harmonic, 0.0).unwrap();
    let x2: Vec<f64> = grid.points().map(|x| x * x).collect();
    assert!((&kg - &(&lap + &OperatorMatrix::real_diagonal(&x2))).norm() < 1e-12);

    let complex = MassModel::general(MassSquaredFn::new(|_, x| Ok(c64::new(x * x, x))));
    let kg = build_kleingordon(&grid, &complex, 0.0).unwrap();
    assert!(kg.hermiticity_defect() > 0.1);
}

#[test]
fn parity_reflects_position() {
    let grid = Grid::new(-3.0, 3.0, 7).unwrap();
    let p = build_parity(&grid).unwrap();
    let x: Vec<f64> = grid.points().collect();
    let minus_x: Vec<f64> = x.iter().map(|v| -v).collect();
    let reflected = &(&p * &OperatorMatrix::real_diagonal(&x)) * &p;
    assert!((&reflected - &OperatorMatrix::real_diagonal(&minus_x)).norm() < 1e-14);
    assert!((&(&p * &p) - &OperatorMatrix::identity(7)).norm() == 0.0);
    assert!(matches!(
        build_parity(&Grid::new(-1.0, 2.0, 5).unwrap()),
        Err(Error::AsymmetricGrid { .. })
    ));
}

#[test]
fn fv_metric_intertwines_pseudo_hermitian_generator() {
    // η positive Hermitian, M Hermitian, H = η⁻¹M
    let eta = OperatorMatrix::from_real_rows(&[
        vec![2.0, 0.5, 0.0, 0.1],
        vec![0.5, 1.5, 0.2, 0.0],
        vec![0.0, 0.2, 1.0, 0.3],
        vec![0.1, 0.0, 0.3, 2.5],
    ])
    .unwrap();
    let m = OperatorMatrix::from_real_rows(&[
        vec![3.0, 1.0, 0.0, 0.0],
        vec![1.0, 4.0, 0.5, 0.0],
        vec![0.0, 0.5, 5.0, 0.2],
        vec![0.0, 0.0, 0.2, 6.0],
    ])
    .unwrap();
    let dec = decompose(&eta).unwrap();
    let inv_weights: Vec<c64> = dec.eigenvalues().iter().map(|e| e.inv()).collect();
    let eta_inv = OperatorMatrix::from_mat(quasiherm::matrix::weighted_outer_sum(
        dec.right_kets(),
        &inv_weights,
        dec.left_vectors(),
    ))
    .unwrap();
    assert!((&(&eta * &eta_inv) - &OperatorMatrix::identity(4)).norm() < 1e-10);

    let h = &eta_inv * &m;
    assert!(intertwining_residual(&h, &eta) < 1e-8 * h.norm() * eta.norm());

    let fv = assemble_fv(&h);
    let eta_sr = assemble_fv_metric(&eta).unwrap();
    assert!(eta_sr.hermiticity_defect() < 1e-14);
    assert!(intertwining_residual(&fv.h_sr, &eta_sr) < 1e-8 * fv.h_sr.norm() * eta_sr.norm());
}

#[test]
fn fv_metric_rejects_bad_input() {
    let skew = OperatorMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
    assert!(matches!(
        assemble_fv_metric(&skew),
        Err(Error::NonHermitianMetric { .. })
    ));
    let singular = OperatorMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
    assert!(matches!(
        assemble_fv_metric(&singular),
        Err(Error::SingularMetric { .. })
    ));
}

fn random_matrix(n: usize, entries: &[(f64, f64)]) -> OperatorMatrix {
    let rows: Vec<Vec<c64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| c64::new(entries[i * n + j].0, entries[i * n + j].1))
                .collect()
        })
        .collect();
    OperatorMatrix::from_rows(&rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplacian_is_symmetric_positive(lo in -20.0..-0.5f64, width in 1.0..40.0f64, n in 3usize..40) {
        let grid = Grid::new(lo, lo + width, n).unwrap();
        let l = build_laplacian(&grid);
        prop_assert_eq!((&l - &l.adjoint()).norm(), 0.0);
        prop_assert!(l.hermitian_eigenvalues().unwrap()[0] > 0.0);
    }

    #[test]
    fn fv_square_law(
        n in 1usize..=8,
        entries in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 64),
    ) {
        let h = random_matrix(n, &entries);
        let fv = assemble_fv(&h);
        let fv_values = decompose(&fv.h_sr).map(|d| d.eigenvalues().to_vec());
        let h_values = decompose(&h).map(|d| d.eigenvalues().to_vec());
        // near-degenerate random draws are rejected by the decomposition; skip them
        if let (Ok(fv_values), Ok(h_values)) = (fv_values, h_values) {
            let scale = h.norm().max(1.0);
            for e in fv_values {
                let sq = e * e;
                let best = h_values.iter().map(|l| (sq - l).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(best < 1e-8 * scale, "e² = {sq}, distance {best}");
            }
        }
    }
}
