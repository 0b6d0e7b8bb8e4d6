use quasiherm::closed_form::{spectrum_minus, spectrum_plus, HoParams, NUMERIC_CONVENTION_FACTOR};
use quasiherm::fixedpoint::{
    collect_physical, solve_fixed_points, trace_branch, FixedPointOptions, ModelFamily, ProblemKind, ZWindow,
};
use quasiherm::operators::{build_schrodinger, Grid, MassModel};

fn ho_family(a: f64, e0: f64, n_points: usize) -> ModelFamily {
    ModelFamily::new(
        MassModel::ho_quadratic(a, e0).unwrap(),
        Grid::new(-12.0, 12.0, n_points).unwrap(),
        ProblemKind::Schrodinger,
    )
}

/// Roots of branch `n` over `windows`, sorted.
fn roots(family: &ModelFamily, n: usize, windows: &[ZWindow], steps: usize) -> Vec<f64> {
    let opts = FixedPointOptions {
        steps,
        ..FixedPointOptions::default()
    };
    let found = collect_physical(family, &[n], windows, &opts);
    for w in &found.windows {
        assert!(w.error.is_none(), "{w:?}");
    }
    found.energies()
}

#[test]
fn ho_ground_branch_decreases_with_z() {
    let family = ho_family(1.0, 0.0, 200);
    let branch = trace_branch(&family, 0, 0.5, 5.0, &FixedPointOptions::default()).unwrap();
    for pair in branch.e_values.windows(2) {
        assert!(pair[1] < pair[0], "{pair:?}");
    }
    assert!(branch.min_overlap() > 0.99);
}

#[test]
fn a12_ground_branch_has_three_fixed_points() {
    let params = HoParams::new(12.0, 1.0).unwrap();
    let family = ho_family(12.0, 1.0, 200);
    let windows = [ZWindow::new(0.02, 0.98), ZWindow::new(1.02, 3.0)];
    let found = roots(&family, 0, &windows, 64);
    assert_eq!(found.len(), 3, "{found:?}");

    // both closed-form families on the n = 0 branch, in the full-line convention
    let (upper, lower) = spectrum_minus(&params, 0).unwrap();
    let mut expected = [lower, upper, spectrum_plus(&params, 0)].map(|e| e / NUMERIC_CONVENTION_FACTOR);
    expected.sort_by(f64::total_cmp);
    for (got, want) in found.iter().zip(expected) {
        assert!((got - want).abs() < 2e-2 * want.abs(), "{got} vs {want}");
    }
}

#[test]
fn root_count_stable_under_halved_step() {
    let cases = [
        (
            ho_family(12.0, 1.0, 120),
            vec![ZWindow::new(0.02, 0.98), ZWindow::new(1.02, 3.0)],
        ),
        (ho_family(1.0, 3.0, 120), vec![ZWindow::new(3.05, 6.0)]),
        (ho_family(8.0, 1.0, 120), vec![ZWindow::new(0.02, 0.98)]),
    ];
    for (family, windows) in &cases {
        let coarse = roots(family, 0, windows, 32);
        let fine = roots(family, 0, windows, 64);
        assert!(!coarse.is_empty());
        assert_eq!(coarse.len(), fine.len());
        for (a, b) in coarse.iter().zip(&fine) {
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
        }
    }
}

#[test]
fn minus_family_emerges_at_threshold() {
    // A·E₀² = 4 is the threshold at E₀ = 1
    let window = [ZWindow::new(0.02, 0.98)];
    let below = roots(&ho_family(3.5, 1.0, 200), 0, &window, 64);
    let above = roots(&ho_family(4.5, 1.0, 200), 0, &window, 64);
    assert!(below.is_empty(), "{below:?}");
    assert_eq!(above.len(), 2, "{above:?}");
}

#[test]
fn fixed_points_satisfy_constraint_and_level_bounds() {
    let family = ho_family(12.0, 1.0, 150);
    let opts = FixedPointOptions::default();
    let windows = [ZWindow::new(0.02, 0.98), ZWindow::new(1.02, 3.0)];
    let found = collect_physical(&family, &[0, 1], &windows, &opts);
    assert!(found.extraction_failures.is_empty(), "{:?}", found.extraction_failures);
    assert!(found.levels.len() >= 4);
    let grid = Grid::new(-12.0, 12.0, 150).unwrap();
    let model = MassModel::ho_quadratic(12.0, 1.0).unwrap();
    for level in &found.levels {
        let h = build_schrodinger(&grid, &model, level.energy).unwrap();
        let fresh = h.hermitian_eigenvalues().unwrap();
        let defect = fresh
            .iter()
            .map(|e| (e - level.energy).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(
            defect <= opts.refine_tol * (1.0 + level.energy.abs()),
            "defect {defect}"
        );
        let residual = level.residual.unwrap();
        let bound = 1e-6 * (1.0 + level.energy.abs()) * level.operator_norm.unwrap();
        assert!(residual <= bound, "residual {residual} > {bound}");
        assert!(level.self_overlap_defect() <= 1e-8);
    }
    let mut labels: Vec<(usize, usize)> = found.levels.iter().map(|l| (l.n, l.j)).collect();
    labels.dedup();
    assert_eq!(labels.len(), found.levels.len());
}

#[test]
fn constant_mass_levels_equal_spectrum() {
    let grid = Grid::new(-3.0, 3.0, 16).unwrap();
    let model = MassModel::constant(0.5).unwrap();
    let spectrum = build_schrodinger(&grid, &model, 0.0)
        .unwrap()
        .hermitian_eigenvalues()
        .unwrap();
    let family = ModelFamily::new(model, grid, ProblemKind::Schrodinger);
    let window = ZWindow::new(spectrum[0] - 1.0, spectrum[15] + 1.0);
    let branches: Vec<usize> = (0..16).collect();
    let found = collect_physical(&family, &branches, &[window], &FixedPointOptions::default());
    let mut energies = found.energies();
    energies.sort_by(f64::total_cmp);
    assert_eq!(energies.len(), 16);
    for (e, s) in energies.iter().zip(&spectrum) {
        assert!((e - s).abs() < 1e-10);
    }
}

#[test]
fn plus_level_approaches_closed_form() {
    let params = HoParams::new(1.0, 3.0).unwrap();
    let target = spectrum_plus(&params, 0) / NUMERIC_CONVENTION_FACTOR;
    let errors: Vec<f64> = [100, 200]
        .iter()
        .map(|&n| {
            let found = roots(&ho_family(1.0, 3.0, n), 0, &[ZWindow::new(3.05, 4.0)], 16);
            assert_eq!(found.len(), 1);
            (found[0] - target).abs()
        })
        .collect();
    assert!(errors[1] < errors[0]);
    assert!(errors[1] < 1e-2 * target);
}

#[test]
fn solve_on_traced_branch_is_sorted() {
    let family = ho_family(12.0, 1.0, 100);
    let opts = FixedPointOptions::default();
    let branch = trace_branch(&family, 0, 0.02, 0.98, &opts).unwrap();
    let found = solve_fixed_points(&family, &branch, &opts).unwrap();
    assert_eq!(found.len(), 2);
    assert!(found[0].z < found[1].z);
    assert_eq!((found[0].j, found[1].j), (0, 1));
}
