//! Solving `z = E⁽ⁿ⁾(z)` for an energy-dependent operator family.
//!
//! A branch `E⁽ⁿ⁾(z)` is followed across a window of frozen parameters by
//! eigenvector continuation: at every new sample the eigenvector with the
//! largest overlap with the previous one is taken, so labels survive avoided
//! crossings that would swap index-sorted eigenvalues. Sign changes of
//! `E⁽ⁿ⁾(z) − z` are then refined by bisection with fresh eigensolves.

use faer::{Col, ColRef};
use serde::Serialize;

use crate::c64;
use crate::error::{Error, Result};
use crate::frozen::{self, best_overlap, column, eigenpairs, is_real_value, DecomposeOptions};
use crate::matrix::{inner, OperatorMatrix};
use crate::operators::{build_kleingordon, build_schrodinger, Grid, MassModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Schrodinger,
    KleinGordon,
}

/// A family of frozen operators `H(z)`.
pub trait FrozenFamily: Sync {
    fn hamiltonian(&self, z: f64) -> Result<OperatorMatrix>;

    /// Parameters at which `H(z)` is undefined; windows must avoid them.
    fn singular_points(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// The discretised Schrödinger or Klein-Gordon family of a mass model.
#[derive(Clone, Debug)]
pub struct ModelFamily {
    pub model: MassModel,
    pub grid: Grid,
    pub kind: ProblemKind,
}

impl ModelFamily {
    pub fn new(model: MassModel, grid: Grid, kind: ProblemKind) -> Self {
        Self { model, grid, kind }
    }
}

impl FrozenFamily for ModelFamily {
    fn hamiltonian(&self, z: f64) -> Result<OperatorMatrix> {
        match self.kind {
            ProblemKind::Schrodinger => build_schrodinger(&self.grid, &self.model, z),
            ProblemKind::KleinGordon => build_kleingordon(&self.grid, &self.model, z),
        }
    }

    fn singular_points(&self) -> Vec<f64> {
        self.model.singular_point().into_iter().collect()
    }
}

/// Adapter turning a closure into a [`FrozenFamily`].
pub struct FnFamily<F>(pub F);

impl<F> FrozenFamily for FnFamily<F>
where
    F: Fn(f64) -> Result<OperatorMatrix> + Sync,
{
    fn hamiltonian(&self, z: f64) -> Result<OperatorMatrix> {
        (self.0)(z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZWindow {
    pub lo: f64,
    pub hi: f64,
}

impl ZWindow {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointOptions {
    /// Sampling intervals per window.
    pub steps: usize,
    pub overlap_floor: f64,
    pub tol_real: f64,
    /// Absolute bisection tolerance on `z`.
    pub refine_tol: f64,
    pub max_iterations: usize,
    /// Roots closer than `merge_rel·(1+|z|)` count as one.
    pub merge_rel: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            steps: 64,
            overlap_floor: 0.7,
            tol_real: 1e-8,
            refine_tol: 1e-10,
            max_iterations: 200,
            merge_rel: 1e-8,
        }
    }
}

/// Samples of one eigenvalue branch `E⁽ⁿ⁾(z)`.
#[derive(Clone, Debug)]
pub struct EnergyBranch {
    pub branch_index: usize,
    pub z_samples: Vec<f64>,
    pub e_values: Vec<f64>,
    /// `|⟨ket(zₖ)|ket(zₖ₊₁)⟩|` between consecutive samples.
    pub continuity_overlaps: Vec<f64>,
    kets: Vec<Col<c64>>,
}

impl EnergyBranch {
    pub fn ket(&self, k: usize) -> ColRef<'_, c64> {
        self.kets[k].as_ref()
    }

    pub fn min_overlap(&self) -> f64 {
        self.continuity_overlaps.iter().copied().fold(1.0, f64::min)
    }
}

fn validate_window(family: &dyn FrozenFamily, lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidWindow(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    if let Some(s) = family.singular_points().into_iter().find(|s| (lo..=hi).contains(s)) {
        return Err(Error::InvalidWindow(format!(
            "[{lo}, {hi}] contains the singular point z = {s}"
        )));
    }
    Ok(())
}

/// Follows branch `n` (index order at `z_lo`) across `[z_lo, z_hi]`.
pub fn trace_branch(
    family: &dyn FrozenFamily,
    n: usize,
    z_lo: f64,
    z_hi: f64,
    opts: &FixedPointOptions,
) -> Result<EnergyBranch> {
    validate_window(family, z_lo, z_hi)?;
    if opts.steps < 2 {
        return Err(Error::InvalidWindow(format!(
            "need at least 2 steps, got {}",
            opts.steps
        )));
    }
    let dz = (z_hi - z_lo) / opts.steps as f64;
    let mut branch = EnergyBranch {
        branch_index: n,
        z_samples: Vec::with_capacity(opts.steps + 1),
        e_values: Vec::with_capacity(opts.steps + 1),
        continuity_overlaps: Vec::with_capacity(opts.steps),
        kets: Vec::with_capacity(opts.steps + 1),
    };
    for k in 0..=opts.steps {
        let z = if k == opts.steps { z_hi } else { z_lo + k as f64 * dz };
        let pairs = eigenpairs(&family.hamiltonian(z)?)?;
        let index = match branch.kets.last() {
            None => {
                if n >= pairs.values.len() {
                    return Err(Error::BranchIndexOutOfRange {
                        n,
                        dim: pairs.values.len(),
                    });
                }
                n
            }
            Some(prev) => {
                let (index, overlap) = best_overlap(pairs.vectors.as_ref(), prev.as_ref());
                if overlap < opts.overlap_floor {
                    return Err(Error::BranchLost { z, overlap });
                }
                branch.continuity_overlaps.push(overlap);
                index
            }
        };
        let e = pairs.values[index];
        if !is_real_value(e, opts.tol_real) {
            return Err(Error::ComplexBranch { z, re: e.re, im: e.im });
        }
        branch.z_samples.push(z);
        branch.e_values.push(e.re);
        branch.kets.push(column(pairs.vectors.as_ref(), index));
    }
    Ok(branch)
}

/// A solution of `z = E⁽ⁿ⁾(z)` on one branch.
#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub z: f64,
    pub j: usize,
    /// `E⁽ⁿ⁾(z) − z` from the final eigensolve.
    pub defect: f64,
    pub ket: Col<c64>,
}

struct Sample {
    z: f64,
    f: f64,
    ket: Col<c64>,
}

fn refine(family: &dyn FrozenFamily, mut lo: Sample, mut hi_z: f64, opts: &FixedPointOptions) -> Result<Sample> {
    let lo_start = lo.z;
    for _ in 0..opts.max_iterations {
        let mid = 0.5 * (lo.z + hi_z);
        let pairs = eigenpairs(&family.hamiltonian(mid)?)?;
        let (index, overlap) = best_overlap(pairs.vectors.as_ref(), lo.ket.as_ref());
        if overlap < opts.overlap_floor {
            return Err(Error::BranchLost { z: mid, overlap });
        }
        let e = pairs.values[index];
        if !is_real_value(e, opts.tol_real) {
            return Err(Error::ComplexBranch {
                z: mid,
                re: e.re,
                im: e.im,
            });
        }
        let f = e.re - mid;
        let sample = Sample {
            z: mid,
            f,
            ket: column(pairs.vectors.as_ref(), index),
        };
        let width = hi_z - lo.z;
        let converged = width <= opts.refine_tol && f.abs() <= opts.refine_tol * (1.0 + mid.abs());
        let exhausted = mid == lo.z || mid == hi_z;
        if f == 0.0 || converged || exhausted {
            return Ok(sample);
        }
        if (f > 0.0) == (lo.f > 0.0) {
            lo = sample;
        } else {
            hi_z = mid;
        }
    }
    Err(Error::RefinementStall {
        lo: lo_start.min(lo.z),
        hi: hi_z,
        iterations: opts.max_iterations,
    })
}

/// Brackets every sign change of `E⁽ⁿ⁾(z) − z` along the branch and refines
/// it by bisection; roots are returned in ascending order with `j = 0, 1, …`.
pub fn solve_fixed_points(
    family: &dyn FrozenFamily,
    branch: &EnergyBranch,
    opts: &FixedPointOptions,
) -> Result<Vec<FixedPoint>> {
    let f: Vec<f64> = branch
        .z_samples
        .iter()
        .zip(&branch.e_values)
        .map(|(z, e)| e - z)
        .collect();
    let mut roots = Vec::new();
    for k in 0..f.len() {
        if f[k] == 0.0 {
            roots.push(Sample {
                z: branch.z_samples[k],
                f: 0.0,
                ket: branch.kets[k].clone(),
            });
            continue;
        }
        if k + 1 < f.len() && f[k + 1] != 0.0 && (f[k] > 0.0) != (f[k + 1] > 0.0) {
            let lo = Sample {
                z: branch.z_samples[k],
                f: f[k],
                ket: branch.kets[k].clone(),
            };
            roots.push(refine(family, lo, branch.z_samples[k + 1], opts)?);
        }
    }
    Ok(merge_roots(roots, opts.merge_rel)
        .into_iter()
        .enumerate()
        .map(|(j, s)| FixedPoint {
            z: s.z,
            j,
            defect: s.f,
            ket: s.ket,
        })
        .collect())
}

fn merge_roots(mut roots: Vec<Sample>, merge_rel: f64) -> Vec<Sample> {
    roots.sort_by(|a, b| a.z.total_cmp(&b.z));
    let mut merged: Vec<Sample> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last() {
            Some(prev) if (r.z - prev.z).abs() <= merge_rel * (1.0 + r.z.abs()) => {}
            _ => merged.push(r),
        }
    }
    merged
}

/// A physical level `α = (n, j)`: a fixed point together with the right ket
/// and left vector of `H(E_α)` on branch `n`.
#[derive(Clone, Debug)]
pub struct PhysicalLevel {
    pub n: usize,
    pub j: usize,
    pub energy: f64,
    /// `|φ^α⟩`, unit norm.
    pub right: Col<c64>,
    /// `|φ_α⟩` with `⟨φ_α|φ^α⟩ = 1`.
    pub left: Col<c64>,
    /// `‖H(E_α)|φ^α⟩ − E_α|φ^α⟩‖`; absent for hand-built levels.
    pub residual: Option<f64>,
    /// `‖H(E_α)‖` (Frobenius) of the operator the level was extracted from.
    pub operator_norm: Option<f64>,
}

impl PhysicalLevel {
    /// Builds a level from arbitrary vectors, normalising the right ket and
    /// rescaling the left one so that `⟨φ_α|φ^α⟩ = 1`.
    pub fn synthetic(n: usize, j: usize, energy: f64, right: Col<c64>, left: Col<c64>) -> Result<Self> {
        if right.nrows() != left.nrows() {
            return Err(Error::DimensionMismatch {
                expected: right.nrows(),
                found: left.nrows(),
            });
        }
        let norm = right.norm_l2();
        if norm == 0.0 {
            return Err(Error::Parse("zero right ket".into()));
        }
        let right = Col::from_fn(right.nrows(), |i| right[i] / norm);
        let overlap = inner(left.as_ref(), right.as_ref());
        if overlap.norm() < 1e-14 {
            return Err(Error::Parse("left vector orthogonal to right ket".into()));
        }
        let scale = overlap.conj().inv();
        let left = Col::from_fn(left.nrows(), |i| left[i] * scale);
        Ok(Self {
            n,
            j,
            energy,
            right,
            left,
            residual: None,
            operator_norm: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.right.nrows()
    }

    /// `|⟨φ_α|φ^α⟩ − 1|`.
    pub fn self_overlap_defect(&self) -> f64 {
        (inner(self.left.as_ref(), self.right.as_ref()) - c64::new(1.0, 0.0)).norm()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowReport {
    pub n: usize,
    pub window: ZWindow,
    pub roots: usize,
    pub min_overlap: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct CollectedLevels {
    pub levels: Vec<PhysicalLevel>,
    pub windows: Vec<WindowReport>,
    /// Roots whose level extraction failed, as `(n, z, message)`.
    pub extraction_failures: Vec<(usize, f64, String)>,
}

impl CollectedLevels {
    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }
}

/// Traces every branch in `branches` over every window, solves for fixed
/// points and extracts the physical levels. Failures are recorded per
/// `(n, window)` and do not abort the other branches.
pub fn collect_physical(
    family: &dyn FrozenFamily,
    branches: &[usize],
    windows: &[ZWindow],
    opts: &FixedPointOptions,
) -> CollectedLevels {
    let mut out = CollectedLevels::default();
    for &n in branches {
        let mut roots: Vec<Sample> = Vec::new();
        for &window in windows {
            let result = trace_branch(family, n, window.lo, window.hi, opts)
                .and_then(|b| solve_fixed_points(family, &b, opts).map(|r| (b.min_overlap(), r)));
            match result {
                Ok((min_overlap, found)) => {
                    out.windows.push(WindowReport {
                        n,
                        window,
                        roots: found.len(),
                        min_overlap: Some(min_overlap),
                        error: None,
                    });
                    roots.extend(found.into_iter().map(|p| Sample {
                        z: p.z,
                        f: p.defect,
                        ket: p.ket,
                    }));
                }
                Err(e) => out.windows.push(WindowReport {
                    n,
                    window,
                    roots: 0,
                    min_overlap: None,
                    error: Some(e.to_string()),
                }),
            }
        }
        for (j, root) in merge_roots(roots, opts.merge_rel).into_iter().enumerate() {
            match extract_level(family, n, j, &root) {
                Ok(level) => out.levels.push(level),
                Err(e) => out.extraction_failures.push((n, root.z, e.to_string())),
            }
        }
    }
    out
}

fn extract_level(family: &dyn FrozenFamily, n: usize, j: usize, root: &Sample) -> Result<PhysicalLevel> {
    let h = family.hamiltonian(root.z)?;
    let pairs = eigenpairs(&h)?;
    let (index, _) = best_overlap(pairs.vectors.as_ref(), root.ket.as_ref());
    let (right, left) = frozen::single_pair(&h, &pairs, index, &DecomposeOptions::default())?;
    let shifted = h.apply(right.as_ref()) - Col::from_fn(right.nrows(), |i| right[i] * root.z);
    Ok(PhysicalLevel {
        n,
        j,
        energy: root.z,
        right,
        left,
        residual: Some(shifted.norm_l2()),
        operator_norm: Some(h.norm()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_family(values: &'static [f64]) -> FnFamily<impl Fn(f64) -> Result<OperatorMatrix> + Sync> {
        FnFamily(move |_z: f64| Ok(OperatorMatrix::real_diagonal(values)))
    }

    #[test]
    fn constant_branch_is_flat_and_has_one_root() {
        let family = constant_family(&[3.0, 7.0]);
        let opts = FixedPointOptions::default();
        let branch = trace_branch(&family, 0, 0.0, 5.0, &opts).unwrap();
        let spread = branch.e_values.iter().cloned().fold(f64::MIN, f64::max)
            - branch.e_values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-10);
        let roots = solve_fixed_points(&family, &branch, &opts).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0].z - 3.0).abs() < 1e-10);
        assert_eq!(roots[0].j, 0);
    }

    #[test]
    fn hyperbolic_branch_root_at_sqrt_c() {
        let c = 2.5;
        let family = FnFamily(move |z: f64| Ok(OperatorMatrix::real_diagonal(&[c / z])));
        let opts = FixedPointOptions::default();
        let branch = trace_branch(&family, 0, 0.2, 4.0, &opts).unwrap();
        let roots = solve_fixed_points(&family, &branch, &opts).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0].z - c.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn avoided_crossing_keeps_labels() {
        // H(z) = [[z, δ], [δ, −z]]: the lower branch −√(z²+δ²) keeps a ket
        // close to (0,1) for z ≫ δ and close to (1,0) for z ≪ −δ, so index
        // order would swap character at z = 0 while continuation follows the
        // adiabatic branch.
        let delta = 0.1;
        let family = FnFamily(move |z: f64| OperatorMatrix::from_real_rows(&[vec![z, delta], vec![delta, -z]]));
        let opts = FixedPointOptions {
            steps: 200,
            ..Default::default()
        };
        let branch = trace_branch(&family, 0, -1.0, 1.0, &opts).unwrap();
        for (z, e) in branch.z_samples.iter().zip(&branch.e_values) {
            let exact = -(z * z + delta * delta).sqrt();
            assert!((e - exact).abs() < 1e-12);
        }
        // exact lower eigenvector (sin θ, −cos θ)-type with tan 2θ = δ/z
        for (k, z) in branch.z_samples.iter().enumerate() {
            let theta = 0.5 * delta.atan2(*z);
            let exact = [theta.sin(), -theta.cos()];
            let ket = branch.ket(k);
            let ov = (ket[0].conj() * exact[0] + ket[1].conj() * exact[1]).norm();
            assert!((ov - 1.0).abs() < 1e-10, "z = {z}: overlap {ov}");
        }
    }

    #[test]
    fn crossing_without_coupling_follows_diabatic_state() {
        // δ = 0: eigenvalues ±z cross at 0; index order would jump from the
        // z-branch to the −z branch, continuation stays on the (1,0) state.
        let family = FnFamily(|z: f64| Ok(OperatorMatrix::real_diagonal(&[z, -z + 1e-3])));
        let opts = FixedPointOptions {
            steps: 41,
            ..Default::default()
        };
        let branch = trace_branch(&family, 0, -1.0, 1.0, &opts).unwrap();
        for (z, e) in branch.z_samples.iter().zip(&branch.e_values) {
            assert!((e - z).abs() < 1e-14);
        }
        assert!(branch.min_overlap() > 0.999);
    }

    #[test]
    fn branch_index_out_of_range() {
        let family = constant_family(&[1.0, 2.0]);
        let err = trace_branch(&family, 5, 0.0, 1.0, &FixedPointOptions::default()).unwrap_err();
        assert!(matches!(err, Error::BranchIndexOutOfRange { n: 5, dim: 2 }));
    }

    #[test]
    fn complex_branch_is_rejected() {
        let family = FnFamily(|z: f64| OperatorMatrix::from_real_rows(&[vec![0.0, 1.0], vec![z, 0.0]]));
        // eigenvalues ±√z turn imaginary for z < 0
        let err = trace_branch(&family, 1, -1.0, 1.0, &FixedPointOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ComplexBranch { .. }));
    }

    #[test]
    fn window_validation() {
        let family = ModelFamily::new(
            MassModel::ho_quadratic(1.0, 1.0).unwrap(),
            Grid::new(-5.0, 5.0, 21).unwrap(),
            ProblemKind::Schrodinger,
        );
        let opts = FixedPointOptions::default();
        assert!(matches!(
            trace_branch(&family, 0, 0.5, 1.5, &opts),
            Err(Error::InvalidWindow(_))
        ));
        assert!(matches!(
            trace_branch(&family, 0, 2.0, 1.5, &opts),
            Err(Error::InvalidWindow(_))
        ));
    }

    #[test]
    fn no_sign_change_means_no_roots() {
        let family = constant_family(&[10.0]);
        let opts = FixedPointOptions::default();
        let branch = trace_branch(&family, 0, 0.0, 5.0, &opts).unwrap();
        assert!(solve_fixed_points(&family, &branch, &opts).unwrap().is_empty());
    }

    #[test]
    fn bisection_stall_is_reported() {
        let family = FnFamily(|z: f64| Ok(OperatorMatrix::real_diagonal(&[1.0 + 0.0 * z])));
        let opts = FixedPointOptions {
            max_iterations: 3,
            ..Default::default()
        };
        let branch = trace_branch(&family, 0, 0.0, 5.0, &opts).unwrap();
        assert!(matches!(
            solve_fixed_points(&family, &branch, &opts),
            Err(Error::RefinementStall { iterations: 3, .. })
        ));
    }

    #[test]
    fn collect_on_constant_family_reproduces_spectrum() {
        let family = constant_family(&[0.5, 1.5, 2.5]);
        let opts = FixedPointOptions::default();
        let got = collect_physical(&family, &[0, 1, 2], &[ZWindow::new(0.0, 3.0)], &opts);
        assert_eq!(got.levels.len(), 3);
        for (level, want) in got.levels.iter().zip([0.5, 1.5, 2.5]) {
            assert!((level.energy - want).abs() < 1e-10);
            assert_eq!(level.j, 0);
            assert!(level.residual.unwrap() < 1e-9);
            assert!(level.self_overlap_defect() < 1e-12);
        }
    }

    #[test]
    fn failures_are_recorded_per_window() {
        let family = constant_family(&[0.5]);
        let opts = FixedPointOptions::default();
        let got = collect_physical(
            &family,
            &[0, 3],
            &[ZWindow::new(0.0, 1.0), ZWindow::new(2.0, 1.0)],
            &opts,
        );
        assert_eq!(got.levels.len(), 1);
        assert_eq!(got.windows.len(), 4);
        assert_eq!(got.windows.iter().filter(|w| w.error.is_some()).count(), 3);
    }

    #[test]
    fn synthetic_level_normalisation() {
        let right = Col::from_fn(2, |i| c64::new([3.0, 4.0][i], 0.0));
        let left = Col::from_fn(2, |i| c64::new([1.0, 0.0][i], 1.0));
        let level = PhysicalLevel::synthetic(0, 0, 1.0, right, left).unwrap();
        assert!((level.right.norm_l2() - 1.0).abs() < 1e-15);
        assert!(level.self_overlap_defect() < 1e-15);
    }
}
