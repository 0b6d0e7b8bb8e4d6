//! Energy-independent operators and metrics built from a set of physical
//! levels.
//!
//! With `Φ` the right kets and `Λ` the left vectors as matrix columns,
//! `R = Λ†Φ` and `E = diag(E_α)`:
//!
//! ```text
//! |φ^β⟩⟩ = ΦR⁻¹        ⟨⟨φ_α| = R⁻¹Λ†       |φ_α⟩⟩ = ΛR⁻†
//! K = Φ E R⁻¹Λ†         L = ΦR⁻¹ E Λ†
//! μ = ΛR⁻†R⁻¹Λ†        μ⁻¹ = ΦΦ†
//! ν = ΛΛ†              ν⁻¹ = ΦR⁻¹R⁻†Φ†
//! ```
//!
//! For a complete level set the inverses are exact. For `|A| < N` the products
//! `μμ⁻¹` and `νν⁻¹` reduce to `Π†`, where `Π = ΦR⁻¹Λ†` is the oblique
//! projector onto the span of the right kets.

use faer::{Col, ColRef, Mat, MatRef};

use crate::c64;
use crate::error::{Error, Result};
use crate::fixedpoint::PhysicalLevel;
use crate::matrix::{condition_from_singular_values, weighted_outer_sum, OperatorMatrix};

/// Overlap matrices worse than this are rejected.
pub const MAX_OVERLAP_CONDITION: f64 = 1e10;

#[derive(Clone, Debug)]
pub struct PhysicalBasis {
    levels: Vec<PhysicalLevel>,
    right: Mat<c64>,
    left: Mat<c64>,
    r: Mat<c64>,
    r_inv: Mat<c64>,
    condition_r: f64,
    double_kets: Mat<c64>,
    dressed_left: Mat<c64>,
}

impl PhysicalBasis {
    pub fn levels(&self) -> &[PhysicalLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Ambient dimension `N`.
    pub fn dim(&self) -> usize {
        self.right.nrows()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    /// `R_α^β = ⟨φ_α|φ^β⟩`.
    pub fn overlap(&self) -> MatRef<'_, c64> {
        self.r.as_ref()
    }

    pub fn overlap_inverse(&self) -> MatRef<'_, c64> {
        self.r_inv.as_ref()
    }

    pub fn condition_r(&self) -> f64 {
        self.condition_r
    }

    pub fn right_kets(&self) -> MatRef<'_, c64> {
        self.right.as_ref()
    }

    pub fn left_vectors(&self) -> MatRef<'_, c64> {
        self.left.as_ref()
    }

    /// `|φ^β⟩⟩ = Σ_α |φ^α⟩(R⁻¹)_α^β`.
    pub fn double_ket(&self, beta: usize) -> ColRef<'_, c64> {
        self.double_kets.col(beta)
    }

    /// `|φ_α⟩⟩ = Σ_β |φ_β⟩((R†)⁻¹)^β_α`; its adjoint is the double bra `⟨⟨φ_α|`.
    pub fn dressed_left(&self, alpha: usize) -> ColRef<'_, c64> {
        self.dressed_left.col(alpha)
    }

    pub fn double_kets(&self) -> MatRef<'_, c64> {
        self.double_kets.as_ref()
    }

    pub fn dressed_lefts(&self) -> MatRef<'_, c64> {
        self.dressed_left.as_ref()
    }

    /// `max |⟨⟨φ_α|φ^β⟩ − δ|` and `max |⟨φ_α|φ^β⟩⟩ − δ|`.
    pub fn duality_residuals(&self) -> (f64, f64) {
        let bras_on_kets = self.dressed_left.adjoint() * &self.right;
        let lefts_on_double = self.left.adjoint() * &self.double_kets;
        (
            identity_defect(bras_on_kets.as_ref()),
            identity_defect(lefts_on_double.as_ref()),
        )
    }

    /// `max_α |R_αα − 1|`.
    pub fn diagonal_defect(&self) -> f64 {
        (0..self.len())
            .map(|a| (self.r[(a, a)] - c64::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max)
    }

    /// `Σ_β |φ^β⟩⟩⟨φ_β|`.
    pub fn unit_projector(&self) -> OperatorMatrix {
        let ones = vec![c64::new(1.0, 0.0); self.len()];
        OperatorMatrix::from_mat_unchecked(weighted_outer_sum(self.double_kets.as_ref(), &ones, self.left.as_ref()))
    }

    /// `Σ_α |φ^α⟩⟨⟨φ_α|`, the same operator summed the other way round.
    pub fn unit_projector_alt(&self) -> OperatorMatrix {
        let ones = vec![c64::new(1.0, 0.0); self.len()];
        OperatorMatrix::from_mat_unchecked(weighted_outer_sum(
            self.right.as_ref(),
            &ones,
            self.dressed_left.as_ref(),
        ))
    }

    fn energy_weights(&self) -> Vec<c64> {
        self.levels.iter().map(|l| c64::new(l.energy, 0.0)).collect()
    }
}

fn identity_defect(m: MatRef<'_, c64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let delta = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - c64::new(delta, 0.0)).norm());
        }
    }
    worst
}

/// Inverse and 2-norm condition number through the SVD `A = U S V†`.
pub(crate) fn svd_inverse(a: MatRef<'_, c64>) -> Result<(Mat<c64>, f64)> {
    let svd = a.svd().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|v| v.re).collect();
    let mut sorted = s.clone();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let condition = condition_from_singular_values(&sorted);
    if !condition.is_finite() {
        return Ok((Mat::zeros(a.ncols(), a.nrows()), condition));
    }
    let u = svd.U();
    let v = svd.V();
    let k = s.len();
    let inv = Mat::from_fn(a.ncols(), a.nrows(), |i, j| {
        (0..k).fold(c64::new(0.0, 0.0), |acc, m| acc + v[(i, m)] * u[(j, m)].conj() / s[m])
    });
    Ok((inv, condition))
}

pub fn build_basis(levels: Vec<PhysicalLevel>) -> Result<PhysicalBasis> {
    let Some(first) = levels.first() else {
        return Err(Error::EmptyBasis);
    };
    let n = first.dim();
    if let Some(bad) = levels.iter().find(|l| l.dim() != n || l.left.nrows() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.dim(),
        });
    }
    let k = levels.len();
    if k > n {
        return Err(Error::TooManyLevels { levels: k, dim: n });
    }
    if levels.iter().any(|l| !l.energy.is_finite()) {
        return Err(Error::NonFinite);
    }
    let right = Mat::from_fn(n, k, |i, a| levels[a].right[i]);
    let left = Mat::from_fn(n, k, |i, a| levels[a].left[i]);
    let r = left.adjoint() * &right;
    let (r_inv, condition_r) = svd_inverse(r.as_ref())?;
    if condition_r.is_nan() || condition_r > MAX_OVERLAP_CONDITION {
        return Err(Error::IllConditionedOverlap { condition: condition_r });
    }
    let double_kets = &right * &r_inv;
    let dressed_left = &left * r_inv.adjoint();
    Ok(PhysicalBasis {
        levels,
        right,
        left,
        r,
        r_inv,
        condition_r,
        double_kets,
        dressed_left,
    })
}

/// How far `Σ_β |φ^β⟩⟩⟨φ_β|` is from being the unit projector: `‖Π − I‖` for a
/// complete set, otherwise the larger of `‖Π² − Π‖` and `‖ΠΦ − Φ‖`.
pub fn projector_residual(basis: &PhysicalBasis) -> f64 {
    let pi = basis.unit_projector();
    if basis.len() == basis.dim() {
        return (&pi - &OperatorMatrix::identity(basis.dim())).norm();
    }
    let idempotency = (&(&pi * &pi) - &pi).norm();
    let on_span = (pi.as_mat() * &basis.right - &basis.right).norm_l2();
    idempotency.max(on_span)
}

/// `K = Σ_α |φ^α⟩E_α⟨⟨φ_α|`, reproducing `K|φ^β⟩ = E_β|φ^β⟩`.
pub fn build_k(basis: &PhysicalBasis) -> OperatorMatrix {
    OperatorMatrix::from_mat_unchecked(weighted_outer_sum(
        basis.right.as_ref(),
        &basis.energy_weights(),
        basis.dressed_left.as_ref(),
    ))
}

/// `L = Σ_β |φ^β⟩⟩E_β⟨φ_β|`, reproducing `⟨φ_α|L = E_α⟨φ_α|`.
pub fn build_l(basis: &PhysicalBasis) -> OperatorMatrix {
    OperatorMatrix::from_mat_unchecked(weighted_outer_sum(
        basis.double_kets.as_ref(),
        &basis.energy_weights(),
        basis.left.as_ref(),
    ))
}

#[derive(Clone, Debug)]
pub struct MetricSuite {
    pub mu: OperatorMatrix,
    pub mu_inv: OperatorMatrix,
    pub nu: OperatorMatrix,
    pub nu_inv: OperatorMatrix,
    pub eta_plus: Option<OperatorMatrix>,
    pub charge_c: Option<OperatorMatrix>,
    /// `‖K†μ − μK‖`.
    pub residual_k: f64,
    /// `‖νL − L†ν‖`.
    pub residual_l: f64,
    /// Smallest eigenvalue of `μ` on its range.
    pub min_eig_mu: f64,
    pub min_eig_nu: f64,
    /// `‖μμ⁻¹ − Π†‖`, equal to `‖μμ⁻¹ − I‖` for a complete set.
    pub mu_inverse_residual: f64,
    pub nu_inverse_residual: f64,
    pub hermiticity_mu: f64,
    pub hermiticity_nu: f64,
}

pub fn build_metrics(basis: &PhysicalBasis, k: &OperatorMatrix, l: &OperatorMatrix) -> Result<MetricSuite> {
    if k.dim() != basis.dim() || l.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: if k.dim() != basis.dim() { k.dim() } else { l.dim() },
        });
    }
    let ones = vec![c64::new(1.0, 0.0); basis.len()];
    let outer = |m: &Mat<c64>| OperatorMatrix::from_mat_unchecked(weighted_outer_sum(m.as_ref(), &ones, m.as_ref()));
    let mu = outer(&basis.dressed_left);
    let mu_inv = outer(&basis.right);
    let nu = outer(&basis.left);
    let nu_inv = outer(&basis.double_kets);

    let residual_k = (&(&k.adjoint() * &mu) - &(&mu * k)).norm();
    let residual_l = (&(&nu * l) - &(&l.adjoint() * &nu)).norm();

    let target = basis.unit_projector().adjoint();
    let mu_inverse_residual = (&(&mu * &mu_inv) - &target).norm();
    let nu_inverse_residual = (&(&nu * &nu_inv) - &target).norm();

    Ok(MetricSuite {
        min_eig_mu: min_eig_on_range(&mu, basis.len())?,
        min_eig_nu: min_eig_on_range(&nu, basis.len())?,
        hermiticity_mu: mu.hermiticity_defect(),
        hermiticity_nu: nu.hermiticity_defect(),
        mu,
        mu_inv,
        nu,
        nu_inv,
        eta_plus: None,
        charge_c: None,
        residual_k,
        residual_l,
        mu_inverse_residual,
        nu_inverse_residual,
    })
}

/// A rank-`rank` positive semidefinite matrix is positive on its range iff its
/// `rank` largest eigenvalues are; this returns the smallest of them.
fn min_eig_on_range(m: &OperatorMatrix, rank: usize) -> Result<f64> {
    let eigs = m.hermitian_eigenvalues()?;
    Ok(eigs[eigs.len() - rank])
}

#[derive(Clone, Debug)]
pub struct Charge {
    pub c: OperatorMatrix,
    /// `‖C² − I‖`, reported but never required to vanish.
    pub involution_defect: f64,
}

/// `C = η₊P`, using `P⁻¹ = P`.
pub fn build_charge(eta_plus: &OperatorMatrix, parity: &OperatorMatrix) -> Result<Charge> {
    if eta_plus.dim() != parity.dim() {
        return Err(Error::DimensionMismatch {
            expected: eta_plus.dim(),
            found: parity.dim(),
        });
    }
    let c = eta_plus * parity;
    let involution_defect = (&(&c * &c) - &OperatorMatrix::identity(c.dim())).norm();
    Ok(Charge { c, involution_defect })
}

/// Two unit right kets `e₁, e₂` with left vectors `e₁ + c̄e₂` and `e₂`, so
/// that `R = [[1, c], [0, 1]]`. Embedded in `dim ≥ 2` dimensions.
pub fn two_level_fixture(c: c64, energies: [f64; 2], dim: usize) -> Result<Vec<PhysicalLevel>> {
    if dim < 2 {
        return Err(Error::InvalidModel(format!("fixture needs dim ≥ 2, got {dim}")));
    }
    let unit = |k: usize| Col::from_fn(dim, |i| c64::new(if i == k { 1.0 } else { 0.0 }, 0.0));
    let left0 = Col::from_fn(dim, |i| match i {
        0 => c64::new(1.0, 0.0),
        1 => c.conj(),
        _ => c64::new(0.0, 0.0),
    });
    Ok(vec![
        PhysicalLevel::synthetic(0, 0, energies[0], unit(0), left0)?,
        PhysicalLevel::synthetic(1, 0, energies[1], unit(1), unit(1))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frozen::decompose;

    fn eigenbasis_levels(h: &OperatorMatrix, count: usize) -> Vec<PhysicalLevel> {
        let dec = decompose(h).unwrap();
        (0..count)
            .map(|a| PhysicalLevel {
                n: a,
                j: 0,
                energy: dec.eigenvalue(a).re,
                right: dec.right_ket(a).to_owned(),
                left: dec.left_vector(a).to_owned(),
                residual: None,
                operator_norm: None,
            })
            .collect()
    }

    fn sample_h() -> OperatorMatrix {
        OperatorMatrix::from_real_rows(&[
            vec![2.0, -1.0, 0.0, 0.3],
            vec![-1.0, 2.5, -1.0, 0.0],
            vec![0.0, -1.0, 3.0, -1.0],
            vec![0.3, 0.0, -1.0, 4.0],
        ])
        .unwrap()
    }

    #[test]
    fn single_level_is_trivial() {
        let levels = eigenbasis_levels(&sample_h(), 1);
        let basis = build_basis(levels).unwrap();
        assert!((basis.overlap()[(0, 0)] - c64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((basis.double_ket(0) - basis.right_kets().col(0)).norm_l2() < 1e-12);
        let k = build_k(&basis);
        let e = basis.energies()[0];
        let residual = k.apply(basis.right_kets().col(0)) - Col::from_fn(4, |i| basis.right_kets()[(i, 0)] * e);
        assert!(residual.norm_l2() < 1e-12);
    }

    #[test]
    fn constant_mass_limit() {
        let h = sample_h();
        let basis = build_basis(eigenbasis_levels(&h, 4)).unwrap();
        assert!(identity_defect(basis.overlap()) < 1e-12);
        assert!(projector_residual(&basis) < 1e-8);
        let k = build_k(&basis);
        let l = build_l(&basis);
        assert!((&k - &h).norm() < 1e-8);
        assert!((&l - &h).norm() < 1e-8);
        let m = build_metrics(&basis, &k, &l).unwrap();
        let id = OperatorMatrix::identity(4);
        assert!((&m.mu - &id).norm() < 1e-8 && (&m.nu - &id).norm() < 1e-8);
        assert!(m.residual_k < 1e-10 && m.residual_l < 1e-10);
        assert!((m.min_eig_mu - 1.0).abs() < 1e-8);
    }

    #[test]
    fn two_level_fixture_contracts() {
        let c = c64::new(0.4, -0.3);
        let basis = build_basis(two_level_fixture(c, [1.0, 2.5], 2).unwrap()).unwrap();
        assert!((basis.overlap()[(0, 1)] - c).norm() < 1e-15);
        assert!(basis.overlap()[(1, 0)].norm() < 1e-15);
        let (d1, d2) = basis.duality_residuals();
        assert!(d1 < 1e-12 && d2 < 1e-12);
        let k = build_k(&basis);
        let l = build_l(&basis);
        for (b, e) in basis.energies().into_iter().enumerate() {
            let ket = basis.right_kets().col(b);
            let diff = k.apply(ket) - Col::from_fn(2, |i| ket[i] * e);
            assert!(diff.norm_l2() < 1e-10);
            let bra = basis.left_vectors().col(b);
            // ⟨φ_α|L as a column: L†|φ_α⟩
            let diff = l.adjoint().apply(bra) - Col::from_fn(2, |i| bra[i] * e);
            assert!(diff.norm_l2() < 1e-10);
        }
        assert!((&k - &l).norm() > 1e-3);
        let m = build_metrics(&basis, &k, &l).unwrap();
        assert!(m.residual_k < 1e-9 && m.residual_l < 1e-9);
        assert!(m.mu_inverse_residual < 1e-8 && m.nu_inverse_residual < 1e-8);
        assert!(m.hermiticity_mu < 1e-10 && m.hermiticity_nu < 1e-10);
        assert!(m.min_eig_mu > 0.0 && m.min_eig_nu > 0.0);
    }

    #[test]
    fn incomplete_basis_projector() {
        let c = c64::new(0.7, 0.2);
        let basis = build_basis(two_level_fixture(c, [1.0, 2.0], 5).unwrap()).unwrap();
        assert!(projector_residual(&basis) < 1e-8);
        assert!((&basis.unit_projector() - &basis.unit_projector_alt()).norm() < 1e-10);
        let k = build_k(&basis);
        let l = build_l(&basis);
        let m = build_metrics(&basis, &k, &l).unwrap();
        assert!(m.mu_inverse_residual < 1e-8 && m.nu_inverse_residual < 1e-8);
        assert!(m.min_eig_mu > 0.0);
    }

    #[test]
    fn duplicated_level_is_ill_conditioned() {
        let mut levels = two_level_fixture(c64::new(0.1, 0.0), [1.0, 2.0], 3).unwrap();
        levels[1] = levels[0].clone();
        assert!(matches!(build_basis(levels), Err(Error::IllConditionedOverlap { .. })));
    }

    #[test]
    fn too_many_and_empty() {
        assert!(matches!(build_basis(Vec::new()), Err(Error::EmptyBasis)));
        let mut levels = two_level_fixture(c64::new(0.0, 0.0), [1.0, 2.0], 2).unwrap();
        levels.push(levels[0].clone());
        assert!(matches!(
            build_basis(levels),
            Err(Error::TooManyLevels { levels: 3, dim: 2 })
        ));
    }

    #[test]
    fn charge_with_trivial_metric_is_parity() {
        let p =
            OperatorMatrix::from_real_rows(&[vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let charge = build_charge(&OperatorMatrix::identity(3), &p).unwrap();
        assert_eq!(charge.c, p);
        assert!(charge.involution_defect < 1e-15);
    }

    #[test]
    fn svd_inverse_matches_identity() {
        let a = Mat::from_fn(3, 3, |i, j| {
            c64::new(
                (i + 2 * j) as f64 + if i == j { 5.0 } else { 0.0 },
                (i as f64) - (j as f64),
            )
        });
        let (inv, cond) = svd_inverse(a.as_ref()).unwrap();
        assert!(cond > 1.0 && cond.is_finite());
        assert!(identity_defect((&a * &inv).as_ref()) < 1e-12);
    }
}
