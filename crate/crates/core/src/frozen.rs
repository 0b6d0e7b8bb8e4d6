//! Bi-orthonormal spectral decomposition of a single frozen operator `H(z)`.
//!
//! Right kets are eigenvectors of `H`, left vectors are eigenvectors of `H†`
//! paired with them by nearest conjugate eigenvalue. Right kets carry unit
//! norm; the whole normalisation factor sits on the left vector so that
//! `⟨Ψ₍ₘ₎|Ψ⁽ⁿ⁾⟩ = δₘₙ`.

use faer::{Col, ColRef, Mat, MatRef, Side};

use crate::c64;
use crate::error::{Error, Result};
use crate::matrix::{weighted_outer_sum, OperatorMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecomposeOptions {
    /// An eigenvalue counts as real when `|Im E| ≤ tol_real·(1 + |E|)`.
    pub tol_real: f64,
    /// Eigenvalues closer than `degeneracy_rel·‖H‖` are rejected.
    pub degeneracy_rel: f64,
    /// Left/right eigenvalues further apart than `pair_rel·‖H‖` do not pair.
    pub pair_rel: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            tol_real: 1e-8,
            degeneracy_rel: 1e-8,
            pair_rel: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FrozenDecomposition {
    /// Frozen parameter the operator was built at, when known.
    pub z: Option<f64>,
    eigenvalues: Vec<c64>,
    right: Mat<c64>,
    left: Mat<c64>,
    hermitian: bool,
    operator_norm: f64,
    pub biorth_residual: f64,
    pub completeness_residual: f64,
    pub reality_flags: Vec<bool>,
}

impl FrozenDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[c64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, n: usize) -> c64 {
        self.eigenvalues[n]
    }

    /// `|Ψ⁽ⁿ⁾⟩`, unit norm.
    pub fn right_ket(&self, n: usize) -> ColRef<'_, c64> {
        self.right.col(n)
    }

    /// `|Ψ₍ₙ₎⟩`, the ket whose adjoint is the left bra `⟨Ψ₍ₙ₎|`.
    pub fn left_vector(&self, n: usize) -> ColRef<'_, c64> {
        self.left.col(n)
    }

    /// Right kets as the columns of a matrix.
    pub fn right_kets(&self) -> MatRef<'_, c64> {
        self.right.as_ref()
    }

    /// Left vectors as the columns of a matrix.
    pub fn left_vectors(&self) -> MatRef<'_, c64> {
        self.left.as_ref()
    }

    /// True when the input was Hermitian and the fast path was taken.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Frobenius norm of the decomposed operator.
    pub fn operator_norm(&self) -> f64 {
        self.operator_norm
    }

    pub fn all_real(&self) -> bool {
        self.reality_flags.iter().all(|&r| r)
    }

    /// `Σₙ |Ψ⁽ⁿ⁾⟩ E⁽ⁿ⁾ ⟨Ψ₍ₙ₎|`.
    pub fn reconstruct(&self) -> OperatorMatrix {
        OperatorMatrix::from_mat_unchecked(weighted_outer_sum(
            self.right.as_ref(),
            &self.eigenvalues,
            self.left.as_ref(),
        ))
    }

    /// `Σₙ sₙ |Ψ₍ₙ₎⟩⟨Ψ₍ₙ₎|`, a pseudo-metric for `H`; positive with all `sₙ = +1`.
    pub fn eta(&self, signs: &[f64]) -> Result<OperatorMatrix> {
        let weights = self.metric_weights(signs)?;
        Ok(OperatorMatrix::from_mat_unchecked(weighted_outer_sum(
            self.left.as_ref(),
            &weights,
            self.left.as_ref(),
        )))
    }

    /// `Σₙ sₙ |Ψ⁽ⁿ⁾⟩⟨Ψ⁽ⁿ⁾|`, the inverse of [`eta`](Self::eta) for the same signs.
    pub fn eta_inverse(&self, signs: &[f64]) -> Result<OperatorMatrix> {
        let weights = self.metric_weights(signs)?;
        Ok(OperatorMatrix::from_mat_unchecked(weighted_outer_sum(
            self.right.as_ref(),
            &weights,
            self.right.as_ref(),
        )))
    }

    /// The all-plus metric `η₊`.
    pub fn eta_plus(&self) -> Result<OperatorMatrix> {
        self.eta(&vec![1.0; self.len()])
    }

    fn metric_weights(&self, signs: &[f64]) -> Result<Vec<c64>> {
        if signs.len() != self.len() {
            return Err(Error::InvalidSigns(format!(
                "expected {} signs, got {}",
                self.len(),
                signs.len()
            )));
        }
        if let Some(s) = signs.iter().find(|&&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidSigns(format!("sign {s} is not ±1")));
        }
        if let Some(index) = self.reality_flags.iter().position(|&r| !r) {
            let e = self.eigenvalues[index];
            return Err(Error::ComplexSpectrum {
                index,
                re: e.re,
                im: e.im,
            });
        }
        Ok(signs.iter().map(|&s| c64::new(s, 0.0)).collect())
    }
}

/// Unit-norm eigenvectors with the largest component real and positive,
/// sorted by real then imaginary part of the eigenvalue.
#[derive(Clone, Debug)]
pub(crate) struct Eigenpairs {
    pub values: Vec<c64>,
    pub vectors: Mat<c64>,
    pub hermitian: bool,
}

pub(crate) fn is_hermitian(h: &OperatorMatrix) -> bool {
    let n = h.dim();
    let mut defect = 0.0;
    let mut norm = 0.0;
    for j in 0..n {
        for i in 0..n {
            let a = h[(i, j)];
            norm += a.norm_sqr();
            if i <= j {
                let d = (a - h[(j, i)].conj()).norm_sqr();
                defect += if i == j { d } else { 2.0 * d };
            }
        }
    }
    defect.sqrt() <= 4.0 * f64::EPSILON * norm.sqrt()
}

pub(crate) fn eigenpairs(h: &OperatorMatrix) -> Result<Eigenpairs> {
    let n = h.dim();
    let solver_err = |e: faer::linalg::evd::EvdError| Error::Eigensolver(format!("{e:?}"));

    let hermitian = is_hermitian(h);
    if hermitian && h.is_real() {
        let (values, u) = if is_tridiagonal(h) {
            real_tridiagonal_evd(h)?
        } else {
            let real = Mat::from_fn(n, n, |i, j| h[(i, j)].re);
            let evd = real.self_adjoint_eigen(Side::Lower).map_err(solver_err)?;
            let s = evd.S().column_vector();
            ((0..n).map(|k| s[k]).collect(), evd.U().to_owned())
        };
        return Ok(real_pairs(values, u));
    }
    let (mut values, mut vectors) = if hermitian {
        let evd = h.as_ref().self_adjoint_eigen(Side::Lower).map_err(solver_err)?;
        let s = evd.S().column_vector();
        (
            (0..n).map(|k| c64::new(s[k].re, 0.0)).collect::<Vec<_>>(),
            evd.U().to_owned(),
        )
    } else {
        let evd = h.as_ref().eigen().map_err(solver_err)?;
        let s = evd.S().column_vector();
        ((0..n).map(|k| s[k]).collect::<Vec<_>>(), evd.U().to_owned())
    };

    for k in 0..n {
        normalize_with_phase(vectors.col_mut(k));
    }

    let order = sort_order(&values);
    let sorted_vectors = Mat::from_fn(n, n, |i, k| vectors[(i, order[k])]);
    values = order.iter().map(|&k| values[k]).collect();
    vectors = sorted_vectors;

    Ok(Eigenpairs {
        values,
        vectors,
        hermitian,
    })
}

fn sort_order(values: &[c64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .re
            .total_cmp(&values[b].re)
            .then(values[a].im.total_cmp(&values[b].im))
    });
    order
}

/// Sorting, normalisation and the phase convention for real eigenvectors in a
/// single pass.
fn real_pairs(values: Vec<f64>, u: Mat<f64>) -> Eigenpairs {
    let n = values.len();
    let complex: Vec<c64> = values.iter().map(|&v| c64::new(v, 0.0)).collect();
    let order = sort_order(&complex);
    let scale: Vec<f64> = (0..n)
        .map(|k| {
            let col = u.col(k);
            let norm = col.norm_l2();
            let mut pivot = 0;
            let mut best = -1.0;
            for i in 0..n {
                let m = col[i].abs();
                if m > best * (1.0 + 1e-12) {
                    best = m;
                    pivot = i;
                }
            }
            if norm == 0.0 {
                1.0
            } else {
                col[pivot].signum() / norm
            }
        })
        .collect();
    Eigenpairs {
        values: order.iter().map(|&k| complex[k]).collect(),
        vectors: Mat::from_fn(n, n, |i, k| c64::new(u[(i, order[k])] * scale[order[k]], 0.0)),
        hermitian: true,
    }
}

fn is_tridiagonal(h: &OperatorMatrix) -> bool {
    let n = h.dim();
    (0..n).all(|j| (0..n).all(|i| i.abs_diff(j) <= 1 || h[(i, j)] == c64::new(0.0, 0.0)))
}

/// Eigenpairs of a real symmetric tridiagonal matrix without the dense
/// Householder reduction; every finite-difference Hamiltonian takes this path.
fn real_tridiagonal_evd(h: &OperatorMatrix) -> Result<(Vec<f64>, Mat<f64>)> {
    use faer::dyn_stack::{MemBuffer, MemStack};
    use faer::linalg::evd::{self_adjoint_evd_scratch, tridiagonal_self_adjoint_evd, ComputeEigenvectors};

    let n = h.dim();
    let diag = Col::from_fn(n, |i| h[(i, i)].re);
    let sub = Col::from_fn(n.saturating_sub(1), |i| h[(i + 1, i)].re);
    let mut s = Col::<f64>::zeros(n);
    let mut u = Mat::<f64>::zeros(n, n);
    let par = faer::Par::Seq;
    let mut buffer = MemBuffer::new(self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::Yes,
        par,
        Default::default(),
    ));
    tridiagonal_self_adjoint_evd(
        diag.as_diagonal(),
        sub.as_diagonal(),
        s.as_diagonal_mut(),
        Some(u.as_mut()),
        par,
        MemStack::new(&mut buffer),
        Default::default(),
    )
    .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    Ok((s.iter().copied().collect(), u))
}

fn normalize_with_phase(mut v: faer::ColMut<'_, c64>) {
    let norm = v.norm_l2();
    if norm == 0.0 {
        return;
    }
    let mut pivot = 0;
    let mut best = -1.0;
    for i in 0..v.nrows() {
        // strict comparison with a small margin keeps the pivot stable under
        // round-off when two components have nearly equal modulus
        let m = v[i].norm();
        if m > best * (1.0 + 1e-12) {
            best = m;
            pivot = i;
        }
    }
    let phase = v[pivot].conj() / v[pivot].norm();
    let scale = phase / norm;
    for i in 0..v.nrows() {
        v[i] *= scale;
    }
    v[pivot] = c64::new(v[pivot].re, 0.0);
}

/// Frozen-parameter bi-orthonormal decomposition with default tolerances.
pub fn decompose(h: &OperatorMatrix) -> Result<FrozenDecomposition> {
    decompose_with(h, &DecomposeOptions::default())
}

pub fn decompose_with(h: &OperatorMatrix, opts: &DecomposeOptions) -> Result<FrozenDecomposition> {
    let n = h.dim();
    let norm = h.norm();
    let right = eigenpairs(h)?;
    check_simple(&right.values, opts.degeneracy_rel * norm)?;

    let left = if right.hermitian {
        right.vectors.clone()
    } else {
        let adjoint = eigenpairs(&h.adjoint())?;
        let partner = pair_conjugates(&right.values, &adjoint.values, opts.pair_rel * norm)?;
        let mut left = Mat::from_fn(n, n, |i, k| adjoint.vectors[(i, partner[k])]);
        for k in 0..n {
            let overlap = crate::matrix::inner(left.col(k), right.vectors.col(k));
            if overlap.norm() < 1e-14 {
                return Err(Error::Eigensolver(format!(
                    "left and right eigenvectors {k} are numerically orthogonal"
                )));
            }
            let scale = overlap.conj().inv();
            for i in 0..n {
                left[(i, k)] *= scale;
            }
        }
        left
    };

    let gram = left.adjoint() * &right.vectors;
    let biorth_residual = (0..n)
        .flat_map(|m| (0..n).map(move |k| (m, k)))
        .map(|(m, k)| {
            let delta = if m == k { 1.0 } else { 0.0 };
            (gram[(m, k)] - c64::new(delta, 0.0)).norm()
        })
        .fold(0.0, f64::max);
    let completeness = &right.vectors * left.adjoint();
    let completeness_residual = (&completeness - Mat::<c64>::identity(n, n)).norm_l2();

    let reality_flags = right.values.iter().map(|e| is_real_value(*e, opts.tol_real)).collect();

    Ok(FrozenDecomposition {
        z: None,
        eigenvalues: right.values,
        right: right.vectors,
        left,
        hermitian: right.hermitian,
        operator_norm: norm,
        biorth_residual,
        completeness_residual,
        reality_flags,
    })
}

/// Right ket and dual left vector of the eigenvalue `right.values[index]`.
/// Only that eigenvalue has to be simple; the rest of the spectrum may be
/// degenerate.
pub(crate) fn single_pair(
    h: &OperatorMatrix,
    right: &Eigenpairs,
    index: usize,
    opts: &DecomposeOptions,
) -> Result<(Col<c64>, Col<c64>)> {
    let norm = h.norm();
    let e = right.values[index];
    let tolerance = opts.degeneracy_rel * norm;
    let gap = right
        .values
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != index)
        .map(|(_, v)| (v - e).norm())
        .fold(f64::INFINITY, f64::min);
    if gap < tolerance {
        return Err(Error::DegenerateSpectrum { gap, tolerance });
    }
    let r = column(right.vectors.as_ref(), index);
    if right.hermitian {
        return Ok((r.clone(), r));
    }
    let adjoint = eigenpairs(&h.adjoint())?;
    let (k, distance) = adjoint
        .values
        .iter()
        .map(|w| (e - w.conj()).norm())
        .enumerate()
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    if distance > opts.pair_rel * norm {
        return Err(Error::PairingFailure {
            re: e.re,
            im: e.im,
            distance,
        });
    }
    let l = column(adjoint.vectors.as_ref(), k);
    let overlap = crate::matrix::inner(l.as_ref(), r.as_ref());
    if overlap.norm() < 1e-14 {
        return Err(Error::Eigensolver(format!(
            "left and right eigenvectors {index} are numerically orthogonal"
        )));
    }
    let scale = overlap.conj().inv();
    Ok((r, Col::from_fn(l.nrows(), |i| l[i] * scale)))
}

pub(crate) fn is_real_value(e: c64, tol_real: f64) -> bool {
    e.im.abs() <= tol_real * (1.0 + e.norm())
}

fn check_simple(values: &[c64], tolerance: f64) -> Result<()> {
    let mut gap = f64::INFINITY;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            gap = gap.min((a - b).norm());
        }
    }
    if gap < tolerance || (values.len() > 1 && gap == 0.0) {
        return Err(Error::DegenerateSpectrum { gap, tolerance });
    }
    Ok(())
}

/// Greedy nearest-conjugate matching; `result[k]` indexes `adjoint_values`.
fn pair_conjugates(values: &[c64], adjoint_values: &[c64], tolerance: f64) -> Result<Vec<usize>> {
    let n = values.len();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, v) in values.iter().enumerate() {
        for (j, w) in adjoint_values.iter().enumerate() {
            candidates.push(((v - w.conj()).norm(), i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut partner = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let mut assigned = 0;
    for (distance, i, j) in candidates {
        if partner[i] != usize::MAX || taken[j] {
            continue;
        }
        if distance > tolerance {
            let v = values[i];
            return Err(Error::PairingFailure {
                re: v.re,
                im: v.im,
                distance,
            });
        }
        partner[i] = j;
        taken[j] = true;
        assigned += 1;
        if assigned == n {
            break;
        }
    }
    Ok(partner)
}

/// Split of a spectrum into real values and complex-conjugate pairs.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct SpectrumClassification {
    pub real: Vec<usize>,
    pub conjugate_pairs: Vec<(usize, usize)>,
    /// Complex eigenvalues without a conjugate partner.
    pub unpaired: Vec<usize>,
}

impl SpectrumClassification {
    pub fn is_entirely_real(&self) -> bool {
        self.conjugate_pairs.is_empty() && self.unpaired.is_empty()
    }

    /// Set when the spectrum is not symmetric under complex conjugation.
    pub fn conjugation_warning(&self) -> bool {
        !self.unpaired.is_empty()
    }
}

pub fn classify_spectrum(dec: &FrozenDecomposition, tol_real: f64) -> SpectrumClassification {
    classify_values(dec.eigenvalues(), tol_real)
}

pub(crate) fn classify_values(values: &[c64], tol_real: f64) -> SpectrumClassification {
    let mut out = SpectrumClassification::default();
    let mut used = vec![false; values.len()];
    for (i, e) in values.iter().enumerate() {
        if is_real_value(*e, tol_real) {
            out.real.push(i);
            used[i] = true;
        }
    }
    for i in 0..values.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let target = values[i].conj();
        let tol = tol_real.max(1e-8) * (1.0 + target.norm());
        let partner = (0..values.len())
            .filter(|&j| !used[j])
            .map(|j| (j, (values[j] - target).norm()))
            .filter(|&(_, d)| d <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match partner {
            Some((j, _)) => {
                used[j] = true;
                out.conjugate_pairs.push((i.min(j), i.max(j)));
            }
            None => out.unpaired.push(i),
        }
    }
    out
}

/// Eigenvector with the largest `|⟨reference|v⟩|` among unit-norm columns.
pub(crate) fn best_overlap(vectors: MatRef<'_, c64>, reference: ColRef<'_, c64>) -> (usize, f64) {
    let reference_norm = reference.norm_l2();
    (0..vectors.ncols())
        .map(|k| {
            let ov = crate::matrix::inner(reference, vectors.col(k)).norm() / reference_norm;
            (k, ov)
        })
        .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

pub(crate) fn column(m: MatRef<'_, c64>, k: usize) -> Col<c64> {
    m.col(k).to_owned()
}
