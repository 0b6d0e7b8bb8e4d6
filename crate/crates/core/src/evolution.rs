//! Feshbach-Villars evolution `i∂ₜΦ = ĥΦ` with `Φ = (φ₁, φ₂)`, where `φ₂` is
//! the Klein-Gordon wave function and `φ₁ = i∂ₜφ₂`.
//!
//! Propagation is exact: `Φ(t) = Σₖ |rₖ⟩ e^{−iεₖt} ⟨lₖ|Φ(0)⟩` over the
//! bi-orthonormal eigenpairs of `ĥ`.

use faer::Col;
use serde::Serialize;

use crate::c64;
use crate::error::{Error, Result};
use crate::frozen::{classify_spectrum, decompose, FrozenDecomposition, SpectrumClassification};
use crate::matrix::{inner, OperatorMatrix};
use crate::operators::{intertwining_residual, FvSystem, Grid};

/// Relative drift below which the pseudo-norm counts as conserved.
pub const DRIFT_TOLERANCE: f64 = 1e-8;
/// A metric intertwines `ĥ` when `‖Mĥ − ĥ†M‖ ≤ INTERTWINING_TOLERANCE·‖ĥ‖·‖M‖`.
pub const INTERTWINING_TOLERANCE: f64 = 1e-10;
const NORM_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub struct FvState {
    pub phi1: Col<c64>,
    pub phi2: Col<c64>,
    pub t: f64,
}

impl FvState {
    pub fn new(phi1: Col<c64>, phi2: Col<c64>, t: f64) -> Result<Self> {
        if phi1.nrows() != phi2.nrows() {
            return Err(Error::DimensionMismatch {
                expected: phi2.nrows(),
                found: phi1.nrows(),
            });
        }
        let finite = phi1.iter().chain(phi2.iter()).all(|v| v.is_finite());
        if !finite || !t.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { phi1, phi2, t })
    }

    /// `φ₂(x) ∝ exp(−(x−x₀)²/(2w²) + ikx)` with `‖φ₂‖ = 1`, and `φ₁ = ω̄φ₂`
    /// where `ω̄ = √⟨φ₂|H|φ₂⟩` is the mean frequency of the Klein-Gordon block.
    pub fn gaussian(grid: &Grid, h: &OperatorMatrix, center: f64, width: f64, momentum: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "gaussian width must be positive, got {width}"
            )));
        }
        if h.dim() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: h.dim(),
            });
        }
        let raw = Col::from_fn(grid.len(), |i| {
            let x = grid.point(i);
            let envelope = (-(x - center).powi(2) / (2.0 * width * width)).exp();
            c64::from_polar(envelope, momentum * x)
        });
        let norm = raw.norm_l2();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        let phi2 = Col::from_fn(raw.nrows(), |i| raw[i] / norm);
        let mean = inner(phi2.as_ref(), h.apply(phi2.as_ref()).as_ref()).re;
        let omega = mean.max(0.0).sqrt();
        let phi1 = Col::from_fn(phi2.nrows(), |i| phi2[i] * omega);
        Self::new(phi1, phi2, 0.0)
    }

    /// The `index`-th right eigenvector of `ĥ`, split into its two halves.
    pub fn eigenstate(system: &FvSystem, index: usize) -> Result<Self> {
        let dec = decompose(&system.h_sr)?;
        if index >= dec.len() {
            return Err(Error::BranchIndexOutOfRange {
                n: index,
                dim: dec.len(),
            });
        }
        Ok(Self::from_stacked(&dec.right_ket(index).to_owned(), 0.0))
    }

    pub fn dim(&self) -> usize {
        self.phi2.nrows()
    }

    /// `(φ₁, φ₂)` as one `2N` vector.
    pub fn stacked(&self) -> Col<c64> {
        let n = self.dim();
        Col::from_fn(2 * n, |i| if i < n { self.phi1[i] } else { self.phi2[i - n] })
    }

    pub fn from_stacked(v: &Col<c64>, t: f64) -> Self {
        let n = v.nrows() / 2;
        Self {
            phi1: Col::from_fn(n, |i| v[i]),
            phi2: Col::from_fn(n, |i| v[n + i]),
            t,
        }
    }

    /// `⟨Φ|Φ⟩`, the quadratic form of the identity metric.
    pub fn euclidean_norm(&self) -> f64 {
        self.phi1.norm_l2().powi(2) + self.phi2.norm_l2().powi(2)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<FvState>,
    pub generator: OperatorMatrix,
    pub classification: SpectrumClassification,
}

impl Trajectory {
    pub fn real_spectrum(&self) -> bool {
        self.classification.is_entirely_real()
    }
}

/// Spectral propagator of one generator, reusable across initial states.
#[derive(Clone, Debug)]
pub struct Propagator {
    dec: FrozenDecomposition,
}

impl Propagator {
    pub fn new(generator: &OperatorMatrix) -> Result<Self> {
        Ok(Self {
            dec: decompose(generator)?,
        })
    }

    pub fn decomposition(&self) -> &FrozenDecomposition {
        &self.dec
    }

    /// Coefficients `⟨lₖ|v⟩`.
    fn coefficients(&self, v: &Col<c64>) -> Vec<c64> {
        (0..self.dec.len())
            .map(|k| inner(self.dec.left_vector(k), v.as_ref()))
            .collect()
    }

    fn synthesize(&self, coefficients: &[c64], dt: f64) -> Col<c64> {
        let right = self.dec.right_kets();
        let phases: Vec<c64> = coefficients
            .iter()
            .zip(self.dec.eigenvalues())
            .map(|(c, e)| c * (c64::new(0.0, -1.0) * e * dt).exp())
            .collect();
        Col::from_fn(right.nrows(), |i| {
            phases
                .iter()
                .enumerate()
                .fold(c64::new(0.0, 0.0), |acc, (k, p)| acc + right[(i, k)] * p)
        })
    }

    /// `e^{−iĥΔt}` applied to `state`.
    pub fn advance(&self, state: &FvState, dt: f64) -> FvState {
        let v = state.stacked();
        FvState::from_stacked(&self.synthesize(&self.coefficients(&v), dt), state.t + dt)
    }
}

/// Trajectory at `t₀ + k·t_final/steps`, `k = 0..=steps`; `t_final = 0` or
/// `steps = 0` gives only the initial state.
pub fn evolve(system: &FvSystem, state: &FvState, t_final: f64, steps: usize) -> Result<Trajectory> {
    let n = system.base_dimension;
    if state.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: state.dim(),
        });
    }
    if !t_final.is_finite() {
        return Err(Error::NonFinite);
    }
    let propagator = Propagator::new(&system.h_sr)?;
    let classification = classify_spectrum(propagator.decomposition(), 1e-8);
    let mut states = vec![state.clone()];
    if t_final != 0.0 && steps != 0 {
        let coefficients = propagator.coefficients(&state.stacked());
        for k in 1..=steps {
            let dt = t_final * k as f64 / steps as f64;
            let v = propagator.synthesize(&coefficients, dt);
            states.push(FvState::from_stacked(&v, state.t + dt));
        }
    }
    Ok(Trajectory {
        states,
        generator: system.h_sr.clone(),
        classification,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PseudoNorm {
    pub value: f64,
    /// `|Im⟨Φ|M|Φ⟩| / |⟨Φ|M|Φ⟩|`.
    pub imag_residue: f64,
}

/// `⟨Φ|M|Φ⟩` for `Φ = (φ₁, φ₂)`.
pub fn pseudo_norm(state: &FvState, metric: &OperatorMatrix) -> Result<PseudoNorm> {
    if metric.dim() != 2 * state.dim() {
        return Err(Error::DimensionMismatch {
            expected: 2 * state.dim(),
            found: metric.dim(),
        });
    }
    let v = state.stacked();
    let q = inner(v.as_ref(), metric.apply(v.as_ref()).as_ref());
    Ok(PseudoNorm {
        value: q.re,
        imag_residue: q.im.abs() / q.norm().max(NORM_FLOOR),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConservationReport {
    pub initial_pseudo_norm: f64,
    /// `max_t |p(t) − p(0)| / max(|p(0)|, ε)`.
    pub max_relative_drift: f64,
    /// Same quantity for `⟨Φ|Φ⟩`.
    pub euclidean_variation: f64,
    pub max_imag_residue: f64,
    /// `‖Mĥ − ĥ†M‖`.
    pub intertwining_residual: f64,
    pub metric_intertwines: bool,
    pub real_spectrum: bool,
    /// Set when the initial pseudo-norm vanishes and drift is not meaningful.
    pub degenerate_initial_norm: bool,
    pub pass: bool,
}

pub fn conservation_report(trajectory: &Trajectory, metric: &OperatorMatrix) -> Result<ConservationReport> {
    let norms = trajectory
        .states
        .iter()
        .map(|s| pseudo_norm(s, metric))
        .collect::<Result<Vec<_>>>()?;
    let initial = norms.first().map_or(0.0, |p| p.value);
    let degenerate = initial.abs() < NORM_FLOOR;
    let relative = |values: &mut dyn Iterator<Item = f64>, start: f64| {
        values.fold(0.0_f64, |worst, v| {
            worst.max((v - start).abs() / start.abs().max(NORM_FLOOR))
        })
    };
    let max_relative_drift = if degenerate {
        0.0
    } else {
        relative(&mut norms.iter().map(|p| p.value), initial)
    };
    let euclid: Vec<f64> = trajectory.states.iter().map(FvState::euclidean_norm).collect();
    let euclidean_variation = match euclid.first() {
        Some(&e0) if e0.abs() >= NORM_FLOOR => relative(&mut euclid.iter().copied(), e0),
        _ => 0.0,
    };
    let residual = intertwining_residual(&trajectory.generator, metric);
    let metric_intertwines = residual <= INTERTWINING_TOLERANCE * trajectory.generator.norm() * metric.norm();
    let real_spectrum = trajectory.real_spectrum();
    Ok(ConservationReport {
        initial_pseudo_norm: initial,
        max_relative_drift,
        euclidean_variation,
        max_imag_residue: norms.iter().map(|p| p.imag_residue).fold(0.0, f64::max),
        intertwining_residual: residual,
        metric_intertwines,
        real_spectrum,
        degenerate_initial_norm: degenerate,
        pass: real_spectrum && metric_intertwines && max_relative_drift <= DRIFT_TOLERANCE,
    })
}

/// The positive metric `Σₖ |lₖ⟩⟨lₖ|` of `ĥ` itself. The block metric
/// `[[0, η], [η, 0]]` also intertwines `ĥ` but is indefinite.
pub fn fv_positive_metric(system: &FvSystem) -> Result<OperatorMatrix> {
    decompose(&system.h_sr)?.eta_plus()
}
