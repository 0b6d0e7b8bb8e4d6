//! Exact spectrum of the oscillator with energy-dependent mass
//! `2m(E) = A²(E − E₀)²`.
//!
//! Two families exist. The `+` family is infinite:
//!
//! ```text
//! E⁺ₙ = E₀ + √(E₀² + (8n+4)/A),            n = 0, 1, …
//! ```
//!
//! The `−` family is a finite set of pairs sharing the midpoint `E₀`:
//!
//! ```text
//! E⁻±ₙ = E₀ ± √(E₀² − (8n+4)/A),          n = 0, …, n_max
//! n_max = ⌊(A·E₀² − 4)/8⌋,                 present only for A·E₀² ≥ 4
//! ```
//!
//! The finite-difference pipeline in this crate, run on the full line, lands
//! on exactly half of every value (see [`NUMERIC_CONVENTION_FACTOR`]).

use serde::Serialize;

use crate::error::{Error, Result};

/// Ratio between the closed-form energies above and the fixed points of
/// `−(1/2m(E))d²/dx² + x²` on the full line: `E_closed = 2·E_numeric`.
pub const NUMERIC_CONVENTION_FACTOR: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HoParams {
    pub a: f64,
    pub e0: f64,
}

impl HoParams {
    pub fn new(a: f64, e0: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && e0.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "need A > 0 and finite E0, got A = {a}, E0 = {e0}"
            )));
        }
        Ok(Self { a, e0 })
    }

    fn level_term(&self, n: u64) -> f64 {
        (8.0 * n as f64 + 4.0) / self.a
    }
}

pub fn spectrum_plus(params: &HoParams, n: u64) -> f64 {
    params.e0 + (params.e0 * params.e0 + params.level_term(n)).sqrt()
}

/// Upper and lower member of the `−` family pair, or `None` above `n_max`.
pub fn spectrum_minus(params: &HoParams, n: u64) -> Option<(f64, f64)> {
    let n_max = n_max(params)?;
    if n > n_max {
        return None;
    }
    // presence is decided by n_max alone; round-off at the threshold can make
    // the radicand a hair negative
    let radicand = (params.e0 * params.e0 - params.level_term(n)).max(0.0);
    let root = radicand.sqrt();
    Some((params.e0 + root, params.e0 - root))
}

pub fn n_max(params: &HoParams) -> Option<u64> {
    let product = params.a * params.e0 * params.e0;
    if product < 4.0 {
        return None;
    }
    Some(((product - 4.0) / 8.0).floor() as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinusPair {
    pub n: u64,
    pub upper: f64,
    pub lower: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosedSpectrum {
    pub params: HoParams,
    pub plus_family: Vec<(u64, f64)>,
    pub minus_family: Vec<MinusPair>,
    pub n_max: Option<u64>,
}

impl ClosedSpectrum {
    /// Every energy of both families, ascending.
    pub fn energies(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.plus_family.iter().map(|&(_, e)| e).collect();
        for pair in &self.minus_family {
            all.push(pair.upper);
            all.push(pair.lower);
        }
        all.sort_by(f64::total_cmp);
        all
    }
}

/// `+` family for `n = 0..=n_cut`, `−` family for `n = 0..=n_max`.
pub fn full_spectrum(params: &HoParams, n_cut: u64) -> ClosedSpectrum {
    let n_max = n_max(params);
    let minus_family = match n_max {
        Some(top) => (0..=top)
            .filter_map(|n| spectrum_minus(params, n).map(|(upper, lower)| MinusPair { n, upper, lower }))
            .collect(),
        None => Vec::new(),
    };
    ClosedSpectrum {
        params: *params,
        plus_family: (0..=n_cut).map(|n| (n, spectrum_plus(params, n))).collect(),
        minus_family,
        n_max,
    }
}

/// Relative defect of `(E − E₀)² = E₀² + sign·(8n+4)/A`, scaled by
/// `E₀² + (8n+4)/A`.
pub fn quadratic_defect(params: &HoParams, n: u64, energy: f64, sign: f64) -> f64 {
    let term = params.level_term(n);
    let lhs = (energy - params.e0) * (energy - params.e0);
    let rhs = params.e0 * params.e0 + sign * term;
    (lhs - rhs).abs() / (params.e0 * params.e0 + term)
}

/// Number of `−` family pairs (0 when the family is empty).
pub fn minus_count(params: &HoParams) -> u64 {
    n_max(params).map_or(0, |n| n + 1)
}
