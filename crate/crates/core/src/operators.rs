//! Finite-difference representations of the energy-dependent Hamiltonians,
//! the parity operator and the two-component Feshbach-Villars system.
//!
//! All matrices live on a uniform [`Grid`] whose nodes are the unknowns; the
//! Dirichlet condition is imposed one spacing beyond each end node.

use std::fmt;
use std::sync::Arc;

use crate::c64;
use crate::error::{Error, Result};
use crate::matrix::OperatorMatrix;

/// `2m(z)` at or below this value is treated as a vanishing mass.
pub const MASS_EPSILON: f64 = 1e-12;

const METRIC_HERMITICITY_TOL: f64 = 1e-10;
const METRIC_CONDITION_LIMIT: f64 = 1e12;

/// Uniform grid on `[x_min, x_max]` with `n_points` nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points, got {n_points}")));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    /// Grid on the half line `(0, r_max)` with the Dirichlet node at `r = 0`,
    /// i.e. nodes `h, 2h, …, n·h` with `h = r_max / (n + 1)`.
    pub fn half_line(r_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points, got {n_points}")));
        }
        let h = r_max / (n_points as f64 + 1.0);
        Self::new(h, n_points as f64 * h, n_points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points as f64 - 1.0)
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.point(i))
    }

    /// True when `x_min = −x_max` to within `1e−12·|x_max|`.
    pub fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() <= 1e-12 * self.x_max.abs()
    }
}

/// Evaluator for a general `m²(z, x)`; may be complex-valued.
#[derive(Clone)]
pub struct MassSquaredFn(Arc<dyn Fn(f64, f64) -> Result<c64, String> + Send + Sync>);

impl MassSquaredFn {
    pub fn new(f: impl Fn(f64, f64) -> Result<c64, String> + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    /// Wraps an infallible real-valued evaluator.
    pub fn real(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(move |z, x| Ok(c64::new(f(z, x), 0.0)))
    }

    pub fn eval(&self, z: f64, x: f64) -> Result<c64, String> {
        (self.0)(z, x)
    }
}

impl fmt::Debug for MassSquaredFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MassSquaredFn(..)")
    }
}

/// How the mass depends on the (frozen) energy.
#[derive(Clone, Debug)]
pub enum MassModel {
    ConstantMass {
        m: f64,
    },
    /// `2m(E) = A²(E − E₀)²`.
    HoQuadratic {
        a: f64,
        e0: f64,
    },
    GeneralMassSquared(MassSquaredFn),
}

impl MassModel {
    pub fn constant(m: f64) -> Result<Self> {
        let model = MassModel::ConstantMass { m };
        model.validate()?;
        Ok(model)
    }

    pub fn ho_quadratic(a: f64, e0: f64) -> Result<Self> {
        let model = MassModel::HoQuadratic { a, e0 };
        model.validate()?;
        Ok(model)
    }

    pub fn general(f: MassSquaredFn) -> Self {
        MassModel::GeneralMassSquared(f)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MassModel::ConstantMass { m } if !(m > 0.0 && m.is_finite()) => {
                Err(Error::InvalidModel(format!("constant mass must be positive, got {m}")))
            }
            MassModel::HoQuadratic { a, e0 } if !(a > 0.0 && a.is_finite() && e0.is_finite()) => {
                Err(Error::InvalidModel(format!(
                    "oscillator ansatz needs A > 0 and finite E0, got A = {a}, E0 = {e0}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// `2m(z)` for models whose mass does not depend on position.
    pub fn two_mass(&self, z: f64) -> Option<f64> {
        match *self {
            MassModel::ConstantMass { m } => Some(2.0 * m),
            MassModel::HoQuadratic { a, e0 } => Some(a * a * (z - e0) * (z - e0)),
            MassModel::GeneralMassSquared(_) => None,
        }
    }

    /// `m²(z, x)` as used by the Klein-Gordon operator.
    pub fn mass_squared(&self, z: f64, x: f64) -> Result<c64> {
        let value = match self {
            MassModel::GeneralMassSquared(f) => {
                f.eval(z, x)
                    .map_err(|reason| Error::EvaluationFailure { z, x, reason })?
            }
            _ => {
                let m = 0.5 * self.two_mass(z).expect("position-independent mass");
                c64::new(m * m, 0.0)
            }
        };
        if !value.is_finite() {
            return Err(Error::EvaluationFailure {
                z,
                x,
                reason: format!("non-finite value {value}"),
            });
        }
        Ok(value)
    }

    /// The `z` at which the mass vanishes, if the model has one.
    pub fn singular_point(&self) -> Option<f64> {
        match *self {
            MassModel::HoQuadratic { e0, .. } => Some(e0),
            _ => None,
        }
    }
}

/// Three-point `−d²/dx²` with Dirichlet boundaries.
pub fn build_laplacian(grid: &Grid) -> OperatorMatrix {
    let h2 = grid.spacing() * grid.spacing();
    let diag = c64::new(2.0 / h2, 0.0);
    let off = c64::new(-1.0 / h2, 0.0);
    OperatorMatrix::from_fn(grid.len(), |i, j| {
        if i == j {
            diag
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            c64::new(0.0, 0.0)
        }
    })
}

/// `−(1/(2m(z))) d²/dx² + x²` on the grid.
pub fn build_schrodinger(grid: &Grid, model: &MassModel, z: f64) -> Result<OperatorMatrix> {
    model.validate()?;
    let two_m = model.two_mass(z).ok_or(Error::UnsupportedModel(
        "the Schrödinger builder needs a position-independent mass",
    ))?;
    if two_m <= MASS_EPSILON {
        return Err(Error::DegenerateMass { z, two_m });
    }
    let kinetic = 1.0 / two_m;
    let h2 = grid.spacing() * grid.spacing();
    Ok(OperatorMatrix::from_fn(grid.len(), |i, j| {
        if i == j {
            let x = grid.point(i);
            c64::new(2.0 * kinetic / h2 + x * x, 0.0)
        } else if i.abs_diff(j) == 1 {
            c64::new(-kinetic / h2, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    }))
}

/// `−d²/dx² + m²(z, x)` on the grid.
pub fn build_kleingordon(grid: &Grid, model: &MassModel, z: f64) -> Result<OperatorMatrix> {
    model.validate()?;
    let mass: Vec<c64> = grid.points().map(|x| model.mass_squared(z, x)).collect::<Result<_>>()?;
    let h2 = grid.spacing() * grid.spacing();
    Ok(OperatorMatrix::from_fn(grid.len(), |i, j| {
        if i == j {
            c64::new(2.0 / h2, 0.0) + mass[i]
        } else if i.abs_diff(j) == 1 {
            c64::new(-1.0 / h2, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    }))
}

/// Reflection `x → −x`, the reversal permutation of a symmetric grid.
pub fn build_parity(grid: &Grid) -> Result<OperatorMatrix> {
    if !grid.is_symmetric() {
        return Err(Error::AsymmetricGrid {
            x_min: grid.x_min(),
            x_max: grid.x_max(),
        });
    }
    let n = grid.len();
    Ok(OperatorMatrix::from_fn(n, |i, j| {
        if i + j == n - 1 {
            c64::new(1.0, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    }))
}

/// First-order two-component form of a Klein-Gordon operator.
#[derive(Clone, Debug)]
pub struct FvSystem {
    /// Generator `[[0, H], [1, 0]]`.
    pub h_sr: OperatorMatrix,
    /// Block metric `[[0, η], [η, 0]]`, once one has been attached.
    pub eta_sr: Option<OperatorMatrix>,
    pub base_dimension: usize,
}

impl FvSystem {
    /// Attaches the block pseudo-metric built from the base metric `eta`.
    pub fn with_metric(mut self, eta: &OperatorMatrix) -> Result<Self> {
        if eta.dim() != self.base_dimension {
            return Err(Error::DimensionMismatch {
                expected: self.base_dimension,
                found: eta.dim(),
            });
        }
        self.eta_sr = Some(assemble_fv_metric(eta)?);
        Ok(self)
    }

    /// The base operator `H` from the upper-right block.
    pub fn base_operator(&self) -> OperatorMatrix {
        self.h_sr.block(0, self.base_dimension, self.base_dimension)
    }
}

pub fn assemble_fv(h: &OperatorMatrix) -> FvSystem {
    let n = h.dim();
    let zero = OperatorMatrix::zeros(n);
    let one = OperatorMatrix::identity(n);
    let h_sr = OperatorMatrix::from_blocks(&zero, h, &one, &zero).expect("equal block sizes");
    FvSystem {
        h_sr,
        eta_sr: None,
        base_dimension: n,
    }
}

/// `[[0, η], [η, 0]]` for a Hermitian invertible `η`.
pub fn assemble_fv_metric(eta: &OperatorMatrix) -> Result<OperatorMatrix> {
    let defect = eta.hermiticity_defect();
    if defect > METRIC_HERMITICITY_TOL * eta.norm().max(1.0) {
        return Err(Error::NonHermitianMetric { defect });
    }
    let condition = eta.condition_number()?;
    if condition > METRIC_CONDITION_LIMIT {
        return Err(Error::SingularMetric { condition });
    }
    let zero = OperatorMatrix::zeros(eta.dim());
    OperatorMatrix::from_blocks(&zero, eta, eta, &zero)
}

/// `‖η A η⁻¹ − A†‖`, evaluated as `‖η A − A† η‖` to avoid the inverse.
pub fn intertwining_residual(a: &OperatorMatrix, eta: &OperatorMatrix) -> f64 {
    (&(eta * a) - &(&a.adjoint() * eta)).norm()
}
