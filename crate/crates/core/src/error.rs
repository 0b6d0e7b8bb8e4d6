use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid mass model: {0}")]
    InvalidModel(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The energy-dependent mass vanishes, i.e. the frozen parameter sits on
    /// the singular point of the mass model.
    #[error("DegenerateMass: 2m(z) = {two_m:e} at z = {z}")]
    DegenerateMass { z: f64, two_m: f64 },

    #[error("EvaluationFailure: mass term undefined at z = {z}, x = {x}: {reason}")]
    EvaluationFailure { z: f64, x: f64, reason: String },

    #[error("unsupported model: {0}")]
    UnsupportedModel(&'static str),

    #[error("AsymmetricGrid: [{x_min}, {x_max}] is not symmetric about 0")]
    AsymmetricGrid { x_min: f64, x_max: f64 },

    #[error("NonHermitianMetric: |eta - eta^+| = {defect:e}")]
    NonHermitianMetric { defect: f64 },

    #[error("SingularMetric: condition number {condition:e}")]
    SingularMetric { condition: f64 },

    #[error("DegenerateSpectrum: eigenvalue gap {gap:e} below tolerance {tolerance:e}")]
    DegenerateSpectrum { gap: f64, tolerance: f64 },

    #[error("PairingFailure: no left partner for eigenvalue {re}{im:+}i (distance {distance:e})")]
    PairingFailure { re: f64, im: f64, distance: f64 },

    #[error("ComplexSpectrum: eigenvalue {index} = {re}{im:+}i is not real")]
    ComplexSpectrum { index: usize, re: f64, im: f64 },

    #[error("invalid metric signs: {0}")]
    InvalidSigns(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("BranchIndexOutOfRange: branch {n} requested for dimension {dim}")]
    BranchIndexOutOfRange { n: usize, dim: usize },

    #[error("BranchLost: best eigenvector overlap {overlap:.3} at z = {z}")]
    BranchLost { z: f64, overlap: f64 },

    #[error("ComplexBranch: eigenvalue {re}{im:+}i left the real axis at z = {z}")]
    ComplexBranch { z: f64, re: f64, im: f64 },

    #[error("invalid z window: {0}")]
    InvalidWindow(String),

    #[error("RefinementStall: bracket [{lo}, {hi}] after {iterations} bisection steps")]
    RefinementStall { lo: f64, hi: f64, iterations: usize },

    #[error("TooManyLevels: {levels} levels exceed ambient dimension {dim}")]
    TooManyLevels { levels: usize, dim: usize },

    #[error("empty level set")]
    EmptyBasis,

    #[error("IllConditionedOverlap: condition number of R is {condition:e}")]
    IllConditionedOverlap { condition: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}
