//! Quasi-Hermitian quantum mechanics for energy-dependent operators.
//!
//! The crate discretises Schrödinger and Klein-Gordon operators whose mass
//! depends on the energy, solves the self-consistency condition `z = E(z)`
//! branch by branch, and builds the energy-independent operators, metrics and
//! Feshbach-Villars evolution attached to the resulting physical levels.
//!
//! ```
//! use quasiherm::closed_form::{spectrum_plus, HoParams};
//!
//! let params = HoParams::new(1.0, 0.0).unwrap();
//! assert!((spectrum_plus(&params, 0) - 2.0).abs() < 1e-15);
//! ```

pub use faer::c64;

pub mod acceptance;
pub mod basis;
pub mod closed_form;
pub mod error;
pub mod evolution;
pub mod fixedpoint;
pub mod format;
pub mod frozen;
pub mod matrix;
pub mod operators;

pub use error::{Error, Result};
pub use matrix::OperatorMatrix;

// The guide's snippets run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/frozen.md")]
    mod frozen {}
    #[doc = include_str!("../../../book/src/fixed_points.md")]
    mod fixed_points {}
    #[doc = include_str!("../../../book/src/physical_basis.md")]
    mod physical_basis {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
