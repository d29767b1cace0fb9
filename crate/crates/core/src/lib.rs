//! Spectral shift functions, perturbation determinants and trace formulas for
//! negative complete Bernstein functions of matrices.

pub mod calculus;
pub mod cbf;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod operator;
pub mod oracle;
pub mod quad;
pub mod shift;
pub mod trace;

pub use error::{Error, Result};
pub use linalg::{CMatrix, NormKind, C64};
