//! Generalized Cholesky factorization `K = L J Lᵀ` of saddle-point matrices,
//! rigorous and first-order perturbation bounds for the factor, and the
//! experiment machinery that checks those bounds empirically.

pub mod bounds;
pub mod densela;
pub mod error;
pub mod genchol;
pub mod harness;
pub mod oracle;
pub mod report;

pub use densela::{DiagScaling, Matrix};
pub use error::{Condition, Error, FactorBlock, Result};
pub use genchol::{BlockSpec, GenCholFactor, SaddleMatrix};
pub use harness::EnsembleConfig;
pub use report::Format;
