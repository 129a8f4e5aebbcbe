use std::fmt;

/// Applicability conditions of the perturbation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// `‖L⁻¹‖₂² ‖ΔK‖_F < 1/2`
    Normwise,
    /// `‖L⁻¹‖_F² ‖ΔK‖_F < 1/2`
    FrobeniusInverse,
    /// `‖W⁻¹‖₂² ‖ΔK‖_F < 1/4`
    WOperator,
    /// `κ₂(L)‖L‖₂‖DL⁻¹‖₂‖D⁻¹‖₂ ‖ΔK‖_F/‖K‖₂ < 1/4`
    RefinedMatrixEquation,
    /// `cond_F(L̃) cond_F(L̃⁻ᵀ) ε < 1/2`
    Componentwise,
    /// Discriminant of a quadratic root bound is not positive.
    Discriminant,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Normwise => "||L^-1||_2^2 ||dK||_F < 1/2",
            Condition::FrobeniusInverse => "||L^-1||_F^2 ||dK||_F < 1/2",
            Condition::WOperator => "||W^-1||_2^2 ||dK||_F < 1/4",
            Condition::RefinedMatrixEquation => "kappa2(L) ||L||_2 ||D L^-1||_2 ||D^-1||_2 ||dK||_F/||K||_2 < 1/4",
            Condition::Componentwise => "cond_F(L) cond_F(L^-T) eps < 1/2",
            Condition::Discriminant => "positive discriminant",
        };
        f.write_str(s)
    }
}

/// Which Cholesky stage of the block factorization broke down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorBlock {
    /// Cholesky of the leading block `A`.
    Leading,
    /// Cholesky of the Schur block `C + L21 L21ᵀ`.
    Schur,
}

impl fmt::Display for FactorBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorBlock::Leading => f.write_str("A"),
            FactorBlock::Schur => f.write_str("C + L21 L21^T"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is numerically singular")]
    Singular,
    #[error("zero diagonal entry at index {index}")]
    ZeroDiagonal { index: usize },
    #[error("matrix is not lower triangular (nonzero at ({row}, {col}))")]
    NotLowerTriangular { row: usize, col: usize },
    #[error("matrix is not symmetric (mismatch at ({row}, {col}))")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive definite: nonpositive pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },
    #[error("Cholesky breakdown in block {block} at pivot {pivot}")]
    Breakdown { block: FactorBlock, pivot: usize },
    #[error("factorization of the perturbed matrix failed: {0}")]
    PerturbedFactorization(Box<Error>),
    #[error("invalid saddle-point matrix: {0}")]
    InvalidSaddle(String),
    #[error("scaling diagonal entry {index} is not strictly positive and finite")]
    InvalidScaling { index: usize },
    #[error("condition {0} violated")]
    ConditionViolated(Condition),
    #[error("gamma constant undefined: k*u = {k}*{u} >= 1")]
    GammaDomain { k: usize, u: f64 },
    #[error("block specs differ: {left:?} vs {right:?}")]
    SpecMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("too many degenerate draws ({0} retries)")]
    RetriesExhausted(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
