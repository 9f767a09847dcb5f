use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size mismatch: expected {expected}, got {got}")]
    Size { expected: usize, got: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid construction: {0}")]
    Construction(String),

    #[error("infeasible coupling ensemble: {0}")]
    InfeasibleEnsemble(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric divergence at iteration {iteration}")]
    NumericDivergence { iteration: usize },

    #[error("bracket [{lo}, {hi}] does not straddle the transition")]
    Bracket { lo: f64, hi: f64 },

    #[error("dense materialization of {entries} entries exceeds the guard of {limit}")]
    SizeGuard { entries: usize, limit: usize },

    #[error("operator kind does not match the scalar field: {0}")]
    FieldMismatch(&'static str),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Size { expected, got })
    }
}
