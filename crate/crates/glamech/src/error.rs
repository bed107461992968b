use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("non-finite value in {what} at {point:?} (component {index})")]
    NonFinite { what: String, point: Vec<f64>, index: usize },

    #[error("degenerate {what} at {point:?}: condition number {cond:e}")]
    Degenerate { what: String, point: Vec<f64>, cond: f64 },

    #[error("Lagrangian not regular at {point:?}: singular values {singular_values:?}")]
    Regularity { point: Vec<f64>, singular_values: Vec<f64> },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: String, expected: usize, got: usize },

    #[error("integration diverged at t = {t} (last good sample at t = {last_t})")]
    Divergence { t: f64, last_t: f64, last_x: Vec<f64>, last_y: Vec<f64> },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(what: &str, point: &[f64], values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(index) => Err(Error::NonFinite { what: what.to_string(), point: point.to_vec(), index }),
    }
}

pub(crate) fn ensure_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { what: what.to_string(), expected, got })
    }
}
