use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },

    #[error("state not normalized: |ψ|² = {norm_sq} (tolerance {tol:e})")]
    Normalization { norm_sq: f64, tol: f64 },

    #[error("truncation at n_max = {n_max} leaves tail mass {tail:e} above threshold {threshold:e}")]
    Truncation { n_max: usize, tail: f64, threshold: f64 },

    #[error("tail mass {tail:e} exceeded threshold {threshold:e} at t = {t} (n_max = {n_max} too small)")]
    TruncationOverflow {
        t: f64,
        tail: f64,
        threshold: f64,
        n_max: usize,
    },

    #[error("non-finite value produced at t = {t}")]
    NonFinite { t: f64 },

    #[error("step size underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("mean-field constraint defect {defect:e} at t = {t} exceeds {limit:e}")]
    ConstraintDrift { t: f64, defect: f64, limit: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample {index} is exactly zero; phase undefined")]
    ZeroSample { index: usize },

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}
