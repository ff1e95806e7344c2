use super::scalar::Scalar;
use crate::error::NumericsError;

/// Soft minimum `−(1/μ)·ln Σ exp(−μ·v_k)`, shifted by `min v` so every
/// exponent is `≤ 0`.
///
/// The result lies in `[min v − ln|v|/μ, min v]`.
pub fn logsumexp_stable<T: Scalar>(values: &[T], mu: T) -> Result<T, NumericsError> {
    let m = check_and_min(values, mu)?;
    let s: T = values.iter().map(|&v| (-mu * (v - m)).exp()).sum();
    Ok(m - s.ln() / mu)
}

/// Softmin weights `exp(−μ v_k) / Σ_j exp(−μ v_j)`, computed with the same
/// shift as [`logsumexp_stable`]. They sum to one and the minimizer's weight is
/// never below `1/|v|`.
pub fn softmin_weights<T: Scalar>(values: &[T], mu: T) -> Result<Vec<T>, NumericsError> {
    let m = check_and_min(values, mu)?;
    let w: Vec<T> = values.iter().map(|&v| (-mu * (v - m)).exp()).collect();
    let s: T = w.iter().copied().sum();
    Ok(w.into_iter().map(|x| x / s).collect())
}

fn check_and_min<T: Scalar>(values: &[T], mu: T) -> Result<T, NumericsError> {
    if values.is_empty() {
        return Err(NumericsError::InvalidArgument("log-sum-exp of an empty list"));
    }
    if !(mu > T::zero()) || !mu.is_finite() {
        return Err(NumericsError::InvalidArgument("smoothing parameter must be positive and finite"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite("logsumexp_stable"));
    }
    Ok(values.iter().copied().fold(T::infinity(), T::min))
}
