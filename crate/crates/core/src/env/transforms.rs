//! Experiment transforms applied to difficulty, weight, and cost vectors.

use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("difficulties must be positive; entry {index} is {value}")]
    NonPositiveDifficulty { index: usize, value: f64 },
    #[error("heterogeneity factor must be nonnegative, got {0}")]
    NegativeFactor(f64),
    #[error("dispersion must lie in [0, 1], got {0}")]
    DispersionOutOfRange(f64),
    #[error("question {0} has no module label")]
    UnlabeledQuestion(usize),
}

/// Floor applied to dispersed weights/costs so they stay strictly positive.
pub const DISPERSE_FLOOR: f64 = 0.05;

/// Stretch or shrink difficulty spread in log space around the log mean,
/// then renormalize so the arithmetic mean is exactly preserved.
/// h = 1 is the identity; h = 0 collapses everything to the common mean.
pub fn rescale_heterogeneity(a: &[f64], h: f64) -> Result<Vec<f64>, TransformError> {
    if h < 0.0 {
        return Err(TransformError::NegativeFactor(h));
    }
    for (i, &v) in a.iter().enumerate() {
        if !(v > 0.0) {
            return Err(TransformError::NonPositiveDifficulty { index: i, value: v });
        }
    }
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    let log_mean = a.iter().map(|v| v.ln()).sum::<f64>() / a.len() as f64;
    let stretched: Vec<f64> = a
        .iter()
        .map(|v| (log_mean + h * (v.ln() - log_mean)).exp())
        .collect();
    let stretched_mean = stretched.iter().sum::<f64>() / a.len() as f64;
    let ratio = mean / stretched_mean;
    Ok(stretched.into_iter().map(|v| v * ratio).collect())
}

/// Dispersed weight/cost vector 1 + a*z_q with z_q ~ Uniform(-1, 1), clipped
/// to [0, 2] and floored at `DISPERSE_FLOOR`. The z draw depends only on
/// (seed, q), so reusing the seed across `a` values fixes {z_q}.
pub fn disperse(n: usize, a: f64, seed: u64) -> Result<Vec<f64>, TransformError> {
    if !(0.0..=1.0).contains(&a) {
        return Err(TransformError::DispersionOutOfRange(a));
    }
    Ok((0..n)
        .map(|q| {
            let z = 2.0 * rng::unit(rng::stream(seed, &[0xD15B, q as u64])) - 1.0;
            (1.0 + a * z).clamp(0.0, 2.0).max(DISPERSE_FLOOR)
        })
        .collect())
}

/// Sum per-question difficulties into per-module difficulties. `labels[q]`
/// is the module index of question q; modules are numbered 0..num_modules.
pub fn group_modules(
    a: &[f64],
    labels: &[Option<usize>],
    num_modules: usize,
) -> Result<Vec<f64>, TransformError> {
    let mut out = vec![0.0; num_modules];
    for (q, &lab) in labels.iter().enumerate() {
        let m = lab.ok_or(TransformError::UnlabeledQuestion(q))?;
        out[m] += a[q];
    }
    Ok(out)
}
