//! C ABI surface for the estimator and allocation primitives.
//!
//! The binding exposes an opaque running-statistics handle for paired
//! (human, LLM) observations plus the stateless allocation rules. Every
//! fallible call returns a `LabelallocStatus`; outputs are written through
//! pointers only on `Ok`. Handles are created and destroyed exclusively
//! through this interface and must not be shared across threads without
//! external synchronization.

use std::slice;

use labelalloc::estimators;
use labelalloc::policies;
use labelalloc::stats::PairedStats;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelallocStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of domain (non-finite value, bad lambda, ...).
    InvalidArgument = 2,
    /// The statistic is undefined at the current sample size.
    Undefined = 3,
}

/// Opaque accumulator of paired (human, LLM) observations for one question.
pub struct LabelallocStats {
    inner: PairedStats,
}

/// Create an empty paired-statistics handle. Free with
/// `labelalloc_stats_free`.
#[no_mangle]
pub extern "C" fn labelalloc_stats_new() -> *mut LabelallocStats {
    Box::into_raw(Box::new(LabelallocStats {
        inner: PairedStats::new(),
    }))
}

/// Destroy a handle created by `labelalloc_stats_new`. A null pointer is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn labelalloc_stats_free(stats: *mut LabelallocStats) {
    if !stats.is_null() {
        drop(Box::from_raw(stats));
    }
}

/// Record one paired observation (human response `y`, LLM prediction `s`).
#[no_mangle]
pub unsafe extern "C" fn labelalloc_stats_push(
    stats: *mut LabelallocStats,
    y: f64,
    s: f64,
) -> LabelallocStatus {
    let Some(stats) = stats.as_mut() else {
        return LabelallocStatus::NullPointer;
    };
    match stats.inner.push(y, s) {
        Ok(()) => LabelallocStatus::Ok,
        Err(_) => LabelallocStatus::InvalidArgument,
    }
}

/// Number of observations recorded so far.
#[no_mangle]
pub unsafe extern "C" fn labelalloc_stats_len(stats: *const LabelallocStats) -> u64 {
    stats.as_ref().map_or(0, |s| s.inner.n())
}

/// Fitted tuning coefficient: the clipped regression coefficient of the
/// human response on the LLM prediction.
#[no_mangle]
pub unsafe extern "C" fn labelalloc_stats_lambda(
    stats: *const LabelallocStats,
    out: *mut f64,
) -> LabelallocStatus {
    let (Some(stats), Some(out)) = (stats.as_ref(), out.as_mut()) else {
        return LabelallocStatus::NullPointer;
    };
    match estimators::fit_lambda(&stats.inner) {
        Ok(v) => {
            *out = v;
            LabelallocStatus::Ok
        }
        Err(_) => LabelallocStatus::Undefined,
    }
}

/// Tuned rectification difficulty: the unbiased sample variance of
/// `y - lambda * s`.
#[no_mangle]
pub unsafe extern "C" fn labelalloc_stats_difficulty(
    stats: *const LabelallocStats,
    lambda: f64,
    out: *mut f64,
) -> LabelallocStatus {
    let (Some(stats), Some(out)) = (stats.as_ref(), out.as_mut()) else {
        return LabelallocStatus::NullPointer;
    };
    if !(0.0..=1.0).contains(&lambda) {
        return LabelallocStatus::InvalidArgument;
    }
    match stats.inner.tuned_residual_variance(lambda) {
        Ok(v) => {
            *out = v;
            LabelallocStatus::Ok
        }
        Err(_) => LabelallocStatus::Undefined,
    }
}

/// Rectified mean estimate combining the labeled sample with the mean of a
/// large LLM-prediction pool, with prediction term scaled by `lambda`.
#[no_mangle]
pub unsafe extern "C" fn labelalloc_stats_estimate(
    stats: *const LabelallocStats,
    synthetic_mean: f64,
    lambda: f64,
    out: *mut f64,
) -> LabelallocStatus {
    let (Some(stats), Some(out)) = (stats.as_ref(), out.as_mut()) else {
        return LabelallocStatus::NullPointer;
    };
    if !synthetic_mean.is_finite() || !(0.0..=1.0).contains(&lambda) {
        return LabelallocStatus::InvalidArgument;
    }
    match estimators::ppipp_estimate(&stats.inner, synthetic_mean, lambda) {
        Ok(report) => {
            *out = report.theta_hat;
            LabelallocStatus::Ok
        }
        Err(_) => LabelallocStatus::Undefined,
    }
}

/// Variance-minimizing fractional label counts for `len` questions with
/// difficulties `a`, importance weights `w`, per-label costs `c`, and total
/// budget `budget`. Writes `len` values to `out`.
#[no_mangle]
pub unsafe extern "C" fn labelalloc_neyman_allocation(
    a: *const f64,
    w: *const f64,
    c: *const f64,
    len: usize,
    budget: f64,
    out: *mut f64,
) -> LabelallocStatus {
    if a.is_null() || w.is_null() || c.is_null() || out.is_null() || len == 0 {
        return LabelallocStatus::NullPointer;
    }
    let a = slice::from_raw_parts(a, len);
    let w = slice::from_raw_parts(w, len);
    let c = slice::from_raw_parts(c, len);
    match policies::neyman_allocation(a, w, c, budget) {
        Ok(n) => {
            slice::from_raw_parts_mut(out, len).copy_from_slice(&n);
            LabelallocStatus::Ok
        }
        Err(_) => LabelallocStatus::InvalidArgument,
    }
}

/// Best achievable weighted expected MSE at `budget` under the allocation of
/// `labelalloc_neyman_allocation`.
#[no_mangle]
pub unsafe extern "C" fn labelalloc_oracle_mse(
    a: *const f64,
    w: *const f64,
    c: *const f64,
    len: usize,
    budget: f64,
    out: *mut f64,
) -> LabelallocStatus {
    if a.is_null() || w.is_null() || c.is_null() || out.is_null() || len == 0 {
        return LabelallocStatus::NullPointer;
    }
    let a = slice::from_raw_parts(a, len);
    let w = slice::from_raw_parts(w, len);
    let c = slice::from_raw_parts(c, len);
    match policies::oracle_mse(a, w, c, budget) {
        Ok(v) => {
            *out = v;
            LabelallocStatus::Ok
        }
        Err(_) => LabelallocStatus::InvalidArgument,
    }
}

/// Marginal efficiency index: variance reduction per unit cost of one more
/// label at the current count `n`.
#[no_mangle]
pub unsafe extern "C" fn labelalloc_marginal_efficiency(
    w: f64,
    a: f64,
    c: f64,
    n: u64,
    out: *mut f64,
) -> LabelallocStatus {
    let Some(out) = out.as_mut() else {
        return LabelallocStatus::NullPointer;
    };
    match policies::marginal_efficiency(w, a, c, n) {
        Ok(v) => {
            *out = v;
            LabelallocStatus::Ok
        }
        Err(_) => LabelallocStatus::InvalidArgument,
    }
}
