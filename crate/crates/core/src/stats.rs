//! Running sufficient statistics for paired (human, LLM) samples.
//!
//! All variances, covariances, and tuned residual variances used by the
//! estimators and allocation policies derive from these sums. Sums are kept
//! relative to the first observation of the stream, which keeps the derived
//! moments stable even for large constant-offset data.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("non-finite observation (y={y}, s={s})")]
    NonFinite { y: f64, s: f64 },
    #[error("statistic undefined: needs at least {needed} samples, have {n}")]
    Undefined { needed: u64, n: u64 },
    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
}

/// Running sums of a stream of paired responses `(y, s)` where `y` is the
/// human response and `s` the LLM prediction on the same covariates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairedStats {
    n: u64,
    shift_y: f64,
    shift_s: f64,
    sum_y: f64,
    sum_s: f64,
    sum_yy: f64,
    sum_ss: f64,
    sum_ys: f64,
    min_s: f64,
    max_s: f64,
}

impl PairedStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Record one paired observation. Rejects non-finite inputs.
    pub fn push(&mut self, y: f64, s: f64) -> Result<(), StatsError> {
        if !y.is_finite() || !s.is_finite() {
            return Err(StatsError::NonFinite { y, s });
        }
        if self.n == 0 {
            self.shift_y = y;
            self.shift_s = s;
            self.min_s = s;
            self.max_s = s;
        } else {
            self.min_s = self.min_s.min(s);
            self.max_s = self.max_s.max(s);
        }
        let dy = y - self.shift_y;
        let ds = s - self.shift_s;
        self.n += 1;
        self.sum_y += dy;
        self.sum_s += ds;
        self.sum_yy += dy * dy;
        self.sum_ss += ds * ds;
        self.sum_ys += dy * ds;
        Ok(())
    }

    /// Combine two stat accumulators, re-centering `other` onto this shift.
    /// Associative and order-independent up to floating tolerance.
    pub fn merge(&self, other: &PairedStats) -> PairedStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let m = other.n as f64;
        // Re-center other's sums from its shift to ours.
        let by = other.shift_y - self.shift_y;
        let bs = other.shift_s - self.shift_s;
        let o_sum_y = other.sum_y + m * by;
        let o_sum_s = other.sum_s + m * bs;
        let o_sum_yy = other.sum_yy + 2.0 * by * other.sum_y + m * by * by;
        let o_sum_ss = other.sum_ss + 2.0 * bs * other.sum_s + m * bs * bs;
        let o_sum_ys = other.sum_ys + by * other.sum_s + bs * other.sum_y + m * by * bs;
        PairedStats {
            n: self.n + other.n,
            shift_y: self.shift_y,
            shift_s: self.shift_s,
            sum_y: self.sum_y + o_sum_y,
            sum_s: self.sum_s + o_sum_s,
            sum_yy: self.sum_yy + o_sum_yy,
            sum_ss: self.sum_ss + o_sum_ss,
            sum_ys: self.sum_ys + o_sum_ys,
            min_s: self.min_s.min(other.min_s),
            max_s: self.max_s.max(other.max_s),
        }
    }

    fn require(&self, needed: u64) -> Result<(), StatsError> {
        if self.n < needed {
            return Err(StatsError::Undefined { needed, n: self.n });
        }
        Ok(())
    }

    pub fn mean_y(&self) -> Result<f64, StatsError> {
        self.require(1)?;
        Ok(self.shift_y + self.sum_y / self.n as f64)
    }

    pub fn mean_s(&self) -> Result<f64, StatsError> {
        self.require(1)?;
        Ok(self.shift_s + self.sum_s / self.n as f64)
    }

    /// Observed range of the LLM predictions; 0 until two samples differ.
    pub fn range_s(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.max_s - self.min_s
        }
    }

    /// Unbiased sample variance of Y, clamped at 0.
    pub fn sample_variance_y(&self) -> Result<f64, StatsError> {
        self.require(2)?;
        let n = self.n as f64;
        Ok(((self.sum_yy - self.sum_y * self.sum_y / n) / (n - 1.0)).max(0.0))
    }

    /// Unbiased sample variance of S, clamped at 0.
    pub fn sample_variance_s(&self) -> Result<f64, StatsError> {
        self.require(2)?;
        let n = self.n as f64;
        Ok(((self.sum_ss - self.sum_s * self.sum_s / n) / (n - 1.0)).max(0.0))
    }

    /// Unbiased sample covariance of (Y, S).
    pub fn sample_cov(&self) -> Result<f64, StatsError> {
        self.require(2)?;
        let n = self.n as f64;
        Ok((self.sum_ys - self.sum_y * self.sum_s / n) / (n - 1.0))
    }

    /// Unbiased sample variance of the tuned residual Y - lambda*S via the
    /// moment identity Var(Y) - 2*lambda*Cov + lambda^2*Var(S). Equals the
    /// variance obtained by recomputing all residuals explicitly.
    pub fn tuned_residual_variance(&self, lambda: f64) -> Result<f64, StatsError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(StatsError::LambdaOutOfRange(lambda));
        }
        self.require(2)?;
        let vy = self.sample_variance_y()?;
        let vs = self.sample_variance_s()?;
        let cov = self.sample_cov()?;
        Ok((vy - 2.0 * lambda * cov + lambda * lambda * vs).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn from_pairs(pairs: &[(f64, f64)]) -> PairedStats {
        let mut st = PairedStats::new();
        for &(y, s) in pairs {
            st.push(y, s).unwrap();
        }
        st
    }

    /// Two-pass textbook variance/covariance, the independent oracle for the
    /// running-sum implementation.
    fn two_pass(pairs: &[(f64, f64)]) -> (f64, f64, f64) {
        let n = pairs.len() as f64;
        let my = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let ms = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let vy = pairs.iter().map(|p| (p.0 - my).powi(2)).sum::<f64>() / (n - 1.0);
        let vs = pairs.iter().map(|p| (p.1 - ms).powi(2)).sum::<f64>() / (n - 1.0);
        let cov = pairs.iter().map(|p| (p.0 - my) * (p.1 - ms)).sum::<f64>() / (n - 1.0);
        (vy, vs, cov)
    }

    #[test]
    fn single_point_sums() {
        let st = from_pairs(&[(1.0, 0.0)]);
        assert_eq!(st.n(), 1);
        assert_eq!(st.mean_y().unwrap(), 1.0);
        assert_eq!(st.mean_s().unwrap(), 0.0);
    }

    #[test]
    fn update_order_does_not_matter() {
        let a = from_pairs(&[(0.3, 1.2), (-0.7, 0.4)]);
        let b = from_pairs(&[(-0.7, 0.4), (0.3, 1.2)]);
        assert_abs_diff_eq!(
            a.sample_variance_y().unwrap(),
            b.sample_variance_y().unwrap(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(a.sample_cov().unwrap(), b.sample_cov().unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(a.mean_y().unwrap(), b.mean_y().unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let mut st = PairedStats::new();
        assert!(matches!(st.push(f64::NAN, 0.0), Err(StatsError::NonFinite { .. })));
        assert!(matches!(st.push(0.0, f64::INFINITY), Err(StatsError::NonFinite { .. })));
        assert_eq!(st.n(), 0);
    }

    #[test]
    fn two_point_case() {
        let st = from_pairs(&[(0.0, 0.0), (2.0, 2.0)]);
        assert_eq!(st.sample_variance_y().unwrap(), 2.0);
        assert_eq!(st.sample_variance_s().unwrap(), 2.0);
        assert_eq!(st.sample_cov().unwrap(), 2.0);
    }

    #[test]
    fn constant_s_has_zero_cov() {
        let st = from_pairs(&[(0.0, 1.0), (2.0, 1.0)]);
        assert_eq!(st.sample_cov().unwrap(), 0.0);
        assert_eq!(st.range_s(), 0.0);
    }

    #[test]
    fn undefined_below_two_samples() {
        let st = from_pairs(&[(1.0, 1.0)]);
        assert!(matches!(
            st.sample_variance_y(),
            Err(StatsError::Undefined { needed: 2, n: 1 })
        ));
    }

    #[test]
    fn matches_two_pass_on_normal_draws() {
        let mut pairs = Vec::new();
        for i in 0..1000u64 {
            let key = crate::rng::stream(11, &[i]);
            pairs.push((
                crate::rng::standard_normal(key, 0),
                crate::rng::standard_normal(key, 1),
            ));
        }
        let st = from_pairs(&pairs);
        let (vy, vs, cov) = two_pass(&pairs);
        assert_abs_diff_eq!(st.sample_variance_y().unwrap(), vy, epsilon = 1e-9);
        assert_abs_diff_eq!(st.sample_variance_s().unwrap(), vs, epsilon = 1e-9);
        assert_abs_diff_eq!(st.sample_cov().unwrap(), cov, epsilon = 1e-9);
        assert!((vy - 1.0).abs() < 0.15);
    }

    #[test]
    fn synthetic_model_cov_matches_rho_v() {
        // Y = U + 0.5*eta, S = 0.7*U + sqrt(1-0.49)*eps with v = 1:
        // Cov(Y, S) = 0.7.
        let (rho, sig): (f64, f64) = (0.7, 0.5);
        let mut st = PairedStats::new();
        for i in 0..10_000u64 {
            let key = crate::rng::stream(99, &[i]);
            let u = crate::rng::standard_normal(key, 0);
            let eps = crate::rng::standard_normal(key, 1);
            let eta = crate::rng::standard_normal(key, 2);
            st.push(u + sig * eta, rho * u + (1.0 - rho * rho).sqrt() * eps)
                .unwrap();
        }
        assert!((st.sample_cov().unwrap() - 0.7).abs() < 0.05);
    }

    #[test]
    fn tuned_variance_reduces_at_endpoints() {
        let st = from_pairs(&[(0.1, 0.3), (0.9, 0.2), (0.4, 0.8), (0.2, 0.5)]);
        assert_abs_diff_eq!(
            st.tuned_residual_variance(0.0).unwrap(),
            st.sample_variance_y().unwrap(),
            epsilon = 1e-14
        );
        // lambda = 1 is the plain residual variance of Y - S.
        let resid: Vec<(f64, f64)> = [(0.1, 0.3), (0.9, 0.2), (0.4, 0.8), (0.2, 0.5)]
            .iter()
            .map(|&(y, s)| (y - s, 0.0))
            .collect();
        let oracle = from_pairs(&resid).sample_variance_y().unwrap();
        assert_abs_diff_eq!(st.tuned_residual_variance(1.0).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn tuned_variance_matches_explicit_residuals() {
        let lambda = 0.37;
        let mut pairs = Vec::new();
        for i in 0..50u64 {
            let key = crate::rng::stream(5, &[i]);
            pairs.push((
                crate::rng::standard_normal(key, 0),
                crate::rng::standard_normal(key, 1),
            ));
        }
        let st = from_pairs(&pairs);
        let resid: Vec<(f64, f64)> = pairs.iter().map(|&(y, s)| (y - lambda * s, 0.0)).collect();
        let explicit = from_pairs(&resid).sample_variance_y().unwrap();
        let got = st.tuned_residual_variance(lambda).unwrap();
        assert!((got - explicit).abs() <= 1e-10 * explicit.max(1.0));
    }

    #[test]
    fn merge_matches_sequential() {
        let all: Vec<(f64, f64)> = (0..40u64)
            .map(|i| {
                let key = crate::rng::stream(3, &[i]);
                (
                    crate::rng::standard_normal(key, 0) * 2.0 + 5.0,
                    crate::rng::standard_normal(key, 1) - 3.0,
                )
            })
            .collect();
        let whole = from_pairs(&all);
        let left = from_pairs(&all[..17]);
        let right = from_pairs(&all[17..]);
        let merged = left.merge(&right);
        let swapped = right.merge(&left);
        for m in [&merged, &swapped] {
            assert_eq!(m.n(), whole.n());
            assert_abs_diff_eq!(
                m.sample_variance_y().unwrap(),
                whole.sample_variance_y().unwrap(),
                epsilon = 1e-9
            );
            assert_abs_diff_eq!(m.sample_cov().unwrap(), whole.sample_cov().unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn large_constant_offset_is_stable() {
        // 10^6 copies of the constant 10^6 must not produce spurious variance.
        let mut st = PairedStats::new();
        for _ in 0..1_000_000 {
            st.push(1e6, 1e6).unwrap();
        }
        assert!(st.sample_variance_y().unwrap() <= 1e-3);
        assert!(st.sample_variance_s().unwrap() <= 1e-3);
    }
}
