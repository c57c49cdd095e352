//! Confidence-radius formulas for the optimistic difficulty indices.
//!
//! Two radii are provided: the empirical-Bernstein variance upper bound used
//! by the plain allocation algorithm, and the wider radius for the tuned
//! estimator that additionally accounts for uncertainty in the fitted
//! coefficient `lambda`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfidenceError {
    #[error("radius undefined for sample count {0}; need at least 2")]
    TooFewSamples(u64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Which optimistic bound the tuned-difficulty index uses.
///
/// `Bernstein` applies the plain variance bound to the tuned residual
/// variance (this reproduces the experiment tables). `TunedFull` uses the
/// theory-faithful radius that includes the lambda-concentration width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RadiusKind {
    #[default]
    Bernstein,
    TunedFull,
}

/// Range/bound parameters and the confidence budget shared by all radius
/// formulas. `delta_pair = delta / (Q * T_max)` is the per-(question, count)
/// confidence after the union bound.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConfidenceConfig {
    /// Global confidence level in (0, 1).
    pub delta: f64,
    /// Residual range bound (R = R_Y + R_S for individually bounded data).
    pub r: f64,
    /// Range of the human response.
    pub r_y: f64,
    /// Range of the LLM prediction.
    pub r_s: f64,
    /// Absolute bound on the human response.
    pub m_y: f64,
    /// Absolute bound on the LLM prediction.
    pub m_s: f64,
    /// Lower bound on Var(S) assumed for lambda concentration.
    pub v_min_llm: f64,
    /// Horizon floor(B / min cost).
    pub t_max: u64,
    /// Number of questions.
    pub q: usize,
}

impl ConfidenceConfig {
    /// Configuration for data min-max scaled to [0, 1]: R_Y = R_S = 1, R = 2.
    pub fn unit_interval(q: usize, t_max: u64, delta: f64) -> Self {
        Self {
            delta,
            r: 2.0,
            r_y: 1.0,
            r_s: 1.0,
            m_y: 1.0,
            m_s: 1.0,
            v_min_llm: 0.01,
            t_max,
            q,
        }
    }

    pub fn validate(&self) -> Result<(), ConfidenceError> {
        if !(0.0..1.0).contains(&self.delta) || self.delta <= 0.0 {
            return Err(ConfidenceError::InvalidConfig(format!(
                "delta {} outside (0, 1)",
                self.delta
            )));
        }
        if self.t_max < 1 || self.q == 0 {
            return Err(ConfidenceError::InvalidConfig(
                "t_max and question count must be at least 1".into(),
            ));
        }
        if self.r < 0.0 || self.r_y < 0.0 || self.r_s < 0.0 {
            return Err(ConfidenceError::InvalidConfig("negative range bound".into()));
        }
        Ok(())
    }

    /// Per-pair confidence after the union bound over Q questions and
    /// T_max sample counts.
    pub fn delta_pair(&self) -> f64 {
        self.delta / (self.q as f64 * self.t_max as f64)
    }

    /// Empirical-Bernstein variance upper bound
    /// `(sqrt(a_hat) + R * sqrt(2 ln(2/delta_pair) / (n-1)))^2`.
    ///
    /// Holds the true variance with probability 1 - delta_pair when the
    /// residual range is at most R; decreasing in n for fixed a_hat.
    pub fn a_ucb_ppi(&self, a_hat: f64, n: u64) -> Result<f64, ConfidenceError> {
        if n < 2 {
            return Err(ConfidenceError::TooFewSamples(n));
        }
        let bonus = self.r * (2.0 * (2.0 / self.delta_pair()).ln() / (n as f64 - 1.0)).sqrt();
        let root = a_hat.max(0.0).sqrt() + bonus;
        Ok(root * root)
    }

    /// Concentration width of the plug-in lambda after s paired samples.
    ///
    /// Returns infinity when the Var(S) precondition fails (small s); callers
    /// clamp the lambda contribution at its trivial maximum since
    /// |lambda_hat - lambda*| <= 1 always.
    pub fn delta_lambda(&self, s: u64, delta: f64) -> Result<f64, ConfidenceError> {
        if s < 2 {
            return Err(ConfidenceError::TooFewSamples(s));
        }
        let g = ((8.0 / delta).ln() / (2.0 * s as f64)).sqrt();
        let delta_a =
            (2.0 * self.m_y * self.m_s + self.m_s * self.r_y + self.m_y * self.r_s) * g
                + self.r_y * self.r_s * g * g;
        let delta_b = (self.m_s * self.m_s + 2.0 * self.m_s * self.r_s) * g
            + self.r_s * self.r_s * g * g;
        if delta_b > self.v_min_llm / 2.0 {
            return Ok(f64::INFINITY);
        }
        Ok(2.0 / self.v_min_llm * delta_a
            + 4.0 * self.m_y * self.m_s / (self.v_min_llm * self.v_min_llm) * delta_b)
    }

    /// Radius for the tuned-difficulty square root: a Bernstein term at the
    /// tightened confidence, the grid-discretization term, and the
    /// lambda-uncertainty term (clamped at its trivial maximum of 1).
    pub fn rho_tuned(&self, s: u64) -> Result<f64, ConfidenceError> {
        if s < 2 {
            return Err(ConfidenceError::TooFewSamples(s));
        }
        let dq = self.delta_pair();
        let bernstein = self.r
            * (2.0 * (4.0 * (self.t_max as f64 + 1.0) / dq).ln() / (s as f64 - 1.0)).sqrt();
        let grid = std::f64::consts::SQRT_2 * self.r_s / self.t_max as f64;
        let lambda_term = self.r_s / 2.0 * self.delta_lambda(s, dq / 2.0)?.min(1.0);
        Ok(bernstein + grid + lambda_term)
    }

    /// Optimistic difficulty for the tuned index under the chosen radius.
    pub fn optimistic_difficulty(
        &self,
        a_hat: f64,
        n: u64,
        kind: RadiusKind,
    ) -> Result<f64, ConfidenceError> {
        match kind {
            RadiusKind::Bernstein => self.a_ucb_ppi(a_hat, n),
            RadiusKind::TunedFull => {
                let root = a_hat.max(0.0).sqrt() + self.rho_tuned(n)?;
                Ok(root * root)
            }
        }
    }
}
