//! Generator for a surrogate replay dataset with controlled difficulty
//! statistics.
//!
//! The real paired survey data is not redistributable, so the repo ships a
//! generator that reproduces its published summary statistics: 68 questions,
//! difficulty range about [0.024, 0.239] with CV 0.63, and 38% of questions
//! whose LLM predictions carry no signal (lambda* ~ 0). Responses come from
//! a tanh-squashed Gaussian model whose squash gain is calibrated per
//! question (by bisection, against the same min-max-scaled tuned variance
//! the ingestion path computes) to hit a log-spaced difficulty target.
//! Questions are deliberately lopsided -- most respondents sit on a
//! consensus answer with a minority on the other side -- so small pilot
//! samples routinely underestimate a question's residual variance, the
//! failure mode that separates committing and sequential policies on real
//! survey data.

use std::io::Write;

use thiserror::Error;

use crate::estimators::fit_lambda;
use crate::rng;
use crate::stats::PairedStats;

use super::replay::{ReplayDataset, ReplayError};

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("invalid surrogate spec: {0}")]
    Invalid(String),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv write failed: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Ingest(#[from] ReplayError),
}

/// Generator parameters. Defaults reproduce the published statistics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SurrogateSpec {
    pub questions: usize,
    pub respondents: usize,
    /// Smallest and largest difficulty target (log-spaced grid between).
    pub a_min: f64,
    pub a_max: f64,
    /// How many of the hardest questions get an uninformative LLM.
    pub lambda_zero_count: usize,
    pub seed: u64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            questions: 68,
            respondents: 1271,
            a_min: 0.024,
            a_max: 0.239,
            lambda_zero_count: 26,
            seed: 2024,
        }
    }
}

impl SurrogateSpec {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.questions == 0 || self.respondents < 2 {
            return Err(SurrogateError::Invalid(
                "need at least 1 question and 2 respondents".into(),
            ));
        }
        if !(self.a_min > 0.0 && self.a_max >= self.a_min) {
            return Err(SurrogateError::Invalid("need 0 < a_min <= a_max".into()));
        }
        if self.a_max >= 0.25 {
            // 0.25 is the variance ceiling for responses in [0, 1].
            return Err(SurrogateError::Invalid(
                "a_max must stay below 0.25 (unit-interval variance bound)".into(),
            ));
        }
        if self.lambda_zero_count > self.questions {
            return Err(SurrogateError::Invalid(
                "lambda_zero_count exceeds question count".into(),
            ));
        }
        Ok(())
    }

    /// Log-spaced difficulty target for question `q`.
    pub fn target_a(&self, q: usize) -> f64 {
        if self.questions == 1 {
            return self.a_min;
        }
        let t = q as f64 / (self.questions - 1) as f64;
        self.a_min * (self.a_max / self.a_min).powf(t)
    }

    /// Whether question `q` gets an uninformative LLM. The hardest questions
    /// (largest targets) are the unpredictable ones.
    pub fn is_lambda_zero(&self, q: usize) -> bool {
        q + self.lambda_zero_count >= self.questions
    }
}

/// One question's generated, unscaled responses.
struct RawQuestion {
    human: Vec<f64>,
    llm: Vec<f64>,
}

/// Min-max scale a copy and return the full-sample tuned residual variance,
/// mirroring the ingestion computation exactly.
fn scaled_tuned_a(human: &[f64], llm: &[f64]) -> f64 {
    let scale = |v: &[f64]| -> Vec<f64> {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return vec![0.5; v.len()];
        }
        v.iter().map(|x| (x - lo) / (hi - lo)).collect()
    };
    let y = scale(human);
    let s = scale(llm);
    let mut st = PairedStats::new();
    for (a, b) in y.iter().zip(&s) {
        st.push(*a, *b).unwrap();
    }
    let lam = fit_lambda(&st).unwrap();
    st.tuned_residual_variance(lam).unwrap()
}

fn generate_question(spec: &SurrogateSpec, q: usize) -> RawQuestion {
    let n = spec.respondents;
    let qkey = rng::stream(spec.seed, &[0x5u64, q as u64]);
    // Signal share of the human response for informative questions.
    let r = 0.55 + 0.3 * rng::unit(rng::mix64(qkey ^ 0x11));
    let uninformative = spec.is_lambda_zero(q);

    // Latent draws, fixed across the gain calibration.
    let mut x_y = Vec::with_capacity(n);
    let mut x_s = Vec::with_capacity(n);
    for i in 0..n {
        let key = rng::stream(qkey, &[i as u64]);
        let u = rng::standard_normal(key, 0);
        let e = rng::standard_normal(key, 1);
        let w = rng::standard_normal(key, 2);
        x_y.push(r * u + (1.0 - r * r).sqrt() * e);
        x_s.push(if uninformative { w } else { u });
    }
    let llm: Vec<f64> = x_s.iter().map(|x| x.tanh()).collect();

    // Minority response share. Easier questions are more lopsided, mirroring
    // how survey items concentrate on a consensus answer; the binary-ceiling
    // variance p(1-p) keeps a 3x margin over the difficulty target so the
    // gain calibration below can always reach it. The lopsidedness is what
    // makes small-sample variance estimates of these questions unreliable,
    // a property of real paired survey data that the downstream pilot-based
    // policies are sensitive to.
    let target = spec.target_a(q);
    // Informative questions need extra ceiling headroom because the tuned
    // residual variance the calibration targets sits below the raw variance.
    let margin = if uninformative { 1.22 } else { 2.05 };
    let ceiling = (margin * target).min(0.24);
    let p = 0.5 * (1.0 - (1.0 - 4.0 * ceiling).max(0.0).sqrt());
    // Center the squash at the empirical (1-p) quantile of the latent draw
    // so the realized minority share is exact without distribution tables.
    let mut sorted = x_y.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted[(((1.0 - p) * n as f64) as usize).min(n - 1)];

    // The squash gain g controls how bimodal the human responses are, and
    // with them the post-scaling residual variance: monotone increasing from
    // the Gaussian floor toward the (skewed) binary ceiling. Bisect it onto
    // the target.
    let a_of = |g: f64| -> f64 {
        let human: Vec<f64> = x_y.iter().map(|x| (g * (x - m)).tanh()).collect();
        scaled_tuned_a(&human, &llm)
    };
    let (mut lo, mut hi) = (0.02, 80.0);
    let mut g = if a_of(lo) >= target {
        lo
    } else if a_of(hi) <= target {
        hi
    } else {
        for _ in 0..45 {
            let mid = 0.5 * (lo + hi);
            if a_of(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    // Guard: keep the realized value closest to the target.
    if (a_of(lo) - target).abs() < (a_of(g) - target).abs() {
        g = lo;
    }
    RawQuestion {
        human: x_y.iter().map(|x| (g * (x - m)).tanh()).collect(),
        llm,
    }
}

/// Write the surrogate dataset in the replay CSV schema.
pub fn write_csv<W: Write>(spec: &SurrogateSpec, out: W) -> Result<(), SurrogateError> {
    spec.validate()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["question_id", "respondent_id", "human", "llm"])?;
    for q in 0..spec.questions {
        let raw = generate_question(spec, q);
        for i in 0..spec.respondents {
            w.write_record([
                format!("q{q:02}"),
                format!("r{i:04}"),
                format!("{:.6}", raw.human[i]),
                format!("{:.6}", raw.llm[i]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Module sizes for the default 14-module grouping: small modules of easy
/// questions, large modules of hard ones, which spreads the module-level
/// difficulties widely.
pub const DEFAULT_MODULE_SIZES: [usize; 14] = [2, 3, 3, 4, 4, 5, 5, 5, 5, 6, 6, 6, 7, 7];

/// Write the `question_id,module_id` map grouping consecutive questions into
/// modules with the given sizes (must sum to the question count).
pub fn write_module_map<W: Write>(
    spec: &SurrogateSpec,
    sizes: &[usize],
    out: W,
) -> Result<(), SurrogateError> {
    if sizes.iter().sum::<usize>() != spec.questions {
        return Err(SurrogateError::Invalid(format!(
            "module sizes sum to {}, need {}",
            sizes.iter().sum::<usize>(),
            spec.questions
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["question_id", "module_id"])?;
    let mut q = 0usize;
    for (m, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            w.write_record([format!("q{q:02}"), format!("m{m:02}")])?;
            q += 1;
        }
    }
    w.flush()?;
    Ok(())
}

/// Generate and immediately ingest, guaranteeing the dataset seen by
/// experiments is byte-identical to what `write_csv` ships.
pub fn generate_dataset(spec: &SurrogateSpec) -> Result<ReplayDataset, SurrogateError> {
    let mut buf = Vec::new();
    write_csv(spec, &mut buf)?;
    Ok(ReplayDataset::from_reader(buf.as_slice())?)
}
