//! Dataset-replay environment: paired (human, LLM) survey responses,
//! min-max scaled per question, sampled with replacement.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::estimators::fit_lambda;
use crate::rng;
use crate::stats::PairedStats;
use crate::tracker::{Observation, Tracker};

use super::transforms::{self, TransformError};
use super::Environment;

/// Tuned residual variance below which a question counts as perfectly
/// predicted and is excluded from allocation.
pub const DEGENERATE_A: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("failed to read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header {got:?}; expected {want:?}")]
    Schema { got: Vec<String>, want: Vec<String> },
    #[error("question {0} has a constant human column and cannot be scaled")]
    ConstantQuestion(String),
    #[error("question {0} needs at least 2 responses, found {1}")]
    TooFewResponses(String, usize),
    #[error("non-finite response for question {0}")]
    NonFiniteResponse(String),
    #[error("every question in the dataset is degenerate")]
    AllDegenerate,
    #[error("question {0} has no module label")]
    MissingModuleLabel(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// One ingested question: scaled pairs plus full-sample difficulty.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionData {
    pub id: String,
    /// (human, llm) responses in [0, 1], respondent order as read.
    pub pairs: Vec<(f64, f64)>,
    /// Full-sample tuned residual variance at lambda*.
    pub a: f64,
    /// Full-sample clipped regression coefficient.
    pub lambda_star: f64,
}

/// The full replay pool: retained questions plus exclusion warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayDataset {
    pub questions: Vec<QuestionData>,
    /// (question id, reason) for questions dropped at ingestion.
    pub excluded: Vec<(String, String)>,
}

fn minmax_scale(id: &str, values: &mut [f64], reject_constant: bool) -> Result<(), ReplayError> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if hi <= lo {
        if reject_constant {
            return Err(ReplayError::ConstantQuestion(id.to_string()));
        }
        // Constant LLM column: map to the midpoint; lambda* is 0 regardless.
        values.iter_mut().for_each(|v| *v = 0.5);
        return Ok(());
    }
    let span = hi - lo;
    values.iter_mut().for_each(|v| *v = (*v - lo) / span);
    Ok(())
}

impl ReplayDataset {
    pub fn from_path(path: &Path) -> Result<Self, ReplayError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    /// Parse the `question_id,respondent_id,human,llm` schema, scale each
    /// question's columns to [0, 1], and compute full-sample lambda* and A.
    /// Perfectly predicted questions are excluded with a recorded reason.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, ReplayError> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
        let want = ["question_id", "respondent_id", "human", "llm"];
        let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if got != want {
            return Err(ReplayError::Schema {
                got,
                want: want.iter().map(|s| s.to_string()).collect(),
            });
        }

        // Group rows by question, preserving first-appearance order.
        let mut order: Vec<String> = Vec::new();
        let mut rows: HashMap<String, (Vec<f64>, Vec<f64>)> = HashMap::new();
        for record in rdr.deserialize() {
            let (qid, _rid, human, llm): (String, String, f64, f64) = record?;
            if !human.is_finite() || !llm.is_finite() {
                return Err(ReplayError::NonFiniteResponse(qid));
            }
            let entry = rows.entry(qid.clone()).or_insert_with(|| {
                order.push(qid);
                (Vec::new(), Vec::new())
            });
            entry.0.push(human);
            entry.1.push(llm);
        }

        let mut questions = Vec::new();
        let mut excluded = Vec::new();
        for id in order {
            let (mut human, mut llm) = rows.remove(&id).unwrap();
            if human.len() < 2 {
                return Err(ReplayError::TooFewResponses(id, human.len()));
            }
            minmax_scale(&id, &mut human, true)?;
            minmax_scale(&id, &mut llm, false)?;
            let mut st = PairedStats::new();
            for (&y, &s) in human.iter().zip(&llm) {
                st.push(y, s).expect("finite scaled responses");
            }
            let lambda_star = fit_lambda(&st).expect("two or more responses");
            let a = st
                .tuned_residual_variance(lambda_star)
                .expect("two or more responses");
            if a < DEGENERATE_A {
                excluded.push((id, "perfectly predicted (A = 0)".to_string()));
                continue;
            }
            questions.push(QuestionData {
                id,
                pairs: human.into_iter().zip(llm).collect(),
                a,
                lambda_star,
            });
        }
        if questions.is_empty() {
            return Err(ReplayError::AllDegenerate);
        }
        Ok(Self {
            questions,
            excluded,
        })
    }

    pub fn num_questions(&self) -> usize {
        self.questions.len()
    }

    pub fn difficulties(&self) -> Vec<f64> {
        self.questions.iter().map(|q| q.a).collect()
    }

    /// Uniform with-replacement draw of one paired row of question `q`.
    pub fn sample_pair(&self, q: usize, index: u64, seed: u64) -> (f64, f64) {
        let pool = &self.questions[q].pairs;
        let key = rng::stream(seed, &[q as u64, index]);
        pool[rng::bounded(key, pool.len() as u64) as usize]
    }
}

/// Parse an optional `question_id,module_id` map.
pub fn read_module_map<R: Read>(reader: R) -> Result<HashMap<String, String>, ReplayError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let want = ["question_id", "module_id"];
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != want {
        return Err(ReplayError::Schema {
            got,
            want: want.iter().map(|s| s.to_string()).collect(),
        });
    }
    let mut map = HashMap::new();
    for record in rdr.deserialize() {
        let (qid, mid): (String, String) = record?;
        map.insert(qid, mid);
    }
    Ok(map)
}

/// Question-level bootstrap environment over an ingested dataset.
#[derive(Debug, Clone)]
pub struct ReplayEnv {
    data: ReplayDataset,
    /// Difficulties the experiment targets (full-sample A, possibly
    /// heterogeneity-rescaled).
    a: Vec<f64>,
    /// Per-question multiplier applied to deviations from the full-sample
    /// means; sqrt(target A / full-sample A), 1 when no rescaling.
    resid_scale: Vec<f64>,
    /// Full-sample (mean human, mean llm) per question.
    means: Vec<(f64, f64)>,
    weights: Vec<f64>,
    costs: Vec<f64>,
}

impl ReplayEnv {
    pub fn new(data: ReplayDataset) -> Self {
        let q = data.num_questions();
        let a = data.difficulties();
        let means = data
            .questions
            .iter()
            .map(|qd| {
                let n = qd.pairs.len() as f64;
                let (sy, ss) = qd
                    .pairs
                    .iter()
                    .fold((0.0, 0.0), |(ay, as_), &(y, s)| (ay + y, as_ + s));
                (sy / n, ss / n)
            })
            .collect();
        Self {
            data,
            a,
            resid_scale: vec![1.0; q],
            means,
            weights: vec![1.0; q],
            costs: vec![1.0; q],
        }
    }

    pub fn dataset(&self) -> &ReplayDataset {
        &self.data
    }

    pub fn lambda_stars(&self) -> Vec<f64> {
        self.data.questions.iter().map(|q| q.lambda_star).collect()
    }

    pub fn set_weights(&mut self, w: Vec<f64>) {
        assert_eq!(w.len(), self.a.len());
        self.weights = w;
    }

    pub fn set_costs(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.a.len());
        self.costs = c;
    }

    /// Rescale the difficulty spread (mean-preserving, log space) and adjust
    /// the replayed responses so their residual variances actually match:
    /// deviations from the full-sample means are multiplied by
    /// sqrt(target / full-sample A), which preserves lambda* and scales the
    /// tuned residual variance to the target. Responses may leave [0, 1]
    /// slightly at h > 1.
    pub fn rescale_heterogeneity(&mut self, h: f64) -> Result<(), ReplayError> {
        let full = self.data.difficulties();
        let targets = transforms::rescale_heterogeneity(&full, h)?;
        self.resid_scale = targets
            .iter()
            .zip(&full)
            .map(|(t, f)| (t / f).sqrt())
            .collect();
        self.a = targets;
        Ok(())
    }
}

impl Environment for ReplayEnv {
    fn num_arms(&self) -> usize {
        self.a.len()
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn costs(&self) -> &[f64] {
        &self.costs
    }

    fn true_difficulties(&self) -> &[f64] {
        &self.a
    }

    fn draw(&self, arm: usize, index: u64, seed: u64) -> Observation {
        let (y, s) = self.data.sample_pair(arm, index, seed);
        let f = self.resid_scale[arm];
        let (my, ms) = self.means[arm];
        Observation::Pair {
            y: my + (y - my) * f,
            s: ms + (s - ms) * f,
        }
    }

    fn new_tracker(&self, _arm: usize) -> Tracker {
        Tracker::new_mean()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn csv_of(rows: &[(&str, &str, f64, f64)]) -> String {
        let mut s = String::from("question_id,respondent_id,human,llm\n");
        for (q, r, h, l) in rows {
            s.push_str(&format!("{q},{r},{h},{l}\n"));
        }
        s
    }

    fn small_dataset() -> ReplayDataset {
        let rows: Vec<(String, String, f64, f64)> = (0..40)
            .flat_map(|i| {
                let u = (i as f64) / 39.0;
                vec![
                    ("a".to_string(), format!("r{i}"), 1.0 + 4.0 * u, 2.0 + 3.0 * u + 0.5 * (i as f64 * 2.3).sin()),
                    ("b".to_string(), format!("r{i}"), (i as f64 * 1.7).sin(), (i as f64 * 0.9).cos()),
                ]
            })
            .collect();
        let mut s = String::from("question_id,respondent_id,human,llm\n");
        for (q, r, h, l) in rows {
            s.push_str(&format!("{q},{r},{h},{l}\n"));
        }
        ReplayDataset::from_reader(s.as_bytes()).unwrap()
    }

    #[test]
    fn scaling_lands_in_unit_interval() {
        let d = small_dataset();
        for q in &d.questions {
            for &(y, s) in &q.pairs {
                assert!((0.0..=1.0).contains(&y) && (0.0..=1.0).contains(&s));
            }
            let ys: Vec<f64> = q.pairs.iter().map(|p| p.0).collect();
            assert_eq!(ys.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }
    }

    #[test]
    fn perfect_prediction_excluded_with_warning() {
        let text = csv_of(&[
            ("a", "r1", 0.0, 0.0),
            ("a", "r2", 1.0, 2.0),
            ("a", "r3", 2.0, 4.0),
            ("b", "r1", 0.0, 1.0),
            ("b", "r2", 1.0, 0.0),
            ("b", "r3", 0.4, 0.9),
        ]);
        // Question a: llm is an affine function of human, so after scaling
        // llm == human exactly -> A = 0 -> excluded.
        let d = ReplayDataset::from_reader(text.as_bytes()).unwrap();
        assert_eq!(d.questions.len(), 1);
        assert_eq!(d.questions[0].id, "b");
        assert_eq!(d.excluded.len(), 1);
        assert_eq!(d.excluded[0].0, "a");
    }

    #[test]
    fn negative_covariance_clips_lambda_to_zero() {
        let text = csv_of(&[
            ("a", "r1", 0.0, 1.0),
            ("a", "r2", 0.5, 0.6),
            ("a", "r3", 1.0, 0.0),
        ]);
        let d = ReplayDataset::from_reader(text.as_bytes()).unwrap();
        assert_eq!(d.questions[0].lambda_star, 0.0);
    }

    #[test]
    fn constant_human_column_rejected() {
        let text = csv_of(&[("a", "r1", 2.0, 0.1), ("a", "r2", 2.0, 0.9)]);
        let err = ReplayDataset::from_reader(text.as_bytes()).unwrap_err();
        assert!(matches!(err, ReplayError::ConstantQuestion(id) if id == "a"));
    }

    #[test]
    fn constant_llm_column_tolerated() {
        let text = csv_of(&[
            ("a", "r1", 0.0, 3.0),
            ("a", "r2", 0.5, 3.0),
            ("a", "r3", 1.0, 3.0),
        ]);
        let d = ReplayDataset::from_reader(text.as_bytes()).unwrap();
        assert_eq!(d.questions[0].lambda_star, 0.0);
        for &(_, s) in &d.questions[0].pairs {
            assert_eq!(s, 0.5);
        }
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "question,respondent_id,human,llm\na,r,0,0\n";
        assert!(matches!(
            ReplayDataset::from_reader(text.as_bytes()),
            Err(ReplayError::Schema { .. })
        ));
    }

    #[test]
    fn malformed_number_rejected() {
        let text = "question_id,respondent_id,human,llm\na,r1,zero,0.5\na,r2,1,0.7\n";
        assert!(matches!(
            ReplayDataset::from_reader(text.as_bytes()),
            Err(ReplayError::Csv(_))
        ));
    }

    #[test]
    fn single_respondent_question_rejected() {
        let text = csv_of(&[("a", "r1", 0.0, 0.5)]);
        assert!(matches!(
            ReplayDataset::from_reader(text.as_bytes()),
            Err(ReplayError::TooFewResponses(_, 1))
        ));
    }

    #[test]
    fn bootstrap_draws_are_uniform() {
        // Chi-square goodness of fit over the respondent pool at 1%.
        let d = small_dataset();
        let pool = d.questions[0].pairs.len();
        let draws = 100_000u64;
        let mut counts = vec![0u64; pool];
        for i in 0..draws {
            let (y, s) = d.sample_pair(0, i, 5);
            let idx = d.questions[0]
                .pairs
                .iter()
                .position(|&p| p == (y, s))
                .unwrap();
            counts[idx] += 1;
        }
        let expect = draws as f64 / pool as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        // 99th percentile of chi-square with 39 degrees of freedom is 62.43.
        assert!(chi2 < 62.43, "chi2 {chi2}");
    }

    #[test]
    fn bootstrap_difficulty_consistent_with_full_sample() {
        let d = small_dataset();
        let mut st = PairedStats::new();
        for i in 0..10_000u64 {
            let (y, s) = d.sample_pair(0, i, 7);
            st.push(y, s).unwrap();
        }
        let lam = d.questions[0].lambda_star;
        let a_hat = st.tuned_residual_variance(lam).unwrap();
        let a = d.questions[0].a;
        // Sample variance of a bounded residual: SE roughly sqrt(2/n) * A.
        let se = (2.0f64 / 10_000.0).sqrt() * a;
        assert!((a_hat - a).abs() < 4.0 * se, "a_hat {a_hat} vs {a}");
    }

    #[test]
    fn heterogeneity_rescale_changes_draws_consistently() {
        let d = small_dataset();
        let mut env = ReplayEnv::new(d);
        let before = env.true_difficulties().to_vec();
        env.rescale_heterogeneity(2.0).unwrap();
        let after = env.true_difficulties().to_vec();
        assert_abs_diff_eq!(
            before.iter().sum::<f64>(),
            after.iter().sum::<f64>(),
            epsilon = 1e-12
        );
        // Residual variance of the replayed draws matches the target.
        let mut st = PairedStats::new();
        for i in 0..20_000u64 {
            if let Observation::Pair { y, s } = env.draw(0, i, 11) {
                st.push(y, s).unwrap();
            }
        }
        let lam = env.lambda_stars()[0];
        let a_hat = st.tuned_residual_variance(lam).unwrap();
        let se = (2.0f64 / 20_000.0).sqrt() * after[0];
        assert!((a_hat - after[0]).abs() < 4.0 * se, "a_hat {a_hat} vs {}", after[0]);
    }

    #[test]
    fn module_map_parses() {
        let text = "question_id,module_id\na,m1\nb,m2\n";
        let m = read_module_map(text.as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m["a"], "m1");
    }
}
