//! Per-arm difficulty tracking shared by every allocation policy.
//!
//! An "arm" is whatever unit the budget is allocated over: a single question,
//! a question module (one label answers every member question), or an MNL
//! choice task. The tracker turns raw observations into the running
//! difficulty estimate the selection indices need.

use thiserror::Error;

use crate::estimators::fit_lambda;
use crate::mnl::{MnlCriterion, MnlTracker};
use crate::stats::{PairedStats, StatsError};

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("observation kind does not match tracker kind")]
    KindMismatch,
    #[error("module observation has {got} entries, tracker expects {want}")]
    ModuleArity { got: usize, want: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Mnl(#[from] crate::mnl::MnlError),
}

/// One unit of labeled data for an arm.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    /// A (human, llm) response pair for one question.
    Pair { y: f64, s: f64 },
    /// One respondent's pairs for every question in a module, member order.
    Pairs(Vec<(f64, f64)>),
    /// A (human, llm) pair of chosen alternatives for an MNL task.
    Choice { y: usize, s: usize },
}

/// How an arm's difficulty estimate is computed from its tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyMode {
    /// Residual variance of Y - S (lambda fixed at 1).
    Plain,
    /// Residual variance at the refit, clipped lambda-hat.
    #[default]
    Tuned,
}

/// Running per-arm state: counts plus whatever the difficulty estimate needs.
#[derive(Debug, Clone, PartialEq)]
pub enum Tracker {
    Mean(PairedStats),
    Module(Vec<PairedStats>),
    Mnl {
        inner: MnlTracker,
        criterion: MnlCriterion,
    },
}

impl Tracker {
    pub fn new_mean() -> Self {
        Tracker::Mean(PairedStats::new())
    }

    pub fn new_module(members: usize) -> Self {
        Tracker::Module(vec![PairedStats::new(); members])
    }

    pub fn new_mnl(inner: MnlTracker, criterion: MnlCriterion) -> Self {
        Tracker::Mnl { inner, criterion }
    }

    /// Labels recorded so far (one per respondent/choice, not per question).
    pub fn n(&self) -> u64 {
        match self {
            Tracker::Mean(s) => s.n(),
            Tracker::Module(ms) => ms.first().map_or(0, |s| s.n()),
            Tracker::Mnl { inner, .. } => inner.n(),
        }
    }

    pub fn push(&mut self, obs: &Observation) -> Result<(), TrackerError> {
        match (self, obs) {
            (Tracker::Mean(s), Observation::Pair { y, s: llm }) => {
                s.push(*y, *llm)?;
                Ok(())
            }
            (Tracker::Module(ms), Observation::Pairs(pairs)) => {
                if pairs.len() != ms.len() {
                    return Err(TrackerError::ModuleArity {
                        got: pairs.len(),
                        want: ms.len(),
                    });
                }
                for (m, &(y, llm)) in ms.iter_mut().zip(pairs) {
                    m.push(y, llm)?;
                }
                Ok(())
            }
            (Tracker::Mnl { inner, .. }, Observation::Choice { y, s }) => {
                inner.push(*y, *s)?;
                Ok(())
            }
            _ => Err(TrackerError::KindMismatch),
        }
    }

    /// Difficulty estimate A-hat. Module difficulty sums member variances
    /// (the module index allocates one respondent to all members at once).
    /// MNL arms use their own criterion; `mode` selects lambda handling for
    /// the paired variants only.
    pub fn difficulty(&self, mode: DifficultyMode) -> Result<f64, TrackerError> {
        match self {
            Tracker::Mean(s) => Ok(paired_difficulty(s, mode)?),
            Tracker::Module(ms) => {
                let mut total = 0.0;
                for m in ms {
                    total += paired_difficulty(m, mode)?;
                }
                Ok(total)
            }
            Tracker::Mnl { inner, criterion } => Ok(inner.difficulty(*criterion)?),
        }
    }

    /// Fitted lambda for reporting (mean arms only; 1 elsewhere).
    pub fn fitted_lambda(&self) -> Result<f64, TrackerError> {
        match self {
            Tracker::Mean(s) => Ok(fit_lambda(s)?),
            _ => Ok(1.0),
        }
    }

    /// Underlying paired statistics for single-question arms.
    pub fn paired_stats(&self) -> Option<&PairedStats> {
        match self {
            Tracker::Mean(s) => Some(s),
            _ => None,
        }
    }
}

fn paired_difficulty(s: &PairedStats, mode: DifficultyMode) -> Result<f64, StatsError> {
    match mode {
        DifficultyMode::Plain => s.tuned_residual_variance(1.0),
        DifficultyMode::Tuned => {
            let lam = fit_lambda(s)?;
            s.tuned_residual_variance(lam)
        }
    }
}
