//! Observation sources for the allocation loop.
//!
//! An environment owns the ground truth (or full-sample estimate) of each
//! arm's difficulty, the weights and costs, and a pure draw function: the
//! i-th observation of an arm under a replication seed is always the same
//! value, which gives common random numbers across policies for free.

pub mod mnl_env;
pub mod modules;
pub mod replay;
pub mod surrogate;
pub mod synthetic;
pub mod transforms;

use crate::tracker::{DifficultyMode, Observation, Tracker};

/// A source of labeled observations with known per-arm difficulty.
pub trait Environment: Send + Sync {
    fn num_arms(&self) -> usize;
    /// Per-arm weights w_q in the weighted-MSE objective.
    fn weights(&self) -> &[f64];
    /// Per-arm label costs c_q.
    fn costs(&self) -> &[f64];
    /// Ground-truth (or full-sample) difficulty A_q per arm, used for oracle
    /// targets and for the expected-MSE metric.
    fn true_difficulties(&self) -> &[f64];
    /// The `index`-th observation of `arm` under `seed`; pure in all
    /// arguments.
    fn draw(&self, arm: usize, index: u64, seed: u64) -> Observation;
    /// Fresh online-estimation state for `arm`.
    fn new_tracker(&self, arm: usize) -> Tracker;
    /// How online difficulty estimates are computed for this environment.
    fn difficulty_mode(&self) -> DifficultyMode {
        DifficultyMode::Tuned
    }
}
