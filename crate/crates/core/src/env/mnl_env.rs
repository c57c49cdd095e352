//! MNL choice-task environment: arms are tasks, one label is one paired
//! (human, LLM) choice, and the true difficulty is the sandwich-covariance
//! trace computed at construction.

use crate::mnl::{
    generate_tasks, sandwich_difficulty, MnlCriterion, MnlError, MnlSpec, MnlTask, MnlTracker,
};
use crate::rng;
use crate::tracker::{Observation, Tracker};

use super::Environment;

/// Monte Carlo sample count for the ground-truth difficulties.
pub const DIFFICULTY_MC_SAMPLES: usize = 50_000;

#[derive(Debug, Clone)]
pub struct MnlEnv {
    tasks: Vec<MnlTask>,
    a: Vec<f64>,
    lambda: f64,
    criterion: MnlCriterion,
    weights: Vec<f64>,
    costs: Vec<f64>,
}

impl MnlEnv {
    /// Generate the task set and precompute each task's difficulty by Monte
    /// Carlo (seeded from the spec seed, 50,000 samples).
    pub fn new(spec: &MnlSpec, lambda: f64, criterion: MnlCriterion) -> Result<Self, MnlError> {
        let tasks = generate_tasks(spec)?;
        let a = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                sandwich_difficulty(
                    t,
                    lambda,
                    DIFFICULTY_MC_SAMPLES,
                    rng::stream(spec.seed, &[0xD1FF, i as u64]),
                    criterion,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let n = tasks.len();
        Ok(Self {
            tasks,
            a,
            lambda,
            criterion,
            weights: vec![1.0; n],
            costs: vec![1.0; n],
        })
    }

    pub fn tasks(&self) -> &[MnlTask] {
        &self.tasks
    }
}

impl Environment for MnlEnv {
    fn num_arms(&self) -> usize {
        self.tasks.len()
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
        let t = &self.tasks[arm];
        let key = rng::stream(seed, &[arm as u64, index]);
        Observation::Choice {
            y: crate::mnl::mnl_sample_choice(&t.x, &t.beta_star, key, 0),
            s: crate::mnl::mnl_sample_choice(&t.x, &t.beta_llm, key, 1),
        }
    }

    fn new_tracker(&self, arm: usize) -> Tracker {
        Tracker::new_mnl(
            MnlTracker::new(self.tasks[arm].x.clone(), self.lambda),
            self.criterion,
        )
    }
}
