//! Module-level allocation: arms are question modules, one label buys a
//! respondent's answers to every question in the module, and the module
//! difficulty is the sum of its members' difficulties.

use std::collections::HashMap;

use crate::rng;
use crate::tracker::{Observation, Tracker};

use super::replay::{ReplayDataset, ReplayError};
use super::Environment;

/// Module-grouped view of a replay dataset.
#[derive(Debug, Clone)]
pub struct ModuleEnv {
    data: ReplayDataset,
    /// Module ids in first-appearance order of their first member.
    module_ids: Vec<String>,
    /// Member question indices per module.
    members: Vec<Vec<usize>>,
    /// A_w = sum of member difficulties.
    a: Vec<f64>,
    weights: Vec<f64>,
    costs: Vec<f64>,
}

impl ModuleEnv {
    /// Group the dataset's questions by the label map. Every retained
    /// question must be labeled; labels for excluded questions are ignored.
    pub fn new(data: ReplayDataset, labels: &HashMap<String, String>) -> Result<Self, ReplayError> {
        let mut module_ids: Vec<String> = Vec::new();
        let mut index_of: HashMap<String, usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (qi, q) in data.questions.iter().enumerate() {
            let Some(mid) = labels.get(&q.id) else {
                return Err(ReplayError::MissingModuleLabel(q.id.clone()));
            };
            let m = *index_of.entry(mid.clone()).or_insert_with(|| {
                module_ids.push(mid.clone());
                members.push(Vec::new());
                module_ids.len() - 1
            });
            members[m].push(qi);
        }
        let a = members
            .iter()
            .map(|qs| qs.iter().map(|&q| data.questions[q].a).sum())
            .collect();
        let n = module_ids.len();
        Ok(Self {
            data,
            module_ids,
            members,
            a,
            weights: vec![1.0; n],
            costs: vec![1.0; n],
        })
    }

    pub fn module_ids(&self) -> &[String] {
        &self.module_ids
    }

    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn set_weights(&mut self, w: Vec<f64>) {
        assert_eq!(w.len(), self.a.len());
        self.weights = w;
    }

    pub fn set_costs(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.a.len());
        self.costs = c;
    }
}

impl Environment for ModuleEnv {
    fn num_arms(&self) -> usize {
        self.module_ids.len()
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
        // One bootstrap respondent per member question, independent across
        // members; the member's question index keeps streams disjoint from
        // the question-level environment.
        let pairs = self.members[arm]
            .iter()
            .map(|&q| {
                let pool = &self.data.questions[q].pairs;
                let key = rng::stream(seed, &[0x0D01E, q as u64, index]);
                pool[rng::bounded(key, pool.len() as u64) as usize]
            })
            .collect();
        Observation::Pairs(pairs)
    }

    fn new_tracker(&self, arm: usize) -> Tracker {
        Tracker::new_module(self.members[arm].len())
    }
}
