//! Allocation policies: Neyman oracle, uniform, decaying epsilon-greedy,
//! explore-then-commit, and the optimistic (UCB) index policies, all behind
//! one sequential episode loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::confidence::{ConfidenceConfig, RadiusKind};
use crate::env::Environment;
use crate::tracker::{DifficultyMode, Tracker, TrackerError};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid policy configuration: {0}")]
    InvalidConfig(String),
    #[error("inputs must be positive: {0}")]
    NonPositive(String),
    #[error("budget {got} cannot cover initialization cost {need}")]
    BudgetTooSmall { need: f64, got: f64 },
    #[error(transparent)]
    Tracker(#[from] TrackerError),
}

/// Which policy drives selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Oracle,
    Uniform,
    EpsilonGreedy,
    Etc,
    UcbPpi,
    UcbPpipp,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Oracle => "oracle",
            PolicyKind::Uniform => "uniform",
            PolicyKind::EpsilonGreedy => "epsilon_greedy",
            PolicyKind::Etc => "etc",
            PolicyKind::UcbPpi => "ucb_ppi",
            PolicyKind::UcbPpipp => "ucb_ppipp",
        }
    }
}

/// Per-policy knobs; see the field docs for which policies read which.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Initialization labels per arm (at least 2: sample variance).
    pub k_init: u64,
    /// Exploration constant of epsilon_t = min(1, epsilon_c * Q / t).
    pub epsilon_c: f64,
    /// ETC pilot fraction of the post-initialization budget.
    pub alpha: f64,
    /// Confidence-radius parameters for the UCB policies.
    pub confidence: ConfidenceConfig,
    /// Which radius the tuned UCB variant applies.
    pub radius: RadiusKind,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind, k_init: u64, confidence: ConfidenceConfig) -> Self {
        Self {
            kind,
            k_init,
            epsilon_c: 5.0,
            alpha: 0.3,
            confidence,
            radius: RadiusKind::Bernstein,
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.k_init < 2 {
            return Err(PolicyError::InvalidConfig(format!(
                "initialization needs K >= 2, got {}",
                self.k_init
            )));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(PolicyError::InvalidConfig(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if !(self.epsilon_c > 0.0) {
            return Err(PolicyError::InvalidConfig(format!(
                "epsilon_c {} must be positive",
                self.epsilon_c
            )));
        }
        self.confidence
            .validate()
            .map_err(|e| PolicyError::InvalidConfig(e.to_string()))
    }
}

/// Fractional Neyman counts n*_q = B sqrt(w_q A_q / c_q) / sum_j
/// sqrt(w_j A_j c_j); satisfies sum c_q n*_q = B exactly in exact arithmetic.
pub fn neyman_allocation(
    a: &[f64],
    w: &[f64],
    c: &[f64],
    budget: f64,
) -> Result<Vec<f64>, PolicyError> {
    if !(budget > 0.0) {
        return Err(PolicyError::NonPositive(format!("budget {budget}")));
    }
    let mut denom = 0.0;
    for q in 0..a.len() {
        if !(a[q] > 0.0 && w[q] > 0.0 && c[q] > 0.0) {
            return Err(PolicyError::NonPositive(format!(
                "A={} w={} c={} at question {q}",
                a[q], w[q], c[q]
            )));
        }
        denom += (w[q] * a[q] * c[q]).sqrt();
    }
    Ok((0..a.len())
        .map(|q| budget * (w[q] * a[q] / c[q]).sqrt() / denom)
        .collect())
}

/// Continuous-oracle objective value (sum_q sqrt(w_q A_q c_q))^2 / B, the
/// weighted MSE of the fractional Neyman allocation.
pub fn oracle_mse(a: &[f64], w: &[f64], c: &[f64], budget: f64) -> Result<f64, PolicyError> {
    let n = neyman_allocation(a, w, c, budget)?;
    drop(n);
    let root: f64 = (0..a.len()).map(|q| (w[q] * a[q] * c[q]).sqrt()).sum();
    Ok(root * root / budget)
}

/// Marginal efficiency w A / (c n^2): the variance reduction per unit cost of
/// one more label at count n.
pub fn marginal_efficiency(w: f64, a: f64, c: f64, n: u64) -> Result<f64, PolicyError> {
    if n == 0 {
        return Err(PolicyError::NonPositive("count n = 0".into()));
    }
    Ok(w * a / (c * (n * n) as f64))
}

/// Mutable episode state. `spent` is always recomputed from the counts, so
/// budget conservation holds exactly by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationState {
    pub n: Vec<u64>,
    /// Selection steps completed after initialization.
    pub t: u64,
    pub budget: f64,
}

impl AllocationState {
    pub fn new(q: usize, budget: f64) -> Self {
        Self {
            n: vec![0; q],
            t: 0,
            budget,
        }
    }

    /// Budget consumed, recomputed fresh in fixed arm order.
    pub fn spent(&self, costs: &[f64]) -> f64 {
        self.n
            .iter()
            .zip(costs)
            .map(|(&n, &c)| n as f64 * c)
            .sum()
    }

    pub fn remaining(&self, costs: &[f64]) -> f64 {
        self.budget - self.spent(costs)
    }

    /// Total labels collected across arms.
    pub fn total_labels(&self) -> u64 {
        self.n.iter().sum()
    }
}

/// Terminal record of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub n: Vec<u64>,
    /// Selection steps after initialization.
    pub steps: u64,
    pub spent: f64,
    /// (checkpoint budget, counts when spending first reached it).
    pub checkpoints: Vec<(f64, Vec<u64>)>,
}

/// Argmax over affordable arms with ties broken at the lowest index.
fn argmax_affordable(scores: &[f64], costs: &[f64], remaining: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for q in 0..scores.len() {
        if costs[q] > remaining {
            continue;
        }
        match best {
            Some((_, s)) if scores[q] <= s => {}
            _ => best = Some((q, scores[q])),
        }
    }
    best.map(|(q, _)| q)
}

/// Deficit-following scores: fractional target minus current count.
fn deficit_scores(targets: &[f64], n: &[u64]) -> Vec<f64> {
    targets
        .iter()
        .zip(n)
        .map(|(&t, &k)| t - k as f64)
        .collect()
}

fn optimistic_index(
    cfg: &PolicyConfig,
    mode: DifficultyMode,
    w: f64,
    c: f64,
    tracker: &Tracker,
) -> f64 {
    let n = tracker.n();
    let kind = match cfg.kind {
        PolicyKind::UcbPpi => RadiusKind::Bernstein,
        _ => cfg.radius,
    };
    let a_ucb = match tracker.difficulty(mode) {
        Ok(a_hat) => match cfg.confidence.optimistic_difficulty(a_hat, n, kind) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        },
        // An arm whose difficulty cannot be estimated yet is maximally
        // optimistic, which forces the exploration that will fix it.
        Err(_) => return f64::INFINITY,
    };
    w * a_ucb / (c * (n * n) as f64)
}

fn greedy_index(mode: DifficultyMode, w: f64, c: f64, tracker: &Tracker) -> f64 {
    match tracker.difficulty(mode) {
        Ok(a_hat) => w * a_hat / (c * (tracker.n() * tracker.n()) as f64),
        Err(_) => f64::INFINITY,
    }
}

/// Run one full episode: initialization (K labels per arm), then sequential
/// selection until the remaining budget is below the costliest arm.
/// Deterministic given (env, policy, budget, seed, policy_seed).
pub fn run_episode(
    env: &dyn Environment,
    policy: &PolicyConfig,
    budget: f64,
    seed: u64,
    policy_seed: u64,
    checkpoints: &[f64],
) -> Result<EpisodeResult, PolicyError> {
    policy.validate()?;
    let q_count = env.num_arms();
    let w = env.weights();
    let c = env.costs();
    let mode = env.difficulty_mode();
    let ucb_mode = match policy.kind {
        // The plain variant works on untuned residuals regardless of the
        // environment's preferred mode.
        PolicyKind::UcbPpi => DifficultyMode::Plain,
        _ => mode,
    };

    let init_cost: f64 = c.iter().map(|&cq| cq * policy.k_init as f64).sum();
    if budget < init_cost {
        return Err(PolicyError::BudgetTooSmall {
            need: init_cost,
            got: budget,
        });
    }

    let mut state = AllocationState::new(q_count, budget);
    let mut trackers: Vec<Tracker> = (0..q_count).map(|q| env.new_tracker(q)).collect();

    // Initialization phase: K labels per arm.
    for q in 0..q_count {
        for _ in 0..policy.k_init {
            let obs = env.draw(q, state.n[q], seed);
            trackers[q].push(&obs)?;
            state.n[q] += 1;
        }
    }

    // Policy-specific fixed state.
    let oracle_targets = match policy.kind {
        PolicyKind::Oracle => Some(neyman_allocation(env.true_difficulties(), w, c, budget)?),
        _ => None,
    };
    let pilot_budget = (policy.alpha * (budget - init_cost)).floor();
    let mut etc_targets: Option<Vec<f64>> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(policy_seed);

    // Cached optimistic indices: only the selected arm's index changes
    // between steps (the per-(q, n) confidence level does not depend on t).
    let mut indices: Vec<f64> = match policy.kind {
        PolicyKind::UcbPpi | PolicyKind::UcbPpipp => (0..q_count)
            .map(|q| optimistic_index(policy, ucb_mode, w[q], c[q], &trackers[q]))
            .collect(),
        _ => Vec::new(),
    };

    let max_cost = c.iter().cloned().fold(0.0, f64::max);
    let mut recorded = Vec::new();
    let mut next_checkpoint = 0usize;
    let mut record_progress = |spent: f64, n: &[u64], next: &mut usize| {
        while *next < checkpoints.len() && spent >= checkpoints[*next] {
            recorded.push((checkpoints[*next], n.to_vec()));
            *next += 1;
        }
    };
    record_progress(state.spent(c), &state.n, &mut next_checkpoint);

    loop {
        let remaining = state.remaining(c);
        if remaining < max_cost {
            break;
        }

        let selected = match policy.kind {
            PolicyKind::Uniform => {
                // Smallest count, ties at the lowest index: maximize -n.
                let scores: Vec<f64> = state.n.iter().map(|&n| -(n as f64)).collect();
                argmax_affordable(&scores, c, remaining)
            }
            PolicyKind::Oracle => {
                let scores = deficit_scores(oracle_targets.as_ref().unwrap(), &state.n);
                argmax_affordable(&scores, c, remaining)
            }
            PolicyKind::EpsilonGreedy => {
                // The round counter starts at the adaptive phase, so the
                // schedule is invariant to the initialization size.
                let t = state.total_labels() - q_count as u64 * policy.k_init + 1;
                let eps = (policy.epsilon_c * q_count as f64 / t as f64).min(1.0);
                if rng.gen::<f64>() < eps {
                    let affordable: Vec<usize> =
                        (0..q_count).filter(|&q| c[q] <= remaining).collect();
                    if affordable.is_empty() {
                        None
                    } else {
                        Some(affordable[rng.gen_range(0..affordable.len())])
                    }
                } else {
                    let scores: Vec<f64> = (0..q_count)
                        .map(|q| greedy_index(mode, w[q], c[q], &trackers[q]))
                        .collect();
                    argmax_affordable(&scores, c, remaining)
                }
            }
            PolicyKind::Etc => {
                let spent_post_init = state.spent(c) - init_cost;
                if spent_post_init < pilot_budget {
                    let scores: Vec<f64> = state.n.iter().map(|&n| -(n as f64)).collect();
                    argmax_affordable(&scores, c, remaining)
                } else {
                    if etc_targets.is_none() {
                        // Commit: split the remaining budget by the Neyman
                        // rule on the pilot difficulty estimates, keeping the
                        // pilot counts in place (targets are pilot counts
                        // plus each question's Neyman share of the rest).
                        let a_hat: Vec<f64> = trackers
                            .iter()
                            .map(|tr| tr.difficulty(mode).map(|a| a.max(1e-12)))
                            .collect::<Result<_, _>>()?;
                        let shares = neyman_allocation(&a_hat, w, c, remaining)?;
                        etc_targets = Some(
                            state
                                .n
                                .iter()
                                .zip(&shares)
                                .map(|(&n, &s)| n as f64 + s)
                                .collect(),
                        );
                    }
                    let scores = deficit_scores(etc_targets.as_ref().unwrap(), &state.n);
                    argmax_affordable(&scores, c, remaining)
                }
            }
            PolicyKind::UcbPpi | PolicyKind::UcbPpipp => {
                argmax_affordable(&indices, c, remaining)
            }
        };

        let Some(q) = selected else { break };
        let obs = env.draw(q, state.n[q], seed);
        trackers[q].push(&obs)?;
        state.n[q] += 1;
        state.t += 1;
        if matches!(policy.kind, PolicyKind::UcbPpi | PolicyKind::UcbPpipp) {
            indices[q] = optimistic_index(policy, ucb_mode, w[q], c[q], &trackers[q]);
        }
        record_progress(state.spent(c), &state.n, &mut next_checkpoint);
    }

    let spent = state.spent(c);
    drop(record_progress);
    Ok(EpisodeResult {
        n: state.n,
        steps: state.t,
        spent,
        checkpoints: recorded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::synthetic::{SyntheticEnv, SyntheticSpec};
    use approx::assert_abs_diff_eq;

    fn conf(q: usize, t_max: u64) -> ConfidenceConfig {
        let mut c = ConfidenceConfig::unit_interval(q, t_max, 1e-4);
        c.r = 4.0;
        c
    }

    fn cfg(kind: PolicyKind, q: usize, budget: f64) -> PolicyConfig {
        PolicyConfig::new(kind, 2, conf(q, budget as u64))
    }

    fn env(q: usize, h: f64, seed: u64) -> SyntheticEnv {
        SyntheticEnv::new(SyntheticSpec {
            q,
            h,
            rho: 0.7,
            sigma_eta: 0.5,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn neyman_two_to_one() {
        let n = neyman_allocation(&[4.0, 1.0], &[1.0, 1.0], &[1.0, 1.0], 30.0).unwrap();
        assert_abs_diff_eq!(n[0], 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n[1], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn neyman_symmetric_case() {
        let n = neyman_allocation(&[2.0; 5], &[3.0; 5], &[2.0; 5], 100.0).unwrap();
        for x in &n {
            assert_abs_diff_eq!(*x, 100.0 / (5.0 * 2.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn neyman_budget_identity() {
        let a = [1.0, 2.0, 5.0];
        let w = [1.0, 2.0, 1.0];
        let c = [1.0, 1.0, 2.0];
        let n = neyman_allocation(&a, &w, &c, 60.0).unwrap();
        let spend: f64 = n.iter().zip(&c).map(|(n, c)| n * c).sum();
        assert_abs_diff_eq!(spend, 60.0, epsilon = 1e-9);
    }

    #[test]
    fn neyman_matches_integer_grid_search() {
        // Exhaustive argmin of sum w A / n over integer allocations with
        // sum c n <= 60, compared to largest-remainder rounding of the
        // fractional rule: agreement within one unit per question.
        let a = [1.0, 2.0, 5.0];
        let w = [1.0, 2.0, 1.0];
        let c = [1.0, 1.0, 2.0];
        let budget = 60.0;
        let frac = neyman_allocation(&a, &w, &c, budget).unwrap();

        let mut best = (f64::INFINITY, [0u64; 3]);
        for n0 in 1..60u64 {
            for n1 in 1..60u64 {
                let used = n0 as f64 + n1 as f64;
                if used + 2.0 > budget {
                    continue;
                }
                let n2 = ((budget - used) / 2.0).floor() as u64;
                if n2 < 1 {
                    continue;
                }
                let mse = w[0] * a[0] / n0 as f64
                    + w[1] * a[1] / n1 as f64
                    + w[2] * a[2] / n2 as f64;
                if mse < best.0 {
                    best = (mse, [n0, n1, n2]);
                }
            }
        }
        // Largest-remainder rounding of the fractional counts under the cost
        // constraint.
        let mut base: Vec<u64> = frac.iter().map(|x| x.floor() as u64).collect();
        let mut slack = budget - base.iter().zip(&c).map(|(&n, &cj)| n as f64 * cj).sum::<f64>();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&i, &j| {
            (frac[j] - frac[j].floor())
                .partial_cmp(&(frac[i] - frac[i].floor()))
                .unwrap()
        });
        for &i in &order {
            if c[i] <= slack {
                base[i] += 1;
                slack -= c[i];
            }
        }
        for q in 0..3 {
            assert!(
                (base[q] as i64 - best.1[q] as i64).abs() <= 1,
                "question {q}: rounded {} grid {}",
                base[q],
                best.1[q]
            );
        }
    }

    #[test]
    fn neyman_rejects_nonpositive() {
        assert!(neyman_allocation(&[0.0], &[1.0], &[1.0], 10.0).is_err());
        assert!(neyman_allocation(&[1.0], &[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn oracle_mse_identity() {
        // Plugging the fractional counts back into the objective gives the
        // closed form exactly.
        let a = [0.3, 1.7, 0.9];
        let w = [1.0, 0.5, 2.0];
        let c = [1.0, 2.0, 0.5];
        let budget = 123.0;
        let n = neyman_allocation(&a, &w, &c, budget).unwrap();
        let mse: f64 = (0..3).map(|q| w[q] * a[q] / n[q]).sum();
        assert_abs_diff_eq!(mse, oracle_mse(&a, &w, &c, budget).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn marginal_efficiency_hand_values() {
        assert_abs_diff_eq!(marginal_efficiency(1.0, 4.0, 1.0, 10).unwrap(), 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(marginal_efficiency(1.0, 1.0, 1.0, 10).unwrap(), 0.01, epsilon = 1e-15);
        // Doubling the cost halves the index.
        let a = marginal_efficiency(1.3, 0.7, 1.0, 7).unwrap();
        let b = marginal_efficiency(1.3, 0.7, 2.0, 7).unwrap();
        assert_abs_diff_eq!(a, 2.0 * b, epsilon = 1e-15);
        assert!(marginal_efficiency(1.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn episode_exhausted_by_initialization() {
        let e = env(2, 0.0, 1);
        let res = run_episode(&e, &cfg(PolicyKind::Uniform, 2, 4.0), 4.0, 7, 7, &[]).unwrap();
        assert_eq!(res.n, vec![2, 2]);
        assert_eq!(res.steps, 0);
        assert_eq!(res.spent, 4.0);
    }

    #[test]
    fn uniform_splits_equally() {
        let e = env(4, 1.0, 2);
        let res = run_episode(&e, &cfg(PolicyKind::Uniform, 4, 40.0), 40.0, 3, 3, &[]).unwrap();
        assert_eq!(res.n, vec![10, 10, 10, 10]);
    }

    #[test]
    fn uniform_prefers_smallest_then_lowest_index() {
        // After initialization all counts are equal; the first selection
        // must take question 0, then 1, and so on.
        let e = env(3, 0.0, 3);
        let res = run_episode(&e, &cfg(PolicyKind::Uniform, 3, 7.0), 7.0, 1, 1, &[]).unwrap();
        assert_eq!(res.n, vec![3, 2, 2]);
    }

    #[test]
    fn oracle_follows_neyman_two_to_one() {
        // Two questions with difficulty ratio 4 (variance scale ratio 4).
        struct TwoArm {
            a: Vec<f64>,
            w: Vec<f64>,
            c: Vec<f64>,
        }
        impl Environment for TwoArm {
            fn num_arms(&self) -> usize {
                2
            }
            fn weights(&self) -> &[f64] {
                &self.w
            }
            fn costs(&self) -> &[f64] {
                &self.c
            }
            fn true_difficulties(&self) -> &[f64] {
                &self.a
            }
            fn draw(&self, arm: usize, index: u64, seed: u64) -> crate::tracker::Observation {
                let key = crate::rng::stream(seed, &[arm as u64, index]);
                crate::tracker::Observation::Pair {
                    y: crate::rng::standard_normal(key, 0),
                    s: 0.0,
                }
            }
            fn new_tracker(&self, _arm: usize) -> Tracker {
                Tracker::new_mean()
            }
        }
        let e = TwoArm {
            a: vec![4.0, 1.0],
            w: vec![1.0; 2],
            c: vec![1.0; 2],
        };
        let res = run_episode(&e, &cfg(PolicyKind::Oracle, 2, 30.0), 30.0, 5, 5, &[]).unwrap();
        assert!((res.n[0] as i64 - 20).abs() <= 1, "n {:?}", res.n);
        assert!((res.n[1] as i64 - 10).abs() <= 1, "n {:?}", res.n);
    }

    #[test]
    fn budget_conservation_under_heterogeneous_costs() {
        let mut e = env(5, 1.5, 9);
        e.set_costs(vec![1.0, 2.5, 0.5, 1.25, 3.0]);
        let budget = 200.0;
        for kind in [
            PolicyKind::Oracle,
            PolicyKind::Uniform,
            PolicyKind::EpsilonGreedy,
            PolicyKind::Etc,
            PolicyKind::UcbPpi,
            PolicyKind::UcbPpipp,
        ] {
            let res = run_episode(&e, &cfg(kind, 5, budget), budget, 11, 13, &[]).unwrap();
            let spend: f64 = res.n.iter().zip(e.costs()).map(|(&n, &c)| n as f64 * c).sum();
            assert_eq!(spend, res.spent, "{kind:?}");
            assert!(res.spent <= budget, "{kind:?} overspent");
            // Loop guard: cannot stop while the costliest arm is affordable.
            assert!(budget - res.spent < 3.0, "{kind:?} stopped early");
        }
    }

    #[test]
    fn episodes_are_deterministic() {
        let e = env(8, 2.0, 4);
        for kind in [
            PolicyKind::EpsilonGreedy,
            PolicyKind::UcbPpipp,
            PolicyKind::Etc,
        ] {
            let a = run_episode(&e, &cfg(kind, 8, 150.0), 150.0, 21, 22, &[50.0, 100.0]).unwrap();
            let b = run_episode(&e, &cfg(kind, 8, 150.0), 150.0, 21, 22, &[50.0, 100.0]).unwrap();
            assert_eq!(a, b, "{kind:?}");
        }
    }

    #[test]
    fn huge_radius_degenerates_toward_uniform() {
        // With R = 10 on unit-interval-scale data the radii dominate every
        // difficulty estimate, so UCB must keep counts within a factor 2.
        let q = 6;
        let budget = 100.0 * q as f64;
        let mut c = ConfidenceConfig::unit_interval(q, budget as u64, 1e-4);
        c.r = 10.0;
        let policy = PolicyConfig::new(PolicyKind::UcbPpi, 2, c);
        let e = env(q, 2.0, 17);
        let res = run_episode(&e, &policy, budget, 31, 31, &[]).unwrap();
        let max = *res.n.iter().max().unwrap() as f64;
        let min = *res.n.iter().min().unwrap() as f64;
        assert!(max / min <= 2.0, "counts {:?}", res.n);
    }

    #[test]
    fn zero_radius_index_equals_marginal_efficiency() {
        // With R = 0 the optimistic index collapses to w A-hat / (c n^2).
        let mut t = Tracker::new_mean();
        for (y, s) in [(0.1, 0.0), (0.9, 0.3), (0.4, 0.6), (0.7, 0.2)] {
            t.push(&crate::tracker::Observation::Pair { y, s }).unwrap();
        }
        let mut conf = ConfidenceConfig::unit_interval(2, 100, 1e-4);
        conf.r = 0.0;
        let policy = PolicyConfig::new(PolicyKind::UcbPpi, 2, conf);
        let idx = optimistic_index(&policy, DifficultyMode::Plain, 1.5, 2.0, &t);
        let a_hat = t.difficulty(DifficultyMode::Plain).unwrap();
        let me = marginal_efficiency(1.5, a_hat, 2.0, t.n()).unwrap();
        assert_abs_diff_eq!(idx, me, epsilon = 1e-12);
    }

    #[test]
    fn zero_radius_greedy_converges_to_neyman() {
        // Greedy on the true index (the R = 0, A-hat = A limit of the UCB
        // rule) must land within Q units of the fractional Neyman counts.
        let a = [1.0, 2.0, 5.0];
        let w = [1.0, 2.0, 1.0];
        let c = [1.0, 1.0, 2.0];
        let budget = 60.0;
        let mut n = [1u64, 1, 1];
        loop {
            let spent: f64 = n.iter().zip(&c).map(|(&n, &c)| n as f64 * c).sum();
            let remaining = budget - spent;
            if remaining < 2.0 {
                break;
            }
            let mut best = (0usize, f64::NEG_INFINITY);
            for q in 0..3 {
                if c[q] > remaining {
                    continue;
                }
                let idx = marginal_efficiency(w[q], a[q], c[q], n[q]).unwrap();
                if idx > best.1 {
                    best = (q, idx);
                }
            }
            n[best.0] += 1;
        }
        let frac = neyman_allocation(&a, &w, &c, budget).unwrap();
        for q in 0..3 {
            assert!(
                (n[q] as f64 - frac[q]).abs() <= 3.0,
                "question {q}: greedy {} neyman {}",
                n[q],
                frac[q]
            );
        }
    }

    #[test]
    fn ucb_weight_scaling_prefers_heavier_arm() {
        // Identical difficulties but w = (2, 1): question 0 must end with
        // more labels under the optimistic policy.
        let mut e = env(2, 0.0, 6);
        e.set_weights(vec![2.0, 1.0]);
        let res = run_episode(&e, &cfg(PolicyKind::UcbPpipp, 2, 300.0), 300.0, 41, 41, &[]).unwrap();
        assert!(res.n[0] > res.n[1], "counts {:?}", res.n);
    }

    #[test]
    fn etc_commits_after_pilot() {
        let e = env(4, 2.0, 8);
        let res = run_episode(&e, &cfg(PolicyKind::Etc, 4, 400.0), 400.0, 51, 51, &[]).unwrap();
        // Counts differ after commit (difficulties are heterogeneous at
        // h = 2), and all of the budget is spent.
        assert_eq!(res.spent, 400.0);
        assert!(res.n.iter().max() != res.n.iter().min(), "counts {:?}", res.n);
    }

    #[test]
    fn checkpoints_record_crossings() {
        let e = env(3, 1.0, 2);
        let res = run_episode(
            &e,
            &cfg(PolicyKind::Uniform, 3, 30.0),
            30.0,
            9,
            9,
            &[6.0, 15.0, 30.0],
        )
        .unwrap();
        assert_eq!(res.checkpoints.len(), 3);
        assert_eq!(res.checkpoints[0].0, 6.0);
        let total0: u64 = res.checkpoints[0].1.iter().sum();
        assert_eq!(total0, 6);
        assert_eq!(res.checkpoints[2].1, res.n);
    }

    #[test]
    fn invalid_configs_rejected() {
        let e = env(2, 0.0, 1);
        let mut bad = cfg(PolicyKind::Uniform, 2, 10.0);
        bad.k_init = 1;
        assert!(run_episode(&e, &bad, 10.0, 1, 1, &[]).is_err());
        let ok = cfg(PolicyKind::Uniform, 2, 10.0);
        assert!(matches!(
            run_episode(&e, &ok, 3.0, 1, 1, &[]),
            Err(PolicyError::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn epsilon_greedy_explores_all_arms() {
        let e = env(6, 2.0, 12);
        let res =
            run_episode(&e, &cfg(PolicyKind::EpsilonGreedy, 6, 120.0), 120.0, 61, 62, &[]).unwrap();
        assert!(res.n.iter().all(|&n| n >= 2));
        assert_eq!(res.n.iter().sum::<u64>() as f64, res.spent);
    }
}
