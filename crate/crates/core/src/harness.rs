//! Experiment orchestration: Monte Carlo replication over (policy, budget)
//! grids, sweep axes, metric aggregation, and machine-readable output.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confidence::{ConfidenceConfig, RadiusKind};
use crate::env::mnl_env::MnlEnv;
use crate::env::modules::ModuleEnv;
use crate::env::replay::{ReplayDataset, ReplayError};
use crate::env::synthetic::{SyntheticEnv, SyntheticSpec};
use crate::env::transforms;
use crate::env::Environment;
use crate::mnl::{MnlCriterion, MnlSpec};
use crate::policies::{self, PolicyConfig, PolicyError, PolicyKind};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("policy {policy} budget {budget} replication {rep}: {source}")]
    Episode {
        policy: &'static str,
        budget: f64,
        rep: u64,
        source: PolicyError,
    },
    #[error("expected MSE undefined: question {0} has no labels")]
    ZeroCount(usize),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl From<ReplayError> for HarnessError {
    fn from(e: ReplayError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

/// Which environment the experiment samples from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    #[default]
    Synthetic,
    Replay,
    Modules,
    Mnl,
}

/// Parameter axis swept across runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    None,
    /// LLM-signal correlation (synthetic only).
    Rho,
    /// Difficulty heterogeneity (synthetic h, or replay log-spread rescale).
    H,
    /// Weight dispersion amplitude.
    AWeights,
    /// Cost dispersion amplitude.
    ACosts,
    /// ETC pilot fraction.
    AlphaEtc,
}

fn default_policies() -> Vec<PolicyKind> {
    vec![
        PolicyKind::Oracle,
        PolicyKind::Uniform,
        PolicyKind::EpsilonGreedy,
        PolicyKind::Etc,
        PolicyKind::UcbPpipp,
    ]
}

fn default_budgets() -> Vec<f64> {
    vec![2000.0]
}

fn default_replications() -> u64 {
    200
}

fn default_k_init() -> u64 {
    3
}

fn default_epsilon_c() -> f64 {
    5.0
}

fn default_alpha() -> f64 {
    0.3
}

fn default_radius_r() -> f64 {
    // Practical scaling of the confidence radius. The theoretical residual
    // range (R = 2 on unit-interval data) makes the bonus dominate the
    // difficulty estimates at realistic per-arm counts, pushing the
    // allocation toward uniform; this default keeps the bonus proportionate
    // so the index tracks the marginal efficiency it brackets.
    0.05
}

fn default_checkpoint_count() -> usize {
    100
}

fn default_true() -> bool {
    true
}

/// Full experiment description; JSON configs mirror these field names and
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub environment: EnvKind,
    /// Synthetic generator parameters (environment = synthetic).
    #[serde(default)]
    pub synthetic: SyntheticSpec,
    /// MNL generator parameters (environment = mnl).
    #[serde(default)]
    pub mnl: MnlSpec,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<f64>,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_k_init")]
    pub k_init: u64,
    #[serde(default = "default_epsilon_c")]
    pub epsilon_c: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Confidence level; defaults to B^-2 per budget when absent.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Residual range bound R of the optimistic radius.
    #[serde(default = "default_radius_r")]
    pub radius_r: f64,
    #[serde(default)]
    pub radius_kind: RadiusKind,
    /// Evenly spaced trajectory checkpoints per budget (0 disables).
    #[serde(default = "default_checkpoint_count")]
    pub checkpoint_count: usize,
    /// Share environment draws across policies within a replication.
    #[serde(default = "default_true")]
    pub common_random_numbers: bool,
    #[serde(default)]
    pub sweep: SweepAxis,
    #[serde(default)]
    pub sweep_values: Vec<f64>,
    /// Replay difficulty-spread rescale applied when not sweeping h.
    #[serde(default)]
    pub heterogeneity: Option<f64>,
    /// Weight dispersion amplitude applied when not sweeping weights.
    #[serde(default)]
    pub weight_dispersion: f64,
    /// Cost dispersion amplitude applied when not sweeping costs.
    #[serde(default)]
    pub cost_dispersion: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            environment: EnvKind::Synthetic,
            synthetic: SyntheticSpec::default(),
            mnl: MnlSpec::default(),
            policies: default_policies(),
            budgets: default_budgets(),
            replications: default_replications(),
            seed: 0,
            k_init: default_k_init(),
            epsilon_c: default_epsilon_c(),
            alpha: default_alpha(),
            delta: None,
            radius_r: default_radius_r(),
            radius_kind: RadiusKind::default(),
            checkpoint_count: default_checkpoint_count(),
            common_random_numbers: true,
            sweep: SweepAxis::None,
            sweep_values: Vec::new(),
            heterogeneity: None,
            weight_dispersion: 0.0,
            cost_dispersion: 0.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be >= 1".into()));
        }
        if self.budgets.is_empty() || self.budgets.iter().any(|&b| !(b > 0.0)) {
            return Err(HarnessError::Config("budgets must be positive".into()));
        }
        if self.policies.is_empty() {
            return Err(HarnessError::Config("need at least one policy".into()));
        }
        if self.k_init < 2 {
            return Err(HarnessError::Config("k_init must be >= 2".into()));
        }
        if self.sweep != SweepAxis::None && self.sweep_values.is_empty() {
            return Err(HarnessError::Config("sweep requires sweep_values".into()));
        }
        Ok(())
    }
}

/// Weighted expected MSE sum_q w_q A_q / n_q.
pub fn expected_mse(n: &[u64], a: &[f64], w: &[f64]) -> Result<f64, HarnessError> {
    let mut total = 0.0;
    for q in 0..n.len() {
        if n[q] == 0 {
            return Err(HarnessError::ZeroCount(q));
        }
        total += w[q] * a[q] / n[q] as f64;
    }
    Ok(total)
}

/// One replication's terminal record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub policy: PolicyKind,
    pub budget: f64,
    pub sweep_value: Option<f64>,
    pub rep: u64,
    pub n: Vec<u64>,
    pub mse: f64,
    pub regret: f64,
}

/// Aggregated row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub policy: String,
    pub budget: f64,
    pub sweep_value: Option<f64>,
    pub mean_mse: f64,
    pub se_mse: f64,
    /// (mean MSE - oracle bound) / oracle bound * 100.
    pub gap_pct: f64,
    pub mean_regret: f64,
    pub se_regret: f64,
}

/// Aggregated trajectory point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub policy: String,
    pub budget: f64,
    pub sweep_value: Option<f64>,
    pub budget_spent: f64,
    pub mean_mse: f64,
    pub se_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub cells: Vec<CellResult>,
    pub trajectories: Vec<TrajectoryPoint>,
    pub reps: Vec<RepRecord>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Build the confidence configuration for one (budget, environment) pair.
fn confidence_for(cfg: &ExperimentConfig, env: &dyn Environment, budget: f64) -> ConfidenceConfig {
    let c_min = env
        .costs()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .max(1e-9);
    let t_max = (budget / c_min).floor().max(1.0) as u64;
    let delta = cfg.delta.unwrap_or_else(|| (budget * budget).recip());
    ConfidenceConfig {
        delta,
        r: cfg.radius_r,
        r_y: cfg.radius_r / 2.0,
        r_s: cfg.radius_r / 2.0,
        m_y: cfg.radius_r / 2.0,
        m_s: cfg.radius_r / 2.0,
        v_min_llm: 0.01,
        t_max,
        q: env.num_arms(),
    }
}

fn policy_config(
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    conf: ConfidenceConfig,
    alpha: f64,
) -> PolicyConfig {
    let mut p = PolicyConfig::new(kind, cfg.k_init, conf);
    p.epsilon_c = cfg.epsilon_c;
    p.alpha = alpha;
    p.radius = cfg.radius_kind;
    p
}

/// Construct the environment for one sweep value, applying dispersion and
/// heterogeneity settings.
pub fn build_environment(
    cfg: &ExperimentConfig,
    sweep_value: Option<f64>,
    data: Option<&ReplayDataset>,
    modules: Option<&HashMap<String, String>>,
) -> Result<Box<dyn Environment>, HarnessError> {
    let q_env: Box<dyn Environment> = match cfg.environment {
        EnvKind::Synthetic => {
            let mut spec = cfg.synthetic;
            match cfg.sweep {
                SweepAxis::Rho => spec.rho = sweep_value.unwrap(),
                SweepAxis::H => spec.h = sweep_value.unwrap(),
                _ => {}
            }
            let mut env =
                SyntheticEnv::new(spec).map_err(|e| HarnessError::Config(e.to_string()))?;
            let (w, c) = dispersion_vectors(cfg, sweep_value, env.num_arms())?;
            if let Some(w) = w {
                env.set_weights(w);
            }
            if let Some(c) = c {
                env.set_costs(c);
            }
            Box::new(env)
        }
        EnvKind::Replay => {
            let data = data
                .ok_or_else(|| HarnessError::Data("replay experiment needs a dataset".into()))?;
            let mut env = crate::env::replay::ReplayEnv::new(data.clone());
            let h = match cfg.sweep {
                SweepAxis::H => sweep_value,
                _ => cfg.heterogeneity,
            };
            if let Some(h) = h {
                env.rescale_heterogeneity(h)?;
            }
            let (w, c) = dispersion_vectors(cfg, sweep_value, env.num_arms())?;
            if let Some(w) = w {
                env.set_weights(w);
            }
            if let Some(c) = c {
                env.set_costs(c);
            }
            Box::new(env)
        }
        EnvKind::Modules => {
            let data = data
                .ok_or_else(|| HarnessError::Data("module experiment needs a dataset".into()))?;
            let labels = modules
                .ok_or_else(|| HarnessError::Data("module experiment needs a module map".into()))?;
            let mut env = ModuleEnv::new(data.clone(), labels)?;
            let (w, c) = dispersion_vectors(cfg, sweep_value, env.num_arms())?;
            if let Some(w) = w {
                env.set_weights(w);
            }
            if let Some(c) = c {
                env.set_costs(c);
            }
            Box::new(env)
        }
        EnvKind::Mnl => {
            // Human and LLM choices are drawn independently, so the score
            // residual covariance is additive in lambda^2 and the tuned
            // coefficient is 0; the experiment runs at that tuned value.
            let env = MnlEnv::new(&cfg.mnl, 0.0, MnlCriterion::Trace)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            Box::new(env)
        }
    };
    Ok(q_env)
}

/// Dispersed (weights, costs) for one sweep value, or `None` for uniform.
fn dispersion_vectors(
    cfg: &ExperimentConfig,
    sweep_value: Option<f64>,
    q: usize,
) -> Result<(Option<Vec<f64>>, Option<Vec<f64>>), HarnessError> {
    // The underlying z draw is keyed only by (seed, q), so it stays fixed
    // across sweep values by construction.
    let a_w = match cfg.sweep {
        SweepAxis::AWeights => sweep_value.unwrap(),
        _ => cfg.weight_dispersion,
    };
    let a_c = match cfg.sweep {
        SweepAxis::ACosts => sweep_value.unwrap(),
        _ => cfg.cost_dispersion,
    };
    let w = if a_w > 0.0 {
        Some(
            transforms::disperse(q, a_w, crate::rng::stream(cfg.seed, &[0x77EE]))
                .map_err(|e| HarnessError::Config(e.to_string()))?,
        )
    } else {
        None
    };
    let c = if a_c > 0.0 {
        Some(
            transforms::disperse(q, a_c, crate::rng::stream(cfg.seed, &[0xC057]))
                .map_err(|e| HarnessError::Config(e.to_string()))?,
        )
    } else {
        None
    };
    Ok((w, c))
}

/// Run the full experiment grid. Replications execute in parallel; the
/// aggregation is performed in deterministic key order, so results are
/// independent of scheduling.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    data: Option<&ReplayDataset>,
    modules: Option<&HashMap<String, String>>,
) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let sweep_values: Vec<Option<f64>> = if cfg.sweep == SweepAxis::None {
        vec![None]
    } else {
        cfg.sweep_values.iter().map(|&v| Some(v)).collect()
    };

    let mut cells = Vec::new();
    let mut trajectories = Vec::new();
    let mut reps_out = Vec::new();

    for (si, &sv) in sweep_values.iter().enumerate() {
        let env = build_environment(cfg, sv, data, modules)?;
        let env_ref: &dyn Environment = env.as_ref();
        let a = env_ref.true_difficulties().to_vec();
        let w = env_ref.weights().to_vec();
        let costs = env_ref.costs().to_vec();
        let init_cost: f64 = costs.iter().map(|&c| c * cfg.k_init as f64).sum();

        for (bi, &budget) in cfg.budgets.iter().enumerate() {
            if budget < init_cost {
                return Err(HarnessError::Config(format!(
                    "budget {budget} below initialization cost {init_cost}"
                )));
            }
            let oracle_bound = policies::oracle_mse(&a, &w, &costs, budget)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let checkpoints: Vec<f64> = if cfg.checkpoint_count > 0 {
                (1..=cfg.checkpoint_count)
                    .map(|i| {
                        init_cost
                            + (budget - init_cost) * i as f64 / cfg.checkpoint_count as f64
                    })
                    .collect()
            } else {
                Vec::new()
            };

            // Continuous-oracle pseudo-row for the tables.
            cells.push(CellResult {
                policy: "oracle_bound".into(),
                budget,
                sweep_value: sv,
                mean_mse: oracle_bound,
                se_mse: 0.0,
                gap_pct: 0.0,
                mean_regret: 0.0,
                se_regret: 0.0,
            });

            for (pi, &kind) in cfg.policies.iter().enumerate() {
                let alpha = match (cfg.sweep, kind) {
                    (SweepAxis::AlphaEtc, PolicyKind::Etc) => sv.unwrap(),
                    _ => cfg.alpha,
                };
                let conf = confidence_for(cfg, env_ref, budget);
                let policy = policy_config(cfg, kind, conf, alpha);

                let episodes: Vec<_> = (0..cfg.replications)
                    .into_par_iter()
                    .map(|r| {
                        let env_seed = if cfg.common_random_numbers {
                            crate::rng::stream(cfg.seed, &[1, si as u64, bi as u64, r])
                        } else {
                            crate::rng::stream(
                                cfg.seed,
                                &[2, si as u64, pi as u64, bi as u64, r],
                            )
                        };
                        let policy_seed =
                            crate::rng::stream(cfg.seed, &[3, si as u64, pi as u64, bi as u64, r]);
                        policies::run_episode(
                            env_ref,
                            &policy,
                            budget,
                            env_seed,
                            policy_seed,
                            &checkpoints,
                        )
                        .map_err(|source| HarnessError::Episode {
                            policy: kind.name(),
                            budget,
                            rep: r,
                            source,
                        })
                    })
                    .collect();

                let mut mses = Vec::with_capacity(cfg.replications as usize);
                let mut regrets = Vec::with_capacity(cfg.replications as usize);
                let mut traj: Vec<Vec<f64>> = vec![Vec::new(); checkpoints.len()];
                for (r, episode) in episodes.into_iter().enumerate() {
                    let episode = episode?;
                    let mse = expected_mse(&episode.n, &a, &w)?;
                    mses.push(mse);
                    regrets.push(mse - oracle_bound);
                    for (ci, (_, counts)) in episode.checkpoints.iter().enumerate() {
                        traj[ci].push(expected_mse(counts, &a, &w)?);
                    }
                    reps_out.push(RepRecord {
                        policy: kind,
                        budget,
                        sweep_value: sv,
                        rep: r as u64,
                        n: episode.n,
                        mse,
                        regret: mse - oracle_bound,
                    });
                }
                let (mean_mse, se_mse) = mean_se(&mses);
                let (mean_regret, se_regret) = mean_se(&regrets);
                cells.push(CellResult {
                    policy: kind.name().into(),
                    budget,
                    sweep_value: sv,
                    mean_mse,
                    se_mse,
                    gap_pct: (mean_mse - oracle_bound) / oracle_bound * 100.0,
                    mean_regret,
                    se_regret,
                });
                for (ci, samples) in traj.iter().enumerate() {
                    if samples.len() == mses.len() {
                        let (m, s) = mean_se(samples);
                        trajectories.push(TrajectoryPoint {
                            policy: kind.name().into(),
                            budget,
                            sweep_value: sv,
                            budget_spent: checkpoints[ci],
                            mean_mse: m,
                            se_mse: s,
                        });
                    }
                }
            }
        }
    }

    Ok(ExperimentResult {
        cells,
        trajectories,
        reps: reps_out,
    })
}

/// OLS slope of ln(regret) on ln(B). Points with nonpositive regret are
/// excluded and reported back.
pub fn regret_slope(points: &[(f64, f64)]) -> Result<(f64, Vec<f64>), HarnessError> {
    let mut excluded = Vec::new();
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(b, r)| {
            if r > 0.0 {
                true
            } else {
                excluded.push(b);
                false
            }
        })
        .map(|&(b, r)| (b.ln(), r.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(HarnessError::Config(format!(
            "regret slope needs >= 3 positive-regret points, have {}",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok((sxy / sxx, excluded))
}

/// Render with 6 significant digits; the shortest representation of the
/// rounded value keeps re-emission byte-identical.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(5 - exponent);
    let rounded = (x * factor).round() / factor;
    format!("{rounded}")
}

fn sweep_field(v: Option<f64>) -> String {
    v.map(|x| format_sig6(x)).unwrap_or_default()
}

/// Write the aggregated results CSV (schema:
/// policy,budget,sweep_value,mean_mse,se_mse,gap_pct,mean_regret,se_regret).
pub fn write_results_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "policy",
        "budget",
        "sweep_value",
        "mean_mse",
        "se_mse",
        "gap_pct",
        "mean_regret",
        "se_regret",
    ])?;
    for c in &result.cells {
        w.write_record([
            c.policy.clone(),
            format_sig6(c.budget),
            sweep_field(c.sweep_value),
            format_sig6(c.mean_mse),
            format_sig6(c.se_mse),
            format_sig6(c.gap_pct),
            format_sig6(c.mean_regret),
            format_sig6(c.se_regret),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write the trajectory CSV (schema: policy,budget_spent,mean_mse,se_mse).
pub fn write_trajectory_csv<W: Write>(
    result: &ExperimentResult,
    out: W,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "budget_spent", "mean_mse", "se_mse"])?;
    for t in &result.trajectories {
        w.write_record([
            t.policy.clone(),
            format_sig6(t.budget_spent),
            format_sig6(t.mean_mse),
            format_sig6(t.se_mse),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Version string embedded in summaries.
pub fn version_string() -> String {
    format!("labelalloc-v{}", env!("CARGO_PKG_VERSION"))
}

/// Emit the results CSV, trajectory CSV, and a JSON summary next to `path`
/// (which names the results CSV; siblings get derived names). Re-emission of
/// the same result is byte-identical.
pub fn emit_results(
    result: &ExperimentResult,
    config: &ExperimentConfig,
    path: &Path,
) -> Result<(), HarnessError> {
    let results_file = std::fs::File::create(path)?;
    write_results_csv(result, results_file)?;

    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("results");
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let traj_path = dir.join(format!("{stem}_trajectory.csv"));
    write_trajectory_csv(result, std::fs::File::create(&traj_path)?)?;

    let summary = serde_json::json!({
        "version": version_string(),
        "config": config,
        "cells": result.cells,
        "trajectories": result.trajectories,
    });
    let json_path = dir.join(format!("{stem}_summary.json"));
    let mut f = std::fs::File::create(&json_path)?;
    serde_json::to_writer_pretty(&mut f, &summary)
        .map_err(|e| HarnessError::Data(e.to_string()))?;
    f.write_all(b"\n")?;
    Ok(())
}
