//! Command-line front end for the allocation experiment harness.
//!
//! Subcommands cover the synthetic benchmark (`simulate`), dataset replay
//! with optional module grouping (`replay`), the MNL choice-task benchmark
//! (`mnl`), parameter sweeps (`sweep`), and the surrogate dataset generator
//! (`gen-surrogate`). Every experiment reads a JSON config whose keys mirror
//! `ExperimentConfig`; unknown keys are rejected.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use labelalloc::env::replay::{read_module_map, ReplayDataset};
use labelalloc::env::surrogate::{self, SurrogateSpec, DEFAULT_MODULE_SIZES};
use labelalloc::harness::{
    emit_results, run_experiment, EnvKind, ExperimentConfig, HarnessError, SweepAxis,
};

/// Exit code for configuration problems.
const EXIT_CONFIG: u8 = 2;
/// Exit code for data ingestion problems.
const EXIT_DATA: u8 = 3;
/// Exit code for runtime failures.
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "labelalloc", version, about = "Adaptive label-budget allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AxisArg {
    Rho,
    H,
    #[value(name = "a_weights")]
    AWeights,
    #[value(name = "a_costs")]
    ACosts,
    #[value(name = "alpha_etc")]
    AlphaEtc,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Rho => SweepAxis::Rho,
            AxisArg::H => SweepAxis::H,
            AxisArg::AWeights => SweepAxis::AWeights,
            AxisArg::ACosts => SweepAxis::ACosts,
            AxisArg::AlphaEtc => SweepAxis::AlphaEtc,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the synthetic benchmark described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Results CSV path; trajectory CSV and JSON summary are written
        /// alongside it.
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Replay a paired human/LLM dataset, optionally grouped into modules.
    Replay {
        #[arg(long)]
        data: PathBuf,
        /// Module map CSV (question_id,module_id); switches the experiment
        /// to module-level allocation.
        #[arg(long)]
        modules: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Run the MNL choice-task benchmark.
    Mnl {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Run a parameter sweep on the configured environment.
    Sweep {
        #[arg(long)]
        axis: AxisArg,
        #[arg(long)]
        config: PathBuf,
        /// Dataset for replay-environment sweeps.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Generate the surrogate survey dataset (and optionally a module map).
    GenSurrogate {
        #[arg(long)]
        out: PathBuf,
        /// Also write the default 14-module map here.
        #[arg(long)]
        modules_out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

fn load_data(path: &PathBuf) -> Result<ReplayDataset, HarnessError> {
    ReplayDataset::from_path(path).map_err(|e| HarnessError::Data(e.to_string()))
}

fn load_modules(path: &PathBuf) -> Result<HashMap<String, String>, HarnessError> {
    let file = std::fs::File::open(path)
        .map_err(|e| HarnessError::Data(format!("cannot read {}: {e}", path.display())))?;
    read_module_map(file).map_err(|e| HarnessError::Data(e.to_string()))
}

fn exit_for(err: &HarnessError) -> u8 {
    match err {
        HarnessError::Config(_) => EXIT_CONFIG,
        HarnessError::Data(_) | HarnessError::Csv(_) => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

fn finish(
    config: &ExperimentConfig,
    data: Option<&ReplayDataset>,
    modules: Option<&HashMap<String, String>>,
    out: &PathBuf,
) -> Result<(), HarnessError> {
    let result = run_experiment(config, data, modules)?;
    emit_results(&result, config, out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate { config, out } => {
            let mut cfg = load_config(&config)?;
            if cfg.environment != EnvKind::Synthetic {
                return Err(HarnessError::Config(
                    "simulate requires environment = synthetic".into(),
                ));
            }
            cfg.environment = EnvKind::Synthetic;
            finish(&cfg, None, None, &out)
        }
        Command::Replay {
            data,
            modules,
            config,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            let dataset = load_data(&data)?;
            match modules {
                Some(path) => {
                    cfg.environment = EnvKind::Modules;
                    let map = load_modules(&path)?;
                    finish(&cfg, Some(&dataset), Some(&map), &out)
                }
                None => {
                    cfg.environment = EnvKind::Replay;
                    finish(&cfg, Some(&dataset), None, &out)
                }
            }
        }
        Command::Mnl { config, out } => {
            let mut cfg = load_config(&config)?;
            cfg.environment = EnvKind::Mnl;
            finish(&cfg, None, None, &out)
        }
        Command::Sweep {
            axis,
            config,
            data,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.sweep = axis.into();
            cfg.validate()?;
            let dataset = data.as_ref().map(load_data).transpose()?;
            finish(&cfg, dataset.as_ref(), None, &out)
        }
        Command::GenSurrogate {
            out,
            modules_out,
            seed,
        } => {
            let mut spec = SurrogateSpec::default();
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let file = std::fs::File::create(&out)
                .map_err(|e| HarnessError::Data(format!("cannot create {}: {e}", out.display())))?;
            surrogate::write_csv(&spec, file)
                .map_err(|e| HarnessError::Data(e.to_string()))?;
            eprintln!("wrote {}", out.display());
            if let Some(path) = modules_out {
                let file = std::fs::File::create(&path).map_err(|e| {
                    HarnessError::Data(format!("cannot create {}: {e}", path.display()))
                })?;
                surrogate::write_module_map(&spec, &DEFAULT_MODULE_SIZES, file)
                    .map_err(|e| HarnessError::Data(e.to_string()))?;
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
