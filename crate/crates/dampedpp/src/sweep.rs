//! Batches of independent simulations run in parallel, each with its own files.

use std::path::Path;

use dampedpp_core::models::{DampedPPParams, ModelParams};
use dampedpp_core::IntegratorConfig;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::commands::simulate;
use crate::config::{ModelKind, Outputs, Overrides, RunConfig, SCHEMA_VERSION};
use crate::error::CliError;
use crate::formats::{emit, json_bytes, Format};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum RegimeChoice {
    #[default]
    Coexistence,
    Extinction,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepDoc {
    schema_version: u32,
    runs: Vec<Value>,
}

/// Parses `{"schema_version": 1, "runs": [config, ...]}`, applying `overrides` to every run.
pub fn parse_sweep(text: &str, overrides: &Overrides) -> Result<Vec<RunConfig>, CliError> {
    let doc: SweepDoc = serde_json::from_str(text)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "unsupported schema_version {}",
            doc.schema_version
        )));
    }
    doc.runs
        .iter()
        .enumerate()
        .map(|(i, run)| {
            RunConfig::from_json(&run.to_string(), overrides)
                .map_err(|e| CliError::config(format!("run {i}: {e}")))
        })
        .collect()
}

/// Random damped predator-prey runs with `R` uniform in `(1.1, 10)` or
/// `(0.1, 0.99)`, rates uniform in `(0.5, 2)` and interior starts in `(0.05, 5)^2`.
pub fn random_configs(seed: u64, count: usize, regime: RegimeChoice) -> Vec<RunConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let integrator = IntegratorConfig::with_tolerances(1e-10, 1e-12);
    (0..count)
        .map(|_| {
            let alpha = rng.random_range(0.5..2.0);
            let beta = rng.random_range(0.5..2.0);
            let gamma = rng.random_range(0.5..2.0);
            let sigma = rng.random_range(0.5..2.0);
            let (r, t_end) = match regime {
                RegimeChoice::Coexistence => {
                    let r: f64 = rng.random_range(1.1..10.0);
                    (r, 100.0 / f64::min(alpha, sigma))
                }
                RegimeChoice::Extinction => {
                    let r: f64 = rng.random_range(0.1..0.99);
                    (r, 20.0 / f64::min(alpha, sigma * (1.0 - r)))
                }
            };
            let params = DampedPPParams {
                alpha,
                beta,
                gamma,
                delta: r * alpha * sigma / gamma,
                sigma,
            };
            let init = vec![rng.random_range(0.05..5.0), rng.random_range(0.05..5.0)];
            RunConfig {
                model: ModelKind::DampedPp,
                params: ModelParams::DampedPP(params),
                init: Some(init),
                t_start: 0.0,
                t_end: Some(t_end),
                sample_every: Some(t_end / 2000.0),
                integrator,
                outputs: Outputs::default(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub exit_code: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepIndex {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub runs: Vec<RunRecord>,
}

impl SweepIndex {
    /// Exit status of the first failed run, zero if all succeeded.
    pub fn exit_code(&self) -> u8 {
        self.runs
            .iter()
            .map(|r| r.exit_code)
            .find(|&c| c != 0)
            .unwrap_or(0)
    }
}

fn run_one(
    index: usize,
    cfg: &RunConfig,
    dir: &Path,
    format: Format,
) -> Result<RunRecord, CliError> {
    let stem = format!("run_{index:04}");
    let config = format!("{stem}.config.json");
    emit(Some(&dir.join(&config)), &json_bytes(&cfg.to_json()))?;
    let mut record = RunRecord {
        index,
        exit_code: 0,
        error: None,
        config,
        trajectory: None,
        summary: None,
        converged: None,
        monotone: None,
    };
    match simulate(cfg) {
        Ok(sim) => {
            let ext = match format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            let trajectory = format!("{stem}.{ext}");
            let summary = format!("{stem}.summary.json");
            emit(Some(&dir.join(&trajectory)), &sim.table.encode(format)?)?;
            emit(Some(&dir.join(&summary)), &json_bytes(&sim.summary))?;
            record.trajectory = Some(trajectory);
            record.summary = Some(summary);
            record.converged = sim.summary.convergence.map(|c| c.achieved);
            record.monotone = sim.summary.lyapunov.map(|l| l.report.monotone);
        }
        Err(CliError::Io(e)) => return Err(CliError::Io(e)),
        Err(e) => {
            record.exit_code = e.exit_code();
            record.error = Some(e.to_string());
        }
    }
    Ok(record)
}

/// Runs every config concurrently, writing `run_NNNN.*` files and `sweep.json` into `dir`.
pub fn run_sweep(
    configs: &[RunConfig],
    dir: &Path,
    format: Format,
    seed: Option<u64>,
) -> Result<SweepIndex, CliError> {
    std::fs::create_dir_all(dir)?;
    let runs = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| run_one(i, cfg, dir, format))
        .collect::<Result<Vec<_>, _>>()?;
    let index = SweepIndex {
        schema_version: SCHEMA_VERSION,
        seed,
        runs,
    };
    emit(Some(&dir.join("sweep.json")), &json_bytes(&index))?;
    Ok(index)
}
