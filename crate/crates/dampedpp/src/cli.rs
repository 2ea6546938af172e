use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::{analyze, field_grid, plant, simulate, BBox};
use crate::config::{read_source, Overrides, RunConfig};
use crate::error::CliError;
use crate::formats::{emit, json_bytes, Format};
use crate::sweep::{parse_sweep, random_configs, run_sweep, RegimeChoice};

#[derive(Debug, Parser)]
#[command(
    name = "dampedpp",
    version,
    about = "Simulate and analyse damped predator-prey, virus and plant-growth models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a model and write its trajectory and a summary.
    Simulate(RunArgs),
    /// Equilibria, regime and peak bound of a damped_pp or virus model.
    Analyze(RunArgs),
    /// Sample the vector field on a regular grid.
    FieldGrid(GridArgs),
    /// Plant growth run with the growth-stop certificate.
    Plant(RunArgs),
    /// Run many configs concurrently, from a sweep document or a random seed.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config document; standard input when absent or `-`.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Primary output; standard output when absent or `-`.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Table format; defaults to the output file extension, else csv.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Summary or report JSON path.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: Common,
    /// Grid box as x0,y0,x1,y1.
    #[arg(long, allow_hyphen_values = true)]
    pub bbox: BBox,
    /// Points per axis.
    #[arg(long)]
    pub n: usize,
    /// Fixed `z = 1/L` for three dimensional models.
    #[arg(long)]
    pub z_slice: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep document `{"schema_version": 1, "runs": [...]}`; ignored with --seed.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory for the per-run files and sweep.json.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Generate random damped_pp runs from this seed instead of reading a document.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random runs.
    #[arg(long, default_value_t = 20, requires = "seed")]
    pub count: usize,
    #[arg(long, value_enum, default_value = "coexistence", requires = "seed")]
    pub regime: RegimeChoice,
    #[command(flatten)]
    pub overrides: Overrides,
}

fn table_format(explicit: Option<Format>, path: Option<&Path>) -> Format {
    explicit.unwrap_or_else(|| match path.and_then(|p| p.extension()) {
        Some(ext) if ext == "json" => Format::Json,
        _ => Format::Csv,
    })
}

fn is_file(path: Option<&Path>) -> bool {
    path.is_some_and(|p| p != Path::new("-"))
}

/// Table to `table_path`, report to `report_path`. Without a report path the
/// report goes to standard output, unless the table already does.
fn write_pair(
    table: &[u8],
    table_path: Option<&Path>,
    report: &[u8],
    report_path: Option<&Path>,
) -> Result<(), CliError> {
    emit(table_path, table)?;
    if report_path.is_some() || is_file(table_path) {
        emit(report_path, report)?;
    }
    Ok(())
}

/// Runs one command and returns the process exit status.
pub fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = RunConfig::load(args.common.config.as_deref(), &args.common.overrides)?;
            let table_path = args.common.out.or_else(|| cfg.outputs.trajectory.clone());
            let report_path = args.report.or_else(|| cfg.outputs.report.clone());
            let sim = simulate(&cfg)?;
            let table = sim
                .table
                .encode(table_format(args.common.format, table_path.as_deref()))?;
            write_pair(
                &table,
                table_path.as_deref(),
                &json_bytes(&sim.summary),
                report_path.as_deref(),
            )?;
        }
        Command::Plant(args) => {
            let cfg = RunConfig::load(args.common.config.as_deref(), &args.common.overrides)?;
            let table_path = args.common.out.or_else(|| cfg.outputs.trajectory.clone());
            let report_path = args.report.or_else(|| cfg.outputs.report.clone());
            let (table, doc) = plant(&cfg)?;
            let table = table.encode(table_format(args.common.format, table_path.as_deref()))?;
            write_pair(
                &table,
                table_path.as_deref(),
                &json_bytes(&doc),
                report_path.as_deref(),
            )?;
        }
        Command::Analyze(args) => {
            if args.common.format == Some(Format::Csv) {
                return Err(CliError::config("analyze writes JSON only"));
            }
            let cfg = RunConfig::load(args.common.config.as_deref(), &args.common.overrides)?;
            let out = args
                .common
                .out
                .or(args.report)
                .or_else(|| cfg.outputs.report.clone());
            let report = analyze(&cfg)?;
            emit(out.as_deref(), &json_bytes(&report))?;
        }
        Command::FieldGrid(args) => {
            let cfg = RunConfig::load(args.common.config.as_deref(), &args.common.overrides)?;
            let table = field_grid(&cfg, args.bbox, args.n, args.z_slice)?;
            let out = args.common.out.as_deref();
            emit(out, &table.encode(table_format(args.common.format, out))?)?;
        }
        Command::Sweep(args) => {
            let configs = match args.seed {
                Some(seed) => random_configs(seed, args.count, args.regime),
                None => parse_sweep(&read_source(args.config.as_deref())?, &args.overrides)?,
            };
            let index = run_sweep(&configs, &args.out, args.format, args.seed)?;
            emit(None, &json_bytes(&index))?;
            return Ok(index.exit_code());
        }
    }
    Ok(0)
}
