//! The commands, as functions from a validated config to in-memory outputs.
//!
//! Nothing here touches the file system, so a failing run never leaves a
//! partial file behind.

use dampedpp_core::analysis::{lv_first_integral, oscillator_energy};
use dampedpp_core::lyapunov::{default_slack, make_spec};
use dampedpp_core::models::{
    damped_pp_field, lv_field, oscillator_field, plant_field_z, DampedPPParams, ModelParams,
    PlantParams,
};
use dampedpp_core::ode::{integrate, Termination, Trajectory, VectorField};
use dampedpp_core::plant::{certificate_holds, simulate_plant, CertificateSpec};
use dampedpp_core::{
    classify, convergence_check, equilibria, monotonicity_check, peak_bound, ConvergenceReport,
    EquilibriumReport, LyapunovSpec, MonotonicityReport, PeakBoundReport, PlantReport, Regime,
    RegimeClassification,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{params_json, ModelKind, RunConfig, SCHEMA_VERSION};
use crate::error::CliError;
use crate::formats::{Cell, Table};

/// Distance and tail window used for the convergence entry of a summary.
pub const CONVERGENCE_TOL: f64 = 1e-3;
pub const CONVERGENCE_TAIL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovVerdict {
    pub spec: LyapunovSpec,
    pub slack: f64,
    #[serde(flatten)]
    pub report: MonotonicityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub schema_version: u32,
    pub model: ModelKind,
    pub params: Value,
    pub t_final: f64,
    /// `(x, y)`, or `(x, y, L)` for the plant.
    pub final_state: Vec<f64>,
    pub samples: usize,
    pub terminated_by: Termination,
    /// Whether the table carries a `V` column.
    pub v_column: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<RegimeClassification>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<PlantReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub model: ModelKind,
    /// The damped-system parameters the analysis ran on.
    pub params: DampedPPParams,
    pub equilibria: EquilibriumReport,
    pub classification: RegimeClassification,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_bound: Option<PeakBoundReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantReportDoc {
    pub schema_version: u32,
    pub params: PlantParams,
    /// Shift of the plant Lyapunov function.
    pub m: f64,
    /// Whether `y_f >= v/sigma`, the only case the certificate can hold.
    pub certificate_applicable: bool,
    #[serde(flatten)]
    pub report: PlantReport,
}

pub struct Simulation {
    pub table: Table,
    pub summary: SimulateSummary,
}

fn state<const N: usize>(init: &[f64]) -> [f64; N] {
    let mut out = [0.0; N];
    out.copy_from_slice(init);
    out
}

fn with_values<const N: usize>(
    traj: &Trajectory<N>,
    v: impl Fn(&[f64; N]) -> Option<f64>,
) -> Option<Vec<f64>> {
    traj.samples.iter().map(|s| v(&s.state)).collect()
}

fn table_2d(traj: &Trajectory<2>, values: Option<&[f64]>) -> Table {
    let mut columns = vec!["t", "x", "y"];
    if values.is_some() {
        columns.push("V");
    }
    let mut table = Table::new(columns);
    for (k, s) in traj.samples.iter().enumerate() {
        let mut row = vec![Cell::Num(s.t), Cell::Num(s.state[0]), Cell::Num(s.state[1])];
        if let Some(v) = values {
            row.push(Cell::Num(v[k]));
        }
        table.push(row);
    }
    table
}

fn summary_2d(cfg: &RunConfig, traj: &Trajectory<2>, v_column: bool) -> SimulateSummary {
    let last = traj.last();
    SimulateSummary {
        schema_version: SCHEMA_VERSION,
        model: cfg.model,
        params: params_json(&cfg.params),
        t_final: last.t,
        final_state: last.state.to_vec(),
        samples: traj.len(),
        terminated_by: traj.terminated_by,
        v_column,
        classification: None,
        convergence: None,
        lyapunov: None,
        plant: None,
    }
}

fn run_2d<F: VectorField<2>>(
    cfg: &RunConfig,
    field: &F,
    v: impl Fn(&[f64; 2]) -> Option<f64>,
) -> Result<(Trajectory<2>, Table, SimulateSummary), CliError> {
    let (init, t_end) = cfg.run_span()?;
    let traj = integrate(
        field,
        state(init),
        (cfg.t_start, t_end),
        &cfg.integrator,
        &[],
        cfg.sample_every,
    )?;
    let values = with_values(&traj, v);
    let table = table_2d(&traj, values.as_deref());
    let summary = summary_2d(cfg, &traj, values.is_some());
    Ok((traj, table, summary))
}

/// Trajectory table plus a summary with the final state and, for the damped
/// models, the regime, convergence and Lyapunov monotonicity verdicts.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation, CliError> {
    let (table, summary) = match cfg.params {
        ModelParams::Oscillator(p) => {
            let (_, t, s) = run_2d(cfg, &oscillator_field(p), |s| {
                Some(oscillator_energy(&p, s))
            })?;
            (t, s)
        }
        ModelParams::LotkaVolterra(p) => {
            let (_, t, s) = run_2d(cfg, &lv_field(p), |s| lv_first_integral(&p, s).ok())?;
            (t, s)
        }
        ModelParams::DampedPP(_) | ModelParams::Virus(_) => {
            let d = cfg.params.as_damped().expect("damped view");
            let spec = make_spec(&d);
            let (traj, table, mut summary) =
                run_2d(cfg, &damped_pp_field(d), |s| spec.value(s).ok())?;
            let class = classify(&d);
            summary.convergence = Some(convergence_check(
                &traj,
                class.attractor,
                CONVERGENCE_TOL,
                CONVERGENCE_TAIL,
            ));
            summary.classification = Some(class);
            if summary.v_column {
                let slack = default_slack(&cfg.integrator);
                let report = monotonicity_check(&traj, &spec, slack)?;
                summary.lyapunov = Some(LyapunovVerdict {
                    spec,
                    slack,
                    report,
                });
            }
            (table, summary)
        }
        ModelParams::Plant(p) => {
            let run = plant_run(cfg, &p)?;
            let mut table = Table::new(vec!["t", "x", "y", "z", "L", "V"]);
            for row in &run.rows {
                table.push(row[..6].to_vec());
            }
            (table, run.summary)
        }
    };
    Ok(Simulation { table, summary })
}

struct PlantRun {
    rows: Vec<Vec<Cell>>,
    summary: SimulateSummary,
    doc: PlantReportDoc,
}

fn plant_run(cfg: &RunConfig, p: &PlantParams) -> Result<PlantRun, CliError> {
    let (init, t_end) = cfg.run_span()?;
    if cfg.t_start != 0.0 {
        return Err(CliError::config("plant runs start at t_start = 0"));
    }
    let (traj, report) = simulate_plant(p, state(init), t_end, &cfg.integrator, cfg.sample_every)?;
    let cert = CertificateSpec::new(p);
    let mut rows = Vec::with_capacity(traj.len());
    for s in &traj.samples {
        let [x, y, z] = s.state;
        let vm = cert.spec.value(&s.state)?;
        let holds = certificate_holds(&cert, &s.state)?;
        rows.push(vec![
            Cell::Num(s.t),
            Cell::Num(x),
            Cell::Num(y),
            Cell::Num(z),
            Cell::Num(1.0 / z),
            Cell::Num(vm),
            Cell::Bool(holds),
        ]);
    }
    let last = traj.last();
    let summary = SimulateSummary {
        schema_version: SCHEMA_VERSION,
        model: cfg.model,
        params: params_json(&cfg.params),
        t_final: last.t,
        final_state: vec![last.state[0], last.state[1], 1.0 / last.state[2]],
        samples: traj.len(),
        terminated_by: traj.terminated_by,
        v_column: true,
        classification: None,
        convergence: None,
        lyapunov: None,
        plant: Some(report.clone()),
    };
    let doc = PlantReportDoc {
        schema_version: SCHEMA_VERSION,
        params: *p,
        m: cert.m,
        certificate_applicable: cert.applicable(),
        report,
    };
    Ok(PlantRun { rows, summary, doc })
}

/// Plant trajectory with `V_m` and the certificate flag, plus the plant report.
pub fn plant(cfg: &RunConfig) -> Result<(Table, PlantReportDoc), CliError> {
    let ModelParams::Plant(p) = cfg.params else {
        return Err(CliError::config(format!(
            "plant needs model `plant`, got `{}`",
            cfg.model.name()
        )));
    };
    let run = plant_run(cfg, &p)?;
    let mut table = Table::new(vec!["t", "x", "y", "z", "L", "Vm", "certificate"]);
    for row in run.rows {
        table.push(row);
    }
    Ok((table, run.doc))
}

/// Equilibria, regime and, in the coexistence regime, the peak bound.
pub fn analyze(cfg: &RunConfig) -> Result<AnalyzeReport, CliError> {
    let d = cfg.params.as_damped().ok_or_else(|| {
        CliError::config(format!(
            "analyze needs model `damped_pp` or `virus`, got `{}`",
            cfg.model.name()
        ))
    })?;
    let classification = classify(&d);
    let peak = match classification.regime {
        Regime::Coexistence => Some(peak_bound(&d)?),
        Regime::Extinction | Regime::Critical => None,
    };
    Ok(AnalyzeReport {
        schema_version: SCHEMA_VERSION,
        model: cfg.model,
        params: d,
        equilibria: equilibria(&d)?,
        classification,
        peak_bound: peak,
    })
}

/// Axis-aligned box `x0, y0, x1, y1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl std::str::FromStr for BBox {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("`{p}` is not a number"))
            })
            .collect::<Result<_, _>>()?;
        let [x0, y0, x1, y1] = parts[..] else {
            return Err(format!("expected x0,y0,x1,y1, got {} values", parts.len()));
        };
        Ok(BBox { x0, y0, x1, y1 })
    }
}

fn grid_point(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * (i as f64 / (n - 1) as f64)
    }
}

/// `(x, y, dx, dy)` on an `n x n` grid over `bbox`, corners included, `x`
/// varying fastest. Plant models need the `z` of the slice.
pub fn field_grid(
    cfg: &RunConfig,
    bbox: BBox,
    n: usize,
    z_slice: Option<f64>,
) -> Result<Table, CliError> {
    if n < 2 {
        return Err(CliError::config(format!("grid needs n >= 2, got {n}")));
    }
    let BBox { x0, y0, x1, y1 } = bbox;
    if ![x0, y0, x1, y1].iter().all(|c| c.is_finite()) || !(x0 < x1 && y0 < y1) {
        return Err(CliError::config(format!(
            "degenerate bbox {x0},{y0},{x1},{y1}"
        )));
    }
    let eval: Box<dyn Fn(f64, f64) -> [f64; 2]> = match (cfg.params, z_slice) {
        (ModelParams::Plant(p), Some(z)) => {
            if !(z > 0.0 && z.is_finite()) {
                return Err(CliError::config(format!(
                    "z slice must be positive, got {z}"
                )));
            }
            let f = plant_field_z(p);
            Box::new(move |x, y| {
                let d = f.eval(&[x, y, z]);
                [d[0], d[1]]
            })
        }
        (ModelParams::Plant(_), None) => {
            return Err(CliError::config(
                "plant is three dimensional: pass --z-slice",
            ));
        }
        (_, Some(_)) => {
            return Err(CliError::config(
                "--z-slice only applies to the plant model",
            ))
        }
        (ModelParams::Oscillator(p), None) => {
            Box::new(move |x, y| oscillator_field(p).eval(&[x, y]))
        }
        (ModelParams::LotkaVolterra(p), None) => Box::new(move |x, y| lv_field(p).eval(&[x, y])),
        (ModelParams::DampedPP(_) | ModelParams::Virus(_), None) => {
            let f = damped_pp_field(cfg.params.as_damped().expect("damped view"));
            Box::new(move |x, y| f.eval(&[x, y]))
        }
    };
    let mut table = Table::new(vec!["x", "y", "dx", "dy"]);
    for j in 0..n {
        let y = grid_point(y0, y1, j, n);
        for i in 0..n {
            let x = grid_point(x0, x1, i, n);
            let [dx, dy] = eval(x, y);
            table.push(vec![
                Cell::Num(x),
                Cell::Num(y),
                Cell::Num(dx),
                Cell::Num(dy),
            ]);
        }
    }
    Ok(table)
}
