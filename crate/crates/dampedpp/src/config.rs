//! Run configuration: a single JSON document plus flat command-line overrides.
//!
//! Parsing is two-staged. The envelope is read first with the parameters
//! kept as raw JSON, overrides are applied, and only then are the parameters
//! decoded into the record matching `model`, rejecting unknown keys.

use std::io::Read;
use std::path::{Path, PathBuf};

use dampedpp_core::models::{
    DampedPPParams, LotkaVolterraParams, ModelParams, OscillatorParams, PlantParams, VirusParams,
};
use dampedpp_core::IntegratorConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModelKind {
    Oscillator,
    LotkaVolterra,
    DampedPp,
    Virus,
    Plant,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Oscillator => "oscillator",
            ModelKind::LotkaVolterra => "lotka_volterra",
            ModelKind::DampedPp => "damped_pp",
            ModelKind::Virus => "virus",
            ModelKind::Plant => "plant",
        }
    }

    /// Length of `init`: `(x, y)`, or `(x, y, L)` for the plant.
    pub fn dimension(self) -> usize {
        match self {
            ModelKind::Plant => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    schema_version: u32,
    model: ModelKind,
    params: Value,
    #[serde(default)]
    init: Option<Vec<f64>>,
    #[serde(default)]
    t_start: f64,
    #[serde(default)]
    t_end: Option<f64>,
    #[serde(default)]
    sample_every: Option<f64>,
    #[serde(default)]
    integrator: IntegratorConfig,
    #[serde(default)]
    outputs: Outputs,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub params: ModelParams,
    pub init: Option<Vec<f64>>,
    pub t_start: f64,
    pub t_end: Option<f64>,
    pub sample_every: Option<f64>,
    pub integrator: IntegratorConfig,
    pub outputs: Outputs,
}

/// Flat flags that override fields of the config document.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Model name, replacing `model`.
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Parameter override `NAME=VALUE`; nested fields use dots, e.g. `threshold.y_f=1.5`.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub init: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_start: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub sample_every: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub max_step: Option<f64>,
}

fn set_path(params: &mut Value, path: &str, value: f64) -> Result<(), CliError> {
    let mut node = params;
    let mut keys = path.split('.').peekable();
    while let Some(key) = keys.next() {
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::config(format!("cannot set `{path}`: `params` is not an object"))
        })?;
        if keys.peek().is_none() {
            obj.insert(key.to_string(), Value::from(value));
            return Ok(());
        }
        node = obj
            .entry(key)
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::config("empty parameter name"))
}

fn apply(env: &mut Envelope, o: &Overrides) -> Result<(), CliError> {
    if let Some(m) = o.model {
        env.model = m;
    }
    for item in &o.params {
        let (name, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("--param expects NAME=VALUE, got `{item}`")))?;
        let value: f64 = raw
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("--param {name}: `{raw}` is not a number")))?;
        set_path(&mut env.params, name.trim(), value)?;
    }
    if let Some(init) = &o.init {
        env.init = Some(init.clone());
    }
    if let Some(t) = o.t_start {
        env.t_start = t;
    }
    if o.t_end.is_some() {
        env.t_end = o.t_end;
    }
    if o.sample_every.is_some() {
        env.sample_every = o.sample_every;
    }
    if let Some(v) = o.rel_tol {
        env.integrator.rel_tol = v;
    }
    if let Some(v) = o.abs_tol {
        env.integrator.abs_tol = v;
    }
    if let Some(v) = o.max_step {
        env.integrator.max_step = v;
    }
    Ok(())
}

fn decode<T: serde::de::DeserializeOwned>(model: ModelKind, params: Value) -> Result<T, CliError> {
    serde_json::from_value(params)
        .map_err(|e| CliError::config(format!("params for {}: {e}", model.name())))
}

pub fn decode_params(model: ModelKind, params: Value) -> Result<ModelParams, CliError> {
    let p = match model {
        ModelKind::Oscillator => {
            ModelParams::Oscillator(decode::<OscillatorParams>(model, params)?)
        }
        ModelKind::LotkaVolterra => {
            ModelParams::LotkaVolterra(decode::<LotkaVolterraParams>(model, params)?)
        }
        ModelKind::DampedPp => ModelParams::DampedPP(decode::<DampedPPParams>(model, params)?),
        ModelKind::Virus => ModelParams::Virus(decode::<VirusParams>(model, params)?),
        ModelKind::Plant => ModelParams::Plant(decode::<PlantParams>(model, params)?),
    };
    p.validate()?;
    Ok(p)
}

pub fn params_json(p: &ModelParams) -> Value {
    let v = match p {
        ModelParams::Oscillator(p) => serde_json::to_value(p),
        ModelParams::LotkaVolterra(p) => serde_json::to_value(p),
        ModelParams::DampedPP(p) => serde_json::to_value(p),
        ModelParams::Virus(p) => serde_json::to_value(p),
        ModelParams::Plant(p) => serde_json::to_value(p),
    };
    v.expect("parameter records serialize")
}

impl RunConfig {
    pub fn from_json(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let mut env: Envelope = serde_json::from_str(text)?;
        if env.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                env.schema_version
            )));
        }
        apply(&mut env, overrides)?;
        let params = decode_params(env.model, env.params)?;
        let cfg = RunConfig {
            model: env.model,
            params,
            init: env.init,
            t_start: env.t_start,
            t_end: env.t_end,
            sample_every: env.sample_every,
            integrator: env.integrator,
            outputs: env.outputs,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the document from `path`, or from standard input when `path` is `None` or `-`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let text = read_source(path)?;
        Self::from_json(&text, overrides)
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some(init) = &self.init {
            if init.len() != self.model.dimension() {
                return Err(CliError::config(format!(
                    "{} needs {} initial coordinates, got {}",
                    self.model.name(),
                    self.model.dimension(),
                    init.len()
                )));
            }
            if init.iter().any(|c| !c.is_finite()) {
                return Err(CliError::config("initial state must be finite"));
            }
        }
        if !self.t_start.is_finite() {
            return Err(CliError::config("t_start must be finite"));
        }
        if let Some(t_end) = self.t_end {
            if !(t_end.is_finite() && t_end > self.t_start) {
                return Err(CliError::config(format!(
                    "t_end {t_end} must exceed t_start {}",
                    self.t_start
                )));
            }
        }
        if let Some(dt) = self.sample_every {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(CliError::config(format!(
                    "sample_every {dt} must be positive"
                )));
            }
        }
        self.integrator
            .validate()
            .map_err(|e| CliError::config(format!("integrator: {e}")))?;
        Ok(())
    }

    /// Initial state and end time, required by the simulating commands.
    pub fn run_span(&self) -> Result<(&[f64], f64), CliError> {
        let init = self
            .init
            .as_deref()
            .ok_or_else(|| CliError::config("missing `init`"))?;
        let t_end = self
            .t_end
            .ok_or_else(|| CliError::config("missing `t_end`"))?;
        Ok((init, t_end))
    }

    /// The document form, re-readable by [`RunConfig::from_json`].
    pub fn to_json(&self) -> Value {
        let mut doc = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "model": self.model,
            "params": params_json(&self.params),
            "t_start": self.t_start,
            "integrator": self.integrator,
        });
        let obj = doc.as_object_mut().expect("object literal");
        if !self.integrator.max_step.is_finite() {
            // JSON has no infinity; an absent field means unbounded
            obj["integrator"]
                .as_object_mut()
                .expect("struct")
                .remove("max_step");
        }
        if let Some(init) = &self.init {
            obj.insert("init".into(), serde_json::json!(init));
        }
        if let Some(t) = self.t_end {
            obj.insert("t_end".into(), t.into());
        }
        if let Some(dt) = self.sample_every {
            obj.insert("sample_every".into(), dt.into());
        }
        if self.outputs != Outputs::default() {
            obj.insert(
                "outputs".into(),
                serde_json::to_value(&self.outputs).expect("paths serialize"),
            );
        }
        doc
    }
}

pub fn read_source(path: Option<&Path>) -> Result<String, CliError> {
    match path {
        Some(p) if p != Path::new("-") => std::fs::read_to_string(p).map_err(|e| {
            CliError::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", p.display()),
            ))
        }),
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAMPED: &str = r#"{
        "schema_version": 1,
        "model": "damped_pp",
        "params": {"alpha": 1, "beta": 2, "gamma": 1, "delta": 3, "sigma": 1},
        "init": [0.5, 0.5],
        "t_end": 50
    }"#;

    #[test]
    fn parses_minimal_document() {
        let cfg = RunConfig::from_json(DAMPED, &Overrides::default()).unwrap();
        assert_eq!(cfg.model, ModelKind::DampedPp);
        assert_eq!(cfg.init.as_deref(), Some(&[0.5, 0.5][..]));
        assert_eq!(cfg.integrator, IntegratorConfig::default());
        assert_eq!(cfg.params.as_damped().unwrap().delta, 3.0);
    }

    #[test]
    fn document_round_trips() {
        let cfg = RunConfig::from_json(DAMPED, &Overrides::default()).unwrap();
        let again =
            RunConfig::from_json(&cfg.to_json().to_string(), &Overrides::default()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            params: vec!["delta=0.5".into()],
            init: Some(vec![1.0, 2.0]),
            t_end: Some(9.0),
            rel_tol: Some(1e-6),
            ..Overrides::default()
        };
        let cfg = RunConfig::from_json(DAMPED, &o).unwrap();
        assert_eq!(cfg.params.as_damped().unwrap().delta, 0.5);
        assert_eq!(cfg.init.as_deref(), Some(&[1.0, 2.0][..]));
        assert_eq!(cfg.t_end, Some(9.0));
        assert_eq!(cfg.integrator.rel_tol, 1e-6);
    }

    #[test]
    fn nested_override() {
        let doc = r#"{"schema_version": 1, "model": "plant",
            "params": {"v": 1, "gamma": 2, "sigma": 1, "threshold": {"y_f": 1.2, "k": 1}}}"#;
        let o = Overrides {
            params: vec!["threshold.y_f=3".into()],
            ..Overrides::default()
        };
        let cfg = RunConfig::from_json(doc, &o).unwrap();
        let ModelParams::Plant(p) = cfg.params else {
            panic!()
        };
        assert_eq!(p.threshold.y_f, 3.0);
    }

    #[test]
    fn rejects_bad_documents() {
        let cases = [
            DAMPED.replace("\"sigma\": 1}", "\"sigma\": -1}"),
            DAMPED.replace("\"schema_version\": 1", "\"schema_version\": 2"),
            DAMPED.replace("\"sigma\": 1}", "\"sigma\": 1, \"rho\": 2}"),
            DAMPED.replace("[0.5, 0.5]", "[0.5, 0.5, 0.5]"),
            DAMPED.replace("\"t_end\": 50", "\"t_end\": -1"),
            DAMPED.replace("\"model\": \"damped_pp\"", "\"model\": \"virus\""),
            DAMPED.replace("\"t_end\": 50", "\"t_end\": 50, \"extra\": true"),
            "not json".to_string(),
        ];
        for doc in cases {
            let err = RunConfig::from_json(&doc, &Overrides::default()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{doc}: {err}");
        }
    }

    #[test]
    fn bad_param_flag() {
        for flag in ["delta", "delta=abc", "alpha.x=1"] {
            let o = Overrides {
                params: vec![flag.into()],
                ..Overrides::default()
            };
            assert_eq!(
                RunConfig::from_json(DAMPED, &o).unwrap_err().exit_code(),
                2,
                "{flag}"
            );
        }
    }
}
