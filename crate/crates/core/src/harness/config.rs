//! Scenario configuration.
//!
//! Scenarios are TOML documents:
//!
//! ```toml
//! model = "two-qubit"          # or "qutrit"
//! fit_fraction = 0.5           # optional, final fraction of the run used for fits
//! seed = 0                     # optional, reserved
//!
//! [params]                     # fields of the chosen model; `k` optional
//! e1 = 1.0
//! e2 = 2.0
//! g = 0.1
//! p1 = 0.1
//! p2 = 0.1
//! tc = 1.0
//! th = 4.0
//!
//! [window]
//! n_min = -20
//! n_max = 60
//! n0 = 0                       # optional, defaults to 0
//!
//! [integrator]
//! t_max = 500.0
//! dt = 0.1                     # optional, defaults to 0.01 / max rate
//! record_every = 100           # optional
//! positivity_check_every = 10  # optional
//! boundary_tolerance = 1e-6    # optional
//!
//! [output]
//! prefix = "run"               # optional
//! ```
//!
//! Unknown keys are rejected everywhere. The same structure is accepted as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::model::{build_model, ModelKind, ModelOperators};
use crate::params::{EngineParams, LadderWindow, QutritEngineParams, TwoQubitEngineParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub n_min: i64,
    pub n_max: i64,
    #[serde(default)]
    pub n0: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub t_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_positivity_every")]
    pub positivity_check_every: usize,
    #[serde(default = "default_boundary_tolerance")]
    pub boundary_tolerance: f64,
}

fn default_record_every() -> usize {
    100
}
fn default_positivity_every() -> usize {
    10
}
fn default_boundary_tolerance() -> f64 {
    1e-6
}
fn default_fit_fraction() -> f64 {
    0.5
}
fn default_prefix() -> String {
    "run".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            prefix: default_prefix(),
        }
    }
}

/// On-disk shape. Model parameters are kept as a loose table until the model
/// kind is known.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: ModelKind,
    params: serde_json::Value,
    window: WindowConfig,
    integrator: IntegratorSection,
    #[serde(default)]
    output: OutputConfig,
    #[serde(default = "default_fit_fraction")]
    fit_fraction: f64,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: EngineParams,
    pub window: WindowConfig,
    pub integrator: IntegratorSection,
    pub output: OutputConfig,
    pub fit_fraction: f64,
    /// Reserved; the simulation core is deterministic.
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        let json = serde_json::to_value(value).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_json_value(json)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let raw: RawConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        let params = match raw.model {
            ModelKind::TwoQubit => EngineParams::TwoQubit(
                serde_json::from_value::<TwoQubitEngineParams>(raw.params)
                    .map_err(|e| Error::Config(format!("[params]: {e}")))?,
            ),
            ModelKind::Qutrit => EngineParams::Qutrit(
                serde_json::from_value::<QutritEngineParams>(raw.params)
                    .map_err(|e| Error::Config(format!("[params]: {e}")))?,
            ),
        };
        let cfg = Self {
            params,
            window: raw.window,
            integrator: raw.integrator,
            output: raw.output,
            fit_fraction: raw.fit_fraction,
            seed: raw.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                let v: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                Self::from_json_value(v)
            }
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.params {
            EngineParams::TwoQubit(_) => ModelKind::TwoQubit,
            EngineParams::Qutrit(_) => ModelKind::Qutrit,
        }
    }

    fn raw(&self) -> RawConfig {
        let params = match &self.params {
            EngineParams::TwoQubit(p) => serde_json::to_value(p),
            EngineParams::Qutrit(p) => serde_json::to_value(p),
        }
        .expect("parameter structs serialize");
        RawConfig {
            model: self.kind(),
            params,
            window: self.window,
            integrator: self.integrator,
            output: self.output.clone(),
            fit_fraction: self.fit_fraction,
            seed: self.seed,
        }
    }

    /// Config echo suitable for re-parsing with [`ScenarioConfig::from_json_value`].
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.raw()).expect("config serializes")
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&self.raw()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn ladder_window(&self) -> Result<LadderWindow> {
        LadderWindow::new(
            self.window.n_min,
            self.window.n_max,
            self.window.n0,
            self.params.ladder_spacing(),
        )
    }

    pub fn build_model(&self) -> Result<ModelOperators> {
        build_model(&self.params, &self.ladder_window()?)
    }

    pub fn integrator_config(&self, model: &ModelOperators) -> IntegratorConfig {
        IntegratorConfig {
            dt: self
                .integrator
                .dt
                .unwrap_or_else(|| IntegratorConfig::default_dt(model)),
            t_max: self.integrator.t_max,
            record_every: self.integrator.record_every,
            positivity_check_every: self.integrator.positivity_check_every,
            boundary_tolerance: self.integrator.boundary_tolerance,
        }
    }

    /// Checks every module precondition without running anything.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let model = self.build_model()?;
        self.integrator_config(&model).validate(&model)?;
        if !(self.fit_fraction > 0.0 && self.fit_fraction <= 1.0) {
            return Err(Error::invalid("fit_fraction", "must lie in (0, 1]"));
        }
        if self.output.prefix.is_empty() || self.output.prefix.contains(['/', '\\']) {
            return Err(Error::invalid("output.prefix", "must be a plain non-empty file stem"));
        }
        Ok(())
    }

    /// Copy with one scalar parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut out = self.clone();
        out.params = set_param(&self.params, name, value)?;
        Ok(out)
    }
}

/// Names of the scalar fields a sweep may vary.
pub fn sweepable_params(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::TwoQubit => &["e1", "e2", "g", "p1", "p2", "tc", "th", "k"],
        ModelKind::Qutrit => &["e1", "e2", "g", "pc", "pr", "ph", "tc", "tr", "th", "k"],
    }
}

pub fn set_param(params: &EngineParams, name: &str, value: f64) -> Result<EngineParams> {
    let mut out = *params;
    let slot = match &mut out {
        EngineParams::TwoQubit(p) => match name {
            "e1" => &mut p.e1,
            "e2" => &mut p.e2,
            "g" => &mut p.g,
            "p1" => &mut p.p1,
            "p2" => &mut p.p2,
            "tc" => &mut p.tc,
            "th" => &mut p.th,
            "k" => &mut p.constants.k,
            _ => return Err(unknown_param(name, ModelKind::TwoQubit)),
        },
        EngineParams::Qutrit(p) => match name {
            "e1" => &mut p.e1,
            "e2" => &mut p.e2,
            "g" => &mut p.g,
            "pc" => &mut p.pc,
            "pr" => &mut p.pr,
            "ph" => &mut p.ph,
            "tc" => &mut p.tc,
            "tr" => &mut p.tr,
            "th" => &mut p.th,
            "k" => &mut p.constants.k,
            _ => return Err(unknown_param(name, ModelKind::Qutrit)),
        },
    };
    *slot = value;
    Ok(out)
}

fn unknown_param(name: &str, kind: ModelKind) -> Error {
    Error::invalid(
        "param",
        format!(
            "unknown {} parameter `{name}` (expected one of {})",
            kind.name(),
            sweepable_params(kind).join(", ")
        ),
    )
}
