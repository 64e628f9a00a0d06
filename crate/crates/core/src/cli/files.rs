//! JSON documents read and written by the command-line tool.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryConfig, SpeedProfile};
use crate::nlp::{evaluate_objective, AircraftPlan, Bounds, Solution, SolverParams, Weights};
use crate::simkit::{BatchConfig, RunMetrics};
use crate::traffic::{self, Arrival, Scenario};

use super::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Inclusive integer range of per-gate arrival rates, aircraft per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateRange {
    pub min: u32,
    pub max: u32,
}

impl Default for RateRange {
    fn default() -> Self {
        Self { min: traffic::DEFAULT_LAMBDA_MIN, max: traffic::DEFAULT_LAMBDA_MAX }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    /// Fixed per-gate rates. When absent, rates are drawn from `rate_range`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub rate_range: RateRange,
    #[serde(default = "default_t_sep")]
    pub t_sep: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default)]
    pub seed: u64,
    /// Materialized traffic, filled in by `generate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrivals: Option<Vec<Arrival>>,
}

fn default_t_sep() -> f64 {
    traffic::DEFAULT_T_SEP
}

fn default_t_max() -> f64 {
    traffic::DEFAULT_T_MAX
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self {
            rates: None,
            rate_range: RateRange::default(),
            t_sep: default_t_sep(),
            t_max: default_t_max(),
            seed: 0,
            arrivals: None,
        }
    }
}

/// Scenario input. Every section except `schema_version` may be omitted and
/// falls back to the defaults, which are written out explicitly on save.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub traffic: TrafficSection,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub solver_params: SolverParams,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            geometry: GeometryConfig::default(),
            traffic: TrafficSection::default(),
            bounds: Bounds::default(),
            weights: Weights::default(),
            solver_params: SolverParams::default(),
        }
    }
}

impl ScenarioFile {
    /// The scenario described by the materialized arrivals.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let arrivals = self
            .traffic
            .arrivals
            .clone()
            .ok_or_else(|| CliError::Input("traffic.arrivals is missing; run `generate` first".into()))?;
        for (i, a) in arrivals.iter().enumerate() {
            if a.id != i {
                return Err(CliError::Input(format!("traffic.arrivals[{i}].id is {}, expected {i}", a.id)));
            }
            if !a.entry_time.is_finite() || !a.entry_point.is_finite() {
                return Err(CliError::Input(format!("traffic.arrivals[{i}] has a non-finite value")));
            }
            if i > 0 && a.entry_time < arrivals[i - 1].entry_time {
                return Err(CliError::Input(format!("traffic.arrivals[{i}] is out of entry-time order")));
            }
        }
        Ok(Scenario {
            arrivals,
            rates: self.traffic.rates.clone().unwrap_or_default(),
            t_sep: self.traffic.t_sep,
            t_max: self.traffic.t_max,
            seed: self.traffic.seed,
        })
    }

    pub fn batch_config(&self) -> BatchConfig {
        BatchConfig {
            geometry: self.geometry.clone(),
            bounds: self.bounds,
            weights: self.weights,
            solver: self.solver_params,
            t_sep: self.traffic.t_sep,
            t_max: self.traffic.t_max,
            lambda_min: self.traffic.rate_range.min,
            lambda_max: self.traffic.rate_range.max,
        }
    }
}

/// One solved plan set with its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolvedPlans {
    pub solution: Solution,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub input: ScenarioFile,
    pub raw: SolvedPlans,
    /// Present when speeds were snapped to the 10 kt grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantized: Option<SolvedPlans>,
}

impl ResultsFile {
    /// Rebuilds every plan from its controls and the echoed input, then
    /// recomputes the objective from scratch.
    pub fn reevaluate(&self, plans: &SolvedPlans) -> Result<f64, CliError> {
        let scenario = self.input.scenario()?;
        let rebuilt = plans
            .solution
            .plans
            .iter()
            .map(|p| {
                let a = scenario
                    .arrivals
                    .get(p.arrival_id)
                    .ok_or_else(|| CliError::Input(format!("plan refers to unknown arrival {}", p.arrival_id)))?;
                let speeds = SpeedProfile::new(p.speeds.v_l, p.speeds.v_theta, p.speeds.v_f);
                Ok(AircraftPlan::new(&self.input.geometry, a.id, a.entry_point, a.entry_time, p.d, speeds)?)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(evaluate_objective(&rebuilt, scenario.t_sep, &self.input.bounds, &self.input.weights).total)
    }
}

/// Reads a JSON document, reporting the failing field path and position.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_json(&text).map_err(|msg| CliError::Input(format!("{}:{msg}", path.display())))
}

/// Parses JSON text; errors read `line:column: at `field.path`: message`.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let inner = e.inner();
        format!("{}:{}: at `{}`: {}", inner.line(), inner.column(), e.path(), without_position(inner))
    })?;
    de.end().map_err(|e| format!("{}:{}: {}", e.line(), e.column(), without_position(&e)))?;
    Ok(value)
}

/// The error message without serde_json's trailing "at line L column C".
fn without_position(e: &serde_json::Error) -> String {
    let text = e.to_string();
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    text.strip_suffix(&suffix).map_or(text.clone(), str::to_string)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn check_schema(version: u32) -> Result<(), CliError> {
    if version != SCHEMA_VERSION {
        return Err(CliError::Input(format!("unsupported schema_version {version}, expected {SCHEMA_VERSION}")));
    }
    Ok(())
}
