//! Fixed-sequence trajectory optimization.
//!
//! Decision variables per aircraft are the Baseleg extension `d` and the
//! three segment speeds. FAF times follow from the path geometry, so the
//! only coupling between aircraft is the soft landing-separation hinge.

mod greedy;
mod objective;
mod problem;
pub mod projection;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, GeometryConfig, GeometryError, PathGeometry, SpeedProfile};
use crate::traffic::Scenario;

pub use greedy::greedy_fcfs_solve;
pub use objective::{evaluate_objective, separation_slacks, ObjectiveBreakdown};
pub use solver::solve;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlpError {
    #[error("aircraft {arrival_id}: {source}")]
    Geometry {
        arrival_id: usize,
        #[source]
        source: GeometryError,
    },
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error("sequence does not match the scenario: {0}")]
    BadSequence(String),
}

pub type Result<T> = std::result::Result<T, NlpError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedRange {
    pub min: f64,
    pub max: f64,
}

impl SpeedRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    /// Normalized distance below the upper bound; zero for a degenerate range.
    pub fn deficit(&self, v: f64) -> f64 {
        if self.width() > 0.0 {
            (self.max - v) / self.width()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bounds {
    pub d_max: f64,
    pub v_l: SpeedRange,
    pub v_theta: SpeedRange,
    pub v_f: SpeedRange,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            d_max: 15.0,
            v_l: SpeedRange::new(180.0, 240.0),
            v_theta: SpeedRange::new(130.0, 200.0),
            v_f: SpeedRange::new(130.0, 160.0),
        }
    }
}

impl Bounds {
    /// Every range must be positive and ordered, and the bounds themselves
    /// must respect the tangent >= turn >= final ordering so that the
    /// fastest and slowest profiles are both flyable.
    pub fn validate(&self) -> Result<()> {
        if !(self.d_max.is_finite() && self.d_max >= 0.0) {
            return Err(NlpError::InvalidBounds(format!("d_max must be non-negative, got {}", self.d_max)));
        }
        for (name, r) in [("v_l", self.v_l), ("v_theta", self.v_theta), ("v_f", self.v_f)] {
            if !(r.min.is_finite() && r.max.is_finite() && r.min > 0.0 && r.min <= r.max) {
                return Err(NlpError::InvalidBounds(format!("{name} range [{}, {}] is not valid", r.min, r.max)));
            }
        }
        if !(self.v_l.min >= self.v_theta.min && self.v_theta.min >= self.v_f.min) {
            return Err(NlpError::InvalidBounds("lower speed bounds must decrease from v_l to v_f".into()));
        }
        if !(self.v_l.max >= self.v_theta.max && self.v_theta.max >= self.v_f.max) {
            return Err(NlpError::InvalidBounds("upper speed bounds must decrease from v_l to v_f".into()));
        }
        Ok(())
    }

    pub fn max_speeds(&self) -> SpeedProfile {
        SpeedProfile::new(self.v_l.max, self.v_theta.max, self.v_f.max)
    }

    pub fn min_speeds(&self) -> SpeedProfile {
        SpeedProfile::new(self.v_l.min, self.v_theta.min, self.v_f.min)
    }

    pub fn contains(&self, d: f64, speeds: &SpeedProfile) -> bool {
        let inside = |r: SpeedRange, v: f64| r.min <= v && v <= r.max;
        (0.0..=self.d_max).contains(&d)
            && inside(self.v_l, speeds.v_l)
            && inside(self.v_theta, speeds.v_theta)
            && inside(self.v_f, speeds.v_f)
            && speeds.is_monotone()
    }

    /// Sum of the three normalized speed deficits.
    pub fn speed_deficit(&self, speeds: &SpeedProfile) -> f64 {
        self.v_l.deficit(speeds.v_l) + self.v_theta.deficit(speeds.v_theta) + self.v_f.deficit(speeds.v_f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Weights {
    pub safe: f64,
    pub thru: f64,
    pub eff: f64,
    pub speed: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { safe: 1e4, thru: 1.0, eff: 0.1, speed: 0.01 }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.safe, self.thru, self.eff, self.speed];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(NlpError::InvalidWeights("weights must be finite and non-negative".into()));
        }
        if !(self.safe >= self.thru && self.thru >= self.eff && self.eff >= self.speed) {
            return Err(NlpError::InvalidWeights("expected safe >= thru >= eff >= speed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    /// Iteration budget per start, shared across smoothing stages.
    pub max_iterations: usize,
    /// Relative objective decrease that counts as stalled.
    pub tolerance: f64,
    /// Window, in iterations, over which the decrease is measured.
    pub stall_window: usize,
    /// Initial softplus width for the separation hinge, seconds.
    pub softplus_width: f64,
    /// Final softplus width after continuation, seconds.
    pub min_softplus_width: f64,
    /// Perturbed restarts in addition to the warm start.
    pub restarts: usize,
    /// Perturbation size as a fraction of each variable's range.
    pub perturbation: f64,
    pub restart_seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-8,
            stall_window: 50,
            softplus_width: 0.5,
            min_softplus_width: 1e-3,
            restarts: 4,
            perturbation: 0.1,
            restart_seed: 0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.stall_window == 0 {
            return Err(NlpError::InvalidParams("iteration counts must be positive".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(NlpError::InvalidParams("tolerance must be non-negative".into()));
        }
        if !(self.softplus_width > 0.0
            && self.min_softplus_width > 0.0
            && self.min_softplus_width <= self.softplus_width)
        {
            return Err(NlpError::InvalidParams("need 0 < min_softplus_width <= softplus_width".into()));
        }
        if !(self.perturbation.is_finite() && self.perturbation >= 0.0) {
            return Err(NlpError::InvalidParams("perturbation must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Converged,
    IterationLimit,
    InfeasibleGeometry,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::IterationLimit => "iteration-limit",
            SolverStatus::InfeasibleGeometry => "infeasible-geometry",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AircraftPlan {
    pub arrival_id: usize,
    pub d: f64,
    pub speeds: SpeedProfile,
    /// FAF crossing time, seconds.
    pub faf_time: f64,
    pub geometry: PathGeometry,
}

impl AircraftPlan {
    /// Builds a plan with the FAF time implied by the path and speeds.
    pub fn new(
        config: &GeometryConfig,
        arrival_id: usize,
        entry: geometry::Point,
        entry_time: f64,
        d: f64,
        speeds: SpeedProfile,
    ) -> Result<Self> {
        let geometry =
            geometry::path_geometry(config, entry, d).map_err(|source| NlpError::Geometry { arrival_id, source })?;
        let faf_time = entry_time + geometry::segment_times(&geometry, &speeds).iter().sum::<f64>();
        Ok(Self { arrival_id, d, speeds, faf_time, geometry })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solution {
    /// Arrival ids in landing order.
    pub sequence: Vec<usize>,
    /// One plan per aircraft, in landing order.
    pub plans: Vec<AircraftPlan>,
    /// `slacks[j]` is the shortfall between landing positions `j` and `j + 1`.
    pub slacks: Vec<f64>,
    pub objective: ObjectiveBreakdown,
    pub status: SolverStatus,
    pub iterations: usize,
}

impl Solution {
    pub fn total_slack(&self) -> f64 {
        self.slacks.iter().sum()
    }

    pub fn total_stretch(&self) -> f64 {
        self.plans.iter().map(|p| p.d).sum()
    }

    pub fn makespan(&self) -> f64 {
        self.plans.last().map_or(0.0, |p| p.faf_time)
    }

    pub fn empty() -> Self {
        Self {
            sequence: Vec::new(),
            plans: Vec::new(),
            slacks: Vec::new(),
            objective: ObjectiveBreakdown::default(),
            status: SolverStatus::Converged,
            iterations: 0,
        }
    }
}

/// Landing order by nominal ETA: entry time plus the travel time with no
/// extension at the fastest speeds. Ties go to the earlier entry, then the
/// lower id.
pub fn fcfs_sequence(config: &GeometryConfig, scenario: &Scenario, bounds: &Bounds) -> Result<Vec<usize>> {
    let fastest = bounds.max_speeds();
    let mut keyed = scenario
        .arrivals
        .iter()
        .map(|a| {
            geometry::travel_time(config, a.entry_point, 0.0, &fastest)
                .map(|t| (a.entry_time + t, a.entry_time, a.id))
                .map_err(|source| NlpError::Geometry { arrival_id: a.id, source })
        })
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(keyed.into_iter().map(|k| k.2).collect())
}

/// Checks that `sequence` is a permutation of the scenario's ids, which are
/// assumed to be `0..n`.
pub(crate) fn check_sequence(scenario: &Scenario, sequence: &[usize]) -> Result<()> {
    let n = scenario.arrivals.len();
    if sequence.len() != n {
        return Err(NlpError::BadSequence(format!("{} entries for {n} aircraft", sequence.len())));
    }
    let mut seen = vec![false; n];
    for &id in sequence {
        if id >= n || seen[id] {
            return Err(NlpError::BadSequence(format!("id {id} is out of range or repeated")));
        }
        seen[id] = true;
    }
    if scenario.arrivals.iter().enumerate().any(|(i, a)| a.id != i) {
        return Err(NlpError::BadSequence("arrival ids must be 0..n in entry order".into()));
    }
    Ok(())
}
