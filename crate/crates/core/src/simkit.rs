//! Monte Carlo batches over randomly sampled arrival rates.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryConfig, GeometryError, SECONDS_PER_HOUR};
use crate::nlp::{self, Bounds, NlpError, Solution, SolverParams, SolverStatus, Weights};
use crate::traffic::{self, TrafficError};

/// Slack above which a landing pair counts as a separation violation, seconds.
pub const VIOLATION_EPS: f64 = 0.1;

pub const SEED_RULE: &str =
    "run seed = splitmix64 finalizer of (master_seed + (run + 1) * 0x9E3779B97F4A7C15), wrapping u64 arithmetic";

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Nlp(#[from] NlpError),
    #[error("n_runs must be at least 1")]
    NoRuns,
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Everything a run needs besides its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub geometry: GeometryConfig,
    pub bounds: Bounds,
    pub weights: Weights,
    pub solver: SolverParams,
    pub t_sep: f64,
    pub t_max: f64,
    pub lambda_min: u32,
    pub lambda_max: u32,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            bounds: Bounds::default(),
            weights: Weights::default(),
            solver: SolverParams::default(),
            t_sep: traffic::DEFAULT_T_SEP,
            t_max: traffic::DEFAULT_T_MAX,
            lambda_min: traffic::DEFAULT_LAMBDA_MIN,
            lambda_max: traffic::DEFAULT_LAMBDA_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetrics {
    pub n_aircraft: usize,
    /// Achieved throughput over the landing window, aircraft per hour.
    pub faf_landing_rate: f64,
    /// Share of consecutive landing pairs with slack above [`VIOLATION_EPS`].
    pub violation_pct: f64,
    pub total_stretch: f64,
    pub makespan: f64,
    pub sum_sigma: f64,
    pub solver_status: SolverStatus,
}

impl RunMetrics {
    pub fn empty() -> Self {
        Self {
            n_aircraft: 0,
            faf_landing_rate: 0.0,
            violation_pct: 0.0,
            total_stretch: 0.0,
            makespan: 0.0,
            sum_sigma: 0.0,
            solver_status: SolverStatus::Converged,
        }
    }

    pub fn from_solution(solution: &Solution) -> Self {
        if solution.plans.is_empty() {
            return Self { solver_status: solution.status, ..Self::empty() };
        }
        let times: Vec<f64> = solution.plans.iter().map(|p| p.faf_time).collect();
        Self {
            n_aircraft: solution.plans.len(),
            faf_landing_rate: landing_rate(&times),
            violation_pct: violation_pct(&solution.slacks),
            total_stretch: solution.total_stretch(),
            makespan: solution.makespan(),
            sum_sigma: solution.total_slack(),
            solver_status: solution.status,
        }
    }
}

/// `3600 (N - 1) / (t_N - t_1)` over FAF times in landing order; zero for
/// fewer than two aircraft.
pub fn landing_rate(times: &[f64]) -> f64 {
    match (times.first(), times.last()) {
        (Some(first), Some(last)) if times.len() >= 2 => {
            let span = (last - first).max(f64::EPSILON);
            SECONDS_PER_HOUR * (times.len() - 1) as f64 / span
        }
        _ => 0.0,
    }
}

pub fn violation_pct(slacks: &[f64]) -> f64 {
    if slacks.is_empty() {
        return 0.0;
    }
    let violated = slacks.iter().filter(|&&s| s > VIOLATION_EPS).count();
    100.0 * violated as f64 / slacks.len() as f64
}

/// Runway capacity implied by the separation minimum, aircraft per hour.
pub fn capacity_threshold(t_sep: f64) -> f64 {
    SECONDS_PER_HOUR / t_sep
}

pub fn run_seed(master: u64, run: usize) -> u64 {
    let mut z = master.wrapping_add((run as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rates: BTreeMap<String, f64>,
    pub solution: Solution,
    pub metrics: RunMetrics,
}

/// One replication: sample rates, generate traffic, sequence, solve, measure.
pub fn run_once(config: &BatchConfig, seed: u64) -> Result<RunOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates = traffic::sample_rates(&mut rng, &config.geometry, config.lambda_min, config.lambda_max)?;
    let scenario = traffic::build_scenario(&config.geometry, &rates, config.t_sep, config.t_max, seed)?;
    if scenario.is_empty() {
        return Ok(RunOutput { rates, solution: Solution::empty(), metrics: RunMetrics::empty() });
    }
    let sequence = nlp::fcfs_sequence(&config.geometry, &scenario, &config.bounds)?;
    let solution = nlp::solve(&config.geometry, &scenario, &sequence, &config.bounds, &config.weights, &config.solver)?;
    let metrics = RunMetrics::from_solution(&solution);
    Ok(RunOutput { rates, solution, metrics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub rates: BTreeMap<String, f64>,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchReport {
    pub master_seed: u64,
    pub seed_rule: String,
    pub capacity_threshold: f64,
    pub config: BatchConfig,
    pub runs: Vec<RunRecord>,
}

pub fn run_batch(config: &BatchConfig, n_runs: usize, master_seed: u64) -> Result<BatchReport> {
    run_batch_with(config, n_runs, master_seed, true)
}

/// Runs are independent; the report is always in run-index order.
pub fn run_batch_with(config: &BatchConfig, n_runs: usize, master_seed: u64, parallel: bool) -> Result<BatchReport> {
    if n_runs == 0 {
        return Err(SimError::NoRuns);
    }
    config.geometry.validate()?;
    config.bounds.validate()?;
    config.weights.validate()?;
    config.solver.validate()?;

    let one = |run: usize| -> Result<RunRecord> {
        let seed = run_seed(master_seed, run);
        let out = run_once(config, seed)?;
        Ok(RunRecord { run, seed, rates: out.rates, metrics: out.metrics })
    };
    let runs = if parallel {
        (0..n_runs).into_par_iter().map(one).collect::<Result<Vec<_>>>()?
    } else {
        (0..n_runs).map(one).collect::<Result<Vec<_>>>()?
    };
    Ok(BatchReport {
        master_seed,
        seed_rule: SEED_RULE.to_string(),
        capacity_threshold: capacity_threshold(config.t_sep),
        config: config.clone(),
        runs,
    })
}

/// Mean ranks with ties averaged.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = mean;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of tie-averaged ranks).
/// `None` when either side is constant or there are fewer than two points.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

/// Summary of a batch split at the runway capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    /// Runs landing below capacity.
    pub below_count: usize,
    pub below_mean_violation_pct: f64,
    /// Spearman correlation of stretch against landing rate, below capacity.
    pub below_stretch_spearman: Option<f64>,
    /// Runs landing below `margin * capacity`.
    pub margin_count: usize,
    pub margin_mean_violation_pct: f64,
    /// Runs landing above capacity.
    pub above_count: usize,
    pub above_mean_violation_pct: f64,
}

/// Runs with fewer than two aircraft have no landing rate and are skipped.
pub fn phase_summary(report: &BatchReport, margin: f64) -> PhaseSummary {
    let cap = report.capacity_threshold;
    let metrics: Vec<&RunMetrics> = report.runs.iter().map(|r| &r.metrics).filter(|m| m.n_aircraft >= 2).collect();
    let group = |keep: &dyn Fn(f64) -> bool| -> Vec<&RunMetrics> {
        metrics.iter().copied().filter(|m| keep(m.faf_landing_rate)).collect()
    };
    let mean_violation = |g: &[&RunMetrics]| {
        if g.is_empty() {
            0.0
        } else {
            g.iter().map(|m| m.violation_pct).sum::<f64>() / g.len() as f64
        }
    };
    let below = group(&|r| r < cap);
    let within_margin = group(&|r| r < margin * cap);
    let above = group(&|r| r > cap);
    let rates: Vec<f64> = below.iter().map(|m| m.faf_landing_rate).collect();
    let stretch: Vec<f64> = below.iter().map(|m| m.total_stretch).collect();
    PhaseSummary {
        below_count: below.len(),
        below_mean_violation_pct: mean_violation(&below),
        below_stretch_spearman: spearman(&rates, &stretch),
        margin_count: within_margin.len(),
        margin_mean_violation_pct: mean_violation(&within_margin),
        above_count: above.len(),
        above_mean_violation_pct: mean_violation(&above),
    }
}
