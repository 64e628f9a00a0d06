//! Command-line surface: `generate`, `solve`, `mc` and `plot`.
//!
//! Exit codes are the same for every command: 0 on success, 2 for unusable
//! input (unreadable or malformed files, invalid parameters), 3 when an
//! aircraft has no valid path geometry, 1 when an output cannot be written.

pub mod files;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{GeometryConfig, GeometryError, SpeedProfile};
use crate::nlp::{self, evaluate_objective, separation_slacks, AircraftPlan, Bounds, NlpError, Solution, SpeedRange};
use crate::simkit::{self, BatchReport, RunMetrics, SimError};
use crate::traffic::{self, Scenario, TrafficError};

use files::{check_schema, read_json, write_json, ResultsFile, ScenarioFile, SolvedPlans, SCHEMA_VERSION};

/// Directory searched for relative scenario paths that do not exist as given.
pub const CONFIG_DIR_ENV: &str = "TROMBONE_CONFIG_DIR";

/// Grid the `--quantize-speeds` option snaps to, knots.
pub const SPEED_GRID: f64 = 10.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Geometry(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Geometry(e.to_string())
    }
}

impl From<TrafficError> for CliError {
    fn from(e: TrafficError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<NlpError> for CliError {
    fn from(e: NlpError) -> Self {
        match e {
            NlpError::Geometry { .. } => CliError::Geometry(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Geometry(g) => g.into(),
            SimError::Nlp(n) => n.into(),
            SimError::Traffic(t) => t.into(),
            SimError::NoRuns => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "trombone", version, about = "Terminal arrival trajectory optimization with Baseleg extensions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw arrivals for a scenario file and write it back with them filled in.
    Generate {
        /// Scenario file (JSON).
        scenario: PathBuf,
        /// Overrides traffic.seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Sequence and optimize a generated scenario.
    Solve {
        scenario: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Also report speeds snapped down to the 10 kt grid.
        #[arg(long)]
        quantize_speeds: bool,
    },
    /// Monte Carlo batch with random rates; writes JSON and a CSV beside it.
    Mc {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        runs: u64,
        /// Master seed; defaults to traffic.seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Render a results snapshot or a batch scatter as SVG.
    Plot {
        /// Results file for --snapshot, batch report for --scatter.
        input: PathBuf,
        #[command(flatten)]
        mode: PlotMode,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct PlotMode {
    /// Time of the snapshot, seconds.
    #[arg(long, allow_negative_numbers = true)]
    pub snapshot: Option<f64>,
    #[arg(long)]
    pub scatter: bool,
}

/// Resolves a scenario path, falling back to the config directory.
pub fn resolve_config_path(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(CONFIG_DIR_ENV) {
        Some(dir) => {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                candidate
            } else {
                path.to_path_buf()
            }
        }
        None => path.to_path_buf(),
    }
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioFile, CliError> {
    let file: ScenarioFile = read_json(&resolve_config_path(path))?;
    check_schema(file.schema_version)?;
    file.geometry.validate()?;
    file.bounds.validate()?;
    file.weights.validate()?;
    file.solver_params.validate()?;
    if file.bounds.d_max > file.geometry.d_max {
        return Err(CliError::Input(format!(
            "bounds.d_max {} exceeds geometry.d_max {}",
            file.bounds.d_max, file.geometry.d_max
        )));
    }
    Ok(file)
}

/// Runs one command and returns what it prints on success.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Generate { scenario, seed, out } => {
            let mut file = load_scenario_file(&scenario)?;
            let scenario = generate(&mut file, seed)?;
            write_json(&out, &file)?;
            Ok(format!("{} aircraft", scenario.len()))
        }
        Command::Solve { scenario, out, quantize_speeds } => {
            let file = load_scenario_file(&scenario)?;
            let results = solve(file, quantize_speeds)?;
            write_json(&out, &results)?;
            Ok(describe_results(&results))
        }
        Command::Mc { scenario, runs, seed, out } => {
            let file = load_scenario_file(&scenario)?;
            let master = seed.unwrap_or(file.traffic.seed);
            let runs = usize::try_from(runs).map_err(|_| CliError::Input("--runs is too large".into()))?;
            let report = simkit::run_batch(&file.batch_config(), runs, master)?;
            write_json(&out, &report)?;
            let csv_path = out.with_extension("csv");
            write_batch_csv(&csv_path, &report)?;
            let phases = simkit::phase_summary(&report, 0.9);
            Ok(format!(
                "{} runs; below capacity {:.2}: {} runs, mean violations {:.2}%; above: {} runs, mean violations {:.2}%; CSV at {}",
                report.runs.len(),
                report.capacity_threshold,
                phases.below_count,
                phases.below_mean_violation_pct,
                phases.above_count,
                phases.above_mean_violation_pct,
                csv_path.display()
            ))
        }
        Command::Plot { input, mode, out } => {
            let (svg, message) = match mode.snapshot {
                Some(t) => {
                    let results: ResultsFile = read_json(&input)?;
                    check_schema(results.schema_version)?;
                    let scenario = results.input.scenario()?;
                    let (svg, in_span) = svg::snapshot(&results.input.geometry, &scenario, &results.raw.solution, t);
                    if !in_span {
                        eprintln!(
                            "warning: t = {t} s is outside [0, {:.1}] s; drawing empty airspace",
                            results.raw.solution.makespan()
                        );
                    }
                    (svg, format!("snapshot at t = {t} s"))
                }
                None => {
                    let report: BatchReport = read_json(&input)?;
                    (svg::scatter(&report), format!("scatter of {} runs", report.runs.len()))
                }
            };
            fs::write(&out, svg).map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
            Ok(message)
        }
    }
}

/// Draws arrivals into `file` (rates from the file, or sampled from its rate
/// range with the file's seed) and returns the scenario.
pub fn generate(file: &mut ScenarioFile, seed: Option<u64>) -> Result<Scenario, CliError> {
    if let Some(seed) = seed {
        file.traffic.seed = seed;
    }
    let t = &file.traffic;
    let rates = match &t.rates {
        Some(rates) => rates.clone(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
            traffic::sample_rates(&mut rng, &file.geometry, t.rate_range.min, t.rate_range.max)?
        }
    };
    let scenario = traffic::build_scenario(&file.geometry, &rates, t.t_sep, t.t_max, t.seed)?;
    file.traffic.rates = Some(rates);
    file.traffic.arrivals = Some(scenario.arrivals.clone());
    Ok(scenario)
}

/// FCFS sequence, optimization, and optionally the quantized variant.
pub fn solve(file: ScenarioFile, quantize_speeds: bool) -> Result<ResultsFile, CliError> {
    let scenario = file.scenario()?;
    let solution = if scenario.is_empty() {
        Solution::empty()
    } else {
        let sequence = nlp::fcfs_sequence(&file.geometry, &scenario, &file.bounds)?;
        nlp::solve(&file.geometry, &scenario, &sequence, &file.bounds, &file.weights, &file.solver_params)?
    };
    let quantized = if quantize_speeds {
        let q = quantize_solution(&file.geometry, &scenario, &file.bounds, &file.weights, &solution)?;
        Some(SolvedPlans { metrics: RunMetrics::from_solution(&q), solution: q })
    } else {
        None
    };
    let raw = SolvedPlans { metrics: RunMetrics::from_solution(&solution), solution };
    Ok(ResultsFile { schema_version: SCHEMA_VERSION, input: file, raw, quantized })
}

fn describe_results(results: &ResultsFile) -> String {
    let line = |label: &str, p: &SolvedPlans| {
        format!(
            "{label}: {} aircraft, status {}, objective {:.6}, slack {:.3} s, stretch {:.3} NM, violations {:.1}%",
            p.metrics.n_aircraft,
            p.solution.status.as_str(),
            p.solution.objective.total,
            p.metrics.sum_sigma,
            p.metrics.total_stretch,
            p.metrics.violation_pct
        )
    };
    let mut text = line("raw", &results.raw);
    if let Some(q) = &results.quantized {
        text.push('\n');
        text.push_str(&line("quantized", q));
    }
    text
}

/// Largest grid speed not above `v`, kept inside the range. If no grid
/// point lies in the range below `v`, the lower bound is used.
pub fn quantize_speed(v: f64, range: SpeedRange) -> f64 {
    let snapped = (v / SPEED_GRID).floor() * SPEED_GRID;
    snapped.max(range.min).min(v)
}

pub fn quantize_speeds(speeds: &SpeedProfile, bounds: &Bounds) -> SpeedProfile {
    SpeedProfile::new(
        quantize_speed(speeds.v_l, bounds.v_l),
        quantize_speed(speeds.v_theta, bounds.v_theta),
        quantize_speed(speeds.v_f, bounds.v_f),
    )
}

/// Snaps every plan's speeds down to the grid and recomputes FAF times,
/// slacks and the objective exactly.
pub fn quantize_solution(
    config: &GeometryConfig,
    scenario: &Scenario,
    bounds: &Bounds,
    weights: &nlp::Weights,
    solution: &Solution,
) -> Result<Solution, CliError> {
    let plans = solution
        .plans
        .iter()
        .map(|p| {
            let a = &scenario.arrivals[p.arrival_id];
            AircraftPlan::new(config, a.id, a.entry_point, a.entry_time, p.d, quantize_speeds(&p.speeds, bounds))
        })
        .collect::<Result<Vec<_>, NlpError>>()?;
    let times: Vec<f64> = plans.iter().map(|p| p.faf_time).collect();
    Ok(Solution {
        sequence: solution.sequence.clone(),
        slacks: separation_slacks(&times, scenario.t_sep),
        objective: evaluate_objective(&plans, scenario.t_sep, bounds, weights),
        plans,
        status: solution.status,
        iterations: solution.iterations,
    })
}

pub fn write_batch_csv(path: &Path, report: &BatchReport) -> Result<(), CliError> {
    let out = |e: csv::Error| CliError::Output(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(out)?;
    let gates: Vec<String> = report.config.geometry.gates.keys().cloned().collect();
    let mut head = vec!["run".to_string(), "seed".to_string()];
    head.extend(gates.iter().map(|g| format!("rate_{g}")));
    head.extend(["n_aircraft", "faf_landing_rate", "violation_pct", "total_stretch", "makespan"].map(String::from));
    w.write_record(&head).map_err(out)?;
    for r in &report.runs {
        let mut row = vec![r.run.to_string(), r.seed.to_string()];
        row.extend(gates.iter().map(|g| r.rates.get(g).map_or(String::new(), |v| v.to_string())));
        let m = &r.metrics;
        row.extend([
            m.n_aircraft.to_string(),
            m.faf_landing_rate.to_string(),
            m.violation_pct.to_string(),
            m.total_stretch.to_string(),
            m.makespan.to_string(),
        ]);
        w.write_record(&row).map_err(out)?;
    }
    w.flush().map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}
