use crate::geometry::{GeometryConfig, SpeedProfile};
use crate::traffic::Scenario;

use super::problem::Problem;
use super::{AircraftPlan, Bounds, Result, Solution, SolverStatus, Weights};

const BISECTION_STEPS: usize = 200;

/// Sequential spacing baseline, also the solver's warm start.
///
/// Aircraft are handled in landing order. Each one flies the fastest profile
/// unless that lands it too close behind its predecessor, in which case the
/// smallest delay that restores separation is found on a one-parameter
/// family: first all speeds are eased from their upper to their lower
/// bounds, then the extension grows from zero to `d_max` at the lowest
/// speeds. If even the slowest, longest path is not enough the aircraft
/// takes it and the shortfall stays in the slack.
pub fn greedy_fcfs_solve(
    config: &GeometryConfig,
    scenario: &Scenario,
    sequence: &[usize],
    bounds: &Bounds,
    weights: &Weights,
) -> Result<Solution> {
    let problem = Problem::new(config, scenario, sequence, bounds, weights)?;
    let plans = greedy_plans(&problem)?;
    Ok(problem.solution_from_plans(plans, SolverStatus::Converged, 0))
}

pub(crate) fn greedy_plans(problem: &Problem<'_>) -> Result<Vec<AircraftPlan>> {
    let mut plans: Vec<AircraftPlan> = Vec::with_capacity(problem.len());
    for rank in 0..problem.len() {
        let fastest = problem.plan(rank, 0.0, problem.bounds.max_speeds())?;
        let plan = match plans.last() {
            Some(prev) if fastest.faf_time < prev.faf_time + problem.t_sep => {
                delay_to(problem, rank, prev.faf_time + problem.t_sep)?
            }
            _ => fastest,
        };
        plans.push(plan);
    }
    Ok(plans)
}

/// Point `s` in `[0, 2]` of the delay family: speeds first, then extension.
fn delay_profile(bounds: &Bounds, s: f64) -> (f64, SpeedProfile) {
    let lerp = |hi: f64, lo: f64, k: f64| hi - k * (hi - lo);
    if s <= 1.0 {
        let speeds = SpeedProfile::new(
            lerp(bounds.v_l.max, bounds.v_l.min, s),
            lerp(bounds.v_theta.max, bounds.v_theta.min, s),
            lerp(bounds.v_f.max, bounds.v_f.min, s),
        );
        (0.0, speeds)
    } else {
        ((s - 1.0).min(1.0) * bounds.d_max, bounds.min_speeds())
    }
}

fn delay_to(problem: &Problem<'_>, rank: usize, target: f64) -> Result<AircraftPlan> {
    let at = |s: f64| {
        let (d, speeds) = delay_profile(problem.bounds, s);
        problem.plan(rank, d, speeds)
    };
    let slowest = at(2.0)?;
    if slowest.faf_time <= target {
        return Ok(slowest);
    }
    let (mut lo, mut hi) = (0.0, 2.0);
    let mut best = slowest;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let plan = at(mid)?;
        if plan.faf_time >= target {
            hi = mid;
            best = plan;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}
