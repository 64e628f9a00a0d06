//! Smoothed spectral projected-gradient solve.
//!
//! FAF times are eliminated through the travel-time equality, so the search
//! space is the product of per-aircraft boxes intersected with the speed
//! ordering. The separation hinge is replaced by a softplus whose width is
//! shrunk over a few continuation stages; the returned objective is always
//! the exact hinge value.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{travel_time_with_gradient, GeometryConfig, SpeedProfile};
use crate::traffic::Scenario;

use super::greedy::greedy_plans;
use super::problem::{Problem, VARS};
use super::projection::project_speeds;
use super::{Bounds, Result, Solution, SolverParams, SolverStatus, Weights};

/// Width shrink factor between continuation stages.
const WIDTH_DECAY: f64 = 0.2;
/// Non-monotone line-search memory.
const LINE_SEARCH_MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const STEP_MIN: f64 = 1e-10;
const STEP_MAX: f64 = 1e10;
const PROJECTED_GRADIENT_TOL: f64 = 1e-10;
const RETIME_STEPS: usize = 60;

/// Local minimizer of the weighted objective for a fixed landing sequence.
///
/// Starts from the greedy spacing plan plus `params.restarts` perturbed
/// copies of it, and returns whichever candidate, greedy included, has the
/// lowest exact objective.
pub fn solve(
    config: &GeometryConfig,
    scenario: &Scenario,
    sequence: &[usize],
    bounds: &Bounds,
    weights: &Weights,
    params: &SolverParams,
) -> Result<Solution> {
    params.validate()?;
    let problem = Problem::new(config, scenario, sequence, bounds, weights)?;
    if problem.len() == 0 {
        return Ok(Solution::empty());
    }

    let warm = greedy_plans(&problem)?;
    let greedy = problem.solution_from_plans(warm, SolverStatus::Converged, 0);
    let mut evaluator = Evaluator::new(&problem);

    let warm_y = evaluator.to_scaled(&flatten(&greedy));
    let mut rng = ChaCha8Rng::seed_from_u64(params.restart_seed ^ scenario.seed);
    let mut starts = vec![warm_y.clone()];
    for _ in 0..params.restarts {
        let mut y: Vec<f64> = warm_y.iter().map(|v| v + params.perturbation * rng.random_range(-1.0..=1.0)).collect();
        evaluator.project(&mut y);
        starts.push(y);
    }

    let mut best: Option<Solution> = None;
    let mut warm_status = SolverStatus::IterationLimit;
    for (k, y0) in starts.into_iter().enumerate() {
        let run = descend(&mut evaluator, y0, params);
        let status = if run.converged { SolverStatus::Converged } else { SolverStatus::IterationLimit };
        if k == 0 {
            warm_status = status;
        }
        let x = evaluator.to_unscaled(&run.y);
        for x in [retime(&problem, &x)?, x] {
            let candidate = problem.solution(&x, status, run.iterations)?;
            if best.as_ref().is_none_or(|b| candidate.objective.total < b.objective.total) {
                best = Some(candidate);
            }
        }
    }

    let best = best.expect("at least the warm start runs");
    if greedy.objective.total < best.objective.total {
        return Ok(Solution { status: warm_status, ..greedy });
    }
    Ok(best)
}

fn flatten(solution: &Solution) -> Vec<f64> {
    solution.plans.iter().flat_map(|p| [p.d, p.speeds.v_l, p.speeds.v_theta, p.speeds.v_f]).collect()
}

/// Lands every aircraft as early as separation allows, as cheaply as a
/// small family of delay paths can manage.
///
/// In landing order each aircraft gets the first time that keeps `t_sep`
/// behind its predecessor. That time is realized on the cheapest of several
/// monotone paths from the fastest plan to the slowest, longest one: every
/// order of fully easing one control after another, plus the broken line
/// through the controls the descent arrived at. Travel time and cost both
/// grow along each path, so the first point on time is also its cheapest.
/// When separation is achievable throughout, these earliest times are the
/// best possible ones and this step does the fine allocation that the
/// smoothed descent struggles with.
fn retime(problem: &Problem<'_>, x: &[f64]) -> Result<Vec<f64>> {
    let b = problem.bounds;
    let w = problem.weights;
    let (fast, slow) = (b.max_speeds(), b.min_speeds());
    let fastest = [0.0, fast.v_l, fast.v_theta, fast.v_f];
    let slowest = [b.d_max, slow.v_l, slow.v_theta, slow.v_f];
    let orders = stage_orders();
    let mut out = x.to_vec();
    let mut prev: Option<f64> = None;
    for rank in 0..problem.len() {
        let current: [f64; VARS] = x[rank * VARS..(rank + 1) * VARS].try_into().expect("chunk of VARS");
        let time = |v: &[f64; VARS]| -> Result<f64> {
            Ok(problem.plan(rank, v[0], SpeedProfile::new(v[1], v[2], v[3]))?.faf_time)
        };
        let cost = |v: &[f64; VARS]| w.eff * v[0] + w.speed * b.speed_deficit(&SpeedProfile::new(v[1], v[2], v[3]));

        let t_fast = time(&fastest)?;
        let target = prev.map(|p| p + problem.t_sep);
        let (chosen, t) = match target {
            None => (fastest, t_fast),
            Some(target) if t_fast >= target => (fastest, t_fast),
            Some(target) => {
                let t_slow = time(&slowest)?;
                if t_slow <= target {
                    (slowest, t_slow)
                } else {
                    let through = |s: f64| -> [f64; VARS] {
                        let (from, to, k) =
                            if s <= 0.5 { (fastest, current, 2.0 * s) } else { (current, slowest, 2.0 * s - 1.0) };
                        std::array::from_fn(|i| from[i] + k * (to[i] - from[i]))
                    };
                    let mut best = first_on_time(&through, &time, target)?;
                    for order in &orders {
                        let staged = |s: f64| staged_point(order, &fastest, &slowest, s);
                        let (v, tv) = first_on_time(&staged, &time, target)?;
                        if cost(&v) < cost(&best.0) {
                            best = (v, tv);
                        }
                    }
                    best
                }
            }
        };
        out[rank * VARS..(rank + 1) * VARS].copy_from_slice(&chosen);
        prev = Some(t);
    }
    Ok(out)
}

/// Bisection for the first point of a monotone path, `s` in `[0, 1]`, that
/// lands no earlier than `target`. The path must end on or after it.
fn first_on_time(
    path: &dyn Fn(f64) -> [f64; VARS],
    time: &dyn Fn(&[f64; VARS]) -> Result<f64>,
    target: f64,
) -> Result<([f64; VARS], f64)> {
    let mut chosen = path(1.0);
    let mut t = time(&chosen)?;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..RETIME_STEPS {
        let mid = 0.5 * (lo + hi);
        let v = path(mid);
        let tm = time(&v)?;
        if tm >= target {
            hi = mid;
            chosen = v;
            t = tm;
        } else {
            lo = mid;
        }
    }
    Ok((chosen, t))
}

/// All 24 orders in which the four controls can be eased.
fn stage_orders() -> Vec<[usize; VARS]> {
    let mut out = Vec::with_capacity(24);
    for code in 0..VARS.pow(VARS as u32) {
        let order: [usize; VARS] = std::array::from_fn(|i| code / VARS.pow(i as u32) % VARS);
        if (0..VARS).all(|k| order.contains(&k)) {
            out.push(order);
        }
    }
    out
}

/// Point `s` of the path easing controls one at a time in `order`. Speeds
/// that would exceed the one before them are pulled down with it, which
/// keeps the plan flyable and every coordinate monotone in `s`.
fn staged_point(order: &[usize; VARS], from: &[f64; VARS], to: &[f64; VARS], s: f64) -> [f64; VARS] {
    let mut v = *from;
    let scaled = s.clamp(0.0, 1.0) * VARS as f64;
    for (stage, &i) in order.iter().enumerate() {
        let k = (scaled - stage as f64).clamp(0.0, 1.0);
        v[i] = from[i] + k * (to[i] - from[i]);
    }
    v[2] = v[2].min(v[1]);
    v[3] = v[3].min(v[2]);
    v
}

struct Descent {
    y: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Runs the continuation stages from wide to narrow softplus.
fn descend(ev: &mut Evaluator<'_, '_>, y0: Vec<f64>, params: &SolverParams) -> Descent {
    let mut widths = vec![params.softplus_width];
    while *widths.last().unwrap() > params.min_softplus_width {
        let next = (widths.last().unwrap() * WIDTH_DECAY).max(params.min_softplus_width);
        widths.push(next);
    }
    let per_stage = (params.max_iterations / widths.len()).max(1);

    let mut y = y0;
    let mut used = 0;
    let mut converged = false;
    for (i, &width) in widths.iter().enumerate() {
        let remaining = params.max_iterations.saturating_sub(used);
        let budget = if i + 1 == widths.len() { remaining } else { per_stage.min(remaining) };
        if budget == 0 {
            converged = false;
            break;
        }
        let stage = spg(ev, y, width, budget, params);
        used += stage.iterations;
        y = stage.y;
        converged = stage.converged;
    }
    Descent { y, iterations: used, converged }
}

/// Spectral projected gradient with a non-monotone Armijo search.
fn spg(ev: &mut Evaluator<'_, '_>, mut y: Vec<f64>, width: f64, budget: usize, params: &SolverParams) -> Descent {
    let n = y.len();
    let mut g = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut dir = vec![0.0; n];

    let mut f = ev.smoothed(&y, width, &mut g);
    let mut best_y = y.clone();
    let mut best_f = f;
    let mut recent: VecDeque<f64> = VecDeque::from([f]);
    let mut window: VecDeque<f64> = VecDeque::from([best_f]);

    let mut alpha = {
        for i in 0..n {
            trial[i] = y[i] - g[i];
        }
        ev.project(&mut trial);
        let pg = inf_norm_diff(&trial, &y);
        if pg < PROJECTED_GRADIENT_TOL {
            return Descent { y, iterations: 0, converged: true };
        }
        (1.0 / pg).clamp(STEP_MIN, STEP_MAX)
    };

    for it in 0..budget {
        for i in 0..n {
            trial[i] = y[i] - g[i];
        }
        ev.project(&mut trial);
        if inf_norm_diff(&trial, &y) < PROJECTED_GRADIENT_TOL {
            return Descent { y: best_y, iterations: it, converged: true };
        }

        for i in 0..n {
            trial[i] = y[i] - alpha * g[i];
        }
        ev.project(&mut trial);
        for i in 0..n {
            dir[i] = trial[i] - y[i];
        }
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            return Descent { y: best_y, iterations: it, converged: true };
        }

        let reference = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let f_new = loop {
            for i in 0..n {
                trial[i] = y[i] + lambda * dir[i];
            }
            let f_trial = ev.smoothed(&trial, width, &mut g_new);
            if f_trial <= reference + ARMIJO * lambda * slope {
                break f_trial;
            }
            // Safeguarded quadratic backtrack.
            let denom = 2.0 * (f_trial - f - lambda * slope);
            let mut next = if denom > 0.0 { -slope * lambda * lambda / denom } else { 0.5 * lambda };
            if !(next >= 0.1 * lambda && next <= 0.5 * lambda) {
                next = 0.5 * lambda;
            }
            lambda = next;
            if lambda < 1e-16 {
                return Descent { y: best_y, iterations: it, converged: true };
            }
        };

        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = trial[i] - y[i];
            ss += s * s;
            sy += s * (g_new[i] - g[i]);
        }
        alpha = if sy > 0.0 { (ss / sy).clamp(STEP_MIN, STEP_MAX) } else { STEP_MAX };

        std::mem::swap(&mut y, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        if f < best_f {
            best_f = f;
            best_y.copy_from_slice(&y);
        }

        recent.push_back(f);
        if recent.len() > LINE_SEARCH_MEMORY {
            recent.pop_front();
        }
        window.push_back(best_f);
        if window.len() > params.stall_window {
            let old = window.pop_front().unwrap();
            if old - best_f <= params.tolerance * best_f.abs().max(1.0) {
                return Descent { y: best_y, iterations: it + 1, converged: true };
            }
        }
    }
    Descent { y: best_y, iterations: budget, converged: false }
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Smoothed objective and gradient in scaled coordinates, where every
/// variable is divided by the width of its bound range.
struct Evaluator<'p, 'a> {
    problem: &'p Problem<'a>,
    scale: [f64; VARS],
    times: Vec<f64>,
    partials: Vec<[f64; VARS]>,
    time_coeff: Vec<f64>,
    x: Vec<f64>,
}

impl<'p, 'a> Evaluator<'p, 'a> {
    fn new(problem: &'p Problem<'a>) -> Self {
        let b = problem.bounds;
        let positive = |w: f64| if w > 0.0 { w } else { 1.0 };
        let n = problem.len();
        Self {
            problem,
            scale: [positive(b.d_max), positive(b.v_l.width()), positive(b.v_theta.width()), positive(b.v_f.width())],
            times: vec![0.0; n],
            partials: vec![[0.0; VARS]; n],
            time_coeff: vec![0.0; n],
            x: vec![0.0; n * VARS],
        }
    }

    fn to_scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| v / self.scale[i % VARS]).collect()
    }

    fn to_unscaled(&self, y: &[f64]) -> Vec<f64> {
        let b = self.problem.bounds;
        let mut x: Vec<f64> = y.iter().enumerate().map(|(i, v)| v * self.scale[i % VARS]).collect();
        // Undo rounding from the scale round trip so bounds hold exactly.
        for v in x.chunks_exact_mut(VARS) {
            v[0] = v[0].clamp(0.0, b.d_max);
            let s = project_speeds([v[1], v[2], v[3]], [1.0; 3], b);
            v[1..].copy_from_slice(&s);
        }
        x
    }

    /// Euclidean projection in scaled space.
    fn project(&self, y: &mut [f64]) {
        let b = self.problem.bounds;
        let s = self.scale;
        let weights = [1.0 / (s[1] * s[1]), 1.0 / (s[2] * s[2]), 1.0 / (s[3] * s[3])];
        for v in y.chunks_exact_mut(VARS) {
            v[0] = v[0].clamp(0.0, b.d_max / s[0]);
            let speeds = project_speeds([v[1] * s[1], v[2] * s[2], v[3] * s[3]], weights, b);
            for k in 0..3 {
                v[k + 1] = speeds[k] / s[k + 1];
            }
        }
    }

    fn smoothed(&mut self, y: &[f64], width: f64, grad: &mut [f64]) -> f64 {
        let p = self.problem;
        let w = p.weights;
        let b = p.bounds;
        let n = p.len();
        for (i, v) in y.iter().enumerate() {
            self.x[i] = v * self.scale[i % VARS];
        }

        let mut value = 0.0;
        for k in 0..n {
            let v = &self.x[k * VARS..(k + 1) * VARS];
            let speeds = SpeedProfile::new(v[1], v[2], v[3]);
            // Problem::new checked every entry over the whole extension range.
            let (t, dt) = travel_time_with_gradient(p.config, p.entries[k], v[0], &speeds)
                .expect("entry geometry validated over [0, d_max]");
            self.times[k] = p.entry_times[k] + t;
            self.partials[k] = [dt.d, dt.v_l, dt.v_theta, dt.v_f];
            value += w.eff * v[0] + w.speed * b.speed_deficit(&speeds);
        }
        value += w.thru * self.times[n - 1];

        // Sensitivity of the objective to each FAF time.
        let time_coeff = &mut self.time_coeff;
        time_coeff.fill(0.0);
        time_coeff[n - 1] = w.thru;
        for k in 1..n {
            let gap = self.times[k - 1] + p.t_sep - self.times[k];
            value += w.safe * width * softplus(gap / width);
            let push = w.safe * sigmoid(gap / width);
            time_coeff[k - 1] += push;
            time_coeff[k] -= push;
        }

        let deficit_slope = |r: super::SpeedRange| if r.width() > 0.0 { -w.speed / r.width() } else { 0.0 };
        let direct = [w.eff, deficit_slope(b.v_l), deficit_slope(b.v_theta), deficit_slope(b.v_f)];
        for k in 0..n {
            for j in 0..VARS {
                grad[k * VARS + j] = (time_coeff[k] * self.partials[k][j] + direct[j]) * self.scale[j];
            }
        }
        value
    }
}
