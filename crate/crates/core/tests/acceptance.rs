//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trombone::cli::files::{parse_json, ResultsFile, ScenarioFile};
use trombone::cli::{self, svg};
use trombone::geometry::{path_geometry, travel_time, travel_time_with_gradient, GeometryConfig, Point, SpeedProfile};
use trombone::nlp::{fcfs_sequence, greedy_fcfs_solve, solve, Bounds, Solution, SolverParams, Weights};
use trombone::simkit::{phase_summary, run_batch, run_batch_with, BatchConfig, BatchReport};
use trombone::traffic::{build_scenario, generate_stream, Scenario, DEFAULT_T_SEP};

use common::{circle_oracle, CircleTable, ORACLE_POINTS};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

const GATES: [&str; 4] = ["DALAS", "HUSKY", "LOGEN", "TIROE"];

fn rates(values: [f64; 4]) -> BTreeMap<String, f64> {
    GATES.iter().map(|g| g.to_string()).zip(values).collect()
}

fn solve_pair(cfg: &GeometryConfig, s: &Scenario, b: &Bounds, w: &Weights) -> (Solution, Solution) {
    let seq = fcfs_sequence(cfg, s, b).unwrap();
    let greedy = greedy_fcfs_solve(cfg, s, &seq, b, w).unwrap();
    let best = solve(cfg, s, &seq, b, w, &SolverParams::default()).unwrap();
    (greedy, best)
}

fn geometry_oracle() -> Outcome {
    let start = Instant::now();
    let cfg = GeometryConfig::default();
    let table = CircleTable::new(ORACLE_POINTS);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut tangent_err, mut theta_err, mut arc_err, mut invariant_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let gate = GATES[rng.random_range(0..4)];
        let e = cfg.gates[gate];
        let d = rng.random_range(0.0..=cfg.d_max);
        let path = path_geometry(&cfg, e, d).map_err(|err| err.to_string())?;
        let oracle = circle_oracle(&table, cfg.faf, cfg.turn_radius, e, d);
        let (t, c) = (path.tangent_point, path.turn_center);
        tangent_err = tangent_err.max(t.distance(oracle.tangent));
        let dt = (path.theta - oracle.theta).abs();
        theta_err = theta_err.max(dt.min(std::f64::consts::TAU - dt));
        arc_err = arc_err.max((path.d_theta - cfg.turn_radius * oracle.theta).abs());
        let orth = ((t - e).dot(t - c) / e.distance(c)).abs();
        let radius = (t.distance(c) - cfg.turn_radius).abs();
        invariant_err = invariant_err.max(orth).max(radius);
    }
    let elapsed = start.elapsed();
    ensure(tangent_err < 1e-3, || format!("tangent point off by {tangent_err:.3e} NM"))?;
    ensure(theta_err < 1e-4, || format!("arc angle off by {theta_err:.3e} rad"))?;
    ensure(arc_err < 1e-3, || format!("arc length off by {arc_err:.3e} NM"))?;
    ensure(invariant_err < 1e-9, || format!("tangency invariants off by {invariant_err:.3e}"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "1000 pairs, max errors: tangent {tangent_err:.1e} NM, angle {theta_err:.1e} rad, arc {arc_err:.1e} NM, invariants {invariant_err:.1e}"
    ))
}

fn gradient_check() -> Outcome {
    let cfg = GeometryConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let e = cfg.gates[GATES[rng.random_range(0..4)]];
        let d = rng.random_range(0.5..14.5);
        let vl = rng.random_range(185.0..235.0);
        let vt = rng.random_range(135.0..195.0);
        let vf = rng.random_range(135.0..155.0);
        let t = |d: f64, vl: f64, vt: f64, vf: f64| travel_time(&cfg, e, d, &SpeedProfile::new(vl, vt, vf)).unwrap();
        let (_, g) =
            travel_time_with_gradient(&cfg, e, d, &SpeedProfile::new(vl, vt, vf)).map_err(|e| e.to_string())?;
        let fd = [
            (t(d + h, vl, vt, vf) - t(d - h, vl, vt, vf)) / (2.0 * h),
            (t(d, vl + h, vt, vf) - t(d, vl - h, vt, vf)) / (2.0 * h),
            (t(d, vl, vt + h, vf) - t(d, vl, vt - h, vf)) / (2.0 * h),
            (t(d, vl, vt, vf + h) - t(d, vl, vt, vf - h)) / (2.0 * h),
        ];
        for (an, fd) in [g.d, g.v_l, g.v_theta, g.v_f].into_iter().zip(fd) {
            worst = worst.max((an - fd).abs() / fd.abs());
        }
    }
    ensure(worst < 1e-5, || format!("relative error {worst:.2e}"))?;
    Ok(format!("100 points, max relative error {worst:.1e}"))
}

fn worked_instance() -> Outcome {
    let cfg = GeometryConfig { faf: Point::new(0.0, 0.0), ..GeometryConfig::default() };
    let e = Point::new(-10.0, 12.0);
    let path = path_geometry(&cfg, e, 0.0).map_err(|e| e.to_string())?;
    let time = travel_time(&cfg, e, 0.0, &SpeedProfile::new(240.0, 200.0, 160.0)).map_err(|e| e.to_string())?;
    let oracle = circle_oracle(&CircleTable::new(ORACLE_POINTS), cfg.faf, cfg.turn_radius, e, 0.0);
    let theta = 3.2f64.atan2(2.4);
    ensure((path.d_l - 14.0).abs() < 1e-9, || format!("d_L = {}", path.d_l))?;
    ensure((path.theta - theta).abs() < 1e-9, || format!("theta = {}", path.theta))?;
    ensure((path.theta - 0.92730).abs() < 5e-6, || format!("theta = {}", path.theta))?;
    ensure((path.total_length - 15.85459).abs() < 5e-6, || format!("total = {}", path.total_length))?;
    ensure((time - 243.38).abs() < 5e-3, || format!("time = {time}"))?;
    ensure((oracle.d_l - 14.0).abs() < 1e-3, || format!("oracle d_L = {}", oracle.d_l))?;
    ensure((oracle.theta - theta).abs() < 1e-4, || format!("oracle theta = {}", oracle.theta))?;
    Ok(format!(
        "d_L {:.5} NM, theta {:.5} rad, total {:.5} NM, time {time:.2} s; oracle agrees",
        path.d_l, path.theta, path.total_length
    ))
}

fn traffic_floor() -> Outcome {
    let (t_sep, t_max) = (DEFAULT_T_SEP, 3600.0);
    let mut min_gap = f64::INFINITY;
    let mut first_gaps = Vec::new();
    for k in 0..10_000u64 {
        let rate = 1.0 + (k % 60) as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(k);
        let times = generate_stream(&mut rng, rate, t_sep, t_max);
        for w in times.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
        }
        if let Some(&first) = times.first() {
            min_gap = min_gap.min(first);
            // The first excess is exponential conditioned on the stream
            // fitting in the window; map it to Exp(1) through that CDF.
            let lambda = rate / 3600.0;
            let cdf = |x: f64| -(-lambda * x).exp_m1();
            let u = cdf(first - t_sep) / cdf(t_max - t_sep);
            first_gaps.push(-(-u).ln_1p());
        }
    }
    let (d, p) = common::ks_exponential(&first_gaps, 1.0);
    ensure(min_gap >= t_sep, || format!("gap of {min_gap} s"))?;
    ensure(p > 0.01, || format!("KS rejects exponential gaps: D = {d:.4}, p = {p:.4}"))?;
    Ok(format!("10000 streams, min gap {min_gap:.2} s, KS D = {d:.4}, p = {p:.3} on {} gaps", first_gaps.len()))
}

fn small_instances() -> Outcome {
    let cfg = GeometryConfig::default();
    let (b, w) = (Bounds::default(), Weights::default());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let total = Instant::now();
    let mut solver_time = Duration::ZERO;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let g1 = GATES[rng.random_range(0..4)];
        let g2 = GATES[rng.random_range(0..4)];
        let gap = if g1 == g2 { rng.random_range(66.0..150.0) } else { rng.random_range(0.0..90.0) };
        let s = common::scenario_from(&cfg, &[(g1, 0.0), (g2, gap)], DEFAULT_T_SEP);
        let start = Instant::now();
        let (_, best) = solve_pair(&cfg, &s, &b, &w);
        solver_time += start.elapsed();

        let lattice = |id: usize| {
            let a = &s.arrivals[id];
            let lengths = |d: f64| {
                let p = path_geometry(&cfg, a.entry_point, d).unwrap();
                [p.d_l, p.d_theta, p.d_final]
            };
            common::lattice(50, a.entry_time, &b, &w, &lengths)
        };
        let (first, second) = (lattice(best.sequence[0]), lattice(best.sequence[1]));
        let grid = common::two_aircraft_optimum(&first, &second, DEFAULT_T_SEP, &w);
        let rel = (best.objective.total - grid).abs() / grid.abs();
        worst = worst.max(rel);
        ensure(rel < 0.01, || format!("instance {i}: solver {} vs grid {grid}", best.objective.total))?;
    }
    let elapsed = total.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}"))?;
    Ok(format!("20 instances, max relative gap {worst:.2e}, solver time {solver_time:.1?} of {elapsed:.1?}"))
}

fn below_capacity_safety() -> Outcome {
    let cfg = GeometryConfig::default();
    let (b, w) = (Bounds::default(), Weights::default());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut aircraft = 0;
    for seed in 0..50u64 {
        let r = [(); 4].map(|_| rng.random_range(1.0..=7.5));
        let s = build_scenario(&cfg, &rates(r), DEFAULT_T_SEP, 3600.0, seed).map_err(|e| e.to_string())?;
        aircraft += s.len();
        let (_, best) = solve_pair(&cfg, &s, &b, &w);
        worst = worst.max(best.total_slack());
        ensure(best.total_slack() <= 0.1, || format!("seed {seed}: total slack {}", best.total_slack()))?;
    }
    Ok(format!("50 scenarios ({aircraft} aircraft), max total slack {worst:.2e} s"))
}

fn two_phase_monte_carlo() -> Outcome {
    let start = Instant::now();
    let report = run_batch(&BatchConfig::default(), 200, 2024).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let cap = 3600.0 / DEFAULT_T_SEP;
    let runs: Vec<_> = report.runs.iter().map(|r| &r.metrics).filter(|m| m.n_aircraft >= 2).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let violations = |keep: &dyn Fn(f64) -> bool| -> Vec<f64> {
        runs.iter().filter(|m| keep(m.faf_landing_rate)).map(|m| m.violation_pct).collect()
    };
    let margin = violations(&|r| r < 0.9 * cap);
    let above = violations(&|r| r > cap);
    let correlation = |limit: f64| {
        let group: Vec<_> = runs.iter().filter(|m| m.faf_landing_rate < limit).collect();
        let rate: Vec<f64> = group.iter().map(|m| m.faf_landing_rate).collect();
        let stretch: Vec<f64> = group.iter().map(|m| m.total_stretch).collect();
        (group.len(), common::spearman_by_counting(&rate, &stretch))
    };
    let (below_n, rho) = correlation(cap);
    let (_, rho_margin) = correlation(0.9 * cap);

    let summary = phase_summary(&report, 0.9);
    ensure((summary.margin_mean_violation_pct - mean(&margin)).abs() < 1e-9, || "phase summary disagrees".into())?;
    ensure(summary.below_stretch_spearman.is_some_and(|s| (s - rho).abs() < 1e-9), || "spearman disagrees".into())?;

    ensure(!margin.is_empty() && !above.is_empty(), || {
        format!("{} below margin, {} above", margin.len(), above.len())
    })?;
    ensure(mean(&margin) < 0.5, || format!("mean violation below 0.9 capacity is {:.3}%", mean(&margin)))?;
    ensure(mean(&above) > 0.0, || "no violations above capacity".into())?;
    ensure(rho > 0.7, || format!("stretch/rate Spearman below capacity is {rho:.3}"))?;
    ensure(elapsed < Duration::from_secs(20 * 60), || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "{} runs below 0.9 cap: mean violation {:.3}%; {} above cap: {:.1}%; Spearman below cap ({below_n} runs) {rho:.3} \
         (below 0.9 cap: {rho_margin:.3}); {elapsed:.1?}",
        margin.len(),
        mean(&margin),
        above.len(),
        mean(&above)
    ))
}

fn dominance_and_determinism() -> Outcome {
    let cfg = GeometryConfig::default();
    let (b, w) = (Bounds::default(), Weights::default());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut improved = 0;
    for seed in 0..100u64 {
        let r = [(); 4].map(|_| rng.random_range(1..=60) as f64);
        let s = build_scenario(&cfg, &rates(r), DEFAULT_T_SEP, 1800.0, seed).map_err(|e| e.to_string())?;
        if s.is_empty() {
            continue;
        }
        let (greedy, best) = solve_pair(&cfg, &s, &b, &w);
        ensure(best.objective.total <= greedy.objective.total, || {
            format!("seed {seed}: {} worse than greedy {}", best.objective.total, greedy.objective.total)
        })?;
        if best.objective.total < greedy.objective.total {
            improved += 1;
        }
        if seed % 20 == 0 {
            let again = solve_pair(&cfg, &s, &b, &w).1;
            ensure(serde_json::to_string(&best).unwrap() == serde_json::to_string(&again).unwrap(), || {
                format!("seed {seed}: solutions differ")
            })?;
        }
    }
    let batch = BatchConfig { t_max: 1800.0, ..BatchConfig::default() };
    let json = |r: BatchReport| serde_json::to_string(&r).unwrap();
    let a = json(run_batch_with(&batch, 6, 99, true).map_err(|e| e.to_string())?);
    let b = json(run_batch_with(&batch, 6, 99, true).map_err(|e| e.to_string())?);
    let c = json(run_batch_with(&batch, 6, 99, false).map_err(|e| e.to_string())?);
    ensure(a == b && a == c, || "batch reports differ".into())?;
    Ok(format!("100 scenarios never worse than greedy ({improved} strictly better); repeated runs byte-identical"))
}

fn one_hour_scenario() -> Outcome {
    let cfg = GeometryConfig::default();
    let (b, w) = (Bounds::default(), Weights::default());
    let start = Instant::now();
    let s = build_scenario(&cfg, &rates([21.0; 4]), DEFAULT_T_SEP, 3600.0, 9).map_err(|e| e.to_string())?;
    let (_, best) = solve_pair(&cfg, &s, &b, &w);
    let elapsed = start.elapsed();
    ensure((50..=70).contains(&s.len()), || format!("scenario has {} aircraft", s.len()))?;
    ensure(best.plans.len() == s.len(), || "missing plans".into())?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:.1?}"))?;
    Ok(format!("{} aircraft solved in {elapsed:.2?} ({})", s.len(), best.status.as_str()))
}

fn round_trip<T>(value: &T) -> Result<(), String>
where
    T: serde::Serialize + serde::de::DeserializeOwned + PartialEq,
{
    let text = serde_json::to_string_pretty(value).unwrap();
    let back: T = parse_json(&text)?;
    ensure(&back == value, || "value changed".into())?;
    ensure(serde_json::to_string_pretty(&back).unwrap() == text, || "text changed".into())
}

fn well_formed_svg(text: &str) -> Result<(), String> {
    let doc = roxmltree::Document::parse(text).map_err(|e| e.to_string())?;
    let root = doc.root_element();
    ensure(root.tag_name().name() == "svg", || "root is not <svg>".into())?;
    ensure(root.tag_name().namespace() == Some("http://www.w3.org/2000/svg"), || "missing namespace".into())?;
    ensure(root.attribute("version") == Some("1.1"), || "not SVG 1.1".into())
}

fn files_and_plots() -> Outcome {
    let mut file: ScenarioFile = parse_json(r#"{"schema_version": 1, "traffic": {"t_max": 1800, "seed": 10}}"#)?;
    let scenario = cli::generate(&mut file, None).map_err(|e| e.to_string())?;
    round_trip(&file).map_err(|e| format!("scenario file: {e}"))?;
    let results: ResultsFile = cli::solve(file.clone(), true).map_err(|e| e.to_string())?;
    round_trip(&results).map_err(|e| format!("results file: {e}"))?;
    let report = run_batch(&BatchConfig { t_max: 900.0, ..BatchConfig::default() }, 4, 3).map_err(|e| e.to_string())?;
    round_trip(&report).map_err(|e| format!("batch report: {e}"))?;

    let mid = results.raw.solution.plans.get(results.raw.solution.plans.len() / 2).map_or(0.0, |p| p.faf_time);
    let (snapshot, in_span) = svg::snapshot(&file.geometry, &scenario, &results.raw.solution, mid);
    ensure(in_span, || "snapshot time outside plan span".into())?;
    well_formed_svg(&snapshot).map_err(|e| format!("snapshot: {e}"))?;
    well_formed_svg(&svg::scatter(&report)).map_err(|e| format!("scatter: {e}"))?;
    Ok(format!(
        "scenario ({} aircraft), results and batch report round-trip exactly; snapshot and scatter SVG parse",
        scenario.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("geometry oracle equivalence", geometry_oracle),
        ("gradient check", gradient_check),
        ("worked geometry instance", worked_instance),
        ("traffic floor and exponential gaps", traffic_floor),
        ("small-instance optimality", small_instances),
        ("below-capacity safety", below_capacity_safety),
        ("two-phase Monte Carlo", two_phase_monte_carlo),
        ("solver dominance and determinism", dominance_and_determinism),
        ("one-hour scenario runtime", one_hour_scenario),
        ("file round-trips and SVG output", files_and_plots),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] AC{} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] AC{} {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
