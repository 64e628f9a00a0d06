mod common;

use proptest::prelude::*;
use trombone::simkit::{run_batch, run_batch_with, run_once, spearman, BatchConfig, RunMetrics};

fn quick_config() -> BatchConfig {
    BatchConfig { t_max: 1200.0, lambda_max: 30, ..BatchConfig::default() }
}

#[test]
fn parallel_and_sequential_reports_are_identical() {
    let cfg = quick_config();
    let a = run_batch_with(&cfg, 8, 77, true).unwrap();
    let b = run_batch_with(&cfg, 8, 77, false).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.runs.iter().map(|r| r.run).collect::<Vec<_>>(), (0..8).collect::<Vec<_>>());
}

#[test]
fn metrics_match_a_recount() {
    let cfg = quick_config();
    for seed in [1u64, 2, 3, 4] {
        let out = run_once(&cfg, seed).unwrap();
        let m = out.metrics;
        let plans = &out.solution.plans;
        assert_eq!(m.n_aircraft, plans.len());
        if plans.len() < 2 {
            continue;
        }
        let mut violating = 0;
        for w in plans.windows(2) {
            if w[0].faf_time + cfg.t_sep - w[1].faf_time > 0.1 {
                violating += 1;
            }
        }
        let pct = 100.0 * violating as f64 / (plans.len() - 1) as f64;
        assert!((m.violation_pct - pct).abs() < 1e-9);
        let span = plans.last().unwrap().faf_time - plans[0].faf_time;
        assert!((m.faf_landing_rate - 3600.0 * (plans.len() - 1) as f64 / span).abs() < 1e-9);
        let stretch: f64 = plans.iter().map(|p| p.d).sum();
        assert!((m.total_stretch - stretch).abs() < 1e-9);
        assert!((0.0..=100.0).contains(&m.violation_pct));
        assert!(m.total_stretch >= 0.0 && m.faf_landing_rate >= 0.0);
    }
}

#[test]
fn report_carries_capacity_and_seeds() {
    let cfg = BatchConfig { t_sep: 60.0, ..quick_config() };
    let r = run_batch(&cfg, 3, 5).unwrap();
    assert_eq!(r.capacity_threshold, 3600.0 / 60.0);
    assert_eq!(r.master_seed, 5);
    assert_eq!(r.config, cfg);
    let again = run_batch(&cfg, 3, 5).unwrap();
    assert_eq!(r, again);
    let other = run_batch(&cfg, 3, 6).unwrap();
    assert_ne!(r.runs[0].seed, other.runs[0].seed);
}

#[test]
fn empty_window_gives_zero_metrics() {
    let cfg = BatchConfig { t_max: 10.0, ..BatchConfig::default() };
    let out = run_once(&cfg, 3).unwrap();
    assert_eq!(out.metrics, RunMetrics::empty());
}

proptest! {
    #[test]
    fn spearman_matches_counted_ranks(pairs in prop::collection::vec((0u8..6, -50.0..50.0f64), 3..40)) {
        // Small integer values force plenty of ties.
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let want = common::spearman_by_counting(&a, &b);
        match spearman(&a, &b) {
            Some(got) => prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}"),
            None => prop_assert!(!want.is_finite()),
        }
    }
}
