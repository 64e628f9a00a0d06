//! Independent reference computations shared by the integration tests and
//! the acceptance suite. Nothing here calls into the closed-form geometry.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use trombone::geometry::{GeometryConfig, Point};
use trombone::nlp::{Bounds, Weights};
use trombone::traffic::{Arrival, Scenario};

pub const ORACLE_POINTS: usize = 1_000_000;

/// Unit vectors of an evenly discretized circle, stored column-wise.
pub struct CircleTable {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl CircleTable {
    pub fn new(points: usize) -> Self {
        let (cos, sin) = (0..points)
            .map(|k| {
                let phi = TAU * k as f64 / points as f64;
                (phi.cos(), phi.sin())
            })
            .unzip();
        Self { cos, sin }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleTurn {
    pub center: Point,
    pub tangent: Point,
    /// Arc flown from the tangent point to the bottom/top of the circle.
    pub theta: f64,
    pub d_l: f64,
}

/// Brute-force turn: the circle is tangent to the final course at `d` NM
/// before the FAF, on the entry's side. The tangent point is the grid point
/// with the smallest tangency residual among those where the straight
/// inbound leg continues in the direction the circle is flown. That
/// direction is read off the exit: the aircraft leaves the circle heading
/// +x. The arc is then measured in that direction up to the exit point.
pub fn circle_oracle(table: &CircleTable, faf: Point, r: f64, entry: Point, d: f64) -> OracleTurn {
    let side = if entry.y > faf.y { 1.0 } else { -1.0 };
    let center = Point::new(faf.x - d, faf.y + side * r);
    let exit = Point::new(faf.x - d, faf.y);
    // Sign of (exit - center) x (+x heading): +1 counterclockwise.
    let radial = exit - center;
    let orientation = (radial.x * 0.0 - radial.y * 1.0).signum();

    let (cx, cy) = (center.x - entry.x, center.y - entry.y);
    let mut best = f64::INFINITY;
    let mut best_k = usize::MAX;
    for k in 0..table.cos.len() {
        let (c, s) = (table.cos[k], table.sin[k]);
        // (P - E) . (P - C) / r with P = C + r u.
        let residual = (c * cx + s * cy + r).abs();
        // (P - E) . perp(u): the inbound direction against the flown tangent.
        let heading = orientation * (cy * c - cx * s);
        if heading > 0.0 && residual < best {
            best = residual;
            best_k = k;
        }
    }
    assert!(best_k != usize::MAX, "no heading-consistent tangent");
    let u = Point::new(table.cos[best_k], table.sin[best_k]);
    let tangent = center + u * r;

    let start = u.y.atan2(u.x);
    let end = radial.y.atan2(radial.x);
    let theta = (orientation * (end - start)).rem_euclid(TAU);
    OracleTurn { center, tangent, theta, d_l: tangent.distance(entry) }
}

/// Kolmogorov distribution tail, `P(K > x)`.
pub fn kolmogorov_tail(x: f64) -> f64 {
    if x < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of `samples` against Exp(`rate`). Returns (D, p).
pub fn ks_exponential(samples: &[f64], rate: f64) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        d = d.max((i as f64 + 1.0) / n - cdf).max(cdf - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    (d, kolmogorov_tail((sqrt_n + 0.12 + 0.11 / sqrt_n) * d))
}

/// Spearman correlation as the Pearson correlation of mid-ranks, each rank
/// counted directly: values below plus half of the other equal values.
pub fn spearman_by_counting(a: &[f64], b: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&x| {
                let below = v.iter().filter(|&&y| y < x).count() as f64;
                let equal = v.iter().filter(|&&y| y == x).count() as f64;
                below + (equal - 1.0) / 2.0
            })
            .collect()
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Scenario from (gate, entry time) pairs, already in entry order.
pub fn scenario_from(config: &GeometryConfig, arrivals: &[(&str, f64)], t_sep: f64) -> Scenario {
    Scenario {
        arrivals: arrivals
            .iter()
            .enumerate()
            .map(|(id, (gate, tau))| Arrival {
                id,
                gate: gate.to_string(),
                entry_point: config.gates[*gate],
                entry_time: *tau,
            })
            .collect(),
        rates: BTreeMap::new(),
        t_sep,
        t_max: 3600.0,
        seed: 0,
    }
}

/// Per-aircraft lattice values: FAF time and the efficiency plus speed cost.
pub struct LatticePoint {
    pub time: f64,
    pub cost: f64,
}

/// Every flyable lattice point of one aircraft: `n` values per variable,
/// evenly spaced over the bounds, keeping only ordered speed triples.
/// Path lengths per extension come from `lengths(d) -> [d_l, d_theta, d_final]`.
pub fn lattice(
    n: usize,
    entry_time: f64,
    bounds: &Bounds,
    weights: &Weights,
    lengths: &dyn Fn(f64) -> [f64; 3],
) -> Vec<LatticePoint> {
    let grid = |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect() };
    let ds = grid(0.0, bounds.d_max);
    let vls = grid(bounds.v_l.min, bounds.v_l.max);
    let vts = grid(bounds.v_theta.min, bounds.v_theta.max);
    let vfs = grid(bounds.v_f.min, bounds.v_f.max);
    let deficit = |v: f64, lo: f64, hi: f64| if hi > lo { (hi - v) / (hi - lo) } else { 0.0 };
    let mut out = Vec::new();
    for &d in &ds {
        let [a, b, c] = lengths(d);
        for &vl in &vls {
            let cl = deficit(vl, bounds.v_l.min, bounds.v_l.max);
            for &vt in vts.iter().filter(|&&v| v <= vl) {
                let ct = deficit(vt, bounds.v_theta.min, bounds.v_theta.max);
                for &vf in vfs.iter().filter(|&&v| v <= vt) {
                    let cf = deficit(vf, bounds.v_f.min, bounds.v_f.max);
                    out.push(LatticePoint {
                        time: entry_time + 3600.0 * (a / vl + b / vt + c / vf),
                        cost: weights.eff * d + weights.speed * (cl + ct + cf),
                    });
                }
            }
        }
    }
    out
}

/// Exact minimum of
/// `w_safe * max(0, t1 + t_sep - t2) + w_thru * t2 + cost1 + cost2`
/// over the product of two lattices, with aircraft 1 landing first.
pub fn two_aircraft_optimum(first: &[LatticePoint], second: &[LatticePoint], t_sep: f64, weights: &Weights) -> f64 {
    let mut sorted: Vec<(f64, f64)> = first.iter().map(|p| (p.time, p.cost)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    // prefix_cost[i]: cheapest among the i earliest; suffix[i]: min of
    // w_safe * t1 + cost1 over index i and later.
    let mut prefix_cost = vec![f64::INFINITY; n + 1];
    for i in 0..n {
        prefix_cost[i + 1] = prefix_cost[i].min(sorted[i].1);
    }
    let mut suffix = vec![f64::INFINITY; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1].min(weights.safe * sorted[i].0 + sorted[i].1);
    }
    let mut best = f64::INFINITY;
    for p in second {
        let limit = p.time - t_sep;
        let split = sorted.partition_point(|q| q.0 <= limit);
        let separated = prefix_cost[split];
        let violating = suffix[split] + weights.safe * (t_sep - p.time);
        let value = weights.thru * p.time + p.cost + separated.min(violating);
        best = best.min(value);
    }
    best
}
