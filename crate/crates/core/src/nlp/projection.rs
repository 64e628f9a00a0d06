//! Projection onto the per-aircraft speed polytope
//! `{lo <= v <= hi, v_l >= v_theta >= v_f}`.
//!
//! Pool adjacent violators with each pooled block taking its weighted mean
//! clipped to the intersection of its members' bounds. This is exact for
//! separable convex terms, and with bounds that decrease along the chain
//! two blocks are only ever pooled when their bound ranges overlap.

use super::Bounds;

/// Weighted least-squares fit of a non-increasing sequence with per-element
/// bounds. `lower` and `upper` must be non-increasing and `lower <= upper`.
pub fn antitonic_regression(values: &[f64], weights: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    debug_assert!(values.len() == weights.len() && values.len() == lower.len() && values.len() == upper.len());
    struct Block {
        weighted_sum: f64,
        weight: f64,
        lo: f64,
        hi: f64,
        len: usize,
    }
    impl Block {
        fn value(&self) -> f64 {
            (self.weighted_sum / self.weight).clamp(self.lo, self.hi)
        }
    }
    let mut blocks: Vec<Block> = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        blocks.push(Block {
            weighted_sum: weights[i] * values[i],
            weight: weights[i],
            lo: lower[i],
            hi: upper[i],
            len: 1,
        });
        while blocks.len() > 1 && blocks[blocks.len() - 2].value() < blocks[blocks.len() - 1].value() {
            let last = blocks.pop().expect("two blocks");
            let prev = blocks.last_mut().expect("two blocks");
            prev.weighted_sum += last.weighted_sum;
            prev.weight += last.weight;
            prev.lo = prev.lo.max(last.lo);
            prev.hi = prev.hi.min(last.hi);
            prev.len += last.len;
        }
    }
    blocks.iter().flat_map(|b| std::iter::repeat_n(b.value(), b.len)).collect()
}

/// Nearest flyable speed triple `[v_l, v_theta, v_f]` in the metric
/// `sum w_i (x_i - v_i)^2`.
pub fn project_speeds(v: [f64; 3], weights: [f64; 3], bounds: &Bounds) -> [f64; 3] {
    let ranges = [bounds.v_l, bounds.v_theta, bounds.v_f];
    let fit = antitonic_regression(&v, &weights, &ranges.map(|r| r.min), &ranges.map(|r| r.max));
    [fit[0], fit[1], fit[2]]
}
