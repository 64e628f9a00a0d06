//! Shifted-Poisson arrival flows at the feeder gates.
//!
//! Each gate emits an independent renewal process whose gaps are a fixed
//! separation floor plus an exponential draw. Streams are merged and sorted
//! by entry time to give the global first-come index.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryConfig, Point, SECONDS_PER_HOUR};

/// Minimum landing separation, seconds.
pub const DEFAULT_T_SEP: f64 = 66.0;
/// Simulation window, seconds.
pub const DEFAULT_T_MAX: f64 = 3600.0;
pub const DEFAULT_LAMBDA_MIN: u32 = 1;
pub const DEFAULT_LAMBDA_MAX: u32 = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("invalid rate range [{min}, {max}]: need 1 <= min <= max")]
    InvalidRateRange { min: u32, max: u32 },
    #[error("rate given for unknown gate {0}")]
    UnknownGate(String),
    #[error("invalid traffic parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, TrafficError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arrival {
    /// Global first-come index, 0-based, in entry-time order.
    pub id: usize,
    pub gate: String,
    pub entry_point: Point,
    /// Terminal-area entry time, seconds.
    pub entry_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub arrivals: Vec<Arrival>,
    /// Aircraft per hour, per gate.
    pub rates: BTreeMap<String, f64>,
    pub t_sep: f64,
    pub t_max: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn stable_hash(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Seed of a gate's private substream. Adding or removing a gate leaves the
/// other gates' streams untouched.
pub fn gate_seed(master: u64, gate: &str) -> u64 {
    master ^ stable_hash(gate)
}

/// One independent integer rate per gate, each value in `[min, max]` equally likely.
pub fn sample_rates<R: Rng + ?Sized>(
    rng: &mut R,
    gates: &GeometryConfig,
    lambda_min: u32,
    lambda_max: u32,
) -> Result<BTreeMap<String, f64>> {
    if lambda_min < 1 || lambda_min > lambda_max {
        return Err(TrafficError::InvalidRateRange { min: lambda_min, max: lambda_max });
    }
    Ok(gates.gates.keys().map(|g| (g.clone(), f64::from(rng.random_range(lambda_min..=lambda_max)))).collect())
}

/// Inverse-CDF exponential draw: `u` in (0, 1], rate in aircraft per hour,
/// result in seconds.
pub fn exponential_seconds(u: f64, rate_per_hour: f64) -> f64 {
    -u.ln() / rate_per_hour * SECONDS_PER_HOUR
}

/// Entry times of one gate. The recursion starts from a virtual aircraft at
/// t = 0 that is not emitted. Times equal to `t_max` are kept.
pub fn generate_stream<R: Rng + ?Sized>(rng: &mut R, rate: f64, t_sep: f64, t_max: f64) -> Vec<f64> {
    let mut times = Vec::new();
    if !(rate > 0.0 && rate.is_finite()) {
        return times;
    }
    let mut t = 0.0;
    loop {
        // random::<f64>() is in [0, 1); flip it so ln never sees zero.
        let u = 1.0 - rng.random::<f64>();
        let next = t + t_sep + exponential_seconds(u, rate);
        if next > t_max {
            break;
        }
        times.push(next);
        t = next;
    }
    times
}

pub fn build_scenario(
    config: &GeometryConfig,
    rates: &BTreeMap<String, f64>,
    t_sep: f64,
    t_max: f64,
    seed: u64,
) -> Result<Scenario> {
    if !(t_sep.is_finite() && t_sep >= 0.0) {
        return Err(TrafficError::InvalidParameter(format!("t_sep must be non-negative, got {t_sep}")));
    }
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(TrafficError::InvalidParameter(format!("t_max must be non-negative, got {t_max}")));
    }
    if let Some(unknown) = rates.keys().find(|g| !config.gates.contains_key(*g)) {
        return Err(TrafficError::UnknownGate(unknown.clone()));
    }
    if let Some((g, r)) = rates.iter().find(|(_, r)| !(r.is_finite() && **r >= 0.0)) {
        return Err(TrafficError::InvalidParameter(format!("rate for {g} must be non-negative, got {r}")));
    }

    let mut arrivals: Vec<Arrival> = Vec::new();
    for (gate, &point) in &config.gates {
        let rate = rates.get(gate).copied().unwrap_or(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(gate_seed(seed, gate));
        arrivals.extend(generate_stream(&mut rng, rate, t_sep, t_max).into_iter().map(|tau| Arrival {
            id: 0,
            gate: gate.clone(),
            entry_point: point,
            entry_time: tau,
        }));
    }
    arrivals.sort_by(|a, b| a.entry_time.total_cmp(&b.entry_time).then_with(|| a.gate.cmp(&b.gate)));
    for (i, a) in arrivals.iter_mut().enumerate() {
        a.id = i;
    }

    Ok(Scenario { arrivals, rates: rates.clone(), t_sep, t_max, seed })
}
