use serde::{Deserialize, Serialize};

use super::{AircraftPlan, Bounds, Weights};

/// Weighted objective and its four unweighted parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveBreakdown {
    pub total: f64,
    /// Sum of separation slacks, seconds.
    pub safety: f64,
    /// FAF time of the last aircraft in the sequence, seconds.
    pub throughput: f64,
    /// Sum of Baseleg extensions, NM.
    pub efficiency: f64,
    /// Sum of normalized speed deficits over all legs.
    pub speed: f64,
}

impl ObjectiveBreakdown {
    pub fn from_parts(safety: f64, throughput: f64, efficiency: f64, speed: f64, w: &Weights) -> Self {
        let mut out = Self { total: 0.0, safety, throughput, efficiency, speed };
        out.total = out.recompose(w);
        out
    }

    pub fn recompose(&self, w: &Weights) -> f64 {
        w.safe * self.safety + w.thru * self.throughput + w.eff * self.efficiency + w.speed * self.speed
    }
}

/// `max(0, t[k-1] + t_sep - t[k])` for each consecutive pair in landing order.
pub fn separation_slacks(times: &[f64], t_sep: f64) -> Vec<f64> {
    times.windows(2).map(|w| (w[0] + t_sep - w[1]).max(0.0)).collect()
}

/// Exact objective of plans given in landing order.
pub fn evaluate_objective(
    plans: &[AircraftPlan],
    t_sep: f64,
    bounds: &Bounds,
    weights: &Weights,
) -> ObjectiveBreakdown {
    let times: Vec<f64> = plans.iter().map(|p| p.faf_time).collect();
    let safety = separation_slacks(&times, t_sep).iter().sum();
    let throughput = times.last().copied().unwrap_or(0.0);
    let efficiency = plans.iter().map(|p| p.d).sum();
    let speed = plans.iter().map(|p| bounds.speed_deficit(&p.speeds)).sum();
    ObjectiveBreakdown::from_parts(safety, throughput, efficiency, speed, weights)
}
