use crate::geometry::{GeometryConfig, Point, SpeedProfile};
use crate::traffic::Scenario;

use super::{check_sequence, evaluate_objective, separation_slacks, AircraftPlan, Bounds, NlpError, Result};
use super::{Solution, SolverStatus, Weights};

/// Variables per aircraft: `[d, v_l, v_theta, v_f]`.
pub(crate) const VARS: usize = 4;

/// The scenario laid out in landing order, ready for evaluation.
pub(crate) struct Problem<'a> {
    pub config: &'a GeometryConfig,
    pub bounds: &'a Bounds,
    pub weights: &'a Weights,
    pub t_sep: f64,
    pub sequence: Vec<usize>,
    pub entries: Vec<Point>,
    pub entry_times: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(
        config: &'a GeometryConfig,
        scenario: &Scenario,
        sequence: &[usize],
        bounds: &'a Bounds,
        weights: &'a Weights,
    ) -> Result<Self> {
        check_sequence(scenario, sequence)?;
        bounds.validate()?;
        weights.validate()?;
        if bounds.d_max > config.d_max {
            return Err(NlpError::InvalidBounds(format!(
                "d_max {} exceeds the validated geometry range {}",
                bounds.d_max, config.d_max
            )));
        }
        let arrivals = &scenario.arrivals;
        let mut checked: Vec<Point> = Vec::new();
        for a in arrivals {
            if checked.contains(&a.entry_point) {
                continue;
            }
            config
                .check_entry(a.entry_point, bounds.d_max)
                .map_err(|source| NlpError::Geometry { arrival_id: a.id, source })?;
            checked.push(a.entry_point);
        }
        Ok(Self {
            config,
            bounds,
            weights,
            t_sep: scenario.t_sep,
            sequence: sequence.to_vec(),
            entries: sequence.iter().map(|&id| arrivals[id].entry_point).collect(),
            entry_times: sequence.iter().map(|&id| arrivals[id].entry_time).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn plan(&self, rank: usize, d: f64, speeds: SpeedProfile) -> Result<AircraftPlan> {
        AircraftPlan::new(self.config, self.sequence[rank], self.entries[rank], self.entry_times[rank], d, speeds)
    }

    /// Builds plans, slacks and the exact objective from a flat variable vector.
    pub fn solution(&self, x: &[f64], status: SolverStatus, iterations: usize) -> Result<Solution> {
        let plans = x
            .chunks_exact(VARS)
            .enumerate()
            .map(|(rank, v)| self.plan(rank, v[0], SpeedProfile::new(v[1], v[2], v[3])))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.solution_from_plans(plans, status, iterations))
    }

    pub fn solution_from_plans(&self, plans: Vec<AircraftPlan>, status: SolverStatus, iterations: usize) -> Solution {
        let times: Vec<f64> = plans.iter().map(|p| p.faf_time).collect();
        let slacks = separation_slacks(&times, self.t_sep);
        let objective = evaluate_objective(&plans, self.t_sep, self.bounds, self.weights);
        Solution { sequence: self.sequence.clone(), plans, slacks, objective, status, iterations }
    }
}
