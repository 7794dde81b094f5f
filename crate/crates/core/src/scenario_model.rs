//! The scenario-approximated chance-constrained UCP: schedules, costs and
//! constraint checks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{DemandSpec, UcpInstance};
use crate::sampler::ScenarioSet;

/// Default tolerance on continuous constraints (MW).
pub const DEFAULT_TOL: f64 = 1e-6;

/// A candidate schedule. Binary arrays are indexed `[generator][period]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub u: Vec<Vec<u8>>,
    pub z_on: Vec<Vec<u8>>,
    pub z_off: Vec<Vec<u8>>,
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<u8>>,
    pub objective: f64,
}

impl Solution {
    /// Everything off, zero output, zero cost.
    pub fn all_off(generators: usize, horizon: usize) -> Solution {
        Solution {
            u: vec![vec![0; horizon]; generators],
            z_on: vec![vec![0; horizon]; generators],
            z_off: vec![vec![0; horizon]; generators],
            p: vec![vec![0.0; horizon]; generators],
            y: None,
            objective: 0.0,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Solution> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Solution> {
        Solution::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

fn check_shape(instance: &UcpInstance, s: &Solution) -> Result<()> {
    let g_count = instance.num_generators();
    let horizon = instance.horizon;
    let binary = |name: &str, m: &Vec<Vec<u8>>| -> Result<()> {
        if m.len() != g_count || m.iter().any(|r| r.len() != horizon) {
            return Err(Error::Shape(format!("`{name}` must be {g_count}x{horizon}")));
        }
        if m.iter().flatten().any(|v| *v > 1) {
            return Err(Error::Shape(format!("`{name}` must be binary")));
        }
        Ok(())
    };
    binary("u", &s.u)?;
    binary("z_on", &s.z_on)?;
    binary("z_off", &s.z_off)?;
    if s.p.len() != g_count || s.p.iter().any(|r| r.len() != horizon) {
        return Err(Error::Shape(format!("`p` must be {g_count}x{horizon}")));
    }
    if s.p.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Shape("`p` must be finite".into()));
    }
    if let Some(y) = &s.y {
        if y.iter().any(|v| *v > 1) {
            return Err(Error::Shape("`y` must be binary".into()));
        }
    }
    Ok(())
}

/// Total cost: start-up, shut-down, fixed and marginal production costs.
pub fn objective(instance: &UcpInstance, solution: &Solution) -> Result<f64> {
    check_shape(instance, solution)?;
    let mut cost = 0.0;
    for (g, gen) in instance.generators.iter().enumerate() {
        for t in 0..instance.horizon {
            cost += f64::from(solution.z_on[g][t]) * gen.c_startup
                + f64::from(solution.z_off[g][t]) * gen.c_shutdown
                + f64::from(solution.u[g][t]) * gen.c_fixed
                + gen.b * solution.p[g][t];
        }
    }
    Ok(cost)
}

/// Minimum number of satisfied scenarios, `ceil(p·n)`, capped at `n`.
///
/// A `1e-9` guard absorbs representation error in `p·n` (for example
/// `0.9 · 1000`), so exact products are not pushed to the next integer.
pub fn reliability_quota(n: usize, p_level: f64) -> usize {
    let raw = (p_level * n as f64 - 1e-9).ceil();
    (raw.max(0.0) as usize).min(n)
}

/// Outcome of one constraint family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupCheck {
    pub pass: bool,
    /// Number of violated constraint instances.
    pub violations: usize,
    /// Largest violation magnitude (MW, or scenarios for reliability).
    pub max_violation: f64,
}

impl GroupCheck {
    fn new() -> Self {
        GroupCheck {
            pass: true,
            violations: 0,
            max_violation: 0.0,
        }
    }

    fn record(&mut self, amount: f64) {
        self.pass = false;
        self.violations += 1;
        self.max_violation = self.max_violation.max(amount);
    }
}

/// Per-family feasibility of a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `u_t - u_{t-1} = z_on - z_off`
    pub logic: GroupCheck,
    /// `z_on + z_off <= 1`
    pub exclusivity: GroupCheck,
    pub capacity: GroupCheck,
    pub ramp: GroupCheck,
    pub demand: GroupCheck,
    pub reliability: GroupCheck,
    pub joint: bool,
}

impl FeasibilityReport {
    pub fn groups(&self) -> [(&'static str, &GroupCheck); 6] {
        [
            ("logic", &self.logic),
            ("exclusivity", &self.exclusivity),
            ("capacity", &self.capacity),
            ("ramp", &self.ramp),
            ("demand", &self.demand),
            ("reliability", &self.reliability),
        ]
    }
}

/// Evaluates every constraint family of the (scenario) UCP.
///
/// For Gaussian instances `scenarios` and `solution.y` are required and the
/// demand family checks `sum_g p[g][t] >= D[i][t]·y[i] - tol`; reliability
/// requires at least [`reliability_quota`] satisfied indicators. Fixed
/// instances check `sum_g p[g][t] >= d[t] - tol` and pass reliability
/// vacuously.
pub fn check_feasible(
    instance: &UcpInstance,
    scenarios: Option<&ScenarioSet>,
    p_level: f64,
    solution: &Solution,
    tol: f64,
) -> Result<FeasibilityReport> {
    check_shape(instance, solution)?;
    let horizon = instance.horizon;
    let mut logic = GroupCheck::new();
    let mut exclusivity = GroupCheck::new();
    let mut capacity = GroupCheck::new();
    let mut ramp = GroupCheck::new();
    let mut demand = GroupCheck::new();
    let mut reliability = GroupCheck::new();

    for (g, gen) in instance.generators.iter().enumerate() {
        let mut prev_u = i32::from(instance.initial.u0[g]);
        let mut prev_p = instance.initial.p0[g] as f64;
        for t in 0..horizon {
            let u = i32::from(solution.u[g][t]);
            let on = i32::from(solution.z_on[g][t]);
            let off = i32::from(solution.z_off[g][t]);
            let residual = (u - prev_u) - (on - off);
            if residual != 0 {
                logic.record(f64::from(residual.abs()));
            }
            if on + off > 1 {
                exclusivity.record(1.0);
            }
            let p = solution.p[g][t];
            let lo = gen.p_min as f64 * f64::from(u);
            let hi = gen.p_max as f64 * f64::from(u);
            if p < lo - tol {
                capacity.record(lo - p);
            } else if p > hi + tol {
                capacity.record(p - hi);
            }
            let delta = p - prev_p;
            if delta > gen.r_up as f64 + tol {
                ramp.record(delta - gen.r_up as f64);
            } else if delta < -(gen.r_down as f64) - tol {
                ramp.record(-gen.r_down as f64 - delta);
            }
            prev_u = u;
            prev_p = p;
        }
    }

    let supply: Vec<f64> = (0..horizon)
        .map(|t| solution.p.iter().map(|row| row[t]).sum())
        .collect();
    match &instance.demand {
        DemandSpec::Fixed { d } => {
            for (s, need) in supply.iter().zip(d) {
                if *s < need - tol {
                    demand.record(need - s);
                }
            }
        }
        DemandSpec::Gaussian { .. } => {
            let scenarios = scenarios.ok_or(Error::Missing("scenario set"))?;
            let y = solution.y.as_ref().ok_or(Error::Missing("scenario indicators y"))?;
            if y.len() != scenarios.n() || scenarios.horizon() != horizon {
                return Err(Error::Shape(format!(
                    "y has {} entries for {} scenarios of {} periods",
                    y.len(),
                    scenarios.n(),
                    scenarios.horizon()
                )));
            }
            for (row, yi) in scenarios.demands.iter().zip(y) {
                if *yi == 0 {
                    continue;
                }
                for (s, need) in supply.iter().zip(row) {
                    if *s < need - tol {
                        demand.record(need - s);
                    }
                }
            }
            let quota = reliability_quota(scenarios.n(), p_level);
            let kept = y.iter().filter(|v| **v == 1).count();
            if kept < quota {
                reliability.record((quota - kept) as f64);
            }
        }
    }

    let joint = [&logic, &exclusivity, &capacity, &ramp, &demand, &reliability]
        .iter()
        .all(|c| c.pass);
    Ok(FeasibilityReport {
        logic,
        exclusivity,
        capacity,
        ramp,
        demand,
        reliability,
        joint,
    })
}
