//! Pure-binary form of the UCP: binary-encoded dispatch, binary slacks for
//! every inequality, and the fixed variable layout shared by the QUBO
//! compiler, the annealer and the tuner.
//!
//! Layout order: `u`, `z_on`, `z_off` (generator-major, then period),
//! dispatch bits `(g, t, k)`, scenario indicators `y_i`, then the slacks:
//! demand, reliability, ramp, capacity.
//!
//! Dispatch decodes as `p = P_min·u + sum_k 2^k b_k` with a common bit depth
//! `n` taken from the widest generator range. Slacks use the smallest width
//! covering `[0, s_max]`; their top bit carries `s_max - (2^(w-1) - 1)`
//! instead of `2^(w-1)`, so every bit pattern decodes inside the admissible
//! range. This matters for the two-sided ramp slack, which is stored with
//! an offset: `s = p_t - p_{t-1} + R_down` in `[0, R_up + R_down]`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{DemandSpec, UcpInstance};
use crate::sampler::ScenarioSet;
use crate::scenario_model::{objective, reliability_quota, Solution};

/// Integer scale applied to stochastic demand rows (two decimals).
pub const STOCHASTIC_SCALE: i64 = 100;

/// `ceil(log2(s_max + 1))`, the width of a binary counter reaching `s_max`.
pub fn bits_for_range(s_max: u64) -> u32 {
    u64::BITS - s_max.leading_zeros()
}

fn widest_range(instance: &UcpInstance) -> i64 {
    instance
        .generators
        .iter()
        .map(|g| g.p_max - g.p_min)
        .max()
        .unwrap_or(0)
}

/// Common number of dispatch bits per `(g, t)`.
pub fn gen_bits(instance: &UcpInstance) -> u32 {
    bits_for_range(widest_range(instance).max(0) as u64)
}

/// Slack coefficients covering exactly `[0, s_max]`.
pub fn slack_coefficients(s_max: i64) -> Vec<i64> {
    let width = bits_for_range(s_max.max(0) as u64);
    (0..width)
        .map(|k| {
            if k + 1 == width {
                s_max - ((1i64 << k) - 1)
            } else {
                1i64 << k
            }
        })
        .collect()
}

/// Bits of `value` in the bounded slack encoding for `s_max`.
fn slack_bits(value: i64, s_max: i64) -> Vec<u8> {
    let coeffs = slack_coefficients(s_max);
    let width = coeffs.len();
    let mut rest = value.clamp(0, s_max);
    let mut bits = vec![0u8; width];
    if width > 0 && rest > (1i64 << (width - 1)) - 1 {
        bits[width - 1] = 1;
        rest -= coeffs[width - 1];
    }
    for (k, bit) in bits.iter_mut().enumerate().take(width.saturating_sub(1)) {
        *bit = ((rest >> k) & 1) as u8;
    }
    bits
}

/// Widths and ranges of every encoded quantity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitWidthTable {
    pub n_gen: u32,
    /// Width of one demand slack (per period, or per scenario and period).
    pub n_demand: u32,
    pub n_ramp: Vec<u32>,
    pub n_capacity: Vec<u32>,
    pub n_reliability: Option<u32>,
    /// 1 for fixed demand, 100 for scenario demand.
    pub scale: i64,
    pub demand_slack_max: i64,
    pub ramp_slack_max: Vec<i64>,
    pub capacity_slack_max: Vec<i64>,
    pub reliability_slack_max: Option<i64>,
    pub n_scenarios: Option<usize>,
}

impl BitWidthTable {
    /// `3GT + GTn + N + N_demand + N_reliability + N_ramp + N_capacity`
    pub fn total(&self, horizon: usize) -> usize {
        let g = self.n_ramp.len();
        let n = self.n_scenarios.unwrap_or(0);
        let demand_rows = self.n_scenarios.unwrap_or(1);
        3 * g * horizon
            + g * horizon * self.n_gen as usize
            + n
            + demand_rows * horizon * self.n_demand as usize
            + self.n_reliability.unwrap_or(0) as usize
            + horizon * self.n_ramp.iter().map(|w| *w as usize).sum::<usize>()
            + horizon * self.n_capacity.iter().map(|w| *w as usize).sum::<usize>()
    }
}

/// Widths for the deterministic model (`n_scenarios = None`) or the scenario
/// model with `n_scenarios` rows at reliability `p_level`.
pub fn bitwidth_table(instance: &UcpInstance, n_scenarios: Option<usize>, p_level: Option<f64>) -> Result<BitWidthTable> {
    let n_gen = gen_bits(instance);
    let encoded_max: i64 = instance
        .generators
        .iter()
        .map(|g| g.p_min + (1i64 << n_gen) - 1)
        .sum();
    let (scale, reliability) = match (n_scenarios, p_level) {
        (None, None) => (1, None),
        (Some(0), _) => return Err(Error::NoScenarios),
        (Some(n), Some(p)) => {
            crate::check_p_level(p)?;
            (STOCHASTIC_SCALE, Some((n - reliability_quota(n, p)) as i64))
        }
        _ => {
            return Err(Error::InvalidParameter(
                "scenario count and reliability level must be given together".into(),
            ))
        }
    };
    let demand_slack_max = scale * encoded_max;
    let ramp_slack_max: Vec<i64> = instance.generators.iter().map(|g| g.r_up + g.r_down).collect();
    let capacity_slack_max: Vec<i64> = instance.generators.iter().map(|g| g.p_max).collect();
    let width = |v: &i64| bits_for_range((*v).max(0) as u64);
    Ok(BitWidthTable {
        n_gen,
        n_demand: width(&demand_slack_max),
        n_ramp: ramp_slack_max.iter().map(width).collect(),
        n_capacity: capacity_slack_max.iter().map(width).collect(),
        n_reliability: reliability.as_ref().map(width),
        scale,
        demand_slack_max,
        ramp_slack_max,
        capacity_slack_max,
        reliability_slack_max: reliability,
        n_scenarios,
    })
}

/// Number of binary variables of the compiled model.
pub fn total_binary_variables(instance: &UcpInstance, n_scenarios: Option<usize>, p_level: Option<f64>) -> Result<usize> {
    Ok(bitwidth_table(instance, n_scenarios, p_level)?.total(instance.horizon))
}

/// One named block of the layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

/// Index map of every binary variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub generators: usize,
    pub horizon: usize,
    pub n_gen: usize,
    pub scenarios: usize,
    pub stochastic: bool,
    u_start: usize,
    z_on_start: usize,
    z_off_start: usize,
    p_start: usize,
    y_start: usize,
    demand_start: usize,
    demand_width: usize,
    reliability: Range<usize>,
    ramp: Vec<Range<usize>>,
    capacity: Vec<Range<usize>>,
    pub total: usize,
}

impl VariableLayout {
    pub fn new(instance: &UcpInstance, widths: &BitWidthTable) -> VariableLayout {
        let g_count = instance.num_generators();
        let horizon = instance.horizon;
        let gt = g_count * horizon;
        let n_gen = widths.n_gen as usize;
        let scenarios = widths.n_scenarios.unwrap_or(0);
        let demand_rows = widths.n_scenarios.unwrap_or(1);
        let u_start = 0;
        let z_on_start = gt;
        let z_off_start = 2 * gt;
        let p_start = 3 * gt;
        let y_start = p_start + gt * n_gen;
        let demand_start = y_start + scenarios;
        let demand_width = widths.n_demand as usize;
        let mut cursor = demand_start + demand_rows * horizon * demand_width;
        let rel_width = widths.n_reliability.unwrap_or(0) as usize;
        let reliability = cursor..cursor + rel_width;
        cursor += rel_width;
        let mut ramp = Vec::with_capacity(gt);
        for w in &widths.n_ramp {
            for _ in 0..horizon {
                ramp.push(cursor..cursor + *w as usize);
                cursor += *w as usize;
            }
        }
        let mut capacity = Vec::with_capacity(gt);
        for w in &widths.n_capacity {
            for _ in 0..horizon {
                capacity.push(cursor..cursor + *w as usize);
                cursor += *w as usize;
            }
        }
        VariableLayout {
            generators: g_count,
            horizon,
            n_gen,
            scenarios,
            stochastic: widths.n_scenarios.is_some(),
            u_start,
            z_on_start,
            z_off_start,
            p_start,
            y_start,
            demand_start,
            demand_width,
            reliability,
            ramp,
            capacity,
            total: cursor,
        }
    }

    pub fn u(&self, g: usize, t: usize) -> usize {
        self.u_start + g * self.horizon + t
    }

    pub fn z_on(&self, g: usize, t: usize) -> usize {
        self.z_on_start + g * self.horizon + t
    }

    pub fn z_off(&self, g: usize, t: usize) -> usize {
        self.z_off_start + g * self.horizon + t
    }

    pub fn p_bit(&self, g: usize, t: usize, k: usize) -> usize {
        self.p_start + (g * self.horizon + t) * self.n_gen + k
    }

    pub fn y(&self, i: usize) -> usize {
        self.y_start + i
    }

    /// Demand slack of `row` (scenario index, or 0 for fixed demand).
    pub fn demand_slack(&self, row: usize, t: usize) -> Range<usize> {
        let start = self.demand_start + (row * self.horizon + t) * self.demand_width;
        start..start + self.demand_width
    }

    pub fn reliability_slack(&self) -> Range<usize> {
        self.reliability.clone()
    }

    pub fn ramp_slack(&self, g: usize, t: usize) -> Range<usize> {
        self.ramp[g * self.horizon + t].clone()
    }

    pub fn capacity_slack(&self, g: usize, t: usize) -> Range<usize> {
        self.capacity[g * self.horizon + t].clone()
    }

    /// Name-to-range manifest (1-based generator, period and scenario labels).
    pub fn entries(&self) -> Vec<LayoutEntry> {
        let mut out = Vec::new();
        let mut push = |name: String, start: usize, len: usize| {
            if len > 0 {
                out.push(LayoutEntry { name, start, len });
            }
        };
        for (label, start) in [("u", self.u_start), ("z_on", self.z_on_start), ("z_off", self.z_off_start)] {
            for g in 0..self.generators {
                for t in 0..self.horizon {
                    push(format!("{label}[{},{}]", g + 1, t + 1), start + g * self.horizon + t, 1);
                }
            }
        }
        for g in 0..self.generators {
            for t in 0..self.horizon {
                push(format!("p[{},{}]", g + 1, t + 1), self.p_bit(g, t, 0), self.n_gen);
            }
        }
        for i in 0..self.scenarios {
            push(format!("y[{}]", i + 1), self.y(i), 1);
        }
        let rows = if self.stochastic { self.scenarios } else { 1 };
        for row in 0..rows {
            for t in 0..self.horizon {
                let r = self.demand_slack(row, t);
                let name = if self.stochastic {
                    format!("s_demand[{},{}]", row + 1, t + 1)
                } else {
                    format!("s_demand[{}]", t + 1)
                };
                push(name, r.start, r.len());
            }
        }
        push("s_reliability".into(), self.reliability.start, self.reliability.len());
        for (label, ranges) in [("s_ramp", &self.ramp), ("s_capacity", &self.capacity)] {
            for g in 0..self.generators {
                for t in 0..self.horizon {
                    let r = &ranges[g * self.horizon + t];
                    push(format!("{label}[{},{}]", g + 1, t + 1), r.start, r.len());
                }
            }
        }
        out
    }
}

/// An assignment of every binary variable, rendered as ASCII `0`/`1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct BitString(pub Vec<u8>);

impl BitString {
    pub fn zeros(len: usize) -> BitString {
        BitString(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<BitString> {
        s.trim()
            .chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse {
                    line: 1,
                    message: format!("invalid bit `{other}` at position {i}"),
                }),
            })
            .collect::<Result<Vec<u8>>>()
            .map(BitString)
    }
}

impl From<BitString> for String {
    fn from(b: BitString) -> String {
        b.to_string()
    }
}

impl TryFrom<String> for BitString {
    type Error = Error;

    fn try_from(s: String) -> Result<BitString> {
        s.parse()
    }
}

/// Everything needed to move between schedules and bitstrings for one
/// model: the instance, its bit widths, the layout and the integer demand
/// rows (`ceil(d_t)` for fixed demand, `round(100·D_t^i)` for scenarios).
#[derive(Clone, Debug, PartialEq)]
pub struct Formulation {
    pub instance: UcpInstance,
    pub widths: BitWidthTable,
    pub layout: VariableLayout,
    pub demand_rows: Vec<Vec<i64>>,
    /// Scenario set rounded to the encoded precision.
    pub scenarios: Option<ScenarioSet>,
    pub p_level: Option<f64>,
    pub quota: Option<usize>,
}

impl Formulation {
    pub fn deterministic(instance: &UcpInstance) -> Result<Formulation> {
        let d = instance.fixed_demand()?;
        let widths = bitwidth_table(instance, None, None)?;
        let layout = VariableLayout::new(instance, &widths);
        // sum p >= d  <=>  sum p >= ceil(d) for integer dispatch.
        let row = d.iter().map(|v| (v - 1e-9).ceil().max(0.0) as i64).collect();
        Ok(Formulation {
            instance: instance.clone(),
            widths,
            layout,
            demand_rows: vec![row],
            scenarios: None,
            p_level: None,
            quota: None,
        })
    }

    pub fn stochastic(instance: &UcpInstance, scenarios: &ScenarioSet, p_level: f64) -> Result<Formulation> {
        if !matches!(instance.demand, DemandSpec::Gaussian { .. }) {
            return Err(Error::WrongDemandVariant {
                expected: "gaussian",
                found: instance.demand.kind(),
            });
        }
        if scenarios.horizon() != instance.horizon {
            return Err(Error::Shape("scenario horizon differs from the instance".into()));
        }
        let widths = bitwidth_table(instance, Some(scenarios.n()), Some(p_level))?;
        let layout = VariableLayout::new(instance, &widths);
        let demand_rows = scenarios
            .demands
            .iter()
            .map(|row| row.iter().map(|v| (v * STOCHASTIC_SCALE as f64).round() as i64).collect())
            .collect();
        Ok(Formulation {
            instance: instance.clone(),
            widths,
            layout,
            demand_rows,
            scenarios: Some(scenarios.rounded()),
            p_level: Some(p_level),
            quota: Some(reliability_quota(scenarios.n(), p_level)),
        })
    }

    pub fn is_stochastic(&self) -> bool {
        self.scenarios.is_some()
    }

    pub fn num_vars(&self) -> usize {
        self.layout.total
    }

    /// Dispatch of `(g, t)` as integer terms over the bits.
    pub fn dispatch_terms(&self, g: usize, t: usize) -> Vec<(usize, i64)> {
        let gen = &self.instance.generators[g];
        let mut terms = Vec::with_capacity(self.layout.n_gen + 1);
        if gen.p_min != 0 {
            terms.push((self.layout.u(g, t), gen.p_min));
        }
        for k in 0..self.layout.n_gen {
            terms.push((self.layout.p_bit(g, t, k), 1i64 << k));
        }
        terms
    }

    /// Slack bits of `range` with their bounded coefficients for `s_max`.
    pub fn slack_terms(range: Range<usize>, s_max: i64) -> Vec<(usize, i64)> {
        range.zip(slack_coefficients(s_max)).collect()
    }

    fn dispatch_value(&self, bits: &[u8], g: usize, t: usize) -> i64 {
        self.dispatch_terms(g, t)
            .iter()
            .map(|(i, c)| i64::from(bits[*i]) * c)
            .sum()
    }

    /// Reads the schedule out of a bitstring. Slack bits are ignored.
    pub fn decode(&self, bits: &BitString) -> Result<Solution> {
        let bits = bits.as_slice();
        if bits.len() != self.num_vars() {
            return Err(Error::Length {
                expected: self.num_vars(),
                found: bits.len(),
            });
        }
        let l = &self.layout;
        let grid = |f: &dyn Fn(usize, usize) -> usize| -> Vec<Vec<u8>> {
            (0..l.generators)
                .map(|g| (0..l.horizon).map(|t| bits[f(g, t)]).collect())
                .collect()
        };
        let mut solution = Solution {
            u: grid(&|g, t| l.u(g, t)),
            z_on: grid(&|g, t| l.z_on(g, t)),
            z_off: grid(&|g, t| l.z_off(g, t)),
            p: (0..l.generators)
                .map(|g| (0..l.horizon).map(|t| self.dispatch_value(bits, g, t) as f64).collect())
                .collect(),
            y: self
                .is_stochastic()
                .then(|| (0..l.scenarios).map(|i| bits[l.y(i)]).collect()),
            objective: 0.0,
        };
        solution.objective = objective(&self.instance, &solution)?;
        Ok(solution)
    }

    /// Writes a schedule with integer dispatch into a bitstring. Slack bits
    /// are recomputed from the constraint residuals, clamped to their range.
    pub fn encode(&self, solution: &Solution) -> Result<BitString> {
        let inst = &self.instance;
        let l = &self.layout;
        // Shapes are validated by objective().
        objective(inst, solution)?;
        let mut bits = vec![0u8; self.num_vars()];
        let mut dispatch = vec![vec![0i64; l.horizon]; l.generators];
        let top = (1i64 << l.n_gen) - 1;
        for (g, gen) in inst.generators.iter().enumerate() {
            for t in 0..l.horizon {
                let u = solution.u[g][t];
                bits[l.u(g, t)] = u;
                bits[l.z_on(g, t)] = solution.z_on[g][t];
                bits[l.z_off(g, t)] = solution.z_off[g][t];
                let p = solution.p[g][t];
                let rest = p - (gen.p_min * i64::from(u)) as f64;
                if (rest - rest.round()).abs() > 1e-9 || rest.round() < 0.0 || rest.round() as i64 > top {
                    return Err(Error::NotRepresentable {
                        generator: g + 1,
                        period: t + 1,
                        value: p,
                        bits: l.n_gen as u32,
                    });
                }
                let rest = rest.round() as i64;
                for k in 0..l.n_gen {
                    bits[l.p_bit(g, t, k)] = ((rest >> k) & 1) as u8;
                }
                dispatch[g][t] = gen.p_min * i64::from(u) + rest;
            }
        }

        if self.is_stochastic() {
            let y = solution.y.as_ref().ok_or(Error::Missing("scenario indicators y"))?;
            if y.len() != l.scenarios {
                return Err(Error::Shape(format!("y must have {} entries", l.scenarios)));
            }
            for (i, v) in y.iter().enumerate() {
                bits[l.y(i)] = *v;
            }
        }

        let w = &self.widths;
        let supply: Vec<i64> = (0..l.horizon).map(|t| dispatch.iter().map(|r| r[t]).sum()).collect();
        let mut put = |range: Range<usize>, value: i64, s_max: i64| {
            for (i, b) in range.zip(slack_bits(value, s_max)) {
                bits[i] = b;
            }
        };
        if self.is_stochastic() {
            let y = solution.y.as_ref().ok_or(Error::Missing("scenario indicators y"))?;
            for (i, row) in self.demand_rows.iter().enumerate() {
                for t in 0..l.horizon {
                    let residual = w.scale * supply[t] - row[t] * i64::from(y[i]);
                    put(l.demand_slack(i, t), residual, w.demand_slack_max);
                }
            }
            let kept = y.iter().map(|v| i64::from(*v)).sum::<i64>();
            let quota = self.quota.unwrap_or(0) as i64;
            put(
                l.reliability_slack(),
                kept - quota,
                w.reliability_slack_max.unwrap_or(0),
            );
        } else {
            for t in 0..l.horizon {
                put(l.demand_slack(0, t), supply[t] - self.demand_rows[0][t], w.demand_slack_max);
            }
        }
        for (g, _) in inst.generators.iter().enumerate() {
            let mut prev = inst.initial.p0[g];
            for t in 0..l.horizon {
                let gen = &inst.generators[g];
                put(l.ramp_slack(g, t), dispatch[g][t] - prev + gen.r_down, w.ramp_slack_max[g]);
                put(l.capacity_slack(g, t), gen.p_max - dispatch[g][t], w.capacity_slack_max[g]);
                prev = dispatch[g][t];
            }
        }
        Ok(BitString(bits))
    }
}
