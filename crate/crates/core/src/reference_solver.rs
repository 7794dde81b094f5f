//! Exact desk-scale solvers for the deterministic and scenario UCP.
//!
//! Commitment is enumerated exhaustively (switching is derived from it), and
//! each commitment pattern gets its dispatch from a small LP. For the scenario
//! problem the satisfied subset only matters through its per-period demand
//! envelope, so the exact solver enumerates drop sets, deduplicates the
//! resulting envelopes and solves a deterministic problem per envelope.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{InitialState, UcpInstance};
use crate::sampler::ScenarioSet;
use crate::scenario_model::{objective, reliability_quota, Solution};

/// Largest `G·T` handled by exhaustive commitment enumeration.
pub const MAX_PATTERN_BITS: usize = 20;

const TIE_TOL: f64 = 1e-9;

/// Limits of the exact scenario solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactConfig {
    pub max_scenarios: usize,
    /// Upper bound on enumerated drop sets.
    pub max_subsets: u64,
    pub time_budget: Duration,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            max_scenarios: 12,
            max_subsets: 1_000_000,
            time_budget: Duration::from_secs(60),
        }
    }
}

/// Demand floors for a fixed commitment pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeProblem {
    pub envelope: Vec<f64>,
    pub committed: Vec<Vec<u8>>,
}

/// Optimal dispatch of a commitment pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct Dispatch {
    pub p: Vec<Vec<f64>>,
    /// `sum b_g p[g][t]`
    pub cost: f64,
}

/// Cheapest switching consistent with `u`: start-ups where a unit turns on,
/// shut-downs where it turns off.
pub fn derive_switching(u: &[Vec<u8>], initial: &InitialState) -> (Vec<Vec<u8>>, Vec<Vec<u8>>) {
    let mut z_on = Vec::with_capacity(u.len());
    let mut z_off = Vec::with_capacity(u.len());
    for (g, row) in u.iter().enumerate() {
        let mut prev = initial.u0[g];
        let mut on = Vec::with_capacity(row.len());
        let mut off = Vec::with_capacity(row.len());
        for &cur in row {
            on.push(u8::from(cur > prev));
            off.push(u8::from(cur < prev));
            prev = cur;
        }
        z_on.push(on);
        z_off.push(off);
    }
    (z_on, z_off)
}

/// Minimum marginal-cost dispatch for a fixed commitment.
///
/// Minimizes `sum b_g p[g][t]` under the capacity window `[P_min u, P_max u]`,
/// ramp limits starting from the initial output, and `sum_g p[g][t] >= E[t]`.
/// Among optimal dispatches the lexicographically smallest one (order
/// `[g][t]`) is returned. Values within `1e-5` of the 0.01 MW grid are snapped to it.
pub fn dispatch_lp(instance: &UcpInstance, committed: &[Vec<u8>], envelope: &[f64]) -> Result<Dispatch> {
    if envelope.len() != instance.horizon {
        return Err(Error::Shape(format!(
            "envelope has {} periods, horizon is {}",
            envelope.len(),
            instance.horizon
        )));
    }
    let lp = DispatchLp::new(instance, committed, envelope)?;
    let (p, cost) = lp.solve(None)?;
    let p = lp.lexicographic(p, cost);
    let cost = marginal_cost(instance, &p);
    Ok(Dispatch { p, cost })
}

fn marginal_cost(instance: &UcpInstance, p: &[Vec<f64>]) -> f64 {
    instance
        .generators
        .iter()
        .zip(p)
        .map(|(gen, row)| gen.b * row.iter().sum::<f64>())
        .sum()
}

struct DispatchLp<'a> {
    instance: &'a UcpInstance,
    committed: &'a [Vec<u8>],
    envelope: &'a [f64],
}

impl<'a> DispatchLp<'a> {
    fn new(instance: &'a UcpInstance, committed: &'a [Vec<u8>], envelope: &'a [f64]) -> Result<Self> {
        let horizon = instance.horizon;
        if committed.len() != instance.num_generators() || committed.iter().any(|r| r.len() != horizon) {
            return Err(Error::Shape("commitment pattern has the wrong shape".into()));
        }
        for (t, need) in envelope.iter().enumerate() {
            let cap: i64 = instance
                .generators
                .iter()
                .zip(committed)
                .map(|(g, u)| g.p_max * i64::from(u[t]))
                .sum();
            if (cap as f64) < need - 1e-9 {
                return Err(Error::Infeasible(format!(
                    "period {}: committed capacity {cap} MW below demand {need} MW",
                    t + 1
                )));
            }
        }
        // Ramps between two uncommitted periods are constants.
        for (g, gen) in instance.generators.iter().enumerate() {
            let mut prev = Some(instance.initial.p0[g]);
            for t in 0..horizon {
                let cur = (committed[g][t] == 0).then_some(0);
                if let (Some(a), Some(b)) = (prev, cur) {
                    if b - a > gen.r_up || a - b > gen.r_down {
                        return Err(Error::Infeasible(format!(
                            "generator {} cannot ramp from {a} to {b} MW at period {}",
                            g + 1,
                            t + 1
                        )));
                    }
                }
                prev = cur;
            }
        }
        Ok(DispatchLp {
            instance,
            committed,
            envelope,
        })
    }

    /// Solves the LP. With `lex = Some((cost_cap, fixed, target))` the
    /// objective becomes `min p[target]` subject to the original cost staying
    /// below `cost_cap` and the listed variables pinned.
    fn solve(&self, lex: Option<(f64, &[(usize, usize, f64)], (usize, usize))>) -> Result<(Vec<Vec<f64>>, f64)> {
        let inst = self.instance;
        let horizon = inst.horizon;
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let mut vars = vec![vec![None; horizon]; inst.num_generators()];
        for (g, gen) in inst.generators.iter().enumerate() {
            for t in 0..horizon {
                if self.committed[g][t] == 0 {
                    continue;
                }
                let mut lo = gen.p_min as f64;
                let mut hi = gen.p_max as f64;
                if let Some((_, fixed, _)) = lex {
                    if let Some(&(_, _, v)) = fixed.iter().find(|(fg, ft, _)| *fg == g && *ft == t) {
                        lo = (v - 1e-9).max(lo);
                        hi = (v + 1e-9).min(hi).max(lo);
                    }
                }
                let obj = match lex {
                    None => gen.b,
                    Some((_, _, target)) => f64::from(u8::from(target == (g, t))),
                };
                vars[g][t] = Some(problem.add_var(obj, (lo, hi)));
            }
        }
        for (g, gen) in inst.generators.iter().enumerate() {
            for t in 0..horizon {
                // p_t - p_{t-1} within [-r_down, r_up]
                let mut terms = Vec::with_capacity(2);
                let mut constant = 0.0;
                if let Some(v) = vars[g][t] {
                    terms.push((v, 1.0));
                }
                if t == 0 {
                    constant -= inst.initial.p0[g] as f64;
                } else if let Some(v) = vars[g][t - 1] {
                    terms.push((v, -1.0));
                }
                if terms.is_empty() {
                    continue;
                }
                problem.add_constraint(terms.as_slice(), ComparisonOp::Le, gen.r_up as f64 - constant);
                problem.add_constraint(terms.as_slice(), ComparisonOp::Ge, -(gen.r_down as f64) - constant);
            }
        }
        for (t, need) in self.envelope.iter().enumerate() {
            let terms: Vec<_> = vars.iter().filter_map(|row| row[t]).map(|v| (v, 1.0)).collect();
            if terms.is_empty() {
                continue;
            }
            problem.add_constraint(terms.as_slice(), ComparisonOp::Ge, *need);
        }
        if let Some((cap, _, _)) = lex {
            let terms: Vec<_> = inst
                .generators
                .iter()
                .enumerate()
                .flat_map(|(g, gen)| vars[g].iter().flatten().map(move |v| (*v, gen.b)))
                .collect();
            if !terms.is_empty() {
                problem.add_constraint(terms.as_slice(), ComparisonOp::Le, cap);
            }
        }

        let outcome = problem.solve().map_err(|e| match e {
            microlp::Error::Infeasible => Error::Infeasible("no dispatch meets the envelope".into()),
            other => Error::Lp(other.to_string()),
        })?;
        let solution = outcome
            .into_solution()
            .map_err(|_| Error::Lp("LP solve interrupted".into()))?;
        let p: Vec<Vec<f64>> = vars
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| v.map_or(0.0, |v| snap(solution.var_value(v))))
                    .collect()
            })
            .collect();
        let cost = marginal_cost(inst, &p);
        Ok((p, cost))
    }

    /// Walks the committed variables in `[g][t]` order, minimizing each in
    /// turn while holding the optimal cost and all earlier choices.
    fn lexicographic(&self, start: Vec<Vec<f64>>, cost: f64) -> Vec<Vec<f64>> {
        let cap = cost + 1e-11 * cost.abs().max(1.0);
        let mut fixed: Vec<(usize, usize, f64)> = Vec::new();
        let mut current = start.clone();
        for g in 0..self.instance.num_generators() {
            for t in 0..self.instance.horizon {
                if self.committed[g][t] == 0 {
                    continue;
                }
                match self.solve(Some((cap, &fixed, (g, t)))) {
                    Ok((p, _)) => {
                        fixed.push((g, t, p[g][t]));
                        current = p;
                    }
                    // Numerical trouble: keep the plain optimum.
                    Err(_) => return start,
                }
            }
        }
        current
    }
}

/// Rounds to the 0.01 MW grid that every LP input lives on when the
/// simplex result is within `1e-5` of it.
fn snap(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    if (v - r).abs() < 1e-5 {
        r + 0.0
    } else {
        v
    }
}

/// Commitment pattern from the bits of `mask`; the most significant of the
/// `G·T` bits is `u[0][0]`, so numeric order of masks is lexicographic order
/// of the flattened pattern.
fn pattern(mask: u32, generators: usize, horizon: usize) -> Vec<Vec<u8>> {
    let bits = generators * horizon;
    (0..generators)
        .map(|g| {
            (0..horizon)
                .map(|t| ((mask >> (bits - 1 - (g * horizon + t))) & 1) as u8)
                .collect()
        })
        .collect()
}

/// Dispatch cost lower bound ignoring ramps: per period, committed minimum
/// outputs plus the cheapest top-up. `None` if capacity is short.
fn merit_order_bound(instance: &UcpInstance, u: &[Vec<u8>], envelope: &[f64]) -> Option<f64> {
    let mut order: Vec<usize> = (0..instance.num_generators()).collect();
    order.sort_by(|a, b| instance.generators[*a].b.total_cmp(&instance.generators[*b].b));
    let mut total = 0.0;
    for (t, need) in envelope.iter().enumerate() {
        let mut supplied = 0.0;
        for (g, gen) in instance.generators.iter().enumerate() {
            if u[g][t] == 1 {
                supplied += gen.p_min as f64;
                total += gen.b * gen.p_min as f64;
            }
        }
        let mut short = need - supplied;
        for &g in &order {
            if short <= 0.0 {
                break;
            }
            if u[g][t] == 1 {
                let gen = &instance.generators[g];
                let take = short.min((gen.p_max - gen.p_min) as f64);
                total += gen.b * take;
                short -= take;
            }
        }
        if short > 1e-9 {
            return None;
        }
    }
    Some(total)
}

fn commitment_cost(instance: &UcpInstance, u: &[Vec<u8>], z_on: &[Vec<u8>], z_off: &[Vec<u8>]) -> f64 {
    let mut cost = 0.0;
    for (g, gen) in instance.generators.iter().enumerate() {
        for t in 0..instance.horizon {
            cost += f64::from(z_on[g][t]) * gen.c_startup
                + f64::from(z_off[g][t]) * gen.c_shutdown
                + f64::from(u[g][t]) * gen.c_fixed;
        }
    }
    cost
}

/// Global optimum of the deterministic problem with demand floors `envelope`.
///
/// Patterns are visited in order of a valid lower bound and the scan stops
/// once the bound exceeds the incumbent, so the result is the exhaustive
/// optimum. Ties within `1e-9` go to the lexicographically smallest pattern.
pub fn solve_envelope(instance: &UcpInstance, envelope: &[f64]) -> Result<Solution> {
    let g_count = instance.num_generators();
    let horizon = instance.horizon;
    let bits = g_count * horizon;
    if bits > MAX_PATTERN_BITS {
        return Err(Error::ExactLimit(format!(
            "commitment enumeration supports G·T <= {MAX_PATTERN_BITS}, got {bits}"
        )));
    }
    if envelope.len() != horizon {
        return Err(Error::Shape("envelope length must equal the horizon".into()));
    }
    let capacity = instance.total_capacity() as f64;
    if let Some(t) = envelope.iter().position(|e| *e > capacity + 1e-9) {
        return Err(Error::Infeasible(format!(
            "period {} demand {} MW exceeds total capacity {capacity} MW",
            t + 1,
            envelope[t]
        )));
    }

    let mut candidates: Vec<(f64, u32, f64)> = (0..(1u32 << bits))
        .filter_map(|mask| {
            let u = pattern(mask, g_count, horizon);
            let lb = merit_order_bound(instance, &u, envelope)?;
            let (on, off) = derive_switching(&u, &instance.initial);
            let fixed = commitment_cost(instance, &u, &on, &off);
            Some((fixed + lb, mask, fixed))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut best: Option<(f64, u32)> = None;
    for (lb, mask, fixed) in candidates {
        if let Some((best_cost, _)) = best {
            if lb > best_cost + TIE_TOL {
                break;
            }
        }
        let u = pattern(mask, g_count, horizon);
        let lp = match DispatchLp::new(instance, &u, envelope) {
            Ok(lp) => lp,
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        let cost = match lp.solve(None) {
            Ok((_, c)) => fixed + c,
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        let better = match best {
            None => true,
            Some((b, m)) => cost < b - TIE_TOL || (cost <= b + TIE_TOL && mask < m),
        };
        if better {
            best = Some((cost, mask));
        }
    }
    let (_, mask) = best.ok_or_else(|| Error::Infeasible("no commitment pattern admits a dispatch".into()))?;
    let u = pattern(mask, g_count, horizon);
    let dispatch = dispatch_lp(instance, &u, envelope)?;
    let (z_on, z_off) = derive_switching(&u, &instance.initial);
    let mut solution = Solution {
        u,
        z_on,
        z_off,
        p: dispatch.p,
        y: None,
        objective: 0.0,
    };
    solution.objective = objective(instance, &solution)?;
    Ok(solution)
}

/// Proven optimum of a fixed-demand instance.
pub fn solve_deterministic(instance: &UcpInstance) -> Result<Solution> {
    let d = instance.fixed_demand()?.to_vec();
    solve_envelope(instance, &d)
}

fn check_scenarios(instance: &UcpInstance, scenarios: &ScenarioSet, p_level: f64) -> Result<()> {
    crate::check_p_level(p_level)?;
    if scenarios.horizon() != instance.horizon {
        return Err(Error::Shape(format!(
            "scenarios have {} periods, instance has {}",
            scenarios.horizon(),
            instance.horizon
        )));
    }
    Ok(())
}

/// Scenarios whose value in some period is at least the `(drop+1)`-th
/// largest of that period. Any other scenario is dominated in every period
/// by a scenario that survives every drop set of size `drop`, so it never
/// shapes the envelope.
pub fn drop_candidates(scenarios: &ScenarioSet, drop: usize) -> Vec<usize> {
    if drop == 0 {
        return Vec::new();
    }
    let n = scenarios.n();
    let mut keep = vec![false; n];
    for t in 0..scenarios.horizon() {
        let mut col: Vec<f64> = scenarios.demands.iter().map(|r| r[t]).collect();
        col.sort_by(|a, b| b.total_cmp(a));
        let threshold = col[drop.min(n - 1)];
        for (i, row) in scenarios.demands.iter().enumerate() {
            if row[t] >= threshold {
                keep[i] = true;
            }
        }
    }
    (0..n).filter(|i| keep[*i]).collect()
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Lexicographic k-subsets of `items`.
pub(crate) fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > items.len() {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|i| items[*i]).collect());
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + items.len() - k) else {
            break;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// Indicators of every scenario covered by `envelope`.
fn covered(scenarios: &ScenarioSet, envelope: &[f64]) -> Vec<u8> {
    scenarios
        .demands
        .iter()
        .map(|row| u8::from(row.iter().zip(envelope).all(|(d, e)| d <= e)))
        .collect()
}

fn with_indicators(mut solution: Solution, scenarios: &ScenarioSet, envelope: &[f64]) -> Solution {
    solution.y = Some(covered(scenarios, envelope));
    solution
}

/// Proven optimum of the scenario problem for small scenario sets.
pub fn solve_stochastic_exact(
    instance: &UcpInstance,
    scenarios: &ScenarioSet,
    p_level: f64,
    config: &ExactConfig,
) -> Result<Solution> {
    check_scenarios(instance, scenarios, p_level)?;
    let n = scenarios.n();
    if n > config.max_scenarios {
        return Err(Error::ExactLimit(format!(
            "{n} scenarios exceed the exact limit of {}",
            config.max_scenarios
        )));
    }
    let drop = n - reliability_quota(n, p_level);
    let candidates = drop_candidates(scenarios, drop);
    let size = drop.min(candidates.len());
    let count = binomial(candidates.len(), size);
    if count > config.max_subsets {
        return Err(Error::ExactLimit(format!(
            "{count} drop sets exceed the budget of {}",
            config.max_subsets
        )));
    }

    let mut seen = HashSet::new();
    let mut envelopes = Vec::new();
    for dropped in combinations(&candidates, size) {
        let mut keep = vec![true; n];
        for i in dropped {
            keep[i] = false;
        }
        let env = scenarios.envelope(&keep);
        let key: Vec<u64> = env.iter().map(|v| v.to_bits()).collect();
        if seen.insert(key) {
            envelopes.push(env);
        }
    }

    let started = Instant::now();
    let results: Vec<Result<Option<Solution>>> = envelopes
        .par_iter()
        .map(|env| {
            if started.elapsed() > config.time_budget {
                return Err(Error::ExactLimit(format!(
                    "exact solve exceeded its time budget of {:?}",
                    config.time_budget
                )));
            }
            match solve_envelope(instance, env) {
                Ok(s) => Ok(Some(s)),
                Err(Error::Infeasible(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut best: Option<(Solution, usize)> = None;
    for (k, res) in results.into_iter().enumerate() {
        let Some(sol) = res? else { continue };
        let better = best
            .as_ref()
            .map_or(true, |(b, _)| sol.objective < b.objective - TIE_TOL);
        if better {
            best = Some((sol, k));
        }
    }
    let (solution, k) = best.ok_or_else(|| Error::Infeasible("no drop set admits a dispatch".into()))?;
    Ok(with_indicators(solution, scenarios, &envelopes[k]))
}

/// Largest total output of each period. Every unit climbing at its full
/// ramp rate from the initial state reaches all of these at once, so a
/// demand profile is servable exactly when it stays below the bound.
pub fn deliverable_bound(instance: &UcpInstance) -> Vec<f64> {
    let mut bound = vec![0.0; instance.horizon];
    for (g, gen) in instance.generators.iter().enumerate() {
        let mut reach = instance.initial.p0[g];
        for b in bound.iter_mut() {
            reach = (reach + gen.r_up).min(gen.p_max);
            if reach < gen.p_min {
                reach = 0;
            }
            *b += reach as f64;
        }
    }
    bound
}

/// Greedy surrogate for large scenario sets. Scenarios above
/// [`deliverable_bound`] in some period are dropped first, since no
/// schedule serves them; then the scenario whose removal lowers `sum_t E_t`
/// the most is dropped until the quota is reached, and the envelope is
/// solved exactly. Feasible whenever the problem is, not necessarily
/// optimal.
pub fn solve_stochastic_greedy(instance: &UcpInstance, scenarios: &ScenarioSet, p_level: f64) -> Result<Solution> {
    check_scenarios(instance, scenarios, p_level)?;
    let n = scenarios.n();
    let horizon = scenarios.horizon();
    let drop = n - reliability_quota(n, p_level);
    let bound = deliverable_bound(instance);
    let mut keep: Vec<bool> = scenarios
        .demands
        .iter()
        .map(|row| row.iter().zip(&bound).all(|(d, b)| *d <= b + 1e-9))
        .collect();
    let forced = keep.iter().filter(|k| !**k).count();
    if forced > drop {
        return Err(Error::Infeasible(format!(
            "{forced} scenarios exceed the deliverable supply but only {drop} may be dropped"
        )));
    }
    let totals: Vec<f64> = scenarios.demands.iter().map(|r| r.iter().sum()).collect();

    for _ in forced..drop {
        // Top two kept values per period.
        let mut top = vec![(f64::NEG_INFINITY, f64::NEG_INFINITY, usize::MAX); horizon];
        for (i, row) in scenarios.demands.iter().enumerate() {
            if !keep[i] {
                continue;
            }
            for (t, v) in row.iter().enumerate() {
                let (first, second, arg) = &mut top[t];
                if *v > *first {
                    *second = *first;
                    *first = *v;
                    *arg = i;
                } else if *v > *second {
                    *second = *v;
                }
            }
        }
        let mut choice: Option<(f64, f64, usize)> = None;
        for i in (0..n).filter(|i| keep[*i]) {
            let gain: f64 = top
                .iter()
                .filter(|(_, _, arg)| *arg == i)
                .map(|(first, second, _)| if second.is_finite() { first - second } else { *first })
                .sum();
            let better = match choice {
                None => true,
                Some((g, s, _)) => gain > g || (gain == g && totals[i] > s),
            };
            if better {
                choice = Some((gain, totals[i], i));
            }
        }
        let (_, _, i) = choice.expect("a kept scenario exists while dropping");
        keep[i] = false;
    }
    let envelope = scenarios.envelope(&keep);
    let solution = solve_envelope(instance, &envelope)?;
    Ok(with_indicators(solution, scenarios, &envelope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::builtin_deterministic_instance;
    use crate::scenario_model::{check_feasible, DEFAULT_TOL};

    #[test]
    fn switching_examples() {
        let inst = builtin_deterministic_instance();
        let u = vec![vec![0, 0, 0], vec![0, 0, 0], vec![1, 1, 1]];
        let (on, off) = derive_switching(&u, &inst.initial);
        assert!(on.iter().chain(&off).flatten().all(|v| *v == 0));

        let u = vec![vec![1, 1, 1], vec![0, 0, 0], vec![0, 0, 0]];
        let (on, off) = derive_switching(&u, &inst.initial);
        assert_eq!(on.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![1, 0, 0]);
        assert_eq!(off.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![0, 0, 1]);
    }

    #[test]
    fn pattern_order_is_lexicographic() {
        assert_eq!(pattern(0b100000000, 3, 3)[0], vec![1, 0, 0]);
        assert_eq!(pattern(1, 3, 3)[2], vec![0, 0, 1]);
    }

    #[test]
    fn empty_dispatch() {
        let inst = builtin_deterministic_instance();
        let mut all_off = vec![vec![0; 3]; 3];
        // Unit 3 starts at 100 MW and may drop to zero in one step.
        let d = dispatch_lp(&inst, &all_off, &[0.0; 3]).unwrap();
        assert_eq!(d.cost, 0.0);
        assert!(d.p.iter().flatten().all(|v| *v == 0.0));
        all_off[2] = vec![1, 1, 1];
        assert!(matches!(
            dispatch_lp(&inst, &all_off, &[0.0, 500.0, 0.0]),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn deliverable_bound_of_builtin() {
        let inst = builtin_deterministic_instance();
        assert_eq!(deliverable_bound(&inst), vec![440.0, 690.0, 690.0]);
    }

    #[test]
    fn deterministic_optimum() {
        let inst = builtin_deterministic_instance();
        let s = solve_deterministic(&inst).unwrap();
        assert!((s.objective - 191.8).abs() < 1e-6, "{s:?}");
        let rep = check_feasible(&inst, None, 1.0, &s, DEFAULT_TOL).unwrap();
        assert!(rep.joint, "{rep:?}");
    }

    #[test]
    fn zero_demand_shuts_unit_three() {
        let inst = builtin_deterministic_instance().with_fixed_demand(vec![0.0; 3]);
        let s = solve_deterministic(&inst).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-9);
        assert_eq!(s.z_off[2][0], 1);
    }

    #[test]
    fn over_capacity_is_infeasible() {
        let inst = builtin_deterministic_instance().with_fixed_demand(vec![100.0, 691.0, 100.0]);
        assert!(matches!(solve_deterministic(&inst), Err(Error::Infeasible(_))));
    }

    #[test]
    fn combinations_enumerate_all() {
        let c = combinations(&[1, 3, 5, 7], 2);
        assert_eq!(c.len(), 6);
        assert_eq!(c[0], vec![1, 3]);
        assert_eq!(c[5], vec![5, 7]);
        assert_eq!(combinations(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert_eq!(binomial(8, 2), 28);
        assert_eq!(binomial(10, 5), 252);
    }
}
