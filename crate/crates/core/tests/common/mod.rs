//! Independent oracles and random instance generators shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::HashSet;

use ccucp::instance::{validate, DemandSpec, GeneratorParams, InitialState, UcpInstance};
use ccucp::reference_solver::dispatch_lp;
use ccucp::sampler::{sample, ScenarioSet};
use ccucp::scenario_model::reliability_quota;
use ccucp::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_generator(rng: &mut ChaCha8Rng) -> GeneratorParams {
    let p_min = rng.gen_range(10..=60);
    GeneratorParams {
        p_min,
        p_max: p_min + rng.gen_range(40..=200),
        r_up: rng.gen_range(30..=200),
        r_down: rng.gen_range(30..=200),
        c_startup: f64::from(rng.gen_range(0..=40)) / 2.0,
        c_shutdown: f64::from(rng.gen_range(0..=20)) / 10.0,
        c_fixed: f64::from(rng.gen_range(2..=16)) / 2.0,
        b: f64::from(rng.gen_range(10..=40)) / 200.0,
    }
}

fn random_initial(rng: &mut ChaCha8Rng, generators: &[GeneratorParams]) -> InitialState {
    let u0: Vec<u8> = generators.iter().map(|_| u8::from(rng.gen_bool(0.5))).collect();
    let p0 = generators
        .iter()
        .zip(&u0)
        .map(|(g, u)| if *u == 1 { rng.gen_range(g.p_min..=g.p_max) } else { 0 })
        .collect();
    InitialState { u0, p0 }
}

/// Random Gaussian-demand instance with `G, T` in `1..=3`.
pub fn random_gaussian_instance(rng: &mut ChaCha8Rng) -> UcpInstance {
    loop {
        let g_count = rng.gen_range(1..=3);
        let horizon = rng.gen_range(1..=3);
        let generators: Vec<GeneratorParams> = (0..g_count).map(|_| random_generator(rng)).collect();
        let initial = random_initial(rng, &generators);
        let cap: i64 = generators.iter().map(|g| g.p_max).sum();
        let mu = (0..horizon).map(|_| (cap as f64 * rng.gen_range(0.2..0.6)).round()).collect();
        let sigma = (0..horizon).map(|_| f64::from(rng.gen_range(5..=30))).collect();
        let rho = [0.0, 0.3, 0.6][rng.gen_range(0..3)];
        let corr = (0..horizon)
            .map(|i| (0..horizon).map(|j| if i == j { 1.0 } else { rho }).collect())
            .collect();
        let instance = UcpInstance {
            generators,
            horizon,
            initial,
            demand: DemandSpec::Gaussian { mu, sigma, corr },
        };
        if validate(&instance).is_empty() {
            return instance;
        }
    }
}

/// Random fixed-demand instance with the given shape.
pub fn random_fixed_instance(rng: &mut ChaCha8Rng, g_count: usize, horizon: usize) -> UcpInstance {
    let generators: Vec<GeneratorParams> = (0..g_count).map(|_| random_generator(rng)).collect();
    let initial = random_initial(rng, &generators);
    let cap: i64 = generators.iter().map(|g| g.p_max).sum();
    let d = (0..horizon)
        .map(|_| f64::from(rng.gen_range(0..=(cap as i32) * 7 / 10)))
        .collect();
    UcpInstance {
        generators,
        horizon,
        initial,
        demand: DemandSpec::Fixed { d },
    }
}

pub fn scenarios_for(instance: &UcpInstance, n: usize, seed: u64) -> ScenarioSet {
    sample(instance, n, seed).unwrap().rounded()
}

/// Start-up, shut-down and fixed cost of a commitment pattern, switching
/// derived from the pattern.
pub fn commitment_cost(instance: &UcpInstance, u: &[Vec<u8>]) -> f64 {
    let mut cost = 0.0;
    for (g, gen) in instance.generators.iter().enumerate() {
        let mut prev = instance.initial.u0[g];
        for &cur in &u[g] {
            if cur > prev {
                cost += gen.c_startup;
            }
            if cur < prev {
                cost += gen.c_shutdown;
            }
            cost += gen.c_fixed * f64::from(cur);
            prev = cur;
        }
    }
    cost
}

pub fn all_patterns(g_count: usize, horizon: usize) -> Vec<Vec<Vec<u8>>> {
    let bits = g_count * horizon;
    (0..1u32 << bits)
        .map(|mask| {
            (0..g_count)
                .map(|g| (0..horizon).map(|t| ((mask >> (g * horizon + t)) & 1) as u8).collect())
                .collect()
        })
        .collect()
}

/// Cheapest total cost with demand floors `envelope`, enumerating every
/// commitment pattern and pricing its dispatch with the library LP.
pub fn cheapest_for_envelope(instance: &UcpInstance, envelope: &[f64]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for u in all_patterns(instance.num_generators(), instance.horizon) {
        match dispatch_lp(instance, &u, envelope) {
            Ok(d) => {
                let cost = commitment_cost(instance, &u) + d.cost;
                best = Some(best.map_or(cost, |b: f64| b.min(cost)));
            }
            Err(Error::Infeasible(_)) => {}
            Err(e) => panic!("LP failure: {e}"),
        }
    }
    best
}

/// All-subsets oracle: every scenario subset meeting the quota, every
/// commitment pattern. `None` if nothing is feasible.
pub fn brute_force_stochastic(instance: &UcpInstance, scenarios: &ScenarioSet, p_level: f64) -> Option<f64> {
    let n = scenarios.n();
    assert!(n <= 16);
    let quota = reliability_quota(n, p_level);
    let mut seen = HashSet::new();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        if (mask.count_ones() as usize) < quota {
            continue;
        }
        let envelope: Vec<f64> = (0..scenarios.horizon())
            .map(|t| {
                (0..n)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| scenarios.demands[i][t])
                    .fold(0.0, f64::max)
            })
            .collect();
        let key: Vec<u64> = envelope.iter().map(|v| v.to_bits()).collect();
        if !seen.insert(key) {
            continue;
        }
        if let Some(c) = cheapest_for_envelope(instance, &envelope) {
            best = Some(best.map_or(c, |b: f64| b.min(c)));
        }
    }
    best
}

/// Dense LP `min c·x` s.t. `A x <= b` by enumerating every basis of active
/// constraints. Only sensible for a handful of variables.
pub fn vertex_lp(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let n = c.len();
    if n == 0 {
        return b.iter().all(|v| *v >= -1e-9).then_some(0.0);
    }
    let m = a.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = solve_square(&idx.iter().map(|&r| a[r].clone()).collect::<Vec<_>>(), &idx.iter().map(|&r| b[r]).collect::<Vec<_>>()) {
            let feasible = (0..m).all(|r| a[r].iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b[r] + 1e-7);
            if feasible {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |w: f64| w.min(v)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < m - n + i {
                idx[i] += 1;
                for j in i + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn solve_square(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, v)| {
        let mut r = row.clone();
        r.push(*v);
        r
    }).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|x, y| m[*x][col].abs().total_cmp(&m[*y][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..=n {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// The dispatch LP of a commitment pattern in `A x <= b` form, one
/// variable per committed `(g, t)`. `None` if an uncommitted ramp is
/// violated outright.
pub fn dispatch_as_dense(instance: &UcpInstance, u: &[Vec<u8>], envelope: &[f64]) -> Option<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    let horizon = instance.horizon;
    let mut index = vec![vec![None; horizon]; instance.num_generators()];
    let mut c = Vec::new();
    for (g, gen) in instance.generators.iter().enumerate() {
        for t in 0..horizon {
            if u[g][t] == 1 {
                index[g][t] = Some(c.len());
                c.push(gen.b);
            }
        }
    }
    let n = c.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let row = |terms: &[(Option<usize>, f64)], rhs: f64, a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>| {
        let mut r = vec![0.0; n];
        for (v, k) in terms {
            if let Some(v) = v {
                r[*v] += k;
            }
        }
        a.push(r);
        b.push(rhs);
    };
    for (g, gen) in instance.generators.iter().enumerate() {
        for t in 0..horizon {
            let x = index[g][t];
            if x.is_some() {
                row(&[(x, 1.0)], gen.p_max as f64, &mut a, &mut b);
                row(&[(x, -1.0)], -(gen.p_min as f64), &mut a, &mut b);
            }
            let (prev, prev_const) = if t == 0 {
                (None, instance.initial.p0[g] as f64)
            } else {
                (index[g][t - 1], 0.0)
            };
            if x.is_none() && prev.is_none() {
                let cur = 0.0;
                let before = if t == 0 { prev_const } else { 0.0 };
                if cur - before > gen.r_up as f64 || before - cur > gen.r_down as f64 {
                    return None;
                }
                continue;
            }
            // x - prev - prev_const <= r_up ; prev + prev_const - x <= r_down
            row(&[(x, 1.0), (prev, -1.0)], gen.r_up as f64 + prev_const, &mut a, &mut b);
            row(&[(x, -1.0), (prev, 1.0)], gen.r_down as f64 - prev_const, &mut a, &mut b);
        }
    }
    for (t, need) in envelope.iter().enumerate() {
        let terms: Vec<(Option<usize>, f64)> = index.iter().map(|r| (r[t], -1.0)).collect();
        row(&terms, -need, &mut a, &mut b);
    }
    Some((c, a, b))
}
