//! Single-flip simulated annealing over a [`QuboModel`].

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{BitString, Formulation};
use crate::error::{Error, Result};
use crate::qubo::QuboModel;
use crate::scenario_model::{check_feasible, Solution, DEFAULT_TOL};

/// Cooling schedule and sampling budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub num_reads: usize,
    pub sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub seed: u64,
    /// Return the lowest-energy state seen at a sweep boundary instead of
    /// the final state.
    #[serde(default)]
    pub track_best: bool,
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 || self.sweeps == 0 {
            return Err(Error::InvalidParameter("num_reads and sweeps must be >= 1".into()));
        }
        if !(self.beta_start > 0.0 && self.beta_start.is_finite() && self.beta_end.is_finite()) {
            return Err(Error::InvalidParameter("inverse temperatures must be positive and finite".into()));
        }
        if self.beta_start > self.beta_end {
            return Err(Error::InvalidParameter(format!(
                "beta_start ({}) exceeds beta_end ({})",
                self.beta_start, self.beta_end
            )));
        }
        Ok(())
    }

    /// Inverse temperature of sweep `k`.
    pub fn beta(&self, k: usize) -> f64 {
        if self.sweeps == 1 {
            return self.beta_start;
        }
        let frac = k as f64 / (self.sweeps - 1) as f64;
        self.beta_start * (self.beta_end / self.beta_start).powf(frac)
    }
}

/// Schedule from coefficient magnitudes: `beta_start = ln 2 / dE_max`,
/// `beta_end = ln 100 / dE_min`, 1000 sweeps, one read.
pub fn default_schedule(model: &QuboModel) -> AnnealConfig {
    let mut reach = vec![0.0f64; model.num_vars];
    let mut smallest = f64::INFINITY;
    for (i, c) in &model.linear {
        reach[*i] += c.abs();
        smallest = smallest.min(c.abs());
    }
    for ((i, j), c) in &model.quadratic {
        reach[*i] += c.abs();
        reach[*j] += c.abs();
        smallest = smallest.min(c.abs());
    }
    let largest = reach.iter().copied().fold(0.0, f64::max);
    let (beta_start, beta_end) = if largest > 0.0 {
        (2f64.ln() / largest, 100f64.ln() / smallest)
    } else {
        (1.0, 1.0)
    };
    AnnealConfig {
        num_reads: 1,
        sweeps: 1000,
        beta_start,
        beta_end,
        seed: 0,
        track_best: false,
    }
}

/// Symmetric sparse adjacency with linear fields.
#[derive(Clone, Debug)]
pub struct Adjacency {
    pub linear: Vec<f64>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
}

impl Adjacency {
    pub fn new(model: &QuboModel) -> Adjacency {
        let n = model.num_vars;
        let mut linear = vec![0.0; n];
        for (i, c) in &model.linear {
            linear[*i] = *c;
        }
        let mut degree = vec![0usize; n];
        for (i, j) in model.quadratic.keys() {
            degree[*i] += 1;
            degree[*j] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0u32; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for ((i, j), c) in &model.quadratic {
            for (a, b) in [(*i, *j), (*j, *i)] {
                neighbors[fill[a]] = b as u32;
                weights[fill[a]] = *c;
                fill[a] += 1;
            }
        }
        Adjacency {
            linear,
            offsets,
            neighbors,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linear.is_empty()
    }

    /// `sum_j J_ij x_j` for every `i`.
    pub fn local_fields(&self, x: &[u8]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                (self.offsets[i]..self.offsets[i + 1])
                    .filter(|&k| x[self.neighbors[k] as usize] == 1)
                    .map(|k| self.weights[k])
                    .sum()
            })
            .collect()
    }

    /// Energy change of flipping `i`.
    #[inline]
    pub fn delta(&self, x: &[u8], fields: &[f64], i: usize) -> f64 {
        let d = self.linear[i] + fields[i];
        if x[i] == 0 {
            d
        } else {
            -d
        }
    }

    /// Flips `i` and updates the neighbours' fields.
    #[inline]
    pub fn flip(&self, x: &mut [u8], fields: &mut [f64], i: usize) {
        x[i] ^= 1;
        let sign = if x[i] == 1 { 1.0 } else { -1.0 };
        let span = self.offsets[i]..self.offsets[i + 1];
        for (&j, &w) in self.neighbors[span.clone()].iter().zip(&self.weights[span]) {
            fields[j as usize] += sign * w;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub read_index: usize,
    pub bits: BitString,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub config: AnnealConfig,
    pub wall_time_s: f64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn lowest_energy(&self) -> Option<&Sample> {
        self.samples
            .iter()
            .min_by(|a, b| a.energy.total_cmp(&b.energy))
    }

    /// One JSON record per read.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for s in &self.samples {
            let record = serde_json::json!({
                "bits": s.bits.to_string(),
                "energy": s.energy,
                "read_index": s.read_index,
            });
            writeln!(out, "{record}")?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }
}

/// Generator of read `read`: stream `read` of `seed` keys a fast
/// xoshiro generator used inside the sweep loop.
fn read_rng(seed: u64, read: usize) -> Xoshiro256PlusPlus {
    let mut stream = ChaCha8Rng::seed_from_u64(seed);
    stream.set_stream(read as u64);
    Xoshiro256PlusPlus::from_rng(stream).expect("ChaCha never fails")
}

/// Fisher-Yates with multiply-shift index draws (bias below `n / 2^32`).
fn shuffle(order: &mut [u32], rng: &mut Xoshiro256PlusPlus) {
    for i in (1..order.len()).rev() {
        let j = ((u64::from(rng.next_u32()) * (i as u64 + 1)) >> 32) as usize;
        order.swap(i, j);
    }
}

fn run_read(adj: &Adjacency, config: &AnnealConfig, read: usize) -> Vec<u8> {
    let n = adj.len();
    let mut rng = read_rng(config.seed, read);
    let mut x: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
    let mut fields = adj.local_fields(&x);
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut energy = 0.0;
    let mut best: Option<(f64, Vec<u8>)> = None;
    for sweep in 0..config.sweeps {
        let beta = config.beta(sweep);
        shuffle(&mut order, &mut rng);
        for &i in &order {
            let i = i as usize;
            let d = adj.delta(&x, &fields, i);
            let accept = d <= 0.0 || {
                let bd = beta * d;
                bd < 40.0 && rng.gen::<f64>() < (-bd).exp()
            };
            if accept {
                adj.flip(&mut x, &mut fields, i);
                energy += d;
            }
        }
        if config.track_best && best.as_ref().map_or(true, |(e, _)| energy < *e) {
            best = Some((energy, x.clone()));
        }
    }
    match best {
        Some((_, b)) => b,
        None => x,
    }
}

/// Runs `config.num_reads` independent reads; read `r` draws from stream
/// `r` of `config.seed`, so results do not depend on the thread count.
pub fn anneal(model: &QuboModel, config: &AnnealConfig) -> Result<SampleSet> {
    config.validate()?;
    if model.num_vars == 0 {
        return Err(Error::InvalidParameter("cannot anneal an empty model".into()));
    }
    let start = Instant::now();
    let adj = Adjacency::new(model);
    let samples = (0..config.num_reads)
        .into_par_iter()
        .map(|read| {
            let bits = BitString(run_read(&adj, config, read));
            let energy = model.energy(&bits)?;
            Ok(Sample {
                read_index: read,
                bits,
                energy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet {
        samples,
        config: config.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Cost and joint feasibility of one decoded sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub cost: f64,
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibleSummary {
    /// Cheapest jointly feasible decode and its read index.
    pub best: Option<(Solution, usize)>,
    pub histogram: Vec<HistogramRow>,
}

impl FeasibleSummary {
    pub fn best_cost(&self) -> Option<f64> {
        self.best.as_ref().map(|(s, _)| s.objective)
    }

    pub fn feasible_fraction(&self) -> f64 {
        if self.histogram.is_empty() {
            return 0.0;
        }
        self.histogram.iter().filter(|r| r.feasible).count() as f64 / self.histogram.len() as f64
    }

    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("cost,feasible\n");
        for r in &self.histogram {
            s.push_str(&format!("{},{}\n", r.cost, r.feasible));
        }
        s
    }
}

/// Decodes every sample and keeps the cheapest one passing every constraint
/// family. Ties go to the lower read index.
pub fn best_feasible(samples: &SampleSet, formulation: &Formulation) -> Result<FeasibleSummary> {
    let p_level = formulation.p_level.unwrap_or(1.0);
    let rows = samples
        .samples
        .par_iter()
        .map(|s| {
            let sol = formulation.decode(&s.bits)?;
            let report = check_feasible(
                &formulation.instance,
                formulation.scenarios.as_ref(),
                p_level,
                &sol,
                DEFAULT_TOL,
            )?;
            Ok((sol, report.joint, s.read_index))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(Solution, usize)> = None;
    let mut histogram = Vec::with_capacity(rows.len());
    for (sol, feasible, read) in rows {
        histogram.push(HistogramRow {
            cost: sol.objective,
            feasible,
        });
        if feasible && best.as_ref().map_or(true, |(b, _)| sol.objective < b.objective) {
            best = Some((sol, read));
        }
    }
    Ok(FeasibleSummary { best, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn single(coeff: f64) -> QuboModel {
        QuboModel {
            num_vars: 1,
            linear: BTreeMap::from([(0, coeff)]),
            quadratic: BTreeMap::new(),
            offset: 0.0,
            penalties: Vec::new(),
            weights: None,
            layout: None,
        }
    }

    #[test]
    fn single_variable_ground_state() {
        let m = single(5.0);
        let mut cfg = default_schedule(&m);
        cfg.num_reads = 16;
        cfg.sweeps = 50;
        cfg.beta_end = 100.0;
        let ss = anneal(&m, &cfg).unwrap();
        assert!(ss.samples.iter().all(|s| s.bits.0 == vec![0] && s.energy == 0.0));
    }

    #[test]
    fn schedule_scales_with_energy() {
        let m = QuboModel {
            num_vars: 3,
            linear: BTreeMap::from([(0, 1.0), (1, -2.0)]),
            quadratic: BTreeMap::from([((0, 1), 3.0), ((1, 2), -1.5)]),
            offset: 0.0,
            penalties: Vec::new(),
            weights: None,
            layout: None,
        };
        let a = default_schedule(&m);
        assert!(a.beta_start < a.beta_end);
        let mut scaled = m.clone();
        scaled.linear.values_mut().for_each(|c| *c *= 10.0);
        scaled.quadratic.values_mut().for_each(|c| *c *= 10.0);
        let b = default_schedule(&scaled);
        assert!((b.beta_start * 10.0 - a.beta_start).abs() < 1e-12);
        assert!((b.beta_end * 10.0 - a.beta_end).abs() < 1e-12);
        let lin_only = default_schedule(&single(-4.0));
        assert!(lin_only.beta_start.is_finite() && lin_only.beta_end.is_finite());
    }

    #[test]
    fn geometric_betas() {
        let cfg = AnnealConfig {
            num_reads: 1,
            sweeps: 3,
            beta_start: 1.0,
            beta_end: 4.0,
            seed: 0,
            track_best: false,
        };
        assert_eq!(cfg.beta(0), 1.0);
        assert!((cfg.beta(1) - 2.0).abs() < 1e-12);
        assert!((cfg.beta(2) - 4.0).abs() < 1e-12);
    }
}
