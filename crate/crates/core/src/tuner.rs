//! Adaptive penalty tuning: anneal, measure per-group feasibility ratios,
//! grow each factor by a sigmoid of its ratio, repeat.

use std::collections::BTreeMap;
use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annealer::{anneal, default_schedule, AnnealConfig, SampleSet};
use crate::error::{Error, Result};
use crate::instance::UcpInstance;
use crate::encoding::Formulation;
use crate::qubo::{compile_formulation, decoded_violations, formulation, Group, PenaltyWeights, QuboModel};
use crate::sampler::ScenarioSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunerConfig {
    /// Largest relative step `A`.
    pub amplitude: f64,
    /// Steepness `kappa`.
    pub kappa: f64,
    /// Ratio at which the step is `A / 2`.
    pub r0: f64,
    pub max_iters: usize,
    pub reads_per_iter: usize,
    pub sweeps: usize,
    /// Fixed initial inverse temperature; derived from each model when absent.
    #[serde(default)]
    pub beta_start: Option<f64>,
    /// Fixed final inverse temperature; derived from each model when absent.
    #[serde(default)]
    pub beta_end: Option<f64>,
    /// Multiplier on the derived initial inverse temperature.
    #[serde(default = "unit")]
    pub beta_start_factor: f64,
    pub seed: u64,
}

impl TunerConfig {
    /// Sigmoid parameters `A = 0.5`, `kappa = 14`, `R0 = 0.3`, 50 iterations.
    pub fn standard(seed: u64) -> TunerConfig {
        TunerConfig {
            amplitude: 0.5,
            kappa: 14.0,
            r0: 0.3,
            max_iters: 50,
            reads_per_iter: 100,
            sweeps: 1000,
            beta_start: None,
            beta_end: None,
            beta_start_factor: 1.0,
            seed,
        }
    }

    /// [`TunerConfig::standard`] with a shorter, colder schedule: 250 sweeps,
    /// a start 100 times colder than the derived one and `beta_end = 50`.
    pub fn fast(seed: u64) -> TunerConfig {
        TunerConfig {
            sweeps: 250,
            beta_end: Some(50.0),
            beta_start_factor: 100.0,
            ..TunerConfig::standard(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return bad(format!("amplitude must be > 0, got {}", self.amplitude));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be > 0, got {}", self.kappa));
        }
        if !(self.r0 > 0.0 && self.r0 < 1.0) {
            return bad(format!("r0 must lie in (0, 1), got {}", self.r0));
        }
        if !(self.beta_start_factor > 0.0 && self.beta_start_factor.is_finite()) {
            return bad(format!("beta_start_factor must be > 0, got {}", self.beta_start_factor));
        }
        for b in [self.beta_start, self.beta_end].into_iter().flatten() {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("inverse temperatures must be > 0, got {b}"));
            }
        }
        if self.max_iters == 0 || self.reads_per_iter == 0 || self.sweeps == 0 {
            return bad("max_iters, reads_per_iter and sweeps must be >= 1".into());
        }
        Ok(())
    }

    /// Anneal seed of iteration `k`, one stream of the master seed each.
    pub fn iteration_seed(&self, k: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        rng.next_u64()
    }

    /// The tuner's schedule for `model` with a custom read count and seed.
    /// Use it to anneal the tuned model the same way it was tuned.
    pub fn schedule(&self, model: &QuboModel, num_reads: usize, seed: u64) -> AnnealConfig {
        let mut cfg = default_schedule(model);
        cfg.beta_start *= self.beta_start_factor;
        if let Some(b) = self.beta_start {
            cfg.beta_start = b;
        }
        if let Some(b) = self.beta_end {
            cfg.beta_end = b;
        }
        cfg.beta_start = cfg.beta_start.min(cfg.beta_end);
        cfg.num_reads = num_reads;
        cfg.sweeps = self.sweeps;
        cfg.seed = seed;
        cfg
    }

    fn anneal_config(&self, model: &QuboModel, k: usize) -> AnnealConfig {
        self.schedule(model, self.reads_per_iter, self.iteration_seed(k))
    }
}

fn unit() -> f64 {
    1.0
}

/// `K = (c - 1) / c + 1 / n_samples`
pub fn stop_threshold(groups: usize, n_samples: usize) -> f64 {
    let c = groups as f64;
    (c - 1.0) / c + 1.0 / n_samples as f64
}

/// `S = A / (1 + exp(kappa (R - R0)))`
pub fn sigmoid_step(amplitude: f64, kappa: f64, r0: f64, ratio: f64) -> f64 {
    amplitude / (1.0 + (kappa * (ratio - r0)).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRatios {
    pub per_group: BTreeMap<Group, f64>,
    pub joint: f64,
}

fn ratios_from(groups: &[Group], passes: &[Vec<bool>]) -> FeasibilityRatios {
    let n = passes.len() as f64;
    let per_group = groups
        .iter()
        .enumerate()
        .map(|(k, g)| (*g, passes.iter().filter(|p| p[k]).count() as f64 / n))
        .collect();
    let joint = passes.iter().filter(|p| p.iter().all(|b| *b)).count() as f64 / n;
    FeasibilityRatios { per_group, joint }
}

/// Fraction of samples whose decoded schedule satisfies each group's
/// constraints, and all of them at once.
pub fn feasibility_ratios(samples: &SampleSet, formulation: &Formulation) -> Result<FeasibilityRatios> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let groups = Group::for_model(formulation.is_stochastic());
    let passes = samples
        .samples
        .par_iter()
        .map(|s| {
            let v = decoded_violations(formulation, &s.bits)?;
            Ok(groups.iter().map(|g| v[g] == 0).collect::<Vec<bool>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ratios_from(groups, &passes))
}

/// Fraction of samples with zero penalty energy per group. Stricter than
/// [`feasibility_ratios`]: slack bits must match the residuals exactly.
pub fn penalty_ratios(samples: &SampleSet, model: &QuboModel) -> Result<FeasibilityRatios> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let groups = model.groups();
    let passes = samples
        .samples
        .par_iter()
        .map(|s| {
            let v = model.violations(&s.bits)?;
            Ok(groups.iter().map(|g| v.get(g).copied().unwrap_or(0) == 0).collect::<Vec<bool>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ratios_from(&groups, &passes))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    #[serde(rename = "threshold reached")]
    ThresholdReached,
    #[serde(rename = "max iterations")]
    MaxIterations,
    #[serde(rename = "threshold unattainable")]
    ThresholdUnattainable,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::ThresholdReached => "threshold reached",
            StopReason::MaxIterations => "max iterations",
            StopReason::ThresholdUnattainable => "threshold unattainable",
        })
    }
}

/// One iteration: the weights used for its anneal and the ratios observed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub weights: PenaltyWeights,
    pub ratios: FeasibilityRatios,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunerTrace {
    pub groups: Vec<Group>,
    pub threshold: f64,
    pub rows: Vec<TraceRow>,
    pub stop_reason: StopReason,
}

impl TunerTrace {
    /// `iteration`, one `lambda_*` and one `R_*` column per group, `R_J`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration");
        for g in &self.groups {
            s.push_str(&format!(",lambda_{g}"));
        }
        for g in &self.groups {
            s.push_str(&format!(",R_{g}"));
        }
        s.push_str(",R_J\n");
        for row in &self.rows {
            s.push_str(&row.iteration.to_string());
            for g in &self.groups {
                s.push_str(&format!(",{}", row.weights.get(*g)));
            }
            for g in &self.groups {
                s.push_str(&format!(",{}", row.ratios.per_group.get(g).copied().unwrap_or(1.0)));
            }
            s.push_str(&format!(",{}\n", row.ratios.joint));
        }
        s
    }
}

/// Tuning loop over an arbitrary compiler and ratio measure. `groups` are
/// the factors to update; the loop stops early once every ratio reaches the
/// threshold.
pub fn tune_with<F, R>(
    mut compile: F,
    measure: R,
    groups: &[Group],
    initial: &PenaltyWeights,
    config: &TunerConfig,
) -> Result<(PenaltyWeights, TunerTrace)>
where
    F: FnMut(&PenaltyWeights) -> Result<QuboModel>,
    R: Fn(&SampleSet, &QuboModel) -> Result<FeasibilityRatios>,
{
    config.validate()?;
    initial.validate()?;
    let threshold = stop_threshold(groups.len().max(1), config.reads_per_iter);
    let mut weights = initial.clone();
    let mut rows = Vec::with_capacity(config.max_iters);
    let mut stop_reason = if threshold > 1.0 {
        StopReason::ThresholdUnattainable
    } else {
        StopReason::MaxIterations
    };
    for k in 0..config.max_iters {
        let model = compile(&weights)?;
        let samples = anneal(&model, &config.anneal_config(&model, k))?;
        let ratios = measure(&samples, &model)?;
        let ratio = |g: &Group| ratios.per_group.get(g).copied().unwrap_or(1.0);
        rows.push(TraceRow {
            iteration: k + 1,
            weights: weights.clone(),
            ratios: ratios.clone(),
        });
        if threshold <= 1.0 && groups.iter().all(|g| ratio(g) >= threshold) {
            stop_reason = StopReason::ThresholdReached;
            break;
        }
        for g in groups {
            let step = sigmoid_step(config.amplitude, config.kappa, config.r0, ratio(g));
            weights.set(*g, weights.get(*g) * (1.0 + step));
        }
    }
    Ok((
        weights,
        TunerTrace {
            groups: groups.to_vec(),
            threshold,
            rows,
            stop_reason,
        },
    ))
}

/// Tunes the weights of the deterministic model, or of the scenario model
/// when `scenarios` and `p_level` are given.
pub fn tune(
    instance: &UcpInstance,
    initial: &PenaltyWeights,
    config: &TunerConfig,
    scenarios: Option<&ScenarioSet>,
    p_level: Option<f64>,
) -> Result<(PenaltyWeights, TunerTrace)> {
    let f = formulation(instance, scenarios, p_level)?;
    let groups = Group::for_model(f.is_stochastic());
    tune_with(
        |w| compile_formulation(&f, w),
        |s, _| feasibility_ratios(s, &f),
        groups,
        initial,
        config,
    )
}
