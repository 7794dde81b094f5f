//! Seeded multivariate normal demand scenarios.
//!
//! Scenario `i` of a set drawn with seed `s` uses the ChaCha8 stream `i` of
//! the generator seeded with `s`, so every row is a pure function of
//! `(s, i)` and generation can be spread across threads without changing a
//! single bit of the output.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{DemandSpec, UcpInstance};

/// Pivots below this are treated as zero; below its negative the matrix is
/// rejected.
const PIVOT_TOLERANCE: f64 = 1e-9;

/// A set of sampled demand vectors, one row per scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub demands: Vec<Vec<f64>>,
    pub seed: u64,
    pub regime: String,
}

/// Sidecar metadata stored next to a scenario CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub seed: u64,
    pub regime: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

impl ScenarioSet {
    pub fn new(demands: Vec<Vec<f64>>, seed: u64, regime: impl Into<String>) -> Result<Self> {
        let Some(first) = demands.first() else {
            return Err(Error::NoScenarios);
        };
        let horizon = first.len();
        if let Some(i) = demands.iter().position(|row| row.len() != horizon) {
            return Err(Error::Shape(format!(
                "scenario {i} has {} periods, expected {horizon}",
                demands[i].len()
            )));
        }
        if demands.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "scenario demands must be finite and nonnegative".into(),
            ));
        }
        Ok(ScenarioSet {
            demands,
            seed,
            regime: regime.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.demands.len()
    }

    pub fn horizon(&self) -> usize {
        self.demands.first().map_or(0, Vec::len)
    }

    /// Copy with every value rounded to two decimals, the precision used by
    /// the binary model and the CSV format.
    pub fn rounded(&self) -> ScenarioSet {
        ScenarioSet {
            demands: self
                .demands
                .iter()
                .map(|row| row.iter().map(|v| round2(*v)).collect())
                .collect(),
            seed: self.seed,
            regime: self.regime.clone(),
        }
    }

    /// Subset of the first `n` scenarios.
    pub fn truncated(&self, n: usize) -> Result<ScenarioSet> {
        ScenarioSet::new(self.demands[..n.min(self.n())].to_vec(), self.seed, self.regime.clone())
    }

    /// Per-period maximum over the scenarios with `keep[i] == true`.
    pub fn envelope(&self, keep: &[bool]) -> Vec<f64> {
        let mut env = vec![0.0_f64; self.horizon()];
        for (row, _) in self.demands.iter().zip(keep).filter(|(_, k)| **k) {
            for (e, v) in env.iter_mut().zip(row) {
                *e = e.max(*v);
            }
        }
        env
    }

    pub fn meta(&self) -> ScenarioMeta {
        ScenarioMeta {
            seed: self.seed,
            regime: self.regime.clone(),
            n: self.n(),
            manifest: None,
        }
    }

    /// CSV text: header `t1,...,tT`, one row per scenario, two decimals.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.horizon()).map(|t| format!("t{t}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.demands {
            let cells: Vec<String> = row.iter().map(|v| format!("{:.2}", round2(*v))).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Round half away from zero to two decimals.
pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Lower-triangular `L` with `L Lᵀ = diag(sigma) · corr · diag(sigma)`.
///
/// The correlation matrix is factored first, so the semidefiniteness
/// tolerance is unit-free; rows are then scaled by `sigma`.
pub fn cholesky(corr: &[Vec<f64>], sigma: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = sigma.len();
    if corr.len() != n || corr.iter().any(|r| r.len() != n) {
        return Err(Error::Shape(format!("correlation matrix must be {n}x{n}")));
    }
    if sigma.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::InvalidParameter("sigma must be strictly positive".into()));
    }
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let pivot = corr[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if pivot < -PIVOT_TOLERANCE || !pivot.is_finite() {
            return Err(Error::Factorization { pivot: j, value: pivot });
        }
        let diag = if pivot <= PIVOT_TOLERANCE { 0.0 } else { pivot.sqrt() };
        l[j][j] = diag;
        for i in j + 1..n {
            let num = corr[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if diag == 0.0 {
                // A zero pivot is only consistent with a zero column below it.
                if num.abs() > 1e-6 {
                    return Err(Error::Factorization { pivot: j, value: pivot });
                }
            } else {
                l[i][j] = num / diag;
            }
        }
    }
    for (row, s) in l.iter_mut().zip(sigma) {
        for v in row.iter_mut() {
            *v *= s;
        }
    }
    Ok(l)
}

/// Draws `n` scenarios `D = max(mu + L z, 0)` with standard normal `z`.
pub fn sample(instance: &UcpInstance, n: usize, seed: u64) -> Result<ScenarioSet> {
    let DemandSpec::Gaussian { mu, sigma, corr } = &instance.demand else {
        return Err(Error::WrongDemandVariant {
            expected: "gaussian",
            found: instance.demand.kind(),
        });
    };
    if n == 0 {
        return Err(Error::NoScenarios);
    }
    let l = cholesky(corr, sigma)?;
    let horizon = mu.len();
    let demands: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let z: Vec<f64> = (0..horizon).map(|_| StandardNormal.sample(&mut rng)).collect();
            (0..horizon)
                .map(|t| {
                    let shift: f64 = (0..=t).map(|k| l[t][k] * z[k]).sum();
                    (mu[t] + shift).max(0.0)
                })
                .collect()
        })
        .collect();
    ScenarioSet::new(demands, seed, regime_label(corr))
}

fn regime_label(corr: &[Vec<f64>]) -> String {
    crate::instance::CorrelationRegime::ALL
        .into_iter()
        .find(|r| corr.len() == 3 && r.matrix() == corr)
        .map_or_else(|| "custom".to_string(), |r| r.name().to_string())
}

/// Parses scenario CSV text (header row first, `#` lines ignored).
pub fn parse_scenarios_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    if text.trim().is_empty() {
        return Err(Error::NoScenarios);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let width = reader.headers()?.len();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} values, found {}", record.len()),
            });
        }
        let row = record
            .iter()
            .map(|cell| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    line,
                    message: format!("`{cell}` is not a finite number"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::NoScenarios);
    }
    Ok(rows)
}

/// `scenarios.csv` -> `scenarios.csv.meta.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes the CSV and its metadata sidecar.
pub fn save_scenarios(set: &ScenarioSet, path: impl AsRef<Path>) -> Result<()> {
    save_scenarios_with_meta(set, &set.meta(), path)
}

pub fn save_scenarios_with_meta(
    set: &ScenarioSet,
    meta: &ScenarioMeta,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, set.to_csv_string())?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}

/// Reads a scenario CSV; seed and regime come from the sidecar when present.
pub fn load_scenarios(path: impl AsRef<Path>) -> Result<ScenarioSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let demands = parse_scenarios_csv(&text)?;
    let (seed, regime) = match std::fs::read_to_string(sidecar_path(path)) {
        Ok(meta) => {
            let meta: ScenarioMeta = serde_json::from_str(&meta)?;
            (meta.seed, meta.regime)
        }
        Err(_) => (0, "unknown".to_string()),
    };
    ScenarioSet::new(demands, seed, regime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{builtin_deterministic_instance, builtin_stochastic_instance};

    fn sigma_matrix(corr: &[Vec<f64>], sigma: &[f64]) -> Vec<Vec<f64>> {
        (0..sigma.len())
            .map(|i| (0..sigma.len()).map(|j| corr[i][j] * sigma[i] * sigma[j]).collect())
            .collect()
    }

    #[test]
    fn identity_correlation_gives_diagonal_factor() {
        let id = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let l = cholesky(&id, &[25.0, 40.0, 28.0]).unwrap();
        assert_eq!(
            l,
            vec![vec![25.0, 0.0, 0.0], vec![0.0, 40.0, 0.0], vec![0.0, 0.0, 28.0]]
        );
    }

    #[test]
    fn moderate_factor_reproduces_covariance() {
        let corr = crate::instance::correlation_regime("moderate").unwrap();
        let sigma = [25.0, 40.0, 28.0];
        let l = cholesky(&corr, &sigma).unwrap();
        let cov = sigma_matrix(&corr, &sigma);
        assert_eq!(cov[0][1], 300.0);
        for i in 0..3 {
            for j in 0..3 {
                let llt: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((llt - cov[i][j]).abs() < 1e-9, "({i},{j}) {llt} vs {}", cov[i][j]);
            }
        }
    }

    #[test]
    fn over_unit_correlation_fails() {
        let r = 1.0 + 1e-6;
        let corr = vec![vec![1.0, r, 0.0], vec![r, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert!(matches!(
            cholesky(&corr, &[1.0, 1.0, 1.0]),
            Err(Error::Factorization { pivot: 1, .. })
        ));
    }

    #[test]
    fn singular_psd_is_accepted() {
        let corr = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let l = cholesky(&corr, &[2.0, 3.0]).unwrap();
        assert_eq!(l[1][1], 0.0);
        assert!((l[1][0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_determinism() {
        let inst = builtin_stochastic_instance();
        let a = sample(&inst, 5, 42).unwrap();
        let b = sample(&inst, 5, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample(&inst, 5, 43).unwrap());
        // A prefix of a larger draw is the smaller draw.
        let c = sample(&inst, 9, 42).unwrap();
        assert_eq!(&c.demands[..5], &a.demands[..]);
        assert_eq!(a.regime, "moderate");
    }

    #[test]
    fn fixed_instance_is_rejected() {
        assert!(matches!(
            sample(&builtin_deterministic_instance(), 3, 1),
            Err(Error::WrongDemandVariant { .. })
        ));
    }

    #[test]
    fn csv_round_trip_to_two_decimals() {
        let set = sample(&builtin_stochastic_instance(), 20, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        save_scenarios(&set, &path).unwrap();
        let back = load_scenarios(&path).unwrap();
        assert_eq!(back, set.rounded());
        assert_eq!(back.seed, 3);
    }

    #[test]
    fn short_row_reports_line() {
        let err = parse_scenarios_csv("t1,t2,t3\n1,2,3\n4,5\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_scenarios_csv("t1,t2\n1,x\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn empty_file_has_no_scenarios() {
        assert!(matches!(parse_scenarios_csv(""), Err(Error::NoScenarios)));
        assert!(matches!(parse_scenarios_csv("t1,t2,t3\n"), Err(Error::NoScenarios)));
    }
}
