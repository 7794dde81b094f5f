//! Problem data for the unit commitment problem and the built-in benchmark.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler;

/// Static characteristics of one thermal unit.
///
/// Powers and ramp limits are whole megawatts. Costs are dollars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub p_min: i64,
    pub p_max: i64,
    /// Maximum increase of output between consecutive periods (MW/h).
    pub r_up: i64,
    /// Maximum decrease of output between consecutive periods (MW/h).
    pub r_down: i64,
    pub c_startup: f64,
    pub c_shutdown: f64,
    /// Cost per committed period.
    pub c_fixed: f64,
    /// Marginal cost ($/MWh).
    pub b: f64,
}

/// Commitment and output of every unit before the first period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub u0: Vec<u8>,
    pub p0: Vec<i64>,
}

/// Demand model: a known profile or a multivariate normal vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DemandSpec {
    Fixed {
        d: Vec<f64>,
    },
    Gaussian {
        mu: Vec<f64>,
        sigma: Vec<f64>,
        corr: Vec<Vec<f64>>,
    },
}

impl DemandSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            DemandSpec::Fixed { .. } => "fixed",
            DemandSpec::Gaussian { .. } => "gaussian",
        }
    }
}

/// A complete unit commitment instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UcpInstance {
    pub generators: Vec<GeneratorParams>,
    pub horizon: usize,
    pub initial: InitialState,
    pub demand: DemandSpec,
}

impl UcpInstance {
    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self.demand, DemandSpec::Gaussian { .. })
    }

    /// The fixed demand profile, or an error for Gaussian instances.
    pub fn fixed_demand(&self) -> Result<&[f64]> {
        match &self.demand {
            DemandSpec::Fixed { d } => Ok(d),
            other => Err(Error::WrongDemandVariant {
                expected: "fixed",
                found: other.kind(),
            }),
        }
    }

    /// Same instance with the demand replaced by a fixed profile.
    pub fn with_fixed_demand(&self, d: Vec<f64>) -> UcpInstance {
        UcpInstance {
            demand: DemandSpec::Fixed { d },
            ..self.clone()
        }
    }

    /// Total nameplate capacity.
    pub fn total_capacity(&self) -> i64 {
        self.generators.iter().map(|g| g.p_max).sum()
    }

    pub fn from_json_str(text: &str) -> Result<UcpInstance> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    /// Reads an instance file and rejects it if [`validate`] reports anything.
    pub fn load(path: impl AsRef<Path>) -> Result<UcpInstance> {
        let text = std::fs::read_to_string(path)?;
        let instance = UcpInstance::from_json_str(&text)?;
        let report = validate(&instance);
        if !report.is_empty() {
            let joined: Vec<String> = report.iter().map(ToString::to_string).collect();
            return Err(Error::InvalidInstance(joined.join("; ")));
        }
        Ok(instance)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

/// The three demand correlation presets for a three-period horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationRegime {
    None,
    Moderate,
    Strong,
}

impl CorrelationRegime {
    pub const ALL: [CorrelationRegime; 3] = [
        CorrelationRegime::None,
        CorrelationRegime::Moderate,
        CorrelationRegime::Strong,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorrelationRegime::None => "none",
            CorrelationRegime::Moderate => "moderate",
            CorrelationRegime::Strong => "strong",
        }
    }

    /// (rho_12, rho_13, rho_23)
    fn coefficients(self) -> [f64; 3] {
        match self {
            CorrelationRegime::None => [0.0, 0.0, 0.0],
            CorrelationRegime::Moderate => [0.3, 0.4, 0.5],
            CorrelationRegime::Strong => [0.6, 0.7, 0.8],
        }
    }

    pub fn matrix(self) -> Vec<Vec<f64>> {
        let [r12, r13, r23] = self.coefficients();
        let corr = vec![
            vec![1.0, r12, r13],
            vec![r12, 1.0, r23],
            vec![r13, r23, 1.0],
        ];
        assert!(
            sampler::cholesky(&corr, &[1.0; 3]).is_ok(),
            "built-in correlation regime must be positive semidefinite"
        );
        corr
    }
}

impl fmt::Display for CorrelationRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorrelationRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CorrelationRegime::None),
            "moderate" => Ok(CorrelationRegime::Moderate),
            "strong" => Ok(CorrelationRegime::Strong),
            other => Err(Error::UnknownRegime(other.to_string())),
        }
    }
}

/// Correlation matrix of a named preset.
pub fn correlation_regime(name: &str) -> Result<Vec<Vec<f64>>> {
    Ok(name.parse::<CorrelationRegime>()?.matrix())
}

fn builtin_generators() -> Vec<GeneratorParams> {
    vec![
        GeneratorParams {
            p_min: 50,
            p_max: 350,
            r_up: 200,
            r_down: 300,
            c_startup: 20.0,
            c_shutdown: 0.5,
            c_fixed: 5.0,
            b: 0.10,
        },
        GeneratorParams {
            p_min: 80,
            p_max: 200,
            r_up: 100,
            r_down: 150,
            c_startup: 18.0,
            c_shutdown: 0.3,
            c_fixed: 7.0,
            b: 0.125,
        },
        GeneratorParams {
            p_min: 40,
            p_max: 140,
            r_up: 100,
            r_down: 100,
            c_startup: 5.0,
            c_shutdown: 1.0,
            c_fixed: 6.0,
            b: 0.150,
        },
    ]
}

fn builtin_initial() -> InitialState {
    InitialState {
        u0: vec![0, 0, 1],
        p0: vec![0, 0, 100],
    }
}

/// Three units, three periods, Gaussian demand with the moderate regime.
pub fn builtin_stochastic_instance() -> UcpInstance {
    builtin_stochastic_instance_with(CorrelationRegime::Moderate)
}

pub fn builtin_stochastic_instance_with(regime: CorrelationRegime) -> UcpInstance {
    UcpInstance {
        generators: builtin_generators(),
        horizon: 3,
        initial: builtin_initial(),
        demand: DemandSpec::Gaussian {
            mu: vec![225.0, 630.0, 400.0],
            sigma: vec![25.0, 40.0, 28.0],
            corr: regime.matrix(),
        },
    }
}

/// Three units, three periods, demand fixed at (160, 500, 400) MW.
pub fn builtin_deterministic_instance() -> UcpInstance {
    UcpInstance {
        generators: builtin_generators(),
        horizon: 3,
        initial: builtin_initial(),
        demand: DemandSpec::Fixed {
            d: vec![160.0, 500.0, 400.0],
        },
    }
}

/// One violated structural invariant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Lists every violated invariant of `instance`. An empty list means valid.
pub fn validate(instance: &UcpInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |location: String, message: String| out.push(Violation { location, message });

    let g_count = instance.generators.len();
    let horizon = instance.horizon;
    if g_count == 0 {
        push("generators".into(), "at least one generator is required".into());
    }
    if horizon == 0 {
        push("horizon".into(), "horizon must be at least one period".into());
    }

    for (g, gen) in instance.generators.iter().enumerate() {
        let loc = format!("generator {}", g + 1);
        for (field, value) in [
            ("p_min", gen.p_min),
            ("p_max", gen.p_max),
            ("r_up", gen.r_up),
            ("r_down", gen.r_down),
        ] {
            if value < 0 {
                push(loc.clone(), format!("{field} ({value}) is negative"));
            }
        }
        if gen.p_min > gen.p_max {
            push(
                loc.clone(),
                format!("p_min ({}) exceeds p_max ({})", gen.p_min, gen.p_max),
            );
        }
        for (field, value) in [
            ("c_startup", gen.c_startup),
            ("c_shutdown", gen.c_shutdown),
            ("c_fixed", gen.c_fixed),
            ("b", gen.b),
        ] {
            if !value.is_finite() || value < 0.0 {
                push(loc.clone(), format!("{field} ({value}) must be a nonnegative number"));
            }
        }
    }

    let init = &instance.initial;
    if init.u0.len() != g_count || init.p0.len() != g_count {
        push(
            "initial".into(),
            format!(
                "u0/p0 lengths ({}, {}) must equal the generator count {g_count}",
                init.u0.len(),
                init.p0.len()
            ),
        );
    } else {
        for (g, gen) in instance.generators.iter().enumerate() {
            let loc = format!("initial state of generator {}", g + 1);
            match init.u0[g] {
                0 if init.p0[g] != 0 => {
                    push(loc, format!("unit is off but p0 = {}", init.p0[g]));
                }
                1 if init.p0[g] < gen.p_min || init.p0[g] > gen.p_max => push(
                    loc,
                    format!(
                        "p0 = {} outside [{}, {}]",
                        init.p0[g], gen.p_min, gen.p_max
                    ),
                ),
                0 | 1 => {}
                other => push(loc, format!("u0 = {other} is not binary")),
            }
        }
    }

    match &instance.demand {
        DemandSpec::Fixed { d } => {
            if d.len() != horizon {
                push(
                    "demand".into(),
                    format!("fixed demand has {} entries, horizon is {horizon}", d.len()),
                );
            }
            if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
                push("demand".into(), "demands must be finite and nonnegative".into());
            }
        }
        DemandSpec::Gaussian { mu, sigma, corr } => {
            if mu.len() != horizon || sigma.len() != horizon {
                push(
                    "demand".into(),
                    format!(
                        "mu/sigma lengths ({}, {}) must equal the horizon {horizon}",
                        mu.len(),
                        sigma.len()
                    ),
                );
            }
            if mu.iter().any(|v| !v.is_finite()) {
                push("demand".into(), "mu must be finite".into());
            }
            if sigma.iter().any(|s| !s.is_finite() || *s <= 0.0) {
                push("demand".into(), "sigma must be strictly positive".into());
            }
            let square = corr.len() == horizon && corr.iter().all(|row| row.len() == horizon);
            if !square {
                push(
                    "demand".into(),
                    format!("correlation matrix must be {horizon}x{horizon}"),
                );
            } else {
                let mut well_formed = true;
                for i in 0..horizon {
                    if corr[i][i] != 1.0 {
                        well_formed = false;
                        push(
                            "demand".into(),
                            format!("correlation diagonal entry ({i},{i}) is {}", corr[i][i]),
                        );
                    }
                    for j in 0..horizon {
                        let v = corr[i][j];
                        if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                            well_formed = false;
                            push(
                                "demand".into(),
                                format!("correlation out of range at ({i},{j}): {v}"),
                            );
                        }
                        if j > i && corr[i][j] != corr[j][i] {
                            well_formed = false;
                            push(
                                "demand".into(),
                                format!("correlation matrix is not symmetric at ({i},{j})"),
                            );
                        }
                    }
                }
                if well_formed {
                    if let Err(e) = sampler::cholesky(corr, &vec![1.0; horizon]) {
                        push(
                            "demand".into(),
                            format!("correlation matrix is not positive semidefinite: {e}"),
                        );
                    }
                }
            }
        }
    }
    out
}
