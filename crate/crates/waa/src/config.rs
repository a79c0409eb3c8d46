//! Run configuration: a single JSON document describing spaces, loss,
//! aggregation mode, expert pool, environment, and outputs.
//!
//! Parsing is strict (unknown fields rejected where the format is closed) and
//! every numeric field is validated before a config reaches the runner, so
//! arbitrary input can never panic the engine.

use serde::{Deserialize, Serialize};

use crate::experts::{EnumConfig, FamilyConfig, SpaceDims};
use crate::loss::LossFunction;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spaces {
    pub d_x: usize,
    pub d_y: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "deterministic")]
    Deterministic,
    #[serde(rename = "randomized")]
    Randomized,
    #[serde(rename = "removal")]
    Removal,
    #[serde(rename = "removal-randomized")]
    RemovalRandomized,
}

impl Mode {
    pub fn is_randomized(self) -> bool {
        matches!(self, Mode::Randomized | Mode::RemovalRandomized)
    }

    pub fn is_removal(self) -> bool {
        matches!(self, Mode::Removal | Mode::RemovalRandomized)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Deterministic => "deterministic",
            Mode::Randomized => "randomized",
            Mode::Removal => "removal",
            Mode::RemovalRandomized => "removal-randomized",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(Mode::Deterministic),
            "randomized" => Ok(Mode::Randomized),
            "removal" => Ok(Mode::Removal),
            "removal-randomized" => Ok(Mode::RemovalRandomized),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Loss kinds expressible in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "squared_norm")]
    SquaredNorm,
    #[serde(rename = "absolute_norm")]
    AbsoluteNorm,
}

impl LossKind {
    pub fn to_loss(self) -> LossFunction {
        match self {
            LossKind::SquaredNorm => LossFunction::SquaredNorm,
            LossKind::AbsoluteNorm => LossFunction::AbsoluteNorm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorRule {
    /// `q_k` proportional to `2^-k`.
    Dyadic,
    Uniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    /// Number of experts activated from the enumeration.
    pub k_max: usize,
    #[serde(default = "default_priors")]
    pub priors: PriorRule,
    pub families: Vec<FamilyConfig>,
}

fn default_priors() -> PriorRule {
    PriorRule::Dyadic
}

/// Reality's side of the protocol. Generators are pure functions of their
/// seed and round (the adversarial kind additionally reads the announced
/// prediction), so a spec regenerates its sequence exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentSpec {
    IidGaussian {
        mean: Vec<f64>,
        sd: f64,
        #[serde(default)]
        seed: u64,
    },
    Ar1 {
        a: f64,
        c: f64,
        sd: f64,
        #[serde(default)]
        seed: u64,
    },
    DriftingSine {
        amplitude: f64,
        period: f64,
        sd: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Worst extreme point of the observation ball against the announced
    /// prediction; a heuristic adversary above one dimension.
    AdversarialWorstcase {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Observations running off to infinity along the first coordinate.
    Escaping {
        base: f64,
        growth: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl EnvironmentSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EnvironmentSpec::IidGaussian { .. } => "iid_gaussian",
            EnvironmentSpec::Ar1 { .. } => "ar1",
            EnvironmentSpec::DriftingSine { .. } => "drifting_sine",
            EnvironmentSpec::AdversarialWorstcase { .. } => "adversarial_worstcase",
            EnvironmentSpec::Escaping { .. } => "escaping",
        }
    }

    fn validate(&self, d_x: usize, d_y: usize) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be finite")))
            }
        };
        match self {
            EnvironmentSpec::IidGaussian { mean, sd, .. } => {
                if mean.len() != d_y {
                    return Err(Error::Config("iid_gaussian mean must have d_y entries".into()));
                }
                for m in mean {
                    finite(*m, "iid_gaussian mean")?;
                }
                finite(*sd, "iid_gaussian sd")?;
                if *sd < 0.0 {
                    return Err(Error::Config("iid_gaussian sd must be nonnegative".into()));
                }
            }
            EnvironmentSpec::Ar1 { a, c, sd, .. } => {
                finite(*a, "ar1 a")?;
                finite(*c, "ar1 c")?;
                finite(*sd, "ar1 sd")?;
                if *sd < 0.0 {
                    return Err(Error::Config("ar1 sd must be nonnegative".into()));
                }
                if d_x != d_y {
                    return Err(Error::Config(
                        "ar1 feeds y_{n-1} back as the signal and needs d_x == d_y".into(),
                    ));
                }
            }
            EnvironmentSpec::DriftingSine {
                amplitude,
                period,
                sd,
                ..
            } => {
                finite(*amplitude, "drifting_sine amplitude")?;
                finite(*period, "drifting_sine period")?;
                finite(*sd, "drifting_sine sd")?;
                if *period <= 0.0 {
                    return Err(Error::Config("drifting_sine period must be positive".into()));
                }
                if *sd < 0.0 {
                    return Err(Error::Config("drifting_sine sd must be nonnegative".into()));
                }
            }
            EnvironmentSpec::AdversarialWorstcase { center, radius, .. } => {
                if center.len() != d_y {
                    return Err(Error::Config(
                        "adversarial center must have d_y entries".into(),
                    ));
                }
                for c in center {
                    finite(*c, "adversarial center")?;
                }
                finite(*radius, "adversarial radius")?;
                if *radius < 0.0 {
                    return Err(Error::Config("adversarial radius must be nonnegative".into()));
                }
            }
            EnvironmentSpec::Escaping { base, growth, .. } => {
                finite(*base, "escaping base")?;
                finite(*growth, "escaping growth")?;
                if *base <= 0.0 || *growth <= 1.0 {
                    return Err(Error::Config(
                        "escaping needs base > 0 and growth > 1".into(),
                    ));
                }
            }
        }
        let _ = d_x;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemovalConfig {
    /// Base radius of the doubling exhaustion.
    pub r0: f64,
    /// Warm-start restarted engines by exact replay of the clipped pool.
    #[serde(default)]
    pub replay_activation: bool,
}

impl Default for RemovalConfig {
    fn default() -> Self {
        RemovalConfig {
            r0: 2.0,
            replay_activation: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct RandomizedConfig {
    /// A priori bound on `|lambda|` for the law-of-the-iterated-logarithm
    /// monitor; without it the monitor is skipped.
    #[serde(default)]
    pub lil_loss_bound: Option<f64>,
}


#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Per-round CSV trace path.
    #[serde(default)]
    pub trace: Option<String>,
    /// Summary JSON path.
    #[serde(default)]
    pub summary: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spaces: Spaces,
    pub loss: LossKind,
    pub mode: Mode,
    pub pool: PoolConfig,
    pub environment: EnvironmentSpec,
    pub horizon: usize,
    pub rng_seed: u64,
    #[serde(default)]
    pub removal: Option<RemovalConfig>,
    #[serde(default)]
    pub randomized: Option<RandomizedConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Freeze `beta_n` at a constant in `(0, 1)`: the mutation-test mode that
    /// the verification battery must catch.
    #[serde(default)]
    pub mutation_beta: Option<f64>,
}

impl RunConfig {
    pub fn loss_fn(&self) -> LossFunction {
        self.loss.to_loss()
    }

    /// Prediction-space dimension; predictions live in the observation space.
    pub fn d_gamma(&self) -> usize {
        self.spaces.d_y
    }

    pub fn enum_config(&self) -> EnumConfig {
        EnumConfig {
            dims: SpaceDims {
                d_x: self.spaces.d_x,
                d_y: self.spaces.d_y,
                d_gamma: self.d_gamma(),
            },
            families: self.pool.families.clone(),
        }
    }

    pub fn removal_config(&self) -> RemovalConfig {
        self.removal.clone().unwrap_or_default()
    }

    pub fn randomized_config(&self) -> RandomizedConfig {
        self.randomized.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.spaces.d_x == 0 || self.spaces.d_y == 0 {
            return Err(Error::Config("space dimensions must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.pool.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if self.pool.k_max > 4096 {
            return Err(Error::Config("k_max above 4096 is not supported".into()));
        }
        self.enum_config().validate()?;
        self.environment.validate(self.spaces.d_x, self.spaces.d_y)?;
        if !self.mode.is_randomized() && !self.loss_fn().convex_in_prediction() {
            return Err(Error::Config(
                "deterministic modes need a loss convex in the prediction".into(),
            ));
        }
        if let Some(r) = &self.removal {
            if !r.r0.is_finite() || r.r0 <= 0.0 {
                return Err(Error::Config("removal r0 must be positive".into()));
            }
        }
        if let Some(r) = &self.randomized {
            if let Some(l) = r.lil_loss_bound {
                if !l.is_finite() || l <= 0.0 {
                    return Err(Error::Config("lil_loss_bound must be positive".into()));
                }
            }
        }
        if let Some(b) = self.mutation_beta {
            if !b.is_finite() || b <= 0.0 || b >= 1.0 {
                return Err(Error::Config("mutation_beta must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

/// Parse and validate a run config from JSON text. Never panics on malformed
/// input.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::Family;

    pub(crate) fn minimal_config_json() -> String {
        r#"{
            "spaces": {"d_x": 1, "d_y": 1},
            "loss": "squared_norm",
            "mode": "deterministic",
            "pool": {
                "k_max": 4,
                "families": [
                    {"family": "constant", "coeff_range": [-1.0, 1.0]}
                ]
            },
            "environment": {"kind": "iid_gaussian", "mean": [0.5], "sd": 0.1, "seed": 3},
            "horizon": 100,
            "rng_seed": 42
        }"#
        .to_string()
    }

    #[test]
    fn parses_minimal_config() {
        let c = parse_config(&minimal_config_json()).unwrap();
        assert_eq!(c.mode, Mode::Deterministic);
        assert_eq!(c.pool.k_max, 4);
        assert_eq!(c.pool.priors, PriorRule::Dyadic);
        assert_eq!(c.loss.to_loss().kind_name(), "squared_norm");
        assert_eq!(c.pool.families[0].family, Family::Constant);
    }

    #[test]
    fn rejects_malformed_and_invalid() {
        assert!(parse_config("").is_err());
        assert!(parse_config("{").is_err());
        assert!(parse_config("null").is_err());
        let bad_horizon = minimal_config_json().replace("\"horizon\": 100", "\"horizon\": 0");
        assert!(parse_config(&bad_horizon).is_err());
        let bad_loss =
            minimal_config_json().replace("squared_norm", "zero_one");
        assert!(parse_config(&bad_loss).is_err());
        let bad_sd = minimal_config_json().replace("\"sd\": 0.1", "\"sd\": -1.0");
        assert!(parse_config(&bad_sd).is_err());
        let unknown = minimal_config_json().replace("\"rng_seed\": 42", "\"rng_seed\": 42, \"bogus\": 1");
        assert!(parse_config(&unknown).is_err());
    }

    #[test]
    fn ar1_requires_matching_dims() {
        let json = minimal_config_json()
            .replace(
                r#"{"kind": "iid_gaussian", "mean": [0.5], "sd": 0.1, "seed": 3}"#,
                r#"{"kind": "ar1", "a": 0.5, "c": 0.0, "sd": 0.1, "seed": 3}"#,
            )
            .replace(r#""d_x": 1, "d_y": 1"#, r#""d_x": 2, "d_y": 1"#);
        assert!(parse_config(&json).is_err());
    }

    #[test]
    fn mode_strings_round_trip() {
        for (s, m) in [
            ("deterministic", Mode::Deterministic),
            ("randomized", Mode::Randomized),
            ("removal", Mode::Removal),
            ("removal-randomized", Mode::RemovalRandomized),
        ] {
            assert_eq!(s.parse::<Mode>().unwrap(), m);
            assert_eq!(m.name(), s);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{s}\""));
        }
        assert!("other".parse::<Mode>().is_err());
    }

    #[test]
    fn mutation_beta_validated() {
        let json = minimal_config_json().replace(
            "\"rng_seed\": 42",
            "\"rng_seed\": 42, \"mutation_beta\": 0.5",
        );
        assert_eq!(parse_config(&json).unwrap().mutation_beta, Some(0.5));
        let json = minimal_config_json().replace(
            "\"rng_seed\": 42",
            "\"rng_seed\": 42, \"mutation_beta\": 1.5",
        );
        assert!(parse_config(&json).is_err());
    }
}
