use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::market_env::{ContextLaw, MarketEnvironment, MeanUtility, NoiseLaw, NoiseSpec};
use crate::nn_regress::EstimatorKind;
use crate::noise_cdf::KernelSpec;
use crate::policy::{ExplorationRule, PolicyConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentName {
    QuadraticSim,
    QuadraticCalibration,
    /// Linear utility with the quartic noise; a control where the parametric
    /// mean is correct.
    LinearSim,
    /// Linear utility with truncated Gaussian noise (`sigma = 0.5`); both
    /// parametric assumptions hold up to truncation.
    LinearGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Dnn,
    Tdnn,
    LinearKernel,
    Rmlp2,
    Oracle,
    UniformRandom,
}

impl PolicyName {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyName::Dnn => "dnn",
            PolicyName::Tdnn => "tdnn",
            PolicyName::LinearKernel => "linear_kernel",
            PolicyName::Rmlp2 => "rmlp2",
            PolicyName::Oracle => "oracle",
            PolicyName::UniformRandom => "uniform_random",
        }
    }
}

impl std::fmt::Display for PolicyName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<PolicyName>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(PolicyName),
        Many(Vec<PolicyName>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(p) => vec![p],
        OneOrMany::Many(v) => v,
    })
}

fn default_policy() -> Vec<PolicyName> {
    vec![PolicyName::Dnn]
}

/// Experiment description, read from a flat TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub environment: EnvironmentName,
    #[serde(default = "default_policy", deserialize_with = "one_or_many")]
    pub policy: Vec<PolicyName>,
    #[serde(default = "RunConfig::default_n0")]
    pub n0: usize,
    #[serde(default = "RunConfig::default_episodes")]
    pub episodes: usize,
    #[serde(default = "RunConfig::default_m")]
    pub m: u32,
    #[serde(default = "RunConfig::default_bandwidth_c")]
    pub bandwidth_c: f64,
    #[serde(default = "RunConfig::default_rule")]
    pub exploration_rule: ExplorationRule,
    #[serde(default = "RunConfig::default_eps_floor")]
    pub eps_floor: f64,
    #[serde(default = "RunConfig::default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "RunConfig::default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub price_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
}

impl RunConfig {
    fn default_n0() -> usize {
        200
    }
    fn default_episodes() -> usize {
        6
    }
    fn default_m() -> u32 {
        2
    }
    fn default_bandwidth_c() -> f64 {
        6.0
    }
    fn default_rule() -> ExplorationRule {
        ExplorationRule::Smoothness
    }
    fn default_eps_floor() -> f64 {
        1e-3
    }
    fn default_trials() -> usize {
        5
    }
    fn default_out_dir() -> PathBuf {
        PathBuf::from("pricelab_out")
    }

    /// All defaults on the given environment.
    pub fn new(environment: EnvironmentName) -> Self {
        Self {
            environment,
            policy: default_policy(),
            n0: Self::default_n0(),
            episodes: Self::default_episodes(),
            m: Self::default_m(),
            bandwidth_c: Self::default_bandwidth_c(),
            exploration_rule: Self::default_rule(),
            eps_floor: Self::default_eps_floor(),
            trials: Self::default_trials(),
            seed: 0,
            out_dir: Self::default_out_dir(),
            price_bound: None,
            dimension: None,
            beta: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<config>"),
            reason: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { reason, .. } => Error::Parse {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.policy.is_empty() {
            return Err(Error::config("policy", "no policy given"));
        }
        let mut seen = self.policy.clone();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("policy", "duplicate policy"));
        }
        self.policy_config(PolicyName::Dnn).validate()?;
        self.build_environment()?;
        Ok(())
    }

    /// The shared policy knobs, with the estimator taken from `policy`.
    pub fn policy_config(&self, policy: PolicyName) -> PolicyConfig {
        PolicyConfig {
            estimator: if policy == PolicyName::Tdnn {
                EstimatorKind::Tdnn
            } else {
                EstimatorKind::Dnn
            },
            n0: self.n0,
            episodes: self.episodes,
            m: self.m,
            bandwidth_c: self.bandwidth_c,
            exploration_rule: self.exploration_rule,
            eps_floor: self.eps_floor,
            working_interval: None,
            kernel: KernelSpec::sim(),
        }
    }

    pub fn build_environment(&self) -> Result<MarketEnvironment> {
        let check_dim = |d: usize| match self.dimension {
            Some(given) if given != d => Err(Error::config(
                "dimension",
                format!("environment has dimension {d}, config says {given}"),
            )),
            _ => Ok(()),
        };
        if self.beta.is_some() && self.environment != EnvironmentName::QuadraticCalibration {
            return Err(Error::config("beta", "only used by quadratic_calibration"));
        }
        match self.environment {
            EnvironmentName::QuadraticSim => {
                check_dim(3)?;
                match self.price_bound {
                    None => Ok(MarketEnvironment::quadratic_sim()),
                    Some(b) => MarketEnvironment::new(
                        ContextLaw::uniform(3, 0.0, 2.0)?,
                        MeanUtility::QuadraticSim,
                        NoiseSpec::quartic_sim(),
                        b,
                    ),
                }
            }
            EnvironmentName::QuadraticCalibration => {
                let beta = self
                    .beta
                    .clone()
                    .ok_or_else(|| Error::config("beta", "required by quadratic_calibration"))?;
                if beta.is_empty() {
                    return Err(Error::config("beta", "must not be empty"));
                }
                check_dim(beta.len())?;
                MarketEnvironment::quadratic_calibration(beta, self.price_bound)
            }
            EnvironmentName::LinearSim | EnvironmentName::LinearGaussian => {
                let d = self.dimension.unwrap_or(3);
                if d == 0 {
                    return Err(Error::config("dimension", "must be at least 1"));
                }
                let noise = if self.environment == EnvironmentName::LinearSim {
                    NoiseSpec::quartic_sim()
                } else {
                    NoiseSpec::new(NoiseLaw::TruncatedGaussian {
                        sigma: 0.5,
                        half_width: 1.5,
                    })?
                };
                MarketEnvironment::new(
                    ContextLaw::uniform(d, 0.0, 2.0)?,
                    MeanUtility::Linear {
                        coef: vec![1.5 / d as f64; d],
                        intercept: 1.0,
                    },
                    noise,
                    self.price_bound.unwrap_or(6.5),
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_full_files() {
        let c = RunConfig::from_toml_str("environment = \"quadratic_sim\"\n").unwrap();
        assert_eq!(c, RunConfig::new(EnvironmentName::QuadraticSim));

        let c = RunConfig::from_toml_str(
            r#"
environment = "quadratic_calibration"
policy = ["dnn", "rmlp2"]
n0 = 100
episodes = 4
m = 4
bandwidth_c = 3.5
exploration_rule = "dimension"
eps_floor = 0.01
trials = 2
seed = 17
out_dir = "runs/cal"
B = 7.0
dimension = 4
beta = [0.25, 0.25, 0.25, 0.25]
"#,
        )
        .unwrap();
        assert_eq!(c.policy, vec![PolicyName::Dnn, PolicyName::Rmlp2]);
        assert_eq!(c.exploration_rule, ExplorationRule::Dimension);
        assert_eq!(c.price_bound, Some(7.0));
        assert_eq!(c.build_environment().unwrap().dimension(), 4);
    }

    #[test]
    fn single_policy_string() {
        let c = RunConfig::from_toml_str("environment = \"quadratic_sim\"\npolicy = \"oracle\"\n").unwrap();
        assert_eq!(c.policy, vec![PolicyName::Oracle]);
    }

    #[test]
    fn errors_name_the_field() {
        let field_of = |text: &str| match RunConfig::from_toml_str(text) {
            Err(Error::InvalidConfig { field, .. }) => field,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(field_of("environment = \"quadratic_sim\"\ntrials = 0\n"), "trials");
        assert_eq!(field_of("environment = \"quadratic_sim\"\nn0 = 1\n"), "n0");
        assert_eq!(field_of("environment = \"quadratic_sim\"\nepisodes = 0\n"), "episodes");
        assert_eq!(field_of("environment = \"quadratic_sim\"\ndimension = 4\n"), "dimension");
        assert_eq!(field_of("environment = \"quadratic_sim\"\nB = 3.0\n"), "B");
        assert_eq!(field_of("environment = \"quadratic_calibration\"\n"), "beta");
        assert_eq!(field_of("environment = \"quadratic_sim\"\nbeta = [1.0]\n"), "beta");

        match RunConfig::from_toml_str("environment = \"quadratic_sim\"\nbogus = 1\n") {
            Err(Error::Parse { reason, .. }) => assert!(reason.contains("bogus"), "{reason}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::new(EnvironmentName::QuadraticCalibration);
        c.beta = Some(vec![0.25, 0.5]);
        c.price_bound = Some(6.0);
        c.policy = vec![PolicyName::Tdnn, PolicyName::Oracle];
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn control_environments_build() {
        for env in [EnvironmentName::LinearSim, EnvironmentName::LinearGaussian] {
            let e = RunConfig::new(env).build_environment().unwrap();
            assert_eq!(e.dimension(), 3);
        }
    }
}
