use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agent::AgentConfig;
use crate::curriculum::{CurriculumConfig, Mode};
use crate::envs::EnvKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Samples the target on the flat MDP.
    Default,
    /// Samples the target on the product MDP.
    DefaultStar,
    Spdl,
    Intermediate,
    RmGuided,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Default,
        Method::DefaultStar,
        Method::Spdl,
        Method::Intermediate,
        Method::RmGuided,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Default => "default",
            Method::DefaultStar => "default_star",
            Method::Spdl => "spdl",
            Method::Intermediate => "intermediate",
            Method::RmGuided => "rm_guided",
        }
    }

    /// Whether the agent sees the reward-machine state.
    pub fn uses_product(self) -> bool {
        !matches!(self, Method::Default | Method::Spdl)
    }

    /// Curriculum weighting, or `None` for methods that sample the target.
    pub fn curriculum_mode(self) -> Option<Mode> {
        match self {
            Method::Default | Method::DefaultStar => None,
            Method::Spdl => Some(Mode::Spdl),
            Method::Intermediate => Some(Mode::Intermediate),
            Method::RmGuided => Some(Mode::RmGuided),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// Where the reward-machine-context mapping comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingSource {
    /// The environment's expert table.
    Declared,
    /// Brute force over a context grid.
    Computed,
    /// Every pair maps to all dimensions.
    Full,
}

/// What to do when a declared mapping is checked against the computed one.
///
/// An UNSOUND table is rejected unless the check is off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingCheck {
    Off,
    /// Log SOUND-NOT-MINIMAL entries and carry on.
    Warn,
    /// Reject anything but an exact table.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub method: Method,
    pub env: String,
    /// Reward machine file; the environment's built-in machine when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rm: Option<PathBuf>,
    #[serde(default = "default_mapping")]
    pub mapping: MappingSource,
    /// Applies to declared mappings.
    #[serde(default = "default_mapping_check")]
    pub mapping_check: MappingCheck,
    /// Points per dimension when the mapping is computed.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Curriculum iterations `K`.
    pub iterations: usize,
    /// Rollouts per iteration `N`.
    pub rollouts: usize,
    pub n_eval: usize,
    pub seeds: Vec<u64>,
    /// Discount override; the environment's own when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub init_mean: Vec<f64>,
    pub init_var: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_var: Vec<f64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_mapping() -> MappingSource {
    MappingSource::Declared
}

fn default_mapping_check() -> MappingCheck {
    MappingCheck::Warn
}

fn default_grid() -> usize {
    5
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub curriculum: CurriculumConfig<f64>,
    #[serde(default)]
    pub agent: AgentConfig,
}

impl ExperimentConfig {
    /// Two-door 8x8, 60 iterations of 32 rollouts, five seeds.
    pub fn desk(method: Method) -> Self {
        ExperimentConfig {
            experiment: ExperimentSection {
                method,
                env: EnvKind::TwoDoor8.name().to_string(),
                rm: None,
                mapping: MappingSource::Declared,
                mapping_check: MappingCheck::Warn,
                grid: 5,
                iterations: 60,
                rollouts: 32,
                n_eval: 50,
                seeds: (0..5).collect(),
                gamma: None,
                // Doors above the start cell.
                init_mean: vec![0.0, 0.0],
                init_var: vec![0.25, 0.25],
                target_mean: vec![2.0, 2.0],
                target_var: vec![1.0, 1.0],
                out_dir: default_out_dir(),
            },
            curriculum: CurriculumConfig {
                zeta: 4.0,
                k_alpha: 15,
                ..CurriculumConfig::default()
            },
            // Transitions are deterministic, so full-step updates lose nothing; mild
            // optimism spreads the parallel rollouts of one batch over untried actions.
            agent: AgentConfig {
                eta: 1.0,
                q_init: 2.0,
                ..AgentConfig::default()
            },
        }
    }

    /// Two-door 40x40 with the published penalty offset.
    pub fn full(method: Method) -> Self {
        let mut config = Self::desk(method);
        config.experiment.env = EnvKind::TwoDoor40.name().to_string();
        config.experiment.iterations = 150;
        config.curriculum.k_alpha = 70;
        config
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn env_kind(&self) -> Result<EnvKind, HarnessError> {
        self.experiment
            .env
            .parse()
            .map_err(|e: crate::envs::UnknownEnv| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let e = &self.experiment;
        let bad = |m: String| Err(HarnessError::Config(m));
        let env = self.env_kind()?;
        let dims = env.build::<f64>().as_cmdp().context_space().dims();
        if e.iterations == 0 || e.rollouts == 0 {
            return bad("iterations and rollouts must be at least 1".into());
        }
        if e.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        for (name, v) in [
            ("init_mean", &e.init_mean),
            ("init_var", &e.init_var),
            ("target_mean", &e.target_mean),
            ("target_var", &e.target_var),
        ] {
            if v.len() != dims {
                return bad(format!("{name} has {} entries, the context space has {dims}", v.len()));
            }
        }
        // `0.1 * 0.1` rounds above `0.01`; accept values written at the floor.
        let floor = self.curriculum.sigma_lb * self.curriculum.sigma_lb;
        if e.init_var.iter().chain(&e.target_var).any(|&v| !(v >= floor * (1.0 - 1e-12))) {
            return bad(format!("variances must be at least sigma_lb^2 = {floor}"));
        }
        let space = env.build::<f64>();
        let space = space.as_cmdp().context_space();
        if !space.contains(&e.init_mean) || !space.contains(&e.target_mean) {
            return bad("initial and target means must lie in the context space".into());
        }
        if let Some(g) = e.gamma {
            if !(0.0..1.0).contains(&g) {
                return bad("gamma must lie in [0, 1)".into());
            }
        }
        if e.grid == 0 {
            return bad("grid needs at least one point per dimension".into());
        }
        if !(0.0..=1.0).contains(&self.agent.explore_start) || !(0.0..=1.0).contains(&self.agent.explore_end) {
            return bad("exploration rates must lie in [0, 1]".into());
        }
        if self.agent.bins == 0 {
            return bad("agent bins must be positive".into());
        }
        self.curriculum.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }
}
