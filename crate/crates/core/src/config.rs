//! Experiment config files: flat `key = value` lines, `#` comments.
//!
//! Learning hyperparameters may be set globally (`alpha = 0.05`) or for one
//! algorithm (`qlearning.alpha = 0.05`); the prefixed form wins. A
//! `preset = NAME` line applies a bundled preset at that point, so later
//! lines override it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agents::{CongestionMode, EpsilonSchedule, RewardPolicy};
use crate::engine::{AgentParams, Algorithm, AlgorithmRun, ExperimentConfig};
use crate::grid::LinkSharing;
use crate::presets;
use crate::rsa::{ModulationPolicy, ModulationTable, RsaError};
use crate::topology::{PathLimit, Topology, TopologyError};
use crate::traffic::{LoadNormalization, TrafficConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<ConfigError>,
    },
    #[error("line is not `key = value`: {0:?}")]
    Syntax(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("missing required key {0:?}")]
    Missing(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("reading {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Modulation(#[from] RsaError),
}

fn invalid(key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.to_string(),
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| invalid(key, format!("{value:?}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologySource {
    Nsfnet,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableSource {
    Default,
    File(PathBuf),
}

/// Learning hyperparameters, each optional until resolved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    pub epsilon: Option<EpsilonSchedule>,
    pub routed_reward: Option<f64>,
    pub blocked_penalty: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub congestion_state: Option<CongestionMode>,
}

const PARAM_KEYS: [&str; 7] = [
    "epsilon",
    "routed_reward",
    "blocked_penalty",
    "alpha",
    "gamma",
    "c",
    "congestion_state",
];

impl ParamSet {
    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "epsilon" => self.epsilon = Some(parse_value(key, value)?),
            "routed_reward" => self.routed_reward = Some(parse_value(key, value)?),
            "blocked_penalty" => self.blocked_penalty = Some(parse_value(key, value)?),
            "alpha" => self.alpha = Some(parse_value(key, value)?),
            "gamma" => self.gamma = Some(parse_value(key, value)?),
            "c" => self.c = Some(parse_value(key, value)?),
            "congestion_state" => self.congestion_state = Some(parse_value(key, value)?),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    fn write(&self, prefix: &str, out: &mut String) {
        let mut line = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                let _ = writeln!(out, "{prefix}{k} = {v}");
            }
        };
        line("epsilon", self.epsilon.map(|e| e.to_string()));
        line("routed_reward", self.routed_reward.map(|v| v.to_string()));
        line(
            "blocked_penalty",
            self.blocked_penalty.map(|v| v.to_string()),
        );
        line("alpha", self.alpha.map(|v| v.to_string()));
        line("gamma", self.gamma.map(|v| v.to_string()));
        line("c", self.c.map(|v| v.to_string()));
        line(
            "congestion_state",
            self.congestion_state.map(|v| v.to_string()),
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub topology: TopologySource,
    pub modulation_table: TableSource,
    pub k: PathLimit,
    pub algorithms: Vec<Algorithm>,
    pub erlang: Option<f64>,
    pub mean_holding: f64,
    pub cores_per_link: usize,
    pub slots_per_core: usize,
    pub requests_per_episode: usize,
    pub bit_rate_weights: Vec<(u32, f64)>,
    pub guard_band: usize,
    pub modulation_policy: ModulationPolicy,
    pub load_normalization: LoadNormalization,
    pub link_sharing: LinkSharing,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Episodes averaged for the final-performance figure.
    pub final_window: usize,
    pub params: ParamSet,
    pub algorithm_params: BTreeMap<Algorithm, ParamSet>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let traffic = TrafficConfig::new(1.0);
        RunConfig {
            topology: TopologySource::Nsfnet,
            modulation_table: TableSource::Default,
            k: PathLimit::Limited(3),
            algorithms: Vec::new(),
            erlang: None,
            mean_holding: traffic.mean_holding,
            cores_per_link: traffic.cores_per_link,
            slots_per_core: 128,
            requests_per_episode: traffic.requests_per_episode,
            bit_rate_weights: traffic.bit_rate_weights,
            guard_band: 1,
            modulation_policy: ModulationPolicy::TryAll,
            load_normalization: LoadNormalization::MultiplyByCores,
            link_sharing: LinkSharing::Bidirectional,
            episodes: 100,
            seeds: vec![0, 1, 2, 3],
            final_window: 10,
            params: ParamSet::default(),
            algorithm_params: BTreeMap::new(),
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| parse_value(key, v.trim()))
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        config.apply(text)?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn from_preset(name: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        config.set("preset", name)?;
        Ok(config)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at_line = |e: ConfigError| ConfigError::Line {
                line: n + 1,
                source: Box::new(e),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at_line(ConfigError::Syntax(line.to_string())))?;
            self.set(key.trim(), value.trim()).map_err(at_line)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "preset" => {
                let text = presets::preset(value)
                    .ok_or_else(|| ConfigError::UnknownPreset(value.to_string()))?;
                self.apply(&text)?;
            }
            "topology" => {
                self.topology = if value == "nsfnet" {
                    TopologySource::Nsfnet
                } else {
                    TopologySource::File(PathBuf::from(value))
                }
            }
            "modulation_table" => {
                self.modulation_table = if value == "default" {
                    TableSource::Default
                } else {
                    TableSource::File(PathBuf::from(value))
                }
            }
            "k" => self.k = parse_value(key, value)?,
            "algorithm" | "algorithms" => {
                let algorithms: Vec<Algorithm> = parse_list(key, value)?;
                if algorithms.is_empty() {
                    return Err(invalid(key, "no algorithms listed"));
                }
                self.algorithms = algorithms;
            }
            "erlang" => self.erlang = Some(parse_value(key, value)?),
            "mean_holding" => self.mean_holding = parse_value(key, value)?,
            "cores_per_link" => self.cores_per_link = parse_value(key, value)?,
            "slots_per_core" => self.slots_per_core = parse_value(key, value)?,
            "requests_per_episode" => self.requests_per_episode = parse_value(key, value)?,
            "bit_rate_weights" => {
                let mut weights = Vec::new();
                for item in value.split(',') {
                    let (rate, w) = item.split_once(':').ok_or_else(|| {
                        invalid(key, format!("expected rate:weight, got {:?}", item.trim()))
                    })?;
                    weights.push((parse_value(key, rate.trim())?, parse_value(key, w.trim())?));
                }
                self.bit_rate_weights = weights;
            }
            "guard_band" => self.guard_band = parse_value(key, value)?,
            "modulation_policy" => self.modulation_policy = parse_value(key, value)?,
            "load_normalization" => self.load_normalization = parse_value(key, value)?,
            "link_sharing" => self.link_sharing = parse_value(key, value)?,
            "episodes" => self.episodes = parse_value(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "final_window" => self.final_window = parse_value(key, value)?,
            _ => match key.split_once('.') {
                Some((alg, param)) => {
                    let algorithm: Algorithm = alg
                        .parse()
                        .map_err(|_| ConfigError::UnknownKey(key.to_string()))?;
                    if !algorithm.is_learning() || !PARAM_KEYS.contains(&param) {
                        return Err(ConfigError::UnknownKey(key.to_string()));
                    }
                    self.algorithm_params
                        .entry(algorithm)
                        .or_default()
                        .set(param, value)?;
                }
                None => self.params.set(key, value)?,
            },
        }
        Ok(())
    }

    /// Canonical `key = value` text; parsing it gives back this config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line(
            "topology",
            match &self.topology {
                TopologySource::Nsfnet => "nsfnet".into(),
                TopologySource::File(p) => p.display().to_string(),
            },
        );
        line(
            "modulation_table",
            match &self.modulation_table {
                TableSource::Default => "default".into(),
                TableSource::File(p) => p.display().to_string(),
            },
        );
        line("k", self.k.to_string());
        if !self.algorithms.is_empty() {
            line("algorithm", join(&self.algorithms));
        }
        if let Some(e) = self.erlang {
            line("erlang", e.to_string());
        }
        line("mean_holding", self.mean_holding.to_string());
        line("cores_per_link", self.cores_per_link.to_string());
        line("slots_per_core", self.slots_per_core.to_string());
        line(
            "requests_per_episode",
            self.requests_per_episode.to_string(),
        );
        line(
            "bit_rate_weights",
            self.bit_rate_weights
                .iter()
                .map(|(r, w)| format!("{r}:{w}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        line("guard_band", self.guard_band.to_string());
        line("modulation_policy", self.modulation_policy.to_string());
        line("load_normalization", self.load_normalization.to_string());
        line("link_sharing", self.link_sharing.to_string());
        line("episodes", self.episodes.to_string());
        line("seeds", join(&self.seeds));
        line("final_window", self.final_window.to_string());
        self.params.write("", &mut out);
        for (alg, params) in &self.algorithm_params {
            params.write(&format!("{alg}."), &mut out);
        }
        out
    }

    fn resolve(&self, algorithm: Algorithm) -> Result<AgentParams, ConfigError> {
        let own = self.algorithm_params.get(&algorithm);
        macro_rules! pick {
            ($field:ident) => {
                own.and_then(|p| p.$field).or(self.params.$field)
            };
        }
        let need = |name: &str| ConfigError::Missing(format!("{algorithm}.{name}"));
        let routed = pick!(routed_reward).ok_or_else(|| need("routed_reward"))?;
        let penalty = pick!(blocked_penalty).ok_or_else(|| need("blocked_penalty"))?;
        let rewards = RewardPolicy::new(routed, penalty)
            .map_err(|m| invalid(&format!("{algorithm} rewards"), m))?;
        let epsilon = pick!(epsilon).ok_or_else(|| need("epsilon"))?;
        let (alpha, gamma) = match algorithm {
            Algorithm::QLearning => (
                pick!(alpha).ok_or_else(|| need("alpha"))?,
                pick!(gamma).ok_or_else(|| need("gamma"))?,
            ),
            _ => (0.0, 0.0),
        };
        let c = match algorithm {
            Algorithm::Ucb => pick!(c).ok_or_else(|| need("c"))?,
            _ => 0.0,
        };
        Ok(AgentParams {
            rewards,
            epsilon,
            alpha,
            gamma,
            c,
            congestion: pick!(congestion_state).unwrap_or_default(),
        })
    }

    /// Checks required keys and builds the engine config, loading files.
    pub fn to_experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        let erlang = self
            .erlang
            .ok_or_else(|| ConfigError::Missing("erlang".into()))?;
        if self.algorithms.is_empty() {
            return Err(ConfigError::Missing("algorithm".into()));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "seed list is empty"));
        }
        if self.episodes == 0 {
            return Err(invalid("episodes", "must be at least 1"));
        }
        if self.final_window == 0 {
            return Err(invalid("final_window", "must be at least 1"));
        }
        let runs = self
            .algorithms
            .iter()
            .map(|&algorithm| {
                Ok(AlgorithmRun {
                    algorithm,
                    params: if algorithm.is_learning() {
                        Some(self.resolve(algorithm)?)
                    } else {
                        None
                    },
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let topology = match &self.topology {
            TopologySource::Nsfnet => Topology::nsfnet(),
            TopologySource::File(p) => Topology::load(p)?,
        };
        let table = match &self.modulation_table {
            TableSource::Default => ModulationTable::default(),
            TableSource::File(p) => ModulationTable::load(p)?,
        };
        let traffic = TrafficConfig {
            erlang,
            mean_holding: self.mean_holding,
            cores_per_link: self.cores_per_link,
            requests_per_episode: self.requests_per_episode,
            bit_rate_weights: self.bit_rate_weights.clone(),
            normalization: self.load_normalization,
        };
        traffic.validate().map_err(|m| invalid("traffic", m))?;
        let config = ExperimentConfig {
            topology,
            table,
            k: self.k,
            runs,
            traffic,
            slots_per_core: self.slots_per_core,
            link_sharing: self.link_sharing,
            guard_band: self.guard_band,
            modulation_policy: self.modulation_policy,
            episodes: self.episodes,
            seeds: self.seeds.clone(),
        };
        config.validate().map_err(|e| invalid("experiment", e))?;
        Ok(config)
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}
