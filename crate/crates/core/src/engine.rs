//! Experiment orchestration: episodes, seeds and per-algorithm statistics.
//!
//! Within a seed the agent keeps learning across episodes; every seed starts
//! from a fresh agent. Each episode starts from an empty grid and drains all
//! departures before its statistics close. Traffic for `(seed, episode)` is
//! the same for every algorithm, and exploration draws from its own stream.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::{
    Agent, BanditState, Baseline, CongestionMode, EpsilonSchedule, QLearnState, RewardPolicy,
    RoutingView,
};
use crate::grid::{GridError, LinkSharing, RequestId, SpectrumGrid};
use crate::rsa::{
    BlockReason, Controller, ModulationPolicy, ModulationTable, ProvisionOutcome, RsaError,
};
use crate::topology::{CandidatePaths, PathLimit, Topology, TopologyError};
use crate::traffic::{
    generate_episode, run_events, EventHandler, EventQueue, Request, TrafficConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Rsa(#[from] RsaError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("grid not empty at episode boundary ({0} active allocations)")]
    GridNotEmpty(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    EpsilonGreedy,
    Ucb,
    QLearning,
    SpfFf,
    KspFf,
    KspInf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::EpsilonGreedy,
        Algorithm::Ucb,
        Algorithm::QLearning,
        Algorithm::SpfFf,
        Algorithm::KspFf,
        Algorithm::KspInf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::EpsilonGreedy => "egreedy",
            Algorithm::Ucb => "ucb",
            Algorithm::QLearning => "qlearning",
            Algorithm::SpfFf => "spf_ff",
            Algorithm::KspFf => "ksp_ff",
            Algorithm::KspInf => "ksp_inf",
        }
    }

    pub fn is_learning(self) -> bool {
        matches!(
            self,
            Algorithm::EpsilonGreedy | Algorithm::Ucb | Algorithm::QLearning
        )
    }

    fn baseline(self) -> Option<Baseline> {
        match self {
            Algorithm::SpfFf => Some(Baseline::SpfFf),
            Algorithm::KspFf => Some(Baseline::KspFf),
            Algorithm::KspInf => Some(Baseline::KspInf),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// Hyperparameters for a learning agent. `alpha`/`gamma` matter only for
/// Q-learning and `c` only for UCB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentParams {
    pub rewards: RewardPolicy,
    pub epsilon: EpsilonSchedule,
    pub alpha: f64,
    pub gamma: f64,
    pub c: f64,
    pub congestion: CongestionMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    /// Required for learning algorithms, ignored by baselines.
    pub params: Option<AgentParams>,
}

impl AlgorithmRun {
    pub fn baseline(algorithm: Algorithm) -> Self {
        AlgorithmRun {
            algorithm,
            params: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub topology: Topology,
    pub table: ModulationTable,
    pub k: PathLimit,
    pub runs: Vec<AlgorithmRun>,
    /// `traffic.cores_per_link` also sizes the grid.
    pub traffic: TrafficConfig,
    pub slots_per_core: usize,
    pub link_sharing: LinkSharing,
    pub guard_band: usize,
    pub modulation_policy: ModulationPolicy,
    pub episodes: usize,
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    /// NSFNet, k = 3, the default modulation table, four cores of 128 slots, one guard slot,
    /// 100 episodes over seeds 0..4.
    pub fn nsfnet(erlang: f64, runs: Vec<AlgorithmRun>) -> Self {
        ExperimentConfig {
            topology: Topology::nsfnet(),
            table: ModulationTable::default(),
            k: PathLimit::Limited(3),
            runs,
            traffic: TrafficConfig::new(erlang),
            slots_per_core: 128,
            link_sharing: LinkSharing::Bidirectional,
            guard_band: 1,
            modulation_policy: ModulationPolicy::TryAll,
            episodes: 100,
            seeds: vec![0, 1, 2, 3],
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        if self.runs.is_empty() {
            return bad("no algorithms configured".into());
        }
        self.traffic.validate().map_err(EngineError::Config)?;
        for &(rate, _) in &self.traffic.bit_rate_weights {
            if !self.table.supports(rate) {
                return Err(RsaError::UnsupportedBitRate(rate).into());
            }
        }
        for (i, run) in self.runs.iter().enumerate() {
            if self.runs[..i].iter().any(|r| r.algorithm == run.algorithm) {
                return bad(format!("{} listed twice", run.algorithm));
            }
            if !run.algorithm.is_learning() {
                continue;
            }
            let Some(p) = &run.params else {
                return bad(format!("{} needs hyperparameters", run.algorithm));
            };
            p.epsilon.validate().map_err(EngineError::Config)?;
            if run.algorithm == Algorithm::QLearning {
                QLearnState::new([], p.alpha, p.gamma).map_err(EngineError::Config)?;
            }
            if run.algorithm == Algorithm::Ucb && !(p.c.is_finite() && p.c >= 0.0) {
                return bad(format!(
                    "ucb exploration constant must be non-negative, got {}",
                    p.c
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EpisodeStats {
    pub episode: usize,
    pub blocked: usize,
    pub total: usize,
    pub no_reach: usize,
    pub no_spectrum: usize,
}

impl EpisodeStats {
    pub fn routed(&self) -> usize {
        self.total - self.blocked
    }

    pub fn blocking_probability(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.blocked as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    /// `per_seed[s][e]` for seed index `s`, episode `e`.
    pub per_seed: Vec<Vec<EpisodeStats>>,
}

impl AlgorithmResult {
    /// Blocking probability per episode, averaged over seeds.
    pub fn mean_bp(&self) -> Vec<f64> {
        let episodes = self.per_seed.first().map_or(0, Vec::len);
        let seeds = self.per_seed.len() as f64;
        (0..episodes)
            .map(|e| {
                self.per_seed
                    .iter()
                    .map(|s| s[e].blocking_probability())
                    .sum::<f64>()
                    / seeds
            })
            .collect()
    }

    /// Mean of [`AlgorithmResult::mean_bp`] over the last `window` episodes.
    pub fn final_window_bp(&self, window: usize) -> f64 {
        let bp = self.mean_bp();
        let w = window.clamp(1, bp.len().max(1));
        let tail = &bp[bp.len().saturating_sub(w)..];
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub algorithms: Vec<AlgorithmResult>,
}

impl ExperimentResult {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmResult> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }
}

pub fn reward_for(outcome: &ProvisionOutcome, policy: &RewardPolicy) -> f64 {
    if outcome.is_routed() {
        policy.routed
    } else {
        policy.blocked
    }
}

fn traffic_rng(seed: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode as u64 + 1);
    rng
}

fn agent_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// A validated experiment with its candidate paths computed.
#[derive(Debug)]
pub struct Simulation {
    config: ExperimentConfig,
    controller: Controller,
    k_paths: CandidatePaths,
    all_paths: Option<CandidatePaths>,
}

impl Simulation {
    pub fn new(config: ExperimentConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let k_paths = CandidatePaths::build(&config.topology, config.k)?;
        let needs_all = config.runs.iter().any(|r| r.algorithm == Algorithm::KspInf);
        let all_paths = match (needs_all, config.k) {
            (false, _) => None,
            (true, PathLimit::Unlimited) => Some(k_paths.clone()),
            (true, PathLimit::Limited(_)) => Some(CandidatePaths::build(
                &config.topology,
                PathLimit::Unlimited,
            )?),
        };
        let controller = Controller::new(
            config.table.clone(),
            config.guard_band,
            config.modulation_policy,
        );
        Ok(Simulation {
            config,
            controller,
            k_paths,
            all_paths,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn candidates(&self, algorithm: Algorithm) -> &CandidatePaths {
        match (algorithm, &self.all_paths) {
            (Algorithm::KspInf, Some(all)) => all,
            _ => &self.k_paths,
        }
    }

    pub fn new_grid(&self) -> SpectrumGrid {
        SpectrumGrid::for_topology(
            &self.config.topology,
            self.config.traffic.cores_per_link,
            self.config.slots_per_core,
            self.config.link_sharing,
        )
    }

    /// A zero-initialised agent for one run.
    pub fn new_agent(&self, run: &AlgorithmRun) -> Result<Agent, EngineError> {
        let counts = self.candidates(run.algorithm).action_counts();
        let params = || {
            run.params.ok_or_else(|| {
                EngineError::Config(format!("{} needs hyperparameters", run.algorithm))
            })
        };
        Ok(match run.algorithm {
            Algorithm::EpsilonGreedy => Agent::EpsilonGreedy {
                state: BanditState::new(counts),
                epsilon: params()?.epsilon.start,
            },
            Algorithm::Ucb => {
                let p = params()?;
                Agent::Ucb {
                    state: BanditState::new(counts),
                    epsilon: p.epsilon.start,
                    c: p.c,
                }
            }
            Algorithm::QLearning => {
                let p = params()?;
                Agent::QLearning {
                    state: QLearnState::new(counts, p.alpha, p.gamma)
                        .map_err(EngineError::Config)?,
                    epsilon: p.epsilon.start,
                    congestion: p.congestion,
                    pending: None,
                }
            }
            other => Agent::Baseline(other.baseline().expect("non-learning algorithm")),
        })
    }

    /// Runs one episode on an empty grid, leaving it empty again.
    pub fn run_episode<R: rand::Rng>(
        &self,
        run: &AlgorithmRun,
        agent: &mut Agent,
        grid: &mut SpectrumGrid,
        requests: Vec<Request>,
        episode: usize,
        rng: &mut R,
    ) -> Result<EpisodeStats, EngineError> {
        if !grid.is_empty() {
            return Err(EngineError::GridNotEmpty(grid.active_count()));
        }
        let total = requests.len();
        let mut queue = EventQueue::with_arrivals(requests);
        let mut handler = EpisodeHandler {
            sim: self,
            candidates: self.candidates(run.algorithm),
            rewards: run.params.map(|p| p.rewards),
            agent,
            grid,
            rng,
            stats: EpisodeStats {
                episode,
                total,
                ..EpisodeStats::default()
            },
        };
        run_events(&mut queue, &mut handler)?;
        let stats = handler.stats;
        if !grid.is_empty() {
            return Err(EngineError::GridNotEmpty(grid.active_count()));
        }
        Ok(stats)
    }

    /// All episodes of one algorithm for one seed, with a fresh agent.
    pub fn run_seed(
        &self,
        run: &AlgorithmRun,
        seed: u64,
    ) -> Result<Vec<EpisodeStats>, EngineError> {
        let mut agent = self.new_agent(run)?;
        self.run_seed_with(run, &mut agent, seed)
    }

    /// Like [`Simulation::run_seed`] but continues from the given agent.
    pub fn run_seed_with(
        &self,
        run: &AlgorithmRun,
        agent: &mut Agent,
        seed: u64,
    ) -> Result<Vec<EpisodeStats>, EngineError> {
        let episodes = self.config.episodes;
        let mut explore = agent_rng(seed);
        let mut grid = self.new_grid();
        (0..episodes)
            .map(|e| {
                if let Some(p) = &run.params {
                    agent.set_epsilon(p.epsilon.epsilon_at(e, episodes));
                }
                let requests = generate_episode(
                    &self.config.traffic,
                    self.config.topology.node_count(),
                    0,
                    &mut traffic_rng(seed, e),
                );
                self.run_episode(run, agent, &mut grid, requests, e, &mut explore)
            })
            .collect()
    }

    /// Every (algorithm, seed) task on up to `workers` threads. Results do
    /// not depend on the worker count.
    pub fn run(&self, workers: usize) -> Result<ExperimentResult, EngineError> {
        let seeds = &self.config.seeds;
        let tasks: Vec<(usize, usize)> = (0..self.config.runs.len())
            .flat_map(|r| (0..seeds.len()).map(move |s| (r, s)))
            .collect();
        let slots: Mutex<Vec<Option<SeedOutcome>>> = Mutex::new(vec![None; tasks.len()]);
        let next = AtomicUsize::new(0);
        let workers = workers.clamp(1, tasks.len().max(1));

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&(r, s)) = tasks.get(i) else { break };
                    let out = self.run_seed(&self.config.runs[r], seeds[s]);
                    slots.lock().unwrap()[i] = Some(out);
                });
            }
        });

        let mut slots = slots.into_inner().unwrap().into_iter();
        let mut algorithms = Vec::with_capacity(self.config.runs.len());
        for run in &self.config.runs {
            let per_seed = slots
                .by_ref()
                .take(seeds.len())
                .map(|o| o.expect("every task ran"))
                .collect::<Result<Vec<_>, _>>()?;
            algorithms.push(AlgorithmResult {
                algorithm: run.algorithm,
                per_seed,
            });
        }
        Ok(ExperimentResult {
            seeds: seeds.clone(),
            episodes: self.config.episodes,
            algorithms,
        })
    }
}

type SeedOutcome = Result<Vec<EpisodeStats>, EngineError>;

struct EpisodeHandler<'a, R> {
    sim: &'a Simulation,
    candidates: &'a CandidatePaths,
    rewards: Option<RewardPolicy>,
    agent: &'a mut Agent,
    grid: &'a mut SpectrumGrid,
    rng: &'a mut R,
    stats: EpisodeStats,
}

impl<R: rand::Rng> EventHandler for EpisodeHandler<'_, R> {
    type Error = EngineError;

    fn on_arrival(&mut self, request: &Request) -> Result<bool, EngineError> {
        let pair = self
            .candidates
            .pair_index(request.source, request.destination);
        let paths = self.candidates.paths(pair);
        let controller = self.sim.controller();
        let action = {
            let view = RoutingView {
                pair,
                paths,
                grid: self.grid,
                controller,
                request,
            };
            self.agent.select(&view, self.rng)
        };
        let outcome = controller.provision(self.grid, request, &paths[action])?;
        if let Some(rewards) = &self.rewards {
            let reward = reward_for(&outcome, rewards);
            let view = RoutingView {
                pair,
                paths,
                grid: self.grid,
                controller,
                request,
            };
            self.agent.learn(&view, action, reward);
        }
        match outcome {
            ProvisionOutcome::Routed { .. } => Ok(true),
            ProvisionOutcome::Blocked(reason) => {
                self.stats.blocked += 1;
                match reason {
                    BlockReason::NoModulationReach => self.stats.no_reach += 1,
                    BlockReason::NoSpectrum => self.stats.no_spectrum += 1,
                }
                Ok(false)
            }
        }
    }

    fn on_departure(&mut self, request_id: RequestId, _time: f64) -> Result<(), EngineError> {
        self.grid.release(request_id)?;
        Ok(())
    }
}

/// Validates, prepares and runs an experiment on one thread.
pub fn run_experiment(config: ExperimentConfig) -> Result<ExperimentResult, EngineError> {
    Simulation::new(config)?.run(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::EpsilonSchedule;

    fn qlearning() -> AlgorithmRun {
        AlgorithmRun {
            algorithm: Algorithm::QLearning,
            params: Some(AgentParams {
                rewards: RewardPolicy::new(10.0, 100.0).unwrap(),
                epsilon: EpsilonSchedule::linear(0.2, 0.05),
                alpha: 0.01,
                gamma: 0.95,
                c: 0.0,
                congestion: CongestionMode::PerPath,
            }),
        }
    }

    fn small(erlang: f64, runs: Vec<AlgorithmRun>) -> ExperimentConfig {
        let mut c = ExperimentConfig::nsfnet(erlang, runs);
        c.episodes = 3;
        c.seeds = vec![5];
        c.traffic.requests_per_episode = 300;
        c
    }

    #[test]
    fn reward_mapping() {
        let p = RewardPolicy::new(1.0, 100.0).unwrap();
        let blocked = ProvisionOutcome::Blocked(BlockReason::NoSpectrum);
        assert_eq!(reward_for(&blocked, &p), -100.0);
        let p0 = RewardPolicy::new(0.0, 10.0).unwrap();
        assert_eq!(reward_for(&blocked, &p0), -10.0);
    }

    #[test]
    fn bp_ratio() {
        let s = EpisodeStats {
            blocked: 100,
            total: 2000,
            ..Default::default()
        };
        assert_eq!(s.blocking_probability(), 0.05);
        assert_eq!(s.routed(), 1900);
    }

    #[test]
    fn algorithm_names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>(), Ok(a));
        }
        assert!("dqn".parse::<Algorithm>().is_err());
    }

    #[test]
    fn zero_capacity_blocks_everything() {
        let mut c = small(500.0, vec![AlgorithmRun::baseline(Algorithm::KspFf)]);
        c.slots_per_core = 0;
        let r = run_experiment(c).unwrap();
        for s in &r.algorithms[0].per_seed[0] {
            assert_eq!(s.blocking_probability(), 1.0);
            assert_eq!(s.no_spectrum, s.total);
        }
    }

    #[test]
    fn single_request_routes() {
        let mut c = small(
            500.0,
            vec![AlgorithmRun::baseline(Algorithm::SpfFf), qlearning()],
        );
        c.traffic.requests_per_episode = 1;
        let r = run_experiment(c).unwrap();
        for a in &r.algorithms {
            assert!(a.mean_bp().iter().all(|&bp| bp == 0.0));
        }
    }

    #[test]
    fn validation_errors() {
        let mut c = small(500.0, vec![AlgorithmRun::baseline(Algorithm::KspFf)]);
        c.seeds.clear();
        assert!(matches!(Simulation::new(c), Err(EngineError::Config(_))));
        let mut c = small(500.0, vec![AlgorithmRun::baseline(Algorithm::KspFf)]);
        c.episodes = 0;
        assert!(Simulation::new(c).is_err());
        let c = small(500.0, vec![AlgorithmRun::baseline(Algorithm::QLearning)]);
        assert!(Simulation::new(c).is_err());
        let c = small(
            500.0,
            vec![
                AlgorithmRun::baseline(Algorithm::KspFf),
                AlgorithmRun::baseline(Algorithm::KspFf),
            ],
        );
        assert!(Simulation::new(c).is_err());
        let mut c = small(500.0, vec![AlgorithmRun::baseline(Algorithm::KspFf)]);
        c.traffic.bit_rate_weights = vec![(40, 1.0)];
        assert!(matches!(
            Simulation::new(c),
            Err(EngineError::Rsa(RsaError::UnsupportedBitRate(40)))
        ));
    }

    #[test]
    fn per_episode_counts_add_up() {
        let c = small(
            1000.0,
            vec![
                AlgorithmRun::baseline(Algorithm::SpfFf),
                AlgorithmRun::baseline(Algorithm::KspFf),
                qlearning(),
            ],
        );
        let r = run_experiment(c).unwrap();
        for a in &r.algorithms {
            assert_eq!(a.per_seed.len(), 1);
            for s in &a.per_seed[0] {
                assert_eq!(s.total, 300);
                assert_eq!(s.no_reach + s.no_spectrum, s.blocked);
                assert!((0.0..=1.0).contains(&s.blocking_probability()));
            }
        }
    }

    #[test]
    fn final_window_mean() {
        let per_seed = vec![(0..4)
            .map(|e| EpisodeStats {
                episode: e,
                blocked: e,
                total: 10,
                ..Default::default()
            })
            .collect()];
        let r = AlgorithmResult {
            algorithm: Algorithm::KspFf,
            per_seed,
        };
        assert!((r.final_window_bp(2) - 0.25).abs() < 1e-15);
        assert!((r.final_window_bp(10) - 0.15).abs() < 1e-15);
    }
}
