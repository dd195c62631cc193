//! Path-selection policies.
//!
//! Every agent sees the candidate paths of the request's node pair and
//! returns an index into them. Candidates are sorted by length, so the
//! lowest-index tie-break always favours the shorter path.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::grid::{CongestionLevel, SpectrumGrid};
use crate::rsa::Controller;
use crate::topology::{CandidatePaths, Path, Topology};
use crate::traffic::Request;

/// Rewards handed to learning agents after each provisioning attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardPolicy {
    pub routed: f64,
    /// Always negative.
    pub blocked: f64,
}

impl RewardPolicy {
    /// `blocked_penalty` is a magnitude; the stored reward is its negation.
    pub fn new(routed: f64, blocked_penalty: f64) -> Result<Self, String> {
        if !(routed.is_finite() && routed >= 0.0) {
            return Err(format!("routed reward must be non-negative, got {routed}"));
        }
        if !(blocked_penalty.is_finite() && blocked_penalty > 0.0) {
            return Err(format!(
                "blocked penalty must be positive, got {blocked_penalty}"
            ));
        }
        Ok(RewardPolicy {
            routed,
            blocked: -blocked_penalty,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonMode {
    Constant,
    /// Linear from start to end across the episodes of a run.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub mode: EpsilonMode,
}

impl EpsilonSchedule {
    pub fn constant(epsilon: f64) -> Self {
        EpsilonSchedule {
            start: epsilon,
            end: epsilon,
            mode: EpsilonMode::Constant,
        }
    }

    pub fn linear(start: f64, end: f64) -> Self {
        EpsilonSchedule {
            start,
            end,
            mode: EpsilonMode::Linear,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for e in [self.start, self.end] {
            if !(0.0..=1.0).contains(&e) {
                return Err(format!("epsilon {e} outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn epsilon_at(&self, episode: usize, total_episodes: usize) -> f64 {
        match self.mode {
            EpsilonMode::Constant => self.start,
            EpsilonMode::Linear if total_episodes <= 1 => self.start,
            EpsilonMode::Linear => {
                let frac = episode as f64 / (total_episodes - 1) as f64;
                self.start + (self.end - self.start) * frac
            }
        }
    }
}

impl fmt::Display for EpsilonSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            EpsilonMode::Constant => write!(f, "{}", self.start),
            EpsilonMode::Linear => write!(f, "{}->{}", self.start, self.end),
        }
    }
}

impl FromStr for EpsilonSchedule {
    type Err = String;

    /// `0.05` for a constant rate, `0.2->0.05` for a linear decay.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad epsilon {:?}", t.trim()))
        };
        let schedule = match s.split_once("->") {
            Some((a, b)) => EpsilonSchedule::linear(num(a)?, num(b)?),
            None => EpsilonSchedule::constant(num(s)?),
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

/// Lowest index holding the maximum.
fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// Value estimates and visit counts shared by the two bandits.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    q: Vec<Vec<f64>>,
    n: Vec<Vec<u64>>,
    t: Vec<u64>,
}

impl BanditState {
    /// One row per node pair, sized by that pair's candidate count.
    pub fn new(action_counts: impl IntoIterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = action_counts.into_iter().collect();
        BanditState {
            q: sizes.iter().map(|&k| vec![0.0; k]).collect(),
            n: sizes.iter().map(|&k| vec![0; k]).collect(),
            t: vec![0; sizes.len()],
        }
    }

    pub fn q(&self, pair: usize) -> &[f64] {
        &self.q[pair]
    }

    pub fn n(&self, pair: usize) -> &[u64] {
        &self.n[pair]
    }

    /// Selections made so far for this pair.
    pub fn t(&self, pair: usize) -> u64 {
        self.t[pair]
    }

    pub fn set(&mut self, pair: usize, action: usize, q: f64, n: u64) {
        self.t[pair] = self.t[pair] - self.n[pair][action] + n;
        self.q[pair][action] = q;
        self.n[pair][action] = n;
    }

    pub fn egreedy_select<R: Rng + ?Sized>(&self, pair: usize, epsilon: f64, rng: &mut R) -> usize {
        let k = self.q[pair].len();
        if rng.random::<f64>() < epsilon {
            return rng.random_range(0..k);
        }
        argmax(self.q[pair].iter().copied())
    }

    /// Untried actions first; otherwise the largest `Q + c sqrt(ln t / N)`.
    pub fn ucb_select<R: Rng + ?Sized>(
        &self,
        pair: usize,
        epsilon: f64,
        c: f64,
        rng: &mut R,
    ) -> usize {
        let k = self.q[pair].len();
        if rng.random::<f64>() < epsilon {
            return rng.random_range(0..k);
        }
        if let Some(untried) = self.n[pair].iter().position(|&n| n == 0) {
            return untried;
        }
        let ln_t = (self.t[pair] as f64).ln();
        argmax(
            self.q[pair]
                .iter()
                .zip(&self.n[pair])
                .map(|(&q, &n)| q + c * (ln_t / n as f64).sqrt()),
        )
    }

    /// Incremental mean: the count is bumped first so it is the divisor.
    pub fn update(&mut self, pair: usize, action: usize, reward: f64) {
        let n = &mut self.n[pair][action];
        *n += 1;
        let q = &mut self.q[pair][action];
        *q += (reward - *q) / *n as f64;
        self.t[pair] += 1;
    }
}

/// Whether the Q-learning state uses each path's own congestion or one
/// network-wide figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CongestionMode {
    #[default]
    PerPath,
    Network,
}

impl fmt::Display for CongestionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CongestionMode::PerPath => "per-path",
            CongestionMode::Network => "network",
        })
    }
}

impl FromStr for CongestionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-path" => Ok(CongestionMode::PerPath),
            "network" => Ok(CongestionMode::Network),
            _ => Err(format!("unknown congestion mode {s:?}")),
        }
    }
}

/// Q-table indexed by (pair, congestion level, path).
#[derive(Debug, Clone, PartialEq)]
pub struct QLearnState {
    q: Vec<[Vec<f64>; 2]>,
    visits: Vec<[Vec<u64>; 2]>,
    pub alpha: f64,
    pub gamma: f64,
}

impl QLearnState {
    pub fn new(
        action_counts: impl IntoIterator<Item = usize>,
        alpha: f64,
        gamma: f64,
    ) -> Result<Self, String> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(format!("alpha must be in (0, 1], got {alpha}"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(format!("gamma must be in [0, 1], got {gamma}"));
        }
        let sizes: Vec<usize> = action_counts.into_iter().collect();
        Ok(QLearnState {
            q: sizes
                .iter()
                .map(|&k| [vec![0.0; k], vec![0.0; k]])
                .collect(),
            visits: sizes.iter().map(|&k| [vec![0; k], vec![0; k]]).collect(),
            alpha,
            gamma,
        })
    }

    pub fn q(&self, pair: usize, level: CongestionLevel) -> &[f64] {
        &self.q[pair][level.index()]
    }

    pub fn visits(&self, pair: usize, level: CongestionLevel) -> &[u64] {
        &self.visits[pair][level.index()]
    }

    pub fn set(&mut self, pair: usize, level: CongestionLevel, action: usize, q: f64, visits: u64) {
        self.q[pair][level.index()][action] = q;
        self.visits[pair][level.index()][action] = visits;
    }

    /// `levels[i]` is the congestion level of candidate `i`; each action is
    /// valued at its own level.
    pub fn select<R: Rng + ?Sized>(
        &self,
        pair: usize,
        levels: &[CongestionLevel],
        epsilon: f64,
        rng: &mut R,
    ) -> usize {
        let k = self.q[pair][0].len();
        debug_assert_eq!(levels.len(), k);
        if rng.random::<f64>() < epsilon {
            return rng.random_range(0..k);
        }
        argmax(
            levels
                .iter()
                .enumerate()
                .map(|(i, l)| self.q[pair][l.index()][i]),
        )
    }

    pub fn update(
        &mut self,
        pair: usize,
        level_before: CongestionLevel,
        action: usize,
        reward: f64,
        level_after: CongestionLevel,
    ) {
        let future = self.q[pair][level_after.index()]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let target = reward + self.gamma * future;
        let q = &mut self.q[pair][level_before.index()][action];
        // Convex form, so alpha = 1 stores the target exactly.
        *q = (1.0 - self.alpha) * *q + self.alpha * target;
        self.visits[pair][level_before.index()][action] += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Shortest path only.
    SpfFf,
    /// First of the k shortest paths that fits.
    KspFf,
    /// First of all simple paths that fits.
    KspInf,
}

/// Deterministic length-ordered selection. `None` means every allowed
/// candidate is infeasible.
pub fn baseline_select(
    policy: Baseline,
    candidates: &[Path],
    feasible: impl FnMut(&Path) -> bool,
) -> Option<usize> {
    let allowed = match policy {
        Baseline::SpfFf => 1,
        Baseline::KspFf | Baseline::KspInf => candidates.len(),
    };
    candidates.iter().take(allowed).position(feasible)
}

/// What an agent can look at when routing one request.
#[derive(Clone, Copy)]
pub struct RoutingView<'a> {
    pub pair: usize,
    pub paths: &'a [Path],
    pub grid: &'a SpectrumGrid,
    pub controller: &'a Controller,
    pub request: &'a Request,
}

impl RoutingView<'_> {
    fn levels(&self, mode: CongestionMode) -> Vec<CongestionLevel> {
        match mode {
            CongestionMode::PerPath => self
                .paths
                .iter()
                .map(|p| level_of(self.grid.path_congestion(&p.hops)))
                .collect(),
            CongestionMode::Network => {
                vec![level_of(self.grid.network_congestion()); self.paths.len()]
            }
        }
    }
}

fn level_of(fraction: f64) -> CongestionLevel {
    CongestionLevel::from_fraction(fraction.clamp(0.0, 1.0)).expect("clamped into range")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    EpsilonGreedy {
        state: BanditState,
        epsilon: f64,
    },
    Ucb {
        state: BanditState,
        epsilon: f64,
        c: f64,
    },
    QLearning {
        state: QLearnState,
        epsilon: f64,
        congestion: CongestionMode,
        pending: Option<CongestionLevel>,
    },
    Baseline(Baseline),
}

impl Agent {
    pub fn is_learning(&self) -> bool {
        !matches!(self, Agent::Baseline(_))
    }

    pub fn set_epsilon(&mut self, value: f64) {
        match self {
            Agent::EpsilonGreedy { epsilon, .. }
            | Agent::Ucb { epsilon, .. }
            | Agent::QLearning { epsilon, .. } => *epsilon = value,
            Agent::Baseline(_) => {}
        }
    }

    pub fn select<R: Rng + ?Sized>(&mut self, view: &RoutingView<'_>, rng: &mut R) -> usize {
        match self {
            Agent::EpsilonGreedy { state, epsilon } => {
                state.egreedy_select(view.pair, *epsilon, rng)
            }
            Agent::Ucb { state, epsilon, c } => state.ucb_select(view.pair, *epsilon, *c, rng),
            Agent::QLearning {
                state,
                epsilon,
                congestion,
                pending,
            } => {
                let levels = view.levels(*congestion);
                let action = state.select(view.pair, &levels, *epsilon, rng);
                *pending = Some(levels[action]);
                action
            }
            Agent::Baseline(policy) => baseline_select(*policy, view.paths, |p| {
                matches!(view.controller.probe(view.grid, view.request, p), Ok(Ok(_)))
            })
            .unwrap_or(0),
        }
    }

    /// Feeds back the reward; `after` reflects the grid once the request
    /// has been provisioned (or blocked).
    pub fn learn(&mut self, after: &RoutingView<'_>, action: usize, reward: f64) {
        match self {
            Agent::EpsilonGreedy { state, .. } | Agent::Ucb { state, .. } => {
                state.update(after.pair, action, reward)
            }
            Agent::QLearning {
                state,
                congestion,
                pending,
                ..
            } => {
                let before = pending.take().expect("select precedes learn");
                let level_after = match congestion {
                    CongestionMode::PerPath => {
                        level_of(after.grid.path_congestion(&after.paths[action].hops))
                    }
                    CongestionMode::Network => level_of(after.grid.network_congestion()),
                };
                state.update(after.pair, before, action, reward, level_after);
            }
            Agent::Baseline(_) => {}
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("baseline agents have no table")]
    NoTable,
}

pub const CHECKPOINT_HEADER: &str = "sd_pair,level,path_index,Q,N";

/// Writes the agent's table as `sd_pair,level,path_index,Q,N` rows. Bandit
/// rows use `-` for the level.
pub fn write_checkpoint(
    agent: &Agent,
    topology: &Topology,
    candidates: &CandidatePaths,
) -> Result<String, CheckpointError> {
    let mut out = String::from(CHECKPOINT_HEADER);
    out.push('\n');
    for pair in 0..candidates.len() {
        let (s, d) = candidates.pair(pair);
        let name = format!("{}-{}", topology.label(s), topology.label(d));
        match agent {
            Agent::EpsilonGreedy { state, .. } | Agent::Ucb { state, .. } => {
                for (i, (q, n)) in state.q(pair).iter().zip(state.n(pair)).enumerate() {
                    let _ = writeln!(out, "{name},-,{i},{q},{n}");
                }
            }
            Agent::QLearning { state, .. } => {
                for level in CongestionLevel::ALL {
                    let tag = level.index() + 1;
                    for (i, (q, n)) in state
                        .q(pair, level)
                        .iter()
                        .zip(state.visits(pair, level))
                        .enumerate()
                    {
                        let _ = writeln!(out, "{name},{tag},{i},{q},{n}");
                    }
                }
            }
            Agent::Baseline(_) => return Err(CheckpointError::NoTable),
        }
    }
    Ok(out)
}

/// Loads rows written by [`write_checkpoint`] into a freshly built agent.
pub fn read_checkpoint(
    text: &str,
    agent: &mut Agent,
    topology: &Topology,
    candidates: &CandidatePaths,
) -> Result<(), CheckpointError> {
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == CHECKPOINT_HEADER {
            continue;
        }
        let err = |message: String| CheckpointError::Parse {
            line: n + 1,
            message,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", f.len())));
        }
        let (s, d) = f[0]
            .split_once('-')
            .ok_or_else(|| err(format!("bad pair {:?}", f[0])))?;
        let s = topology.node(s).map_err(|e| err(e.to_string()))?;
        let d = topology.node(d).map_err(|e| err(e.to_string()))?;
        if s == d {
            return Err(err("pair with identical endpoints".into()));
        }
        let pair = candidates.pair_index(s, d);
        let action: usize = f[2]
            .parse()
            .map_err(|_| err(format!("bad path index {:?}", f[2])))?;
        if action >= candidates.paths(pair).len() {
            return Err(err(format!("path index {action} out of range")));
        }
        let q: f64 = f[3].parse().map_err(|_| err(format!("bad Q {:?}", f[3])))?;
        let count: u64 = f[4].parse().map_err(|_| err(format!("bad N {:?}", f[4])))?;
        match (agent as &mut Agent, f[1]) {
            (Agent::EpsilonGreedy { state, .. } | Agent::Ucb { state, .. }, "-") => {
                state.set(pair, action, q, count)
            }
            (Agent::QLearning { state, .. }, level @ ("1" | "2")) => {
                let level = if level == "1" {
                    CongestionLevel::Level1
                } else {
                    CongestionLevel::Level2
                };
                state.set(pair, level, action, q, count)
            }
            (Agent::Baseline(_), _) => return Err(CheckpointError::NoTable),
            (_, other) => return Err(err(format!("level {other:?} does not match agent"))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn bandit(q: &[f64], n: &[u64]) -> BanditState {
        let mut s = BanditState::new([q.len()]);
        for (i, (&q, &n)) in q.iter().zip(n).enumerate() {
            s.set(0, i, q, n);
        }
        s
    }

    #[test]
    fn egreedy_exploits() {
        let s = bandit(&[0.5, 0.1, 0.2], &[1, 1, 1]);
        assert_eq!(s.egreedy_select(0, 0.0, &mut rng()), 0);
        let s = bandit(&[0.0; 3], &[0; 3]);
        assert_eq!(s.egreedy_select(0, 0.0, &mut rng()), 0);
    }

    #[test]
    fn egreedy_full_exploration_is_uniform() {
        let s = bandit(&[9.0, 0.0, 0.0], &[1, 1, 1]);
        let mut r = rng();
        let mut counts = [0usize; 3];
        let trials = 30_000;
        for _ in 0..trials {
            counts[s.egreedy_select(0, 1.0, &mut r)] += 1;
        }
        for c in counts {
            let p = c as f64 / trials as f64;
            assert!((p - 1.0 / 3.0).abs() < 0.015, "{counts:?}");
        }
    }

    #[test]
    fn ucb_examples() {
        let s = bandit(&[1.0, 0.0], &[1, 10]);
        assert_eq!(s.t(0), 11);
        assert_eq!(s.ucb_select(0, 0.0, 2.0, &mut rng()), 0);
        let s = bandit(&[0.0; 3], &[1, 1, 1]);
        assert_eq!(s.ucb_select(0, 0.0, 2.0, &mut rng()), 0);
        let s = bandit(&[5.0, 0.0], &[3, 0]);
        assert_eq!(s.ucb_select(0, 0.0, 2.0, &mut rng()), 1);
    }

    #[test]
    fn bandit_running_mean() {
        let mut s = BanditState::new([2]);
        s.update(0, 1, -100.0);
        assert_eq!((s.q(0)[1], s.n(0)[1]), (-100.0, 1));
        s.update(0, 1, 0.0);
        assert_eq!((s.q(0)[1], s.n(0)[1]), (-50.0, 2));
        assert_eq!(s.t(0), 2);
    }

    #[test]
    fn qlearn_select_examples() {
        use CongestionLevel::*;
        let mut s = QLearnState::new([3], 0.1, 0.9).unwrap();
        assert_eq!(s.select(0, &[Level1; 3], 0.0, &mut rng()), 0);
        for (i, q) in [0.2, 0.7, 0.1].into_iter().enumerate() {
            s.set(0, Level1, i, q, 1);
        }
        assert_eq!(s.select(0, &[Level1; 3], 0.0, &mut rng()), 1);

        let mut s = QLearnState::new([2], 0.1, 0.9).unwrap();
        s.set(0, Level2, 0, -5.0, 1);
        s.set(0, Level1, 1, -1.0, 1);
        s.set(0, Level1, 0, 3.0, 1);
        s.set(0, Level2, 1, 4.0, 1);
        assert_eq!(s.select(0, &[Level2, Level1], 0.0, &mut rng()), 1);
    }

    #[test]
    fn qlearn_update_examples() {
        use CongestionLevel::*;
        let mut s = QLearnState::new([3], 0.05, 0.01).unwrap();
        s.update(0, Level1, 0, 1.0, Level1);
        assert!((s.q(0, Level1)[0] - 0.05).abs() < 1e-15);

        let mut s = QLearnState::new([3], 0.05, 0.01).unwrap();
        s.set(0, Level2, 2, 10.0, 1);
        s.update(0, Level1, 0, 1.0, Level2);
        assert!((s.q(0, Level1)[0] - 0.055).abs() < 1e-15);

        let mut s = QLearnState::new([3], 0.05, 0.0).unwrap();
        s.update(0, Level1, 0, -100.0, Level1);
        assert!((s.q(0, Level1)[0] + 5.0).abs() < 1e-12);
        assert_eq!(s.visits(0, Level1)[0], 1);
    }

    #[test]
    fn qlearn_rejects_bad_hyperparameters() {
        assert!(QLearnState::new([1], 0.0, 0.5).is_err());
        assert!(QLearnState::new([1], 1.5, 0.5).is_err());
        assert!(QLearnState::new([1], 0.5, 1.1).is_err());
        assert!(QLearnState::new([1], 1.0, 0.0).is_ok());
    }

    #[test]
    fn baseline_policies() {
        let t = Topology::from_edges([
            ("a", "b", 1.0),
            ("a", "c", 1.0),
            ("c", "b", 1.0),
            ("a", "d", 1.0),
            ("d", "b", 2.0),
        ])
        .unwrap();
        let paths = t.all_paths_sorted(0, 1).unwrap();
        assert_eq!(paths.len(), 3);
        assert_eq!(baseline_select(Baseline::SpfFf, &paths, |_| true), Some(0));
        assert_eq!(baseline_select(Baseline::KspFf, &paths, |_| true), Some(0));
        assert_eq!(
            baseline_select(Baseline::SpfFf, &paths, |p| p.nodes.len() > 2),
            None
        );
        assert_eq!(
            baseline_select(Baseline::KspFf, &paths, |p| p.nodes.len() > 2),
            Some(1)
        );
        assert_eq!(
            baseline_select(Baseline::KspInf, &paths, |p| p.length_km > 2.5),
            Some(2)
        );
        assert_eq!(
            baseline_select(Baseline::KspFf, &paths[..2], |p| p.length_km > 2.5),
            None
        );
    }

    #[test]
    fn epsilon_schedules() {
        let s = EpsilonSchedule::linear(0.20, 0.05);
        assert_eq!(s.epsilon_at(0, 100), 0.20);
        assert!((s.epsilon_at(99, 100) - 0.05).abs() < 1e-15);
        assert!((s.epsilon_at(33, 100) - (0.20 - 0.15 / 3.0)).abs() < 1e-15);
        assert_eq!(s.epsilon_at(0, 1), 0.20);
        let c = EpsilonSchedule::constant(0.05);
        assert_eq!(c.epsilon_at(57, 100), 0.05);
        assert_eq!("0.2->0.05".parse::<EpsilonSchedule>(), Ok(s));
        assert_eq!("0.05".parse::<EpsilonSchedule>(), Ok(c));
        assert_eq!(s.to_string(), "0.2->0.05");
        assert!("1.2".parse::<EpsilonSchedule>().is_err());
        assert!("a->b".parse::<EpsilonSchedule>().is_err());
    }

    #[test]
    fn reward_policy_validation() {
        let r = RewardPolicy::new(10.0, 100.0).unwrap();
        assert_eq!(r.blocked, -100.0);
        assert!(RewardPolicy::new(-1.0, 10.0).is_err());
        assert!(RewardPolicy::new(1.0, 0.0).is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let t = Topology::from_edges([(1, 2, 1.0), (2, 3, 1.0), (1, 3, 1.5)]).unwrap();
        let c = CandidatePaths::build(&t, crate::topology::PathLimit::Limited(2)).unwrap();
        let mut state = QLearnState::new(c.action_counts(), 0.5, 0.5).unwrap();
        state.set(3, CongestionLevel::Level2, 1, -7.25, 4);
        state.set(0, CongestionLevel::Level1, 0, 0.1, 2);
        let agent = Agent::QLearning {
            state: state.clone(),
            epsilon: 0.0,
            congestion: CongestionMode::PerPath,
            pending: None,
        };
        let text = write_checkpoint(&agent, &t, &c).unwrap();
        assert!(text.starts_with(CHECKPOINT_HEADER));
        assert!(text.contains("2-3,2,1,-7.25,4\n"));
        let mut fresh = Agent::QLearning {
            state: QLearnState::new(c.action_counts(), 0.5, 0.5).unwrap(),
            epsilon: 0.0,
            congestion: CongestionMode::PerPath,
            pending: None,
        };
        read_checkpoint(&text, &mut fresh, &t, &c).unwrap();
        assert_eq!(fresh, agent);

        let mut bandit = Agent::Ucb {
            state: BanditState::new(c.action_counts()),
            epsilon: 0.1,
            c: 2.0,
        };
        assert!(matches!(
            read_checkpoint(&text, &mut bandit, &t, &c),
            Err(CheckpointError::Parse { .. })
        ));
        assert_eq!(
            write_checkpoint(&Agent::Baseline(Baseline::KspFf), &t, &c),
            Err(CheckpointError::NoTable)
        );
    }
}
