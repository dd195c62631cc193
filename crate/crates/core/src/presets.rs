//! Bundled hyperparameter presets.
//!
//! `erlang500`, `erlang750` and `erlang1000` configure all six algorithms at
//! that load; `erlang750-qlearning` and friends configure a single one.

use crate::engine::Algorithm;

struct Tuned {
    epsilon: &'static str,
    routed: f64,
    penalty: f64,
    extra: &'static [(&'static str, &'static str)],
}

fn tuned(erlang: u32, algorithm: Algorithm) -> Option<Tuned> {
    use Algorithm::*;
    let t = |epsilon, routed, penalty, extra| Tuned {
        epsilon,
        routed,
        penalty,
        extra,
    };
    Some(match (erlang, algorithm) {
        (500, EpsilonGreedy) => t("0.01", 1.0, 100.0, &[]),
        (500, Ucb) => t("0.2", 1.0, 10.0, &[("c", "2")]),
        (500, QLearning) => t(
            "0.1->0.05",
            1.0,
            100.0,
            &[("alpha", "0.05"), ("gamma", "0.01")],
        ),
        (750, EpsilonGreedy) => t("0.06", 10.0, 100.0, &[]),
        (750, Ucb) => t("0.1", 10.0, 10.0, &[("c", "2")]),
        (750, QLearning) => t(
            "0.2->0.05",
            10.0,
            100.0,
            &[("alpha", "0.01"), ("gamma", "0.95")],
        ),
        (1000, EpsilonGreedy) => t("0.01", 0.0, 10.0, &[]),
        (1000, Ucb) => t("0.2", 10.0, 10.0, &[("c", "2")]),
        (1000, QLearning) => t("0.05", 1.0, 10.0, &[("alpha", "0.05"), ("gamma", "0.01")]),
        _ => return None,
    })
}

const LOADS: [u32; 3] = [500, 750, 1000];

fn params_text(t: &Tuned, prefix: &str) -> String {
    let mut out = format!(
        "{prefix}epsilon = {}\n{prefix}routed_reward = {}\n{prefix}blocked_penalty = {}\n",
        t.epsilon, t.routed, t.penalty
    );
    for (k, v) in t.extra {
        out.push_str(&format!("{prefix}{k} = {v}\n"));
    }
    out
}

fn header(erlang: u32) -> String {
    format!("topology = nsfnet\nk = 3\nerlang = {erlang}\n")
}

/// Config text for a named preset.
pub fn preset(name: &str) -> Option<String> {
    let (load, single) = match name.strip_prefix("erlang")?.split_once('-') {
        Some((load, alg)) => (load, Some(alg.parse::<Algorithm>().ok()?)),
        None => (name.strip_prefix("erlang")?, None),
    };
    let erlang: u32 = load.parse().ok()?;
    if !LOADS.contains(&erlang) {
        return None;
    }
    let mut text = header(erlang);
    match single {
        Some(alg) => {
            text.push_str(&format!("algorithm = {alg}\n"));
            if alg.is_learning() {
                text.push_str(&params_text(&tuned(erlang, alg)?, ""));
            }
        }
        None => {
            let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            text.push_str(&format!("algorithm = {}\n", names.join(",")));
            for alg in Algorithm::ALL.iter().filter(|a| a.is_learning()) {
                text.push_str(&params_text(&tuned(erlang, *alg)?, &format!("{alg}.")));
            }
        }
    }
    Some(text)
}

pub fn names() -> Vec<String> {
    let mut out = Vec::new();
    for load in LOADS {
        out.push(format!("erlang{load}"));
        for alg in Algorithm::ALL {
            out.push(format!("erlang{load}-{alg}"));
        }
    }
    out
}
