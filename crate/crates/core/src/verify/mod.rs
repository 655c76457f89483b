//! Exhaustive and statistical checks of the model's structural guarantees.
//!
//! Everything here works on tiny graphs where expectations can be computed
//! exactly (see [`exact`]). The checks report violations with enough detail
//! to replay them, as JSON.

pub mod checks;
pub mod exact;
pub mod tail;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

pub use checks::{
    check_lemmas_1_2, check_theorem1, check_theorem3, greedy_ratio, lemma_violations, order_gap,
    order_sensitivity_search, theorem1_trial,
};
pub use exact::{
    brute_delta, brute_optimal, brute_sequence_value, exact_delta, exact_deltas, greedy_value, sequence_value,
    successors, Branch, Optimum,
};
pub use tail::{cascade_tail, cascade_tail_check, TailEstimate};

use crate::diffusion::{DrawSource, HistoryKey, ObservedHistory};
use crate::error::{Error, Result};
use crate::graph::{random_digraph, DiGraph, NodeId};
use crate::rng;

/// A small graph with a horizon, meant for exact enumeration.
#[derive(Clone, Debug)]
pub struct TinyInstance {
    pub graph: DiGraph,
    pub horizon: usize,
}

impl TinyInstance {
    /// Between 2 and `max_nodes` nodes, between 1 and `max_arcs` arcs (as
    /// many as fit). Arc probabilities mix certain arcs, fair coins, and
    /// uniform draws; rewards are either all 1 or drawn from `[0.2, 1]`.
    pub fn random<G: Rng + ?Sized>(rng: &mut G, max_nodes: usize, max_arcs: usize, horizon: usize) -> Self {
        let n = rng.random_range(2..=max_nodes.max(2));
        let most = max_arcs.min(n * (n - 1)).max(1);
        let arcs = rng.random_range(1..=most);
        let graph = random_digraph(n, arcs, rng).expect("arc count fits");
        let probs = (0..arcs)
            .map(|_| match rng.random_range(0..4) {
                0 => 1.0,
                1 => 0.5,
                _ => rng.random_range(0.05..0.95),
            })
            .collect();
        let mut graph = graph.with_probabilities(probs).expect("probabilities in range");
        if rng.random::<bool>() {
            let rewards = (0..n).map(|_| rng.random_range(0.2..=1.0)).collect();
            graph = graph.with_rewards(rewards, 0.2).expect("rewards in range");
        }
        Self { graph, horizon }
    }

    pub fn describe(&self) -> Value {
        let g = &self.graph;
        json!({
            "nodes": g.node_count(),
            "horizon": self.horizon,
            "arcs": g.arcs().map(|e| {
                let edge = g.edge(e);
                json!([edge.origin.0, edge.target.0, g.probability(e)])
            }).collect::<Vec<_>>(),
            "rewards": g.rewards(),
        })
    }
}

/// A deterministic adaptive policy given by a hash of the observed history:
/// each distinct history maps to a pseudo-random node, or to stopping.
#[derive(Clone, Copy, Debug)]
pub struct TablePolicy {
    salt: u64,
    stop_rate: f64,
    fixed: Option<NodeId>,
}

impl TablePolicy {
    pub fn random<G: Rng + ?Sized>(rng: &mut G) -> Self {
        Self { salt: rng.random(), stop_rate: rng.random_range(0.0..0.3), fixed: None }
    }

    /// The policy that never seeds.
    pub fn empty() -> Self {
        Self { salt: 0, stop_rate: 1.0, fixed: None }
    }

    /// Seeds `v` every round.
    pub fn constant(v: NodeId) -> Self {
        Self { salt: 0, stop_rate: 0.0, fixed: Some(v) }
    }

    pub fn decide(&self, history: &ObservedHistory<'_>) -> Option<NodeId> {
        if let Some(v) = self.fixed {
            return Some(v);
        }
        let h = key_hash(self.salt, &history.key());
        if rng::unit_f64(h) < self.stop_rate {
            return None;
        }
        let n = history.graph().node_count() as u64;
        Some(NodeId::from((rng::mix64(h ^ 0x5bd1_e995) % n) as usize))
    }

    /// Runs the policy for at most `rounds` rounds on `draws` and returns the
    /// seeding sequence it chose.
    pub fn run<D: DrawSource + ?Sized>(&self, graph: &DiGraph, draws: &D, rounds: usize) -> Result<Vec<NodeId>> {
        let mut h = ObservedHistory::new(graph, usize::MAX);
        for _ in 0..rounds {
            match self.decide(&h) {
                Some(v) => {
                    h.run_round(v, draws)?;
                }
                None => break,
            }
        }
        Ok(h.sequence().to_vec())
    }
}

/// Stable hash of a history key.
pub fn key_hash(salt: u64, key: &HistoryKey) -> u64 {
    let mut words = vec![salt, key.sequence.len() as u64];
    words.extend(key.sequence.iter().map(|v| u64::from(v.0)));
    for e in 0..key.partial.row_count() {
        let row = key.partial.row(e.into());
        words.push(row.len() as u64 | 1 << 32);
        words.extend(row.iter().map(|&b| u64::from(b)));
    }
    rng::hash64(&words)
}

/// Outcome of one verification suite.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub check: String,
    pub instances: usize,
    pub violations: Vec<Value>,
    pub seed: u64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub summary: Value,
}

impl Report {
    pub fn new(check: &str, instances: usize, violations: Vec<Value>, seed: u64, summary: Value) -> Self {
        let passed = violations.is_empty();
        Self { check: check.to_string(), instances, violations, seed, passed, summary }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Theorem1,
    Theorem3,
    Lemmas,
    Order,
    Tail,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Theorem1, Suite::Theorem3, Suite::Lemmas, Suite::Order, Suite::Tail];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Theorem1 => "theorem1",
            Suite::Theorem3 => "theorem3",
            Suite::Lemmas => "lemmas",
            Suite::Order => "order",
            Suite::Tail => "tail",
        }
    }

    /// Default trial counts and instance sizes.
    pub fn defaults(self) -> SuiteOptions {
        let (trials, max_nodes, max_arcs, horizon) = match self {
            Suite::Theorem1 => (1000, 6, 10, 3),
            Suite::Theorem3 => (50, 5, 6, 2),
            Suite::Lemmas => (50, 5, 6, 3),
            Suite::Order => (10_000, 4, 6, 2),
            Suite::Tail => (100_000, 40, 0, 0),
        };
        SuiteOptions { trials, max_nodes, max_arcs, horizon, seed: 1 }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}` (expected theorem1, theorem3, lemmas, order or tail)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteOptions {
    pub trials: usize,
    pub max_nodes: usize,
    pub max_arcs: usize,
    /// Horizon, or the largest horizon for suites that draw it.
    pub horizon: usize,
    pub seed: u64,
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<Report> {
    let SuiteOptions { trials, max_nodes, max_arcs, horizon, seed } = *opts;
    match suite {
        Suite::Theorem1 => check_theorem1(trials, max_nodes, max_arcs, horizon, seed),
        Suite::Theorem3 => check_theorem3(trials, max_nodes, max_arcs, horizon, seed),
        Suite::Lemmas => check_lemmas_1_2(trials, max_nodes, max_arcs, horizon, seed),
        Suite::Order => order_sensitivity_search(trials, max_nodes, max_arcs, seed),
        Suite::Tail => tail::chain_suite(trials, max_nodes, seed),
    }
}
