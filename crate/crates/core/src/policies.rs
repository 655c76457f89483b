//! Seeding policies.
//!
//! A policy sees only the observed history (and whatever it has learned from
//! earlier feedback) when choosing the next seed. Every policy may re-select
//! a node that was seeded or consumed before.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::diffusion::{ObservedHistory, RoundFeedback};
use crate::error::{Error, Result};
use crate::graph::{DiGraph, NodeId};
use crate::rr::{argmax, greedy_select, GreedyParams};

/// Identifier of a policy in configs, CLI arguments, and CSV output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyId {
    #[serde(rename = "rdm")]
    Random,
    #[serde(rename = "bgg_dgr")]
    BiggestDegree,
    #[serde(rename = "grd_kw")]
    KnownGreedy,
    #[serde(rename = "grd_lf")]
    LinearUcb,
    #[serde(rename = "grd_lnf")]
    Cucb,
}

impl PolicyId {
    pub const ALL: [PolicyId; 5] =
        [PolicyId::Random, PolicyId::BiggestDegree, PolicyId::KnownGreedy, PolicyId::LinearUcb, PolicyId::Cucb];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyId::Random => "rdm",
            PolicyId::BiggestDegree => "bgg_dgr",
            PolicyId::KnownGreedy => "grd_kw",
            PolicyId::LinearUcb => "grd_lf",
            PolicyId::Cucb => "grd_lnf",
        }
    }

    /// Position in [`PolicyId::ALL`]; used as a stream key so that adding or
    /// reordering policies in a config does not change any policy's draws.
    pub fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}` (expected rdm, bgg_dgr, grd_kw, grd_lf or grd_lnf)")))
    }
}

pub trait Policy {
    fn id(&self) -> PolicyId;

    /// Seed for round `round` (1-based), or `None` to stop seeding.
    fn next_seed(&mut self, history: &ObservedHistory<'_>, round: usize, rng: &mut dyn RngCore) -> Result<Option<NodeId>>;

    /// Semi-bandit feedback of the round just played.
    fn observe(&mut self, _feedback: &RoundFeedback) {}
}

/// Uniform over all nodes.
#[derive(Clone, Debug, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn id(&self) -> PolicyId {
        PolicyId::Random
    }

    fn next_seed(&mut self, history: &ObservedHistory<'_>, _round: usize, rng: &mut dyn RngCore) -> Result<Option<NodeId>> {
        let n = history.graph().node_count();
        if n == 0 {
            return Ok(None);
        }
        Ok(Some(NodeId::from(rng.random_range(0..n))))
    }
}

/// Largest out-degree in the live graph, ties to the smallest id.
#[derive(Clone, Debug, Default)]
pub struct BiggestDegreePolicy;

impl Policy for BiggestDegreePolicy {
    fn id(&self) -> PolicyId {
        PolicyId::BiggestDegree
    }

    fn next_seed(&mut self, history: &ObservedHistory<'_>, _round: usize, _rng: &mut dyn RngCore) -> Result<Option<NodeId>> {
        let view = history.view();
        let degrees: Vec<f64> = view.graph().nodes().map(|v| view.live_out_degree(v) as f64).collect();
        Ok(argmax(&degrees).map(NodeId::from))
    }
}

/// Approximate greedy with the true arc probabilities.
#[derive(Clone, Debug)]
pub struct KnownGreedyPolicy {
    probs: Vec<f64>,
    params: GreedyParams,
}

impl KnownGreedyPolicy {
    pub fn new(graph: &DiGraph, params: GreedyParams) -> Self {
        Self { probs: graph.probabilities().to_vec(), params }
    }
}

impl Policy for KnownGreedyPolicy {
    fn id(&self) -> PolicyId {
        PolicyId::KnownGreedy
    }

    fn next_seed(&mut self, history: &ObservedHistory<'_>, _round: usize, rng: &mut dyn RngCore) -> Result<Option<NodeId>> {
        greedy_select(history, &self.probs, &self.params, rng)
    }
}

/// Per-arc observation counts and running means for CUCB.
#[derive(Clone, Debug, PartialEq)]
pub struct CucbState {
    counts: Vec<u64>,
    means: Vec<f64>,
}

impl CucbState {
    pub fn new(arcs: usize) -> Self {
        Self { counts: vec![0; arcs], means: vec![0.0; arcs] }
    }

    pub fn count(&self, arc: usize) -> u64 {
        self.counts[arc]
    }

    pub fn mean(&self, arc: usize) -> f64 {
        self.means[arc]
    }

    pub fn record(&mut self, arc: usize, bit: bool) {
        self.counts[arc] += 1;
        let y = if bit { 1.0 } else { 0.0 };
        self.means[arc] += (y - self.means[arc]) / self.counts[arc] as f64;
    }

    /// `1` for unobserved arcs, else `min(1, mean + sqrt(3 ln t / (2 count)))`.
    pub fn estimate(&self, arc: usize, round: usize) -> f64 {
        let n = self.counts[arc];
        if n == 0 {
            return 1.0;
        }
        let t = round.max(1) as f64;
        (self.means[arc] + (3.0 * t.ln() / (2.0 * n as f64)).sqrt()).min(1.0)
    }

    pub fn estimates(&self, round: usize) -> Vec<f64> {
        (0..self.counts.len()).map(|e| self.estimate(e, round)).collect()
    }
}

/// Greedy under CUCB upper confidence estimates; no features.
#[derive(Clone, Debug)]
pub struct CucbPolicy {
    state: CucbState,
    params: GreedyParams,
}

impl CucbPolicy {
    pub fn new(graph: &DiGraph, params: GreedyParams) -> Self {
        Self { state: CucbState::new(graph.arc_count()), params }
    }

    pub fn state(&self) -> &CucbState {
        &self.state
    }
}

impl Policy for CucbPolicy {
    fn id(&self) -> PolicyId {
        PolicyId::Cucb
    }

    fn next_seed(&mut self, history: &ObservedHistory<'_>, round: usize, rng: &mut dyn RngCore) -> Result<Option<NodeId>> {
        let estimates = self.state.estimates(round);
        greedy_select(history, &estimates, &self.params, rng)
    }

    fn observe(&mut self, feedback: &RoundFeedback) {
        for &(e, bit) in &feedback.observed {
            self.state.record(e.index(), bit);
        }
    }
}
