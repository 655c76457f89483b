//! Reverse-reachable sets and the approximate greedy seed oracle.
//!
//! A random RR set picks a target uniformly from the not-yet-activated nodes
//! and collects every node that reaches it in a random subgraph of the live
//! graph in which each arc is kept with its probability. Seed `s` is counted
//! with the target's reward whenever it lands in the set, which makes
//!
//! ```text
//! est(s) = sum_i r(v_i) * [s in R_i] / (m / |V \ I|)
//! ```
//!
//! an unbiased estimate of the expected marginal reward of seeding `s`.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::ObservedHistory;
use crate::error::{Error, Result};
use crate::graph::{LiveGraphView, NodeId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RrSet {
    pub target: NodeId,
    /// Members in discovery order; the target comes first.
    pub members: Vec<NodeId>,
}

impl RrSet {
    pub fn contains(&self, v: NodeId) -> bool {
        self.members.contains(&v)
    }
}

/// Reusable reverse-BFS state. Visited marks are epoch stamps, so sampling
/// does not clear a per-node array each time.
pub struct RrSampler<'v, 'g> {
    view: &'v LiveGraphView<'g>,
    probs: &'v [f64],
    stamp: Vec<u32>,
    epoch: u32,
    queue: VecDeque<NodeId>,
    members: Vec<NodeId>,
}

impl<'v, 'g> RrSampler<'v, 'g> {
    pub fn new(view: &'v LiveGraphView<'g>, probs: &'v [f64]) -> Self {
        assert_eq!(probs.len(), view.graph().arc_count(), "one probability per arc");
        Self {
            view,
            probs,
            stamp: vec![0; view.graph().node_count()],
            epoch: 0,
            queue: VecDeque::new(),
            members: Vec::new(),
        }
    }

    /// Samples the RR set of `target`; the result is valid until the next
    /// call.
    pub fn sample<G: Rng + ?Sized>(&mut self, target: NodeId, rng: &mut G) -> &[NodeId] {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        let graph = self.view.graph();
        self.members.clear();
        self.queue.clear();
        self.stamp[target.index()] = self.epoch;
        self.members.push(target);
        self.queue.push_back(target);
        while let Some(v) = self.queue.pop_front() {
            for &e in graph.in_arcs(v) {
                if !self.view.is_live(e) {
                    continue;
                }
                let u = graph.edge(e).origin;
                if self.stamp[u.index()] == self.epoch {
                    continue;
                }
                let p = self.probs[e.index()];
                let kept = p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p);
                if kept {
                    self.stamp[u.index()] = self.epoch;
                    self.members.push(u);
                    self.queue.push_back(u);
                }
            }
        }
        &self.members
    }
}

/// One random RR set for a target drawn uniformly from `targets`.
pub fn sample_rr_set<G: Rng + ?Sized>(
    view: &LiveGraphView<'_>,
    probs: &[f64],
    targets: &[NodeId],
    rng: &mut G,
) -> Result<RrSet> {
    if targets.is_empty() {
        return Err(Error::AllActivated);
    }
    let target = targets[rng.random_range(0..targets.len())];
    let mut sampler = RrSampler::new(view, probs);
    let members = sampler.sample(target, rng).to_vec();
    Ok(RrSet { target, members })
}

/// Estimated marginal gain of every node from `m` RR sets whose targets are
/// the nodes not in `activated`.
pub fn estimate_marginals<G: Rng + ?Sized>(
    view: &LiveGraphView<'_>,
    probs: &[f64],
    rewards: &[f64],
    activated: &[bool],
    m: usize,
    rng: &mut G,
) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Validation("RR sample count must be positive".into()));
    }
    let targets: Vec<NodeId> = activated
        .iter()
        .enumerate()
        .filter(|(_, &a)| !a)
        .map(|(i, _)| NodeId::from(i))
        .collect();
    if targets.is_empty() {
        return Err(Error::AllActivated);
    }
    let mut sums = vec![0.0; view.graph().node_count()];
    let mut sampler = RrSampler::new(view, probs);
    for _ in 0..m {
        let target = targets[rng.random_range(0..targets.len())];
        let r = rewards[target.index()];
        for &s in sampler.sample(target, rng) {
            sums[s.index()] += r;
        }
    }
    let scale = targets.len() as f64 / m as f64;
    for s in &mut sums {
        *s *= scale;
    }
    Ok(sums)
}

/// Accuracy parameters of the greedy oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyParams {
    /// Approximation factor, strictly greater than 1.
    pub alpha: f64,
    /// Success probability in `(0, 1)`.
    pub beta: f64,
    /// Upper clamp on the sample count computed from `alpha` and `beta`.
    pub m_cap: Option<usize>,
    /// Fixed sample count, bypassing the formula entirely.
    pub m_override: Option<usize>,
}

impl Default for GreedyParams {
    fn default() -> Self {
        Self { alpha: 1.1, beta: 0.9, m_cap: Some(200_000), m_override: None }
    }
}

impl GreedyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(Error::Validation(format!("alpha {} must exceed 1", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Validation(format!("beta {} outside (0, 1)", self.beta)));
        }
        if self.m_cap == Some(0) || self.m_override == Some(0) {
            return Err(Error::Validation("sample counts must be positive".into()));
        }
        Ok(())
    }

    /// `ceil(2 a^2 n^2 ln(3 / (1 - b)) / ((a - 1)^2 r_max^2))`, uncapped.
    pub fn formula_sample_count(&self, n: usize, r_max: f64) -> f64 {
        let a = self.alpha;
        let n = n as f64;
        (2.0 * a * a * n * n * (3.0 / (1.0 - self.beta)).ln() / ((a - 1.0).powi(2) * r_max * r_max)).ceil()
    }

    /// The sample count actually used: override, else the formula clamped to
    /// the cap.
    pub fn sample_count(&self, n: usize, r_max: f64) -> usize {
        if let Some(m) = self.m_override {
            return m;
        }
        let m = self.formula_sample_count(n, r_max);
        match self.m_cap {
            Some(cap) if m > cap as f64 => {
                static WARNED: AtomicBool = AtomicBool::new(false);
                if !WARNED.swap(true, Ordering::Relaxed) {
                    warn!("RR sample count {m} clamped to {cap}");
                }
                cap
            }
            _ => m.max(1.0) as usize,
        }
    }
}

/// Index of the largest value; ties go to the smallest index.
pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// The approximate greedy seed for the next round under arc probabilities
/// `probs`, or `None` once every node is activated (all gains are zero).
pub fn greedy_select<G: Rng + ?Sized>(
    history: &ObservedHistory<'_>,
    probs: &[f64],
    params: &GreedyParams,
    rng: &mut G,
) -> Result<Option<NodeId>> {
    params.validate()?;
    if history.all_activated() {
        return Ok(None);
    }
    let graph = history.graph();
    let m = params.sample_count(graph.node_count(), graph.max_reward());
    let gains = estimate_marginals(history.view(), probs, graph.rewards(), history.activated_mask(), m, rng)?;
    Ok(argmax(&gains).map(NodeId::from))
}
