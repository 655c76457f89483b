//! Multi-round Independent Cascade with intermediary constraints.
//!
//! Arc outcomes come from a [`DrawSource`]: entry `(e, j)` is the outcome of
//! the `j`th observation of arc `e`, counted across all rounds. The number of
//! observations so far is the length of the arc's row in the
//! [`PartialMatrix`], which therefore doubles as the read cursor.
//!
//! In a round, the seed starts a FIFO cascade over the live graph. Every live
//! out-arc of every node activated this round is observed exactly once. After
//! the cascade, every non-seed node activated this round loses all its
//! incoming arcs for the rest of the run.

use std::collections::VecDeque;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{ArcId, DiGraph, LiveGraphView, NodeId};
use crate::rng;

/// Source of pre-determined arc outcomes.
pub trait DrawSource {
    /// Outcome of the `index`th observation of `arc`, or `None` when the
    /// source has no such entry.
    fn draw(&self, arc: ArcId, index: usize) -> Option<bool>;
}

/// A dense `|E| x C` binary matrix of arc outcomes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RealizationMatrix {
    arcs: usize,
    columns: usize,
    bits: Vec<bool>,
}

impl RealizationMatrix {
    /// Every entry `(e, j)` is an independent Bernoulli draw with success
    /// probability `w(e)`, sampled row by row.
    pub fn sample<G: Rng + ?Sized>(graph: &DiGraph, columns: usize, rng: &mut G) -> Self {
        Self::sample_with(graph.probabilities(), columns, rng)
    }

    pub fn sample_with<G: Rng + ?Sized>(probs: &[f64], columns: usize, rng: &mut G) -> Self {
        let mut bits = Vec::with_capacity(probs.len() * columns);
        for &p in probs {
            for _ in 0..columns {
                bits.push(rng.random::<f64>() < p);
            }
        }
        Self { arcs: probs.len(), columns, bits }
    }

    pub fn from_fn(arcs: usize, columns: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(arcs * columns);
        for e in 0..arcs {
            for j in 0..columns {
                bits.push(f(e, j));
            }
        }
        Self { arcs, columns, bits }
    }

    /// Decodes bit `e * columns + j` of `code` as entry `(e, j)`.
    pub fn from_code(arcs: usize, columns: usize, code: u64) -> Self {
        debug_assert!(arcs * columns <= 64);
        Self::from_fn(arcs, columns, |e, j| code >> (e * columns + j) & 1 == 1)
    }

    pub fn arcs(&self) -> usize {
        self.arcs
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn get(&self, e: ArcId, j: usize) -> bool {
        self.bits[e.index() * self.columns + j]
    }

    pub fn set(&mut self, e: ArcId, j: usize, bit: bool) {
        self.bits[e.index() * self.columns + j] = bit;
    }

    /// `P_M(M)`: the product of per-entry Bernoulli masses.
    pub fn probability(&self, probs: &[f64]) -> f64 {
        let mut mass = 1.0;
        for (e, &p) in probs.iter().enumerate().take(self.arcs) {
            for j in 0..self.columns {
                mass *= if self.bits[e * self.columns + j] { p } else { 1.0 - p };
            }
        }
        mass
    }
}

impl DrawSource for RealizationMatrix {
    fn draw(&self, arc: ArcId, index: usize) -> Option<bool> {
        (index < self.columns).then(|| self.get(arc, index))
    }
}

/// Lazily generated outcomes: the bit for `(e, j)` is a pure function of
/// `(key, e, j)`, so draws need no storage and are order independent.
#[derive(Clone, Debug)]
pub struct StreamingDraws<'a> {
    key: u64,
    probs: &'a [f64],
}

impl<'a> StreamingDraws<'a> {
    pub fn new(key: u64, probs: &'a [f64]) -> Self {
        Self { key, probs }
    }
}

impl DrawSource for StreamingDraws<'_> {
    fn draw(&self, arc: ArcId, index: usize) -> Option<bool> {
        let u = rng::unit_f64(rng::hash64(&[self.key, arc.0 as u64, index as u64]));
        Some(u < self.probs[arc.index()])
    }
}

/// Per-arc observed prefixes; everything past a row's end is unknown.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialMatrix {
    columns: usize,
    rows: Vec<Vec<bool>>,
}

impl PartialMatrix {
    pub fn new(arcs: usize, columns: usize) -> Self {
        Self { columns, rows: vec![Vec::new(); arcs] }
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn observed_count(&self, e: ArcId) -> usize {
        self.rows[e.index()].len()
    }

    /// `Some(bit)` for observed entries, `None` for unknown ones.
    pub fn get(&self, e: ArcId, j: usize) -> Option<bool> {
        self.rows[e.index()].get(j).copied()
    }

    pub fn row(&self, e: ArcId) -> &[bool] {
        &self.rows[e.index()]
    }

    pub fn total_observed(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    fn push(&mut self, e: ArcId, bit: bool) {
        self.rows[e.index()].push(bit);
    }
}

/// What the learner sees after one round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundFeedback {
    /// 1-based round index.
    pub round: usize,
    pub seed: NodeId,
    /// Every arc observed this round with its outcome, in observation order.
    pub observed: Vec<(ArcId, bool)>,
    /// All nodes activated this round, seed first, in activation order.
    pub round_activated: Vec<NodeId>,
    /// Nodes activated for the first time in the run.
    pub newly_activated: Vec<NodeId>,
    /// Non-seed nodes activated this round; their in-arcs are now removed.
    pub new_intermediaries: Vec<NodeId>,
}

/// Identity of an observed history: the seeding sequence and the partial
/// matrix. Two histories with equal keys are indistinguishable to a policy.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HistoryKey {
    pub sequence: Vec<NodeId>,
    pub partial: PartialMatrix,
}

/// Everything observed so far plus the derived live-graph state.
#[derive(Clone, Debug)]
pub struct ObservedHistory<'g> {
    sequence: Vec<NodeId>,
    partial: PartialMatrix,
    activated: Vec<bool>,
    activated_count: usize,
    consumed: Vec<bool>,
    view: LiveGraphView<'g>,
    rounds: Vec<RoundFeedback>,
}

impl<'g> ObservedHistory<'g> {
    /// A fresh history allowing up to `columns` observations per arc.
    pub fn new(graph: &'g DiGraph, columns: usize) -> Self {
        let n = graph.node_count();
        Self {
            sequence: Vec::new(),
            partial: PartialMatrix::new(graph.arc_count(), columns),
            activated: vec![false; n],
            activated_count: 0,
            consumed: vec![false; n],
            view: LiveGraphView::new(graph),
            rounds: Vec::new(),
        }
    }

    #[inline]
    pub fn graph(&self) -> &'g DiGraph {
        self.view.graph()
    }

    pub fn sequence(&self) -> &[NodeId] {
        &self.sequence
    }

    pub fn partial(&self) -> &PartialMatrix {
        &self.partial
    }

    pub fn view(&self) -> &LiveGraphView<'g> {
        &self.view
    }

    pub fn rounds(&self) -> &[RoundFeedback] {
        &self.rounds
    }

    /// Number of completed rounds.
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    #[inline]
    pub fn is_activated(&self, v: NodeId) -> bool {
        self.activated[v.index()]
    }

    pub fn activated_mask(&self) -> &[bool] {
        &self.activated
    }

    pub fn activated_count(&self) -> usize {
        self.activated_count
    }

    pub fn activated(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.activated.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| NodeId::from(i))
    }

    pub fn all_activated(&self) -> bool {
        self.activated_count == self.activated.len()
    }

    #[inline]
    pub fn is_consumed(&self, v: NodeId) -> bool {
        self.consumed[v.index()]
    }

    pub fn consumed(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.consumed.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| NodeId::from(i))
    }

    pub fn key(&self) -> HistoryKey {
        HistoryKey { sequence: self.sequence.clone(), partial: self.partial.clone() }
    }

    /// Sum of rewards over distinct activated nodes.
    pub fn reward(&self) -> f64 {
        let g = self.graph();
        self.activated().map(|v| g.reward(v)).sum()
    }

    /// Runs one cascade from `seed`, reading arc outcomes from `draws`.
    pub fn run_round<D: DrawSource + ?Sized>(&mut self, seed: NodeId, draws: &D) -> Result<&RoundFeedback> {
        let graph = self.graph();
        if seed.index() >= graph.node_count() {
            return Err(Error::UnknownNode(seed.to_string()));
        }
        let round = self.sequence.len() + 1;
        let mut in_round = vec![false; graph.node_count()];
        let mut order = vec![seed];
        let mut observed = Vec::new();
        let mut frontier = VecDeque::from([seed]);
        in_round[seed.index()] = true;

        while let Some(u) = frontier.pop_front() {
            for &e in graph.out_arcs(u) {
                if !self.view.is_live(e) {
                    continue;
                }
                let column = self.partial.observed_count(e);
                if column >= self.partial.columns() {
                    return Err(Error::Exhausted { arc: e.index(), column });
                }
                let bit = draws
                    .draw(e, column)
                    .ok_or(Error::Exhausted { arc: e.index(), column })?;
                self.partial.push(e, bit);
                observed.push((e, bit));
                let x = graph.edge(e).target;
                if bit && !in_round[x.index()] {
                    in_round[x.index()] = true;
                    order.push(x);
                    frontier.push_back(x);
                }
            }
        }

        let mut newly_activated = Vec::new();
        for &v in &order {
            if !self.activated[v.index()] {
                self.activated[v.index()] = true;
                self.activated_count += 1;
                newly_activated.push(v);
            }
        }
        // Removal takes effect only after the cascade has finished.
        let new_intermediaries: Vec<NodeId> = order[1..].to_vec();
        for &v in &new_intermediaries {
            debug_assert!(!self.consumed[v.index()], "intermediary {v} served twice");
            self.consumed[v.index()] = true;
            self.view.remove_incoming(v);
        }
        self.sequence.push(seed);
        self.rounds.push(RoundFeedback {
            round,
            seed,
            observed,
            round_activated: order,
            newly_activated,
            new_intermediaries,
        });
        Ok(self.rounds.last().expect("just pushed"))
    }
}

/// Replays `sequence` from a fresh history. Touches no RNG.
pub fn replay<'g, D: DrawSource + ?Sized>(
    graph: &'g DiGraph,
    sequence: &[NodeId],
    columns: usize,
    draws: &D,
) -> Result<(ObservedHistory<'g>, f64)> {
    let mut h = ObservedHistory::new(graph, columns);
    for &v in sequence {
        h.run_round(v, draws)?;
    }
    let f = h.reward();
    Ok((h, f))
}

/// Whether replaying the history's sequence under `m` reproduces its partial
/// matrix exactly.
pub fn is_consistent(m: &RealizationMatrix, history: &ObservedHistory<'_>) -> bool {
    match replay(history.graph(), history.sequence(), history.partial().columns(), m) {
        Ok((h, _)) => h.partial == history.partial,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::graph::random_digraph;
    use proptest::prelude::*;

    fn chain(p: f64, n: usize) -> DiGraph {
        let arcs: Vec<_> = (0..n - 1).map(|i| (i, i + 1, p)).collect();
        DiGraph::from_edges(n, &arcs).unwrap()
    }

    #[test]
    fn unit_row_is_all_ones() {
        let g = DiGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let m = RealizationMatrix::sample(&g, 50, &mut rng::stream(&[1]));
        assert!((0..50).all(|j| m.get(ArcId(0), j)));
    }

    #[test]
    fn sampled_frequency_matches_probability() {
        let g = DiGraph::from_edges(2, &[(0, 1, 0.5)]).unwrap();
        let m = RealizationMatrix::sample(&g, 100_000, &mut rng::stream(&[2]));
        let mean = (0..100_000).filter(|&j| m.get(ArcId(0), j)).count() as f64 / 1e5;
        assert!((mean - 0.5).abs() <= 0.01, "{mean}");
        let again = RealizationMatrix::sample(&g, 100_000, &mut rng::stream(&[2]));
        assert_eq!(m, again);
    }

    #[test]
    fn deterministic_cascade_and_intermediary_block() {
        let g = DiGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let m = RealizationMatrix::from_fn(1, 2, |_, _| true);
        let mut h = ObservedHistory::new(&g, 2);
        let fb = h.run_round(NodeId(0), &m).unwrap().clone();
        assert_eq!(fb.observed, vec![(ArcId(0), true)]);
        assert_eq!(fb.newly_activated, vec![NodeId(0), NodeId(1)]);
        assert_eq!(fb.new_intermediaries, vec![NodeId(1)]);
        assert!(!h.view().is_live(ArcId(0)));

        let fb = h.run_round(NodeId(0), &m).unwrap().clone();
        assert!(fb.observed.is_empty());
        assert!(fb.newly_activated.is_empty());
        assert_eq!(h.reward(), 2.0);
    }

    #[test]
    fn chain_expectation_by_enumeration() {
        // Each 2-arc, 1-column matrix weighted by its probability mass.
        let g = chain(0.5, 3);
        let expected: f64 = (0..4u64)
            .map(|code| {
                let m = RealizationMatrix::from_code(2, 1, code);
                let (_, f) = replay(&g, &[NodeId(0)], 1, &m).unwrap();
                m.probability(g.probabilities()) * f
            })
            .sum();
        assert!((expected - 1.75).abs() < 1e-12);
    }

    #[test]
    fn arcs_into_activated_targets_are_still_observed() {
        // 0 -> 1, 0 -> 2, 1 -> 2: node 2 is reached twice, both arcs observed.
        let g = DiGraph::from_edges(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        let m = RealizationMatrix::from_fn(3, 1, |_, _| true);
        let mut h = ObservedHistory::new(&g, 1);
        let fb = h.run_round(NodeId(0), &m).unwrap();
        assert_eq!(fb.observed.len(), 3);
        assert_eq!(fb.round_activated, vec![NodeId(0), NodeId(1), NodeId(2)]);
    }

    #[test]
    fn seed_reached_through_a_cycle_keeps_its_in_arcs() {
        let g = DiGraph::from_edges(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let m = RealizationMatrix::from_fn(2, 2, |_, _| true);
        let mut h = ObservedHistory::new(&g, 2);
        let fb = h.run_round(NodeId(0), &m).unwrap().clone();
        assert_eq!(fb.new_intermediaries, vec![NodeId(1)]);
        assert_eq!(fb.observed.len(), 2);
        assert!(h.view().is_live(ArcId(1)));
        assert!(!h.view().is_live(ArcId(0)));
        assert!(h.is_consumed(NodeId(1)) && !h.is_consumed(NodeId(0)));
    }

    #[test]
    fn consumed_node_still_cascades_when_seeded() {
        let g = DiGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 0.5)]).unwrap();
        // Arc 1 fails the first time and succeeds the second time.
        let m = RealizationMatrix::from_fn(2, 2, |e, j| e == 0 || j == 1);
        let mut h = ObservedHistory::new(&g, 2);
        h.run_round(NodeId(0), &m).unwrap();
        assert!(h.is_consumed(NodeId(1)));
        let fb = h.run_round(NodeId(1), &m).unwrap();
        assert_eq!(fb.newly_activated, vec![NodeId(2)]);
        assert_eq!(h.partial().row(ArcId(1)), &[false, true]);
    }

    #[test]
    fn exhaustion_is_an_error() {
        let g = DiGraph::from_edges(2, &[(0, 1, 0.5)]).unwrap();
        let m = RealizationMatrix::from_fn(1, 1, |_, _| false);
        let mut h = ObservedHistory::new(&g, 1);
        h.run_round(NodeId(0), &m).unwrap();
        assert!(matches!(h.run_round(NodeId(0), &m), Err(Error::Exhausted { arc: 0, column: 1 })));
        assert!(matches!(h.run_round(NodeId(7), &m), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn reward_sums_distinct_activated() {
        let g = DiGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap().with_rewards(vec![0.5, 0.25], 0.01).unwrap();
        let h = ObservedHistory::new(&g, 1);
        assert_eq!(h.reward(), 0.0);
        let m = RealizationMatrix::from_fn(1, 1, |_, _| true);
        let (_, f) = replay(&g, &[NodeId(0)], 1, &m).unwrap();
        assert_eq!(f, 0.75);
        let (_, f) = replay(&g, &[], 1, &m).unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn consistency_detects_flipped_bits() {
        let mut r = rng::stream(&[11]);
        let g = random_digraph(6, 12, &mut r).unwrap().with_probabilities(vec![0.5; 12]).unwrap();
        let m = RealizationMatrix::sample(&g, 3, &mut r);
        let seq = [NodeId(0), NodeId(3), NodeId(0)];
        let (h, _) = replay(&g, &seq, 3, &m).unwrap();
        assert!(is_consistent(&m, &h));
        let (e, j) = g
            .arcs()
            .find_map(|e| (h.partial().observed_count(e) > 0).then_some((e, 0)))
            .expect("something observed");
        let mut flipped = m.clone();
        flipped.set(e, j, !m.get(e, j));
        assert!(!is_consistent(&flipped, &h));
        // Entries past the observed prefix do not matter.
        let mut beyond = m.clone();
        if let Some(e) = g.arcs().find(|&e| h.partial().observed_count(e) < 3) {
            let j = h.partial().observed_count(e);
            beyond.set(e, j, !m.get(e, j));
            assert!(is_consistent(&beyond, &h));
        }
    }

    #[test]
    fn streaming_draws_are_pure_and_calibrated() {
        let probs = [0.3];
        let s = StreamingDraws::new(77, &probs);
        assert_eq!(s.draw(ArcId(0), 5), s.draw(ArcId(0), 5));
        let n = 100_000;
        let hits = (0..n).filter(|&j| s.draw(ArcId(0), j) == Some(true)).count();
        let f = hits as f64 / n as f64;
        assert!((f - 0.3).abs() < 3.0 * (0.21f64 / n as f64).sqrt(), "{f}");
    }

    fn random_run(seed: u64) -> (DiGraph, Vec<NodeId>, RealizationMatrix) {
        let mut r = rng::stream(&[seed]);
        let n = r.random_range(2..8);
        let arcs = r.random_range(0..=(n * (n - 1)).min(14));
        let g = random_digraph(n, arcs, &mut r).unwrap();
        let probs = (0..arcs).map(|_| r.random_range(0.05..1.0)).collect();
        let g = g.with_probabilities(probs).unwrap();
        let t = r.random_range(1..6);
        let seq = (0..t).map(|_| NodeId::from(r.random_range(0..n))).collect();
        let m = RealizationMatrix::sample(&g, t, &mut r);
        (g, seq, m)
    }

    proptest! {
        #[test]
        fn round_invariants_hold(seed in any::<u64>()) {
            let (g, seq, m) = random_run(seed);
            let mut h = ObservedHistory::new(&g, m.columns());
            let mut prev_activated: Vec<bool> = h.activated_mask().to_vec();
            for &v in &seq {
                let live_at_start: Vec<bool> = g.arcs().map(|e| h.view().is_live(e)).collect();
                let counts_before: Vec<usize> = g.arcs().map(|e| h.partial().observed_count(e)).collect();
                let fb = h.run_round(v, &m).unwrap().clone();
                // Feedback completeness: observed iff live at start and origin activated this round.
                for e in g.arcs() {
                    let origin_active = fb.round_activated.contains(&g.edge(e).origin);
                    let was_observed = fb.observed.iter().any(|&(a, _)| a == e);
                    prop_assert_eq!(was_observed, live_at_start[e.index()] && origin_active);
                    let advanced = h.partial().observed_count(e) - counts_before[e.index()];
                    prop_assert!(advanced <= 1);
                }
                // Activated-set monotonicity.
                for (i, &a) in prev_activated.iter().enumerate() {
                    prop_assert!(!a || h.activated_mask()[i]);
                }
                prev_activated = h.activated_mask().to_vec();
                prop_assert!(!fb.new_intermediaries.contains(&v));
            }
            // Intermediary uniqueness across the run.
            let mut served = vec![0; g.node_count()];
            for r in h.rounds() {
                for v in &r.new_intermediaries {
                    served[v.index()] += 1;
                }
            }
            prop_assert!(served.iter().all(|&s| s <= 1));
            // consumed <=> served, and consumed nodes have no live in-arcs.
            for v in g.nodes() {
                prop_assert_eq!(h.is_consumed(v), served[v.index()] == 1);
                if h.is_consumed(v) {
                    prop_assert!(h.is_activated(v));
                    prop_assert_eq!(h.view().live_in_arcs(v).count(), 0);
                }
            }
            // Activated set = seeds plus targets of arcs observed as 1.
            for v in g.nodes() {
                let seeded = seq.contains(&v);
                let hit = g.in_arcs(v).iter().any(|&e| h.partial().row(e).contains(&true));
                prop_assert_eq!(h.is_activated(v), seeded || hit);
            }
            // Prefix property: rows match the matrix prefix.
            for e in g.arcs() {
                for (j, &b) in h.partial().row(e).iter().enumerate() {
                    prop_assert_eq!(b, m.get(e, j));
                }
            }
        }

        #[test]
        fn replay_is_deterministic_and_monotone_under_extension(seed in any::<u64>(), split in 0usize..6) {
            let (g, seq, _) = random_run(seed);
            let mut r = rng::stream(&[seed, 1]);
            let m = RealizationMatrix::sample(&g, seq.len() * 2, &mut r);
            let cut = split.min(seq.len());
            let (a, f_y) = replay(&g, &seq[..cut], m.columns(), &m).unwrap();
            let (b, f_y2) = replay(&g, &seq[..cut], m.columns(), &m).unwrap();
            prop_assert_eq!(a.key(), b.key());
            prop_assert_eq!(f_y, f_y2);
            let (_, f_yz) = replay(&g, &seq, m.columns(), &m).unwrap();
            prop_assert!(f_yz >= f_y);
        }
    }
}
