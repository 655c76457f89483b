//! Exact expectations on tiny instances.
//!
//! Given an observed history, the set of realization matrices consistent with
//! it is a cylinder: observed entries are fixed and every other entry is an
//! independent Bernoulli. The next round from a seed therefore only depends on
//! the next unobserved bit of each arc it touches, and [`successors`]
//! enumerates those outcomes lazily, branching on each draw as the cascade
//! requests it. [`brute_delta`] computes the same quantity the slow way, by
//! filtering every matrix for consistency, and the two are cross-checked in
//! tests.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use crate::diffusion::{is_consistent, replay, DrawSource, HistoryKey, ObservedHistory, RealizationMatrix};
use crate::error::{Error, Result};
use crate::graph::{ArcId, NodeId};
use crate::rr::argmax;

/// One possible outcome of a round with its conditional probability.
#[derive(Clone, Debug)]
pub struct Branch<'g> {
    pub prob: f64,
    pub history: ObservedHistory<'g>,
}

impl Branch<'_> {
    /// Reward of the nodes first activated in the last round.
    pub fn gain(&self) -> f64 {
        let g = self.history.graph();
        self.history.rounds().last().map_or(0.0, |r| r.newly_activated.iter().map(|&v| g.reward(v)).sum())
    }
}

/// Serves draws from a fixed script and records where it ran out.
struct Scripted<'a> {
    script: &'a [bool],
    pos: Cell<usize>,
    arcs: RefCell<Vec<ArcId>>,
    pending: Cell<Option<ArcId>>,
}

impl DrawSource for Scripted<'_> {
    fn draw(&self, arc: ArcId, _index: usize) -> Option<bool> {
        let i = self.pos.get();
        if i < self.script.len() {
            self.pos.set(i + 1);
            self.arcs.borrow_mut().push(arc);
            Some(self.script[i])
        } else {
            self.pending.set(Some(arc));
            None
        }
    }
}

/// All positive-probability outcomes of seeding `seed` after `history` when
/// arc `e` succeeds with probability `probs[e]`.
pub fn successors<'g>(history: &ObservedHistory<'g>, seed: NodeId, probs: &[f64]) -> Result<Vec<Branch<'g>>> {
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<bool>, f64)> = vec![(Vec::new(), 1.0)];
    while let Some((script, prob)) = stack.pop() {
        let source = Scripted { script: &script, pos: Cell::new(0), arcs: RefCell::new(Vec::new()), pending: Cell::new(None) };
        let mut next = history.clone();
        match next.run_round(seed, &source) {
            Ok(_) => out.push(Branch { prob, history: next }),
            Err(Error::Exhausted { .. }) if source.pending.get().is_some() => {
                let p = probs[source.pending.get().expect("checked").index()];
                if p < 1.0 {
                    let mut s = script.clone();
                    s.push(false);
                    stack.push((s, prob * (1.0 - p)));
                }
                if p > 0.0 {
                    let mut s = script;
                    s.push(true);
                    stack.push((s, prob * p));
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Exact expected marginal gain of seeding `v` next.
pub fn exact_delta(history: &ObservedHistory<'_>, v: NodeId, probs: &[f64]) -> Result<f64> {
    Ok(successors(history, v, probs)?.iter().map(|b| b.prob * b.gain()).sum())
}

/// Exact gains of every node.
pub fn exact_deltas(history: &ObservedHistory<'_>, probs: &[f64]) -> Result<Vec<f64>> {
    history.graph().nodes().map(|v| exact_delta(history, v, probs)).collect()
}

/// Number of matrices a full enumeration over `arcs x columns` would visit.
pub fn enumeration_size(arcs: usize, columns: usize) -> u128 {
    let bits = arcs * columns;
    if bits >= 127 {
        u128::MAX
    } else {
        1u128 << bits
    }
}

fn check_budget(arcs: usize, columns: usize, budget: u128) -> Result<u64> {
    let needed = enumeration_size(arcs, columns);
    if needed > budget || arcs * columns >= 64 {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(needed as u64)
}

/// Expected marginal gain of `v` by enumerating every realization matrix
/// with the history's column count, keeping the consistent ones and
/// renormalizing by their probability mass.
pub fn brute_delta(history: &ObservedHistory<'_>, v: NodeId, probs: &[f64], budget: u128) -> Result<f64> {
    let graph = history.graph();
    let columns = history.partial().columns();
    let total = check_budget(graph.arc_count(), columns, budget)?;
    let base = history.reward();
    let mut sequence = history.sequence().to_vec();
    sequence.push(v);
    let (mut mass, mut acc) = (0.0, 0.0);
    for code in 0..total {
        let m = RealizationMatrix::from_code(graph.arc_count(), columns, code);
        if !is_consistent(&m, history) {
            continue;
        }
        let w = m.probability(probs);
        if w == 0.0 {
            continue;
        }
        let (_, f) = replay(graph, &sequence, columns, &m)?;
        mass += w;
        acc += w * (f - base);
    }
    if mass == 0.0 {
        return Err(Error::Validation("history has probability zero".into()));
    }
    Ok(acc / mass)
}

/// Exact expected reward of a fixed seeding sequence, by full enumeration.
pub fn brute_sequence_value(
    graph: &crate::graph::DiGraph,
    sequence: &[NodeId],
    probs: &[f64],
    budget: u128,
) -> Result<f64> {
    let columns = sequence.len().max(1);
    let total = check_budget(graph.arc_count(), columns, budget)?;
    let mut acc = 0.0;
    for code in 0..total {
        let m = RealizationMatrix::from_code(graph.arc_count(), columns, code);
        let w = m.probability(probs);
        if w > 0.0 {
            acc += w * replay(graph, sequence, columns, &m)?.1;
        }
    }
    Ok(acc)
}

/// Exact expected reward of a fixed seeding sequence, via successors.
pub fn sequence_value(history: &ObservedHistory<'_>, sequence: &[NodeId], probs: &[f64]) -> Result<f64> {
    let Some((&first, rest)) = sequence.split_first() else {
        return Ok(0.0);
    };
    let mut total = 0.0;
    for b in successors(history, first, probs)? {
        total += b.prob * (b.gain() + sequence_value(&b.history, rest, probs)?);
    }
    Ok(total)
}

/// The optimal adaptive policy's value and its decisions at every history
/// reached while computing it.
#[derive(Clone, Debug)]
pub struct Optimum {
    pub value: f64,
    pub decisions: HashMap<HistoryKey, Option<NodeId>>,
}

/// Optimal expected reward over `rounds` further rounds by backward
/// induction. `budget` bounds the number of distinct histories evaluated.
pub fn brute_optimal(root: &ObservedHistory<'_>, rounds: usize, probs: &[f64], budget: usize) -> Result<Optimum> {
    let mut memo: HashMap<HistoryKey, (f64, Option<NodeId>)> = HashMap::new();
    let value = optimal_value(root, rounds, probs, budget, &mut memo)?;
    let decisions = memo.into_iter().map(|(k, (_, d))| (k, d)).collect();
    Ok(Optimum { value, decisions })
}

fn optimal_value(
    h: &ObservedHistory<'_>,
    rounds: usize,
    probs: &[f64],
    budget: usize,
    memo: &mut HashMap<HistoryKey, (f64, Option<NodeId>)>,
) -> Result<f64> {
    if rounds == 0 || h.all_activated() {
        return Ok(0.0);
    }
    let key = h.key();
    if let Some(&(v, _)) = memo.get(&key) {
        return Ok(v);
    }
    if memo.len() >= budget {
        return Err(Error::BudgetExceeded { needed: memo.len() as u128 + 1, budget: budget as u128 });
    }
    let mut best = (0.0, None);
    for v in h.graph().nodes() {
        let mut value = 0.0;
        for b in successors(h, v, probs)? {
            value += b.prob * (b.gain() + optimal_value(&b.history, rounds - 1, probs, budget, memo)?);
        }
        if value > best.0 + 1e-12 {
            best = (value, Some(v));
        }
    }
    memo.insert(key, best);
    Ok(best.0)
}

/// Expected reward of the exact greedy policy: seed the node with the largest
/// exact marginal gain (ties to the smallest id), stop when every gain is 0.
pub fn greedy_value(h: &ObservedHistory<'_>, rounds: usize, probs: &[f64]) -> Result<f64> {
    if rounds == 0 {
        return Ok(0.0);
    }
    let mut branches_by_node = Vec::with_capacity(h.graph().node_count());
    let mut deltas = Vec::with_capacity(h.graph().node_count());
    for v in h.graph().nodes() {
        let branches = successors(h, v, probs)?;
        deltas.push(branches.iter().map(|b| b.prob * b.gain()).sum::<f64>());
        branches_by_node.push(branches);
    }
    let Some(best) = argmax(&deltas) else {
        return Ok(0.0);
    };
    if deltas[best] <= 0.0 {
        return Ok(0.0);
    }
    let mut value = 0.0;
    for b in &branches_by_node[best] {
        value += b.prob * (b.gain() + greedy_value(&b.history, rounds - 1, probs)?);
    }
    Ok(value)
}
