//! Empirical tail of single-round cascade sizes on subcritical graphs.

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::Report;
use crate::diffusion::{ObservedHistory, StreamingDraws};
use crate::error::{Error, Result};
use crate::graph::{graph_stats, random_digraph, DiGraph, NodeId};
use crate::rng;

#[derive(Clone, Debug, Serialize)]
pub struct TailEstimate {
    pub reps: usize,
    /// `survival[L - 1]` estimates `P(size > L)`; the last entry is 0.
    pub survival: Vec<f64>,
    /// Least-squares slope of `ln P(size > L)` against `L` over the nonzero
    /// entries; `None` with fewer than two of them.
    pub slope: Option<f64>,
}

/// Simulates `reps` single-seed rounds on the pristine graph. Seeds are drawn
/// uniformly from `seeds`, or from all nodes when `None`. A round's size
/// counts every node it activates, seed included.
pub fn cascade_tail(graph: &DiGraph, reps: usize, seeds: Option<&[NodeId]>, seed: u64) -> Result<TailEstimate> {
    if reps == 0 || graph.node_count() == 0 {
        return Err(Error::Validation("tail estimate needs at least one rep and one node".into()));
    }
    if seeds.is_some_and(|s| s.is_empty()) {
        return Err(Error::Validation("seed set is empty".into()));
    }
    let mut picker = rng::stream(&[seed, rng::label("tail-seeds")]);
    let mut counts = vec![0usize; graph.node_count() + 1];
    for rep in 0..reps {
        let s = match seeds {
            Some(list) => list[picker.random_range(0..list.len())],
            None => NodeId::from(picker.random_range(0..graph.node_count())),
        };
        let draws = StreamingDraws::new(rng::hash64(&[seed, rep as u64]), graph.probabilities());
        let mut h = ObservedHistory::new(graph, 1);
        let size = h.run_round(s, &draws)?.round_activated.len();
        counts[size] += 1;
    }
    let largest = counts.iter().rposition(|&c| c > 0).unwrap_or(1).max(1);
    let survival: Vec<f64> =
        (1..=largest).map(|l| counts[l + 1..].iter().sum::<usize>() as f64 / reps as f64).collect();
    let slope = fit_slope(&survival);
    Ok(TailEstimate { reps, survival, slope })
}

fn fit_slope(survival: &[f64]) -> Option<f64> {
    let points: Vec<(f64, f64)> =
        survival.iter().enumerate().filter(|(_, &s)| s > 0.0).map(|(i, &s)| ((i + 1) as f64, s.ln())).collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Refuses graphs that are not subcritical; otherwise checks that the
/// empirical survival curve decays.
pub fn cascade_tail_check(graph: &DiGraph, reps: usize, seeds: Option<&[NodeId]>, seed: u64) -> Result<(TailEstimate, Vec<Value>)> {
    let stats = graph_stats(graph);
    if !stats.subcritical {
        return Err(Error::NotSubcritical(stats.branching));
    }
    let est = cascade_tail(graph, reps, seeds, seed)?;
    let mut violations = Vec::new();
    if est.survival.windows(2).any(|w| w[1] > w[0]) {
        violations.push(json!({ "kind": "survival_increases", "survival": est.survival }));
    }
    if est.slope.is_some_and(|s| s >= 0.0) {
        violations.push(json!({ "kind": "nonnegative_slope", "slope": est.slope }));
    }
    Ok((est, violations))
}

/// A path `0 -> 1 -> ... -> n-1` with every arc at probability `p`.
pub fn chain(n: usize, p: f64) -> Result<DiGraph> {
    let arcs: Vec<_> = (1..n).map(|i| (i - 1, i, p)).collect();
    DiGraph::from_edges(n, &arcs)
}

/// A random graph whose arcs all share the probability `branching / d_max`.
pub fn subcritical_random(nodes: usize, arcs: usize, branching: f64, seed: u64) -> Result<DiGraph> {
    let mut r = rng::stream(&[seed, rng::label("tail-graph")]);
    let g = random_digraph(nodes, arcs, &mut r)?;
    let d_max = graph_stats(&g).d_max.max(1);
    let p = branching / d_max as f64;
    g.with_probabilities(vec![p; arcs])
}

/// The geometric-law check on a chain seeded at its head, plus a decay check
/// on a random graph with `p_max * d_max = 0.8`.
pub fn chain_suite(reps: usize, chain_len: usize, seed: u64) -> Result<Report> {
    let chain_len = chain_len.max(2);
    let g = chain(chain_len, 0.5)?;
    let (est, mut violations) = cascade_tail_check(&g, reps, Some(&[NodeId(0)]), seed)?;
    let checked = (chain_len - 1).min(8);
    for l in 1..=checked {
        let q = 0.5f64.powi(l as i32);
        let sigma = (q * (1.0 - q) / reps as f64).sqrt();
        let got = est.survival.get(l - 1).copied().unwrap_or(0.0);
        if (got - q).abs() > 3.0 * sigma {
            violations.push(json!({ "kind": "geometric_law", "size_above": l, "expected": q, "observed": got, "sigma": sigma }));
        }
    }
    let random = subcritical_random(100, 400, 0.8, seed)?;
    let (rest, more) = cascade_tail_check(&random, reps, None, seed)?;
    violations.extend(more);
    let summary = json!({
        "chain": { "length": chain_len, "survival": est.survival, "slope": est.slope },
        "random": { "branching": graph_stats(&random).branching, "survival": rest.survival, "slope": rest.slope },
    });
    Ok(Report::new("tail", 2, violations, seed, summary))
}
