//! Property checks over random tiny instances.

use rand::Rng;
use serde_json::{json, Value};

use super::exact::{brute_optimal, exact_deltas, greedy_value, sequence_value, successors};
use super::{Report, TablePolicy, TinyInstance};
use crate::diffusion::{replay, ObservedHistory, RealizationMatrix};
use crate::error::Result;
use crate::graph::NodeId;
use crate::rng;

const TOLERANCE: f64 = 1e-12;

/// Sample-path dominance: for a fixed matrix with `2T` columns and two
/// adaptive policies, running the second policy's sequence first never makes
/// the first policy's sequence worse.
pub fn theorem1_trial(inst: &TinyInstance, m: &RealizationMatrix, first: &TablePolicy, second: &TablePolicy) -> Result<Option<Value>> {
    let t = inst.horizon;
    let columns = m.columns();
    let y = first.run(&inst.graph, m, t)?;
    let z = second.run(&inst.graph, m, t)?;
    let (_, f_y) = replay(&inst.graph, &y, columns, m)?;
    let zy: Vec<NodeId> = z.iter().chain(&y).copied().collect();
    let (_, f_zy) = replay(&inst.graph, &zy, columns, m)?;
    if f_y <= f_zy + TOLERANCE {
        return Ok(None);
    }
    Ok(Some(json!({
        "instance": inst.describe(),
        "matrix": (0..m.arcs()).map(|e| (0..columns).map(|j| u8::from(m.get(e.into(), j))).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "first": y.iter().map(|v| v.0).collect::<Vec<_>>(),
        "second": z.iter().map(|v| v.0).collect::<Vec<_>>(),
        "f_first": f_y,
        "f_concat": f_zy,
    })))
}

pub fn check_theorem1(trials: usize, max_nodes: usize, max_arcs: usize, max_horizon: usize, seed: u64) -> Result<Report> {
    let mut violations = Vec::new();
    for trial in 0..trials {
        let mut r = rng::stream(&[seed, rng::label("theorem1"), trial as u64]);
        let horizon = r.random_range(1..=max_horizon.max(1));
        let inst = TinyInstance::random(&mut r, max_nodes, max_arcs, horizon);
        let m = RealizationMatrix::sample(&inst.graph, 2 * horizon, &mut r);
        let first = TablePolicy::random(&mut r);
        let second = TablePolicy::random(&mut r);
        if let Some(w) = theorem1_trial(&inst, &m, &first, &second)? {
            violations.push(w);
        }
    }
    Ok(Report::new("theorem1", trials, violations, seed, Value::Null))
}

/// Nonnegativity of every exact gain at every history reachable within
/// `T - 1` rounds, and monotonicity of gains along every extension of a
/// history.
pub fn lemma_violations(inst: &TinyInstance) -> Result<(usize, Vec<Value>)> {
    let root = ObservedHistory::new(&inst.graph, inst.horizon);
    let mut violations = Vec::new();
    let mut visited = 0;
    let mut ancestors = Vec::new();
    visit(inst, &root, &mut ancestors, &mut visited, &mut violations)?;
    Ok((visited, violations))
}

fn visit(
    inst: &TinyInstance,
    h: &ObservedHistory<'_>,
    ancestors: &mut Vec<(Vec<NodeId>, Vec<f64>)>,
    visited: &mut usize,
    violations: &mut Vec<Value>,
) -> Result<()> {
    let probs = inst.graph.probabilities();
    let deltas = exact_deltas(h, probs)?;
    *visited += 1;
    for (v, &d) in deltas.iter().enumerate() {
        if d < -TOLERANCE {
            violations.push(json!({
                "kind": "negative_gain", "instance": inst.describe(),
                "sequence": h.sequence().iter().map(|x| x.0).collect::<Vec<_>>(), "node": v, "gain": d,
            }));
        }
        for (seq, older) in ancestors.iter() {
            if older[v] + TOLERANCE < d {
                violations.push(json!({
                    "kind": "gain_increased", "instance": inst.describe(), "node": v,
                    "sub_sequence": seq.iter().map(|x| x.0).collect::<Vec<_>>(), "sub_gain": older[v],
                    "super_sequence": h.sequence().iter().map(|x| x.0).collect::<Vec<_>>(), "super_gain": d,
                }));
            }
        }
    }
    if h.len() + 1 < inst.horizon {
        ancestors.push((h.sequence().to_vec(), deltas));
        for u in inst.graph.nodes() {
            for b in successors(h, u, probs)? {
                visit(inst, &b.history, ancestors, visited, violations)?;
            }
        }
        ancestors.pop();
    }
    Ok(())
}

pub fn check_lemmas_1_2(instances: usize, max_nodes: usize, max_arcs: usize, horizon: usize, seed: u64) -> Result<Report> {
    let mut violations = Vec::new();
    let mut histories = 0;
    for i in 0..instances {
        let mut r = rng::stream(&[seed, rng::label("lemmas"), i as u64]);
        let inst = TinyInstance::random(&mut r, max_nodes, max_arcs, horizon);
        let (n, v) = lemma_violations(&inst)?;
        histories += n;
        violations.extend(v);
    }
    Ok(Report::new("lemmas", instances, violations, seed, json!({ "histories": histories })))
}

/// Exact greedy and optimal values over the instance horizon.
pub fn greedy_ratio(inst: &TinyInstance, budget: usize) -> Result<(f64, f64)> {
    let probs = inst.graph.probabilities();
    let root = ObservedHistory::new(&inst.graph, inst.horizon);
    let opt = brute_optimal(&root, inst.horizon, probs, budget)?.value;
    let greedy = greedy_value(&root, inst.horizon, probs)?;
    Ok((greedy, opt))
}

pub fn check_theorem3(instances: usize, max_nodes: usize, max_arcs: usize, horizon: usize, seed: u64) -> Result<Report> {
    let bound = 1.0 - (-1.0f64).exp();
    let mut violations = Vec::new();
    let mut worst = f64::INFINITY;
    for i in 0..instances {
        let mut r = rng::stream(&[seed, rng::label("theorem3"), i as u64]);
        let inst = TinyInstance::random(&mut r, max_nodes, max_arcs, horizon);
        let (greedy, opt) = greedy_ratio(&inst, 1_000_000)?;
        let ratio = greedy / opt;
        worst = worst.min(ratio);
        if ratio < bound - 1e-9 {
            violations.push(json!({ "instance": inst.describe(), "greedy": greedy, "optimal": opt, "ratio": ratio }));
        }
    }
    Ok(Report::new("theorem3", instances, violations, seed, json!({ "bound": bound, "worst_ratio": worst })))
}

/// Exact `f((a, b)) - f((b, a))` for fixed seeds.
pub fn order_gap(inst: &TinyInstance, a: NodeId, b: NodeId) -> Result<f64> {
    let probs = inst.graph.probabilities();
    let root = ObservedHistory::new(&inst.graph, 2);
    Ok(sequence_value(&root, &[a, b], probs)? - sequence_value(&root, &[b, a], probs)?)
}

/// Searches random instances for seed pairs whose order changes the
/// expected reward. Differences are findings, not failures.
pub fn order_sensitivity_search(trials: usize, max_nodes: usize, max_arcs: usize, seed: u64) -> Result<Report> {
    let mut found = Vec::new();
    let mut differing = 0usize;
    let mut max_gap = 0.0f64;
    for i in 0..trials {
        let mut r = rng::stream(&[seed, rng::label("order"), i as u64]);
        let inst = TinyInstance::random(&mut r, max_nodes.max(2), max_arcs, 2);
        let n = inst.graph.node_count();
        let a = r.random_range(0..n);
        let b = (a + r.random_range(1..n)) % n;
        let gap = order_gap(&inst, NodeId::from(a), NodeId::from(b))?;
        if gap.abs() > TOLERANCE {
            differing += 1;
            if gap.abs() > max_gap.abs() {
                max_gap = gap;
            }
            if found.len() < 20 {
                found.push(json!({ "instance": inst.describe(), "a": a, "b": b, "gap": gap }));
            }
        }
    }
    let summary = json!({ "differing": differing, "max_gap": max_gap, "examples": found });
    Ok(Report::new("order", trials, Vec::new(), seed, summary))
}
