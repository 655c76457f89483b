//! Directed graph model: arcs with influence probabilities, node rewards and
//! costs, per-arc feature vectors, and the live view that tracks permanently
//! removed arcs.
//!
//! Node labels read from files are remapped to dense [`NodeId`]s in order of
//! first appearance; arcs are numbered in load order, which fixes the row
//! order of realization matrices.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node identifier in `[0, |V|)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense arc identifier: the position of the arc in load order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArcId(pub u32);

impl ArcId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ArcId {
    fn from(i: usize) -> Self {
        ArcId(i as u32)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub origin: NodeId,
    pub target: NodeId,
}

#[derive(Clone, Debug)]
pub struct DiGraph {
    labels: Vec<String>,
    label_index: HashMap<String, NodeId>,
    edges: Vec<Edge>,
    probs: Vec<f64>,
    rewards: Vec<f64>,
    costs: Vec<f64>,
    out_adj: Vec<Vec<ArcId>>,
    in_adj: Vec<Vec<ArcId>>,
}

impl DiGraph {
    /// Builds a graph over nodes `0..n` labelled by their index.
    pub fn from_edges(n: usize, arcs: &[(usize, usize, f64)]) -> Result<Self> {
        let mut b = GraphBuilder::new();
        for i in 0..n {
            b.add_node(&i.to_string());
        }
        for &(u, v, p) in arcs {
            if u >= n || v >= n {
                return Err(Error::Validation(format!("arc ({u}, {v}) outside 0..{n}")));
            }
            b.add_arc(&u.to_string(), &v.to_string(), p)?;
        }
        Ok(b.build())
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn arc_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> {
        (0..self.labels.len()).map(NodeId::from)
    }

    pub fn arcs(&self) -> impl ExactSizeIterator<Item = ArcId> {
        (0..self.edges.len()).map(ArcId::from)
    }

    #[inline]
    pub fn edge(&self, e: ArcId) -> Edge {
        self.edges[e.index()]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn probability(&self, e: ArcId) -> f64 {
        self.probs[e.index()]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn reward(&self, v: NodeId) -> f64 {
        self.rewards[v.index()]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn cost(&self, v: NodeId) -> f64 {
        self.costs[v.index()]
    }

    pub fn max_reward(&self) -> f64 {
        self.rewards.iter().copied().fold(0.0, f64::max)
    }

    #[inline]
    pub fn out_arcs(&self, v: NodeId) -> &[ArcId] {
        &self.out_adj[v.index()]
    }

    #[inline]
    pub fn in_arcs(&self, v: NodeId) -> &[ArcId] {
        &self.in_adj[v.index()]
    }

    pub fn label(&self, v: NodeId) -> &str {
        &self.labels[v.index()]
    }

    pub fn node_by_label(&self, label: &str) -> Option<NodeId> {
        self.label_index.get(label).copied()
    }

    pub fn find_arc(&self, origin: NodeId, target: NodeId) -> Option<ArcId> {
        self.out_arcs(origin)
            .iter()
            .copied()
            .find(|&e| self.edges[e.index()].target == target)
    }

    /// Replaces every arc probability. Each must lie in `(0, 1]`.
    pub fn with_probabilities(mut self, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != self.edges.len() {
            return Err(Error::Validation(format!(
                "{} probabilities for {} arcs",
                probs.len(),
                self.edges.len()
            )));
        }
        for (i, &p) in probs.iter().enumerate() {
            check_probability(p).map_err(|m| Error::Validation(format!("arc {i}: {m}")))?;
        }
        self.probs = probs;
        Ok(self)
    }

    /// Replaces node rewards, validating `r_min <= r(v) <= 1`.
    pub fn with_rewards(mut self, rewards: Vec<f64>, r_min: f64) -> Result<Self> {
        if rewards.len() != self.labels.len() {
            return Err(Error::Validation(format!(
                "{} rewards for {} nodes",
                rewards.len(),
                self.labels.len()
            )));
        }
        if !(r_min > 0.0 && r_min <= 1.0) {
            return Err(Error::Validation(format!("r_min {r_min} outside (0, 1]")));
        }
        for (i, &r) in rewards.iter().enumerate() {
            if !(r >= r_min && r <= 1.0) {
                return Err(Error::Validation(format!(
                    "reward {r} of node `{}` outside [{r_min}, 1]",
                    self.labels[i]
                )));
            }
        }
        self.rewards = rewards;
        Ok(self)
    }

    pub fn with_costs(mut self, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != self.labels.len() || costs.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::Validation("costs must be positive, one per node".into()));
        }
        self.costs = costs;
        Ok(self)
    }

    /// Reads a reward file of `label reward` lines. Nodes not listed keep
    /// their current reward.
    pub fn load_rewards<R: BufRead>(self, reader: R, r_min: f64) -> Result<Self> {
        let mut rewards = self.rewards.clone();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(label), Some(r), None) = (it.next(), it.next(), it.next()) else {
                return Err(parse_err(lineno, "expected `node reward`"));
            };
            let r: f64 = r.parse().map_err(|_| parse_err(lineno, "reward is not a number"))?;
            let v = self
                .node_by_label(label)
                .ok_or_else(|| Error::UnknownNode(label.to_string()))?;
            rewards[v.index()] = r;
        }
        self.with_rewards(rewards, r_min)
    }
}

fn check_probability(p: f64) -> std::result::Result<(), String> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(format!("probability {p} outside (0, 1]"))
    }
}

fn parse_err(lineno: usize, message: &str) -> Error {
    Error::Parse { line: lineno + 1, message: message.to_string() }
}

/// Incremental graph construction with label interning.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    labels: Vec<String>,
    label_index: HashMap<String, NodeId>,
    edges: Vec<Edge>,
    probs: Vec<f64>,
    arc_index: HashMap<(NodeId, NodeId), ArcId>,
    allow_self_loops: bool,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allow_self_loops(&mut self, allow: bool) -> &mut Self {
        self.allow_self_loops = allow;
        self
    }

    pub fn add_node(&mut self, label: &str) -> NodeId {
        if let Some(&id) = self.label_index.get(label) {
            return id;
        }
        let id = NodeId::from(self.labels.len());
        self.labels.push(label.to_string());
        self.label_index.insert(label.to_string(), id);
        id
    }

    pub fn add_arc(&mut self, origin: &str, target: &str, p: f64) -> Result<ArcId> {
        check_probability(p).map_err(Error::Validation)?;
        if origin == target && !self.allow_self_loops {
            return Err(Error::Validation(format!("self-loop on `{origin}`")));
        }
        let u = self.add_node(origin);
        let v = self.add_node(target);
        if self.arc_index.contains_key(&(u, v)) {
            return Err(Error::Validation(format!("duplicate arc {origin} -> {target}")));
        }
        let id = ArcId::from(self.edges.len());
        self.edges.push(Edge { origin: u, target: v });
        self.probs.push(p);
        self.arc_index.insert((u, v), id);
        Ok(id)
    }

    pub fn build(self) -> DiGraph {
        let n = self.labels.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (i, e) in self.edges.iter().enumerate() {
            out_adj[e.origin.index()].push(ArcId::from(i));
            in_adj[e.target.index()].push(ArcId::from(i));
        }
        DiGraph {
            labels: self.labels,
            label_index: self.label_index,
            edges: self.edges,
            probs: self.probs,
            rewards: vec![1.0; n],
            costs: vec![1.0; n],
            out_adj,
            in_adj,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    /// Range `(lo, hi)` from which missing arc probabilities are sampled.
    pub probability_range: (f64, f64),
    pub allow_self_loops: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { probability_range: (0.0, 0.1), allow_self_loops: false }
    }
}

/// Reads an edge list of `u v` or `u v p` lines. `#` lines are comments.
///
/// Arcs without an explicit probability get one drawn uniformly from the
/// configured open range, in line order.
pub fn load_edge_list<R: BufRead, G: Rng + ?Sized>(
    reader: R,
    options: &LoadOptions,
    rng: &mut G,
) -> Result<DiGraph> {
    let (lo, hi) = options.probability_range;
    if !(lo >= 0.0 && lo < hi && hi <= 1.0) {
        return Err(Error::Validation(format!("probability range ({lo}, {hi}) is empty or outside [0, 1]")));
    }
    let mut b = GraphBuilder::new();
    b.allow_self_loops(options.allow_self_loops);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let p = match fields.len() {
            2 => sample_open(rng, lo, hi),
            3 => fields[2]
                .parse::<f64>()
                .map_err(|_| parse_err(lineno, "probability is not a number"))?,
            _ => return Err(parse_err(lineno, "expected `u v` or `u v p`")),
        };
        b.add_arc(fields[0], fields[1], p).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("line {}: {m}", lineno + 1)),
            other => other,
        })?;
    }
    Ok(b.build())
}

fn sample_open<G: Rng + ?Sized>(rng: &mut G, lo: f64, hi: f64) -> f64 {
    loop {
        let p = rng.random_range(lo..hi);
        if p > lo && p > 0.0 {
            return p;
        }
    }
}

/// Writes `u v p` lines using node labels.
pub fn write_edge_list<W: std::io::Write>(graph: &DiGraph, mut out: W) -> Result<()> {
    for e in graph.arcs() {
        let Edge { origin, target } = graph.edge(e);
        writeln!(out, "{} {} {}", graph.label(origin), graph.label(target), graph.probability(e))?;
    }
    Ok(())
}

/// Per-arc feature vectors stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFeatureTable {
    dim: usize,
    data: Vec<f64>,
}

impl EdgeFeatureTable {
    pub fn new(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("feature dimension must be positive".into()));
        }
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("edge features"));
            }
            data.extend(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, e: ArcId) -> &[f64] {
        &self.data[e.index() * self.dim..(e.index() + 1) * self.dim]
    }
}

/// Edge features as the element-wise product of origin and target node
/// features.
pub fn derive_edge_features(graph: &DiGraph, node_features: &[Vec<f64>]) -> Result<EdgeFeatureTable> {
    let dim = match node_features.first() {
        Some(f) => f.len(),
        None if graph.node_count() == 0 => 1,
        None => return Err(Error::MissingNodeFeature(graph.label(NodeId(0)).to_string())),
    };
    if node_features.len() < graph.node_count() {
        let missing = NodeId::from(node_features.len());
        return Err(Error::MissingNodeFeature(graph.label(missing).to_string()));
    }
    for f in &node_features[..graph.node_count()] {
        if f.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: f.len() });
        }
    }
    let rows = graph
        .edges()
        .iter()
        .map(|e| {
            let a = &node_features[e.origin.index()];
            let b = &node_features[e.target.index()];
            a.iter().zip(b).map(|(x, y)| x * y).collect()
        })
        .collect();
    EdgeFeatureTable::new(dim, rows)
}

/// Reads `label f1 ... fd` lines into per-node vectors ordered by `NodeId`.
/// Every node of `graph` must appear.
pub fn load_node_features<R: BufRead>(reader: R, graph: &DiGraph) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; graph.node_count()];
    let mut dim = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let label = it.next().unwrap_or_default();
        let values = it
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| parse_err(lineno, "feature is not a number"))?;
        if values.is_empty() {
            return Err(parse_err(lineno, "no feature values"));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::DimensionMismatch { expected: d, found: values.len() })
            }
            _ => {}
        }
        // Features for nodes that never appear in the edge list are ignored.
        if let Some(v) = graph.node_by_label(label) {
            rows[v.index()] = Some(values);
        }
    }
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| Error::MissingNodeFeature(graph.label(NodeId::from(i)).to_string())))
        .collect()
}

pub fn write_node_features<W: std::io::Write>(graph: &DiGraph, features: &[Vec<f64>], mut out: W) -> Result<()> {
    for v in graph.nodes() {
        write!(out, "{}", graph.label(v))?;
        for x in &features[v.index()] {
            write!(out, " {x}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// A well-specified linear instance: `probabilities[e] == x_e . theta`.
#[derive(Clone, Debug)]
pub struct SyntheticFeatures {
    pub node_features: Vec<Vec<f64>>,
    pub edge_features: EdgeFeatureTable,
    pub theta: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl SyntheticFeatures {
    pub fn theta_norm(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum::<f64>().sqrt()
    }
}

/// Generates node features and a parameter vector whose linear predictions
/// lie in `[p_lo, p_hi]` for every arc.
///
/// Node feature entries are drawn from `[1, sqrt(p_hi / p_lo)]`, so edge
/// feature entries lie in `[1, p_hi / p_lo]`; `theta` is positive with
/// entries summing to `p_lo`.
pub fn synth_node_features<G: Rng + ?Sized>(
    graph: &DiGraph,
    dim: usize,
    range: (f64, f64),
    rng: &mut G,
) -> Result<SyntheticFeatures> {
    let (p_lo, p_hi) = range;
    if dim == 0 {
        return Err(Error::Validation("feature dimension must be positive".into()));
    }
    if !(p_lo > 0.0 && p_lo <= p_hi && p_hi < 1.0) {
        return Err(Error::Validation(format!(
            "probability range [{p_lo}, {p_hi}] must satisfy 0 < lo <= hi < 1"
        )));
    }
    let weights: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = weights.iter().sum();
    let theta: Vec<f64> = weights.iter().map(|w| p_lo * w / total).collect();
    let top = (p_hi / p_lo).sqrt();
    let node_features: Vec<Vec<f64>> = (0..graph.node_count())
        .map(|_| {
            (0..dim)
                .map(|_| if top > 1.0 { rng.random_range(1.0..top) } else { 1.0 })
                .collect()
        })
        .collect();
    let edge_features = derive_edge_features(graph, &node_features)?;
    let probabilities = graph
        .arcs()
        .map(|e| dot(edge_features.get(e), &theta).clamp(p_lo, p_hi))
        .collect();
    Ok(SyntheticFeatures { node_features, edge_features, theta, probabilities })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random node features with no relation to arc probabilities, for
/// misspecified experiments.
pub fn random_node_features<G: Rng + ?Sized>(n: usize, dim: usize, rng: &mut G) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub arcs: usize,
    pub p_max: f64,
    pub d_max: usize,
    pub l_max: usize,
    /// `p_max * d_max`
    pub branching: f64,
    pub subcritical: bool,
}

pub fn graph_stats(graph: &DiGraph) -> GraphStats {
    let p_max = graph.probabilities().iter().copied().fold(0.0, f64::max);
    let d_max = graph.nodes().map(|v| graph.out_arcs(v).len()).max().unwrap_or(0);
    let branching = p_max * d_max as f64;
    GraphStats {
        nodes: graph.node_count(),
        arcs: graph.arc_count(),
        p_max,
        d_max,
        l_max: d_max,
        branching,
        subcritical: branching < 1.0,
    }
}

/// A uniform random directed graph with exactly `arcs` distinct arcs and no
/// self-loops. Probabilities are placeholders (1.0).
pub fn random_digraph<G: Rng + ?Sized>(n: usize, arcs: usize, rng: &mut G) -> Result<DiGraph> {
    let possible = n.saturating_mul(n.saturating_sub(1));
    if arcs > possible {
        return Err(Error::Validation(format!("{arcs} arcs do not fit in {n} nodes")));
    }
    let mut b = GraphBuilder::new();
    for i in 0..n {
        b.add_node(&i.to_string());
    }
    let mut present = std::collections::HashSet::with_capacity(arcs);
    let mut chosen = Vec::with_capacity(arcs);
    while chosen.len() < arcs {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && present.insert((u, v)) {
            chosen.push((u, v));
        }
    }
    for (u, v) in chosen {
        b.add_arc(&u.to_string(), &v.to_string(), 1.0)?;
    }
    Ok(b.build())
}

/// The graph as seen in a given round: the base graph minus the arcs removed
/// by intermediary service so far.
#[derive(Clone, Debug)]
pub struct LiveGraphView<'g> {
    graph: &'g DiGraph,
    removed: Vec<bool>,
    removed_count: usize,
}

impl<'g> LiveGraphView<'g> {
    pub fn new(graph: &'g DiGraph) -> Self {
        Self { graph, removed: vec![false; graph.arc_count()], removed_count: 0 }
    }

    #[inline]
    pub fn graph(&self) -> &'g DiGraph {
        self.graph
    }

    #[inline]
    pub fn is_live(&self, e: ArcId) -> bool {
        !self.removed[e.index()]
    }

    pub fn removed_count(&self) -> usize {
        self.removed_count
    }

    pub fn live_count(&self) -> usize {
        self.removed.len() - self.removed_count
    }

    pub fn removed_arcs(&self) -> impl Iterator<Item = ArcId> + '_ {
        self.removed.iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| ArcId::from(i))
    }

    pub fn live_out_arcs(&self, v: NodeId) -> impl Iterator<Item = ArcId> + '_ {
        self.graph.out_arcs(v).iter().copied().filter(move |&e| self.is_live(e))
    }

    pub fn live_in_arcs(&self, v: NodeId) -> impl Iterator<Item = ArcId> + '_ {
        self.graph.in_arcs(v).iter().copied().filter(move |&e| self.is_live(e))
    }

    pub fn live_out_degree(&self, v: NodeId) -> usize {
        self.live_out_arcs(v).count()
    }

    /// Removes every incoming arc of `v`; returns how many were still live.
    pub fn remove_incoming(&mut self, v: NodeId) -> usize {
        let mut n = 0;
        for &e in self.graph.in_arcs(v) {
            if !self.removed[e.index()] {
                self.removed[e.index()] = true;
                n += 1;
            }
        }
        self.removed_count += n;
        n
    }
}
