//! Multi-policy, multi-replication experiment runner.
//!
//! Each `(policy, rep)` cell owns its history, policy state, and random
//! stream `hash64(master_seed, policy_index, rep)`, so cells can run in any
//! order or in parallel and still produce identical rows. All policies of a
//! replication share one realization of the arc outcomes, which makes their
//! reward curves paired samples.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{DrawSource, ObservedHistory, RealizationMatrix, RoundFeedback, StreamingDraws};
use crate::error::{Error, Result};
use crate::graph::{
    derive_edge_features, load_edge_list, load_node_features, random_node_features, synth_node_features, DiGraph,
    EdgeFeatureTable, LoadOptions,
};
use crate::learning::{recommended_c, UcbAimi};
use crate::policies::{BiggestDegreePolicy, CucbPolicy, KnownGreedyPolicy, Policy, PolicyId, RandomPolicy};
use crate::rng;
use crate::rr::GreedyParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrawMode {
    /// One pre-sampled `|E| x T` matrix per replication.
    Matrix,
    /// Counter-based draws keyed by `(replication, arc, observation)`.
    Streaming,
}

impl FromStr for DrawMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix" => Ok(DrawMode::Matrix),
            "streaming" => Ok(DrawMode::Streaming),
            _ => Err(Error::Config(format!("unknown draw mode `{s}` (expected matrix or streaming)"))),
        }
    }
}

/// Exploration weight of the linear UCB learner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Exploration {
    Fixed(f64),
    /// `recommended_c` with `delta = 0.1` and the known parameter norm (0 when
    /// unknown).
    Auto,
}

impl FromStr for Exploration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Exploration::Auto);
        }
        let c: f64 = s.parse().map_err(|_| Error::Config(format!("c must be a number or `auto`, got `{s}`")))?;
        Ok(Exploration::Fixed(c))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub rewards: Option<PathBuf>,
    pub policies: Vec<PolicyId>,
    /// Defaults to half the node count.
    pub rounds: Option<usize>,
    pub reps: usize,
    pub master_seed: u64,
    pub greedy: GreedyParams,
    pub exploration: Exploration,
    /// Feature dimension used when no feature file is given.
    pub dim: usize,
    /// Range for arc probabilities missing from the edge list.
    pub prob_range: (f64, f64),
    pub draw_mode: DrawMode,
    pub out: Option<PathBuf>,
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graph: None,
            features: None,
            rewards: None,
            policies: PolicyId::ALL.to_vec(),
            rounds: None,
            reps: 10,
            master_seed: 0,
            greedy: GreedyParams::default(),
            exploration: Exploration::Fixed(1.0),
            dim: 5,
            prob_range: (0.0, 0.1),
            draw_mode: DrawMode::Matrix,
            out: None,
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.rounds == Some(0) {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("no policies selected".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        let (lo, hi) = self.prob_range;
        if !(lo >= 0.0 && lo < hi && hi <= 1.0) {
            return Err(Error::Config(format!("probability range ({lo}, {hi}) is empty or outside [0, 1]")));
        }
        if let Exploration::Fixed(c) = self.exploration {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("c = {c} must be finite and non-negative")));
            }
        }
        self.greedy.validate()
    }

    /// Applies one `key = value` setting. Keys mirror the CLI flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "graph" => self.graph = Some(PathBuf::from(value)),
            "features" => self.features = Some(PathBuf::from(value)),
            "rewards" => self.rewards = Some(PathBuf::from(value)),
            "policies" => {
                self.policies =
                    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_>>()?
            }
            "rounds" => self.rounds = Some(num(key, value)?),
            "reps" => self.reps = num(key, value)?,
            "seed" => self.master_seed = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "alpha" => self.greedy.alpha = num(key, value)?,
            "beta" => self.greedy.beta = num(key, value)?,
            "m-cap" => self.greedy.m_cap = Some(num(key, value)?),
            "m-override" => self.greedy.m_override = Some(num(key, value)?),
            "c" => self.exploration = value.parse()?,
            "dim" => self.dim = num(key, value)?,
            "prob-lo" => self.prob_range.0 = num(key, value)?,
            "prob-hi" => self.prob_range.1 = num(key, value)?,
            "draw-mode" => self.draw_mode = value.parse()?,
            "parallel" => self.parallel = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn from_kv<R: BufRead>(reader: R) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.merge_kv(reader)?;
        Ok(cfg)
    }

    pub fn merge_kv<R: BufRead>(&mut self, reader: R) -> Result<()> {
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, message: "expected `key = value`".into() })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }
}

/// Ground truth for one experiment: the graph with its arc probabilities,
/// edge features for the learner, and the parameter norm when known.
#[derive(Clone, Debug)]
pub struct Instance {
    pub graph: DiGraph,
    pub features: EdgeFeatureTable,
    pub theta_norm: Option<f64>,
}

impl Instance {
    /// Loads the files named in `config`. Missing arc probabilities are drawn
    /// once from the master seed; without a feature file, node features are
    /// random (a misspecified learner).
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let path = config.graph.as_ref().ok_or_else(|| Error::Config("no graph file given".into()))?;
        let options = LoadOptions { probability_range: config.prob_range, ..LoadOptions::default() };
        let mut r = rng::stream(&[config.master_seed, rng::label("probabilities")]);
        let mut graph = load_edge_list(open(path)?, &options, &mut r)?;
        if let Some(p) = &config.rewards {
            graph = graph.load_rewards(open(p)?, 1e-9)?;
        }
        let node_features = match &config.features {
            Some(p) => load_node_features(open(p)?, &graph)?,
            None => {
                let mut r = rng::stream(&[config.master_seed, rng::label("features")]);
                random_node_features(graph.node_count(), config.dim, &mut r)
            }
        };
        let features = derive_edge_features(&graph, &node_features)?;
        Ok(Self { graph, features, theta_norm: None })
    }

    /// Replaces the graph's probabilities with `x_e . theta` for synthetic
    /// features whose predictions lie in `range`.
    pub fn well_specified(graph: DiGraph, dim: usize, range: (f64, f64), seed: u64) -> Result<Self> {
        let mut r = rng::stream(&[seed, rng::label("well-specified")]);
        let synth = synth_node_features(&graph, dim, range, &mut r)?;
        let theta_norm = Some(synth.theta_norm());
        let graph = graph.with_probabilities(synth.probabilities)?;
        Ok(Self { graph, features: synth.edge_features, theta_norm })
    }

    /// Keeps the graph's probabilities and attaches unrelated random features.
    pub fn misspecified(graph: DiGraph, dim: usize, seed: u64) -> Result<Self> {
        let mut r = rng::stream(&[seed, rng::label("features")]);
        let nodes = random_node_features(graph.node_count(), dim, &mut r);
        let features = derive_edge_features(&graph, &nodes)?;
        Ok(Self { graph, features, theta_norm: None })
    }

    pub fn rounds(&self, config: &ExperimentConfig) -> usize {
        config.rounds.unwrap_or(self.graph.node_count() / 2).max(1)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub policy: PolicyId,
    pub rep: usize,
    pub round: usize,
    /// Label of the seeded node; empty once the policy has stopped.
    pub seed: String,
    pub new_activated: usize,
    pub cum_reward: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(Self { rows })
    }

    /// Final cumulative reward of every replication of `policy`, by rep.
    pub fn final_rewards(&self, policy: PolicyId) -> Vec<f64> {
        let mut last: Vec<(usize, usize, f64)> = Vec::new();
        for r in self.rows.iter().filter(|r| r.policy == policy) {
            match last.iter_mut().find(|l| l.0 == r.rep) {
                Some(l) if r.round > l.1 => *l = (r.rep, r.round, r.cum_reward),
                Some(_) => {}
                None => last.push((r.rep, r.round, r.cum_reward)),
            }
        }
        last.sort_by_key(|l| l.0);
        last.into_iter().map(|l| l.2).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub policy: PolicyId,
    pub round: usize,
    pub reps: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single replication.
    pub std: f64,
}

/// Mean and sample standard deviation of the cumulative reward per policy and
/// round, in the table's policy order.
pub fn aggregate(table: &ResultTable) -> Vec<AggregateRow> {
    let mut keys: Vec<(PolicyId, usize)> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for r in &table.rows {
        let key = (r.policy, r.round);
        match keys.iter().position(|k| *k == key) {
            Some(i) => values[i].push(r.cum_reward),
            None => {
                keys.push(key);
                values.push(vec![r.cum_reward]);
            }
        }
    }
    keys.into_iter()
        .zip(values)
        .map(|((policy, round), v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
            AggregateRow { policy, round, reps: v.len(), mean, std }
        })
        .collect()
}

pub fn write_aggregate_csv<W: std::io::Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows and the full round log of one `(policy, rep)` cell.
#[derive(Clone, Debug)]
pub struct CellTrace {
    pub rows: Vec<ResultRow>,
    pub feedback: Vec<RoundFeedback>,
}

fn make_policy(id: PolicyId, instance: &Instance, config: &ExperimentConfig, rounds: usize) -> Result<Box<dyn Policy>> {
    let params = config.greedy;
    Ok(match id {
        PolicyId::Random => Box::new(RandomPolicy),
        PolicyId::BiggestDegree => Box::new(BiggestDegreePolicy),
        PolicyId::KnownGreedy => Box::new(KnownGreedyPolicy::new(&instance.graph, params)),
        PolicyId::Cucb => Box::new(CucbPolicy::new(&instance.graph, params)),
        PolicyId::LinearUcb => {
            let c = match config.exploration {
                Exploration::Fixed(c) => c,
                Exploration::Auto => recommended_c(
                    instance.features.dim(),
                    rounds,
                    instance.graph.arc_count(),
                    0.1,
                    instance.theta_norm.unwrap_or(0.0),
                ),
            };
            Box::new(UcbAimi::new(instance.features.clone(), c, params)?)
        }
    })
}

/// Plays one cell. After a policy stops, the remaining rounds are padded with
/// an empty seed and no new activations.
pub fn run_cell(instance: &Instance, config: &ExperimentConfig, policy: PolicyId, rep: usize) -> Result<CellTrace> {
    let graph = &instance.graph;
    let rounds = instance.rounds(config);
    let draw_key = rng::hash64(&[config.master_seed, rng::label("draws"), rep as u64]);
    match config.draw_mode {
        DrawMode::Matrix => {
            let m = RealizationMatrix::sample(graph, rounds, &mut rng::stream(&[draw_key]));
            play(instance, config, policy, rep, rounds, &m)
        }
        DrawMode::Streaming => {
            let draws = StreamingDraws::new(draw_key, graph.probabilities());
            play(instance, config, policy, rep, rounds, &draws)
        }
    }
}

fn play<D: DrawSource + ?Sized>(
    instance: &Instance,
    config: &ExperimentConfig,
    id: PolicyId,
    rep: usize,
    rounds: usize,
    draws: &D,
) -> Result<CellTrace> {
    let graph = &instance.graph;
    let mut policy = make_policy(id, instance, config, rounds)?;
    let mut r = rng::stream(&[config.master_seed, id.index(), rep as u64]);
    let mut history = ObservedHistory::new(graph, rounds);
    let mut rows = Vec::with_capacity(rounds);
    let mut stopped = false;
    for t in 1..=rounds {
        let choice = if stopped { None } else { policy.next_seed(&history, t, &mut r)? };
        match choice {
            Some(v) => {
                let fb = history.run_round(v, draws)?;
                let new_activated = fb.newly_activated.len();
                policy.observe(fb);
                rows.push(ResultRow {
                    policy: id,
                    rep,
                    round: t,
                    seed: graph.label(v).to_string(),
                    new_activated,
                    cum_reward: history.reward(),
                });
            }
            None => {
                stopped = true;
                rows.push(ResultRow {
                    policy: id,
                    rep,
                    round: t,
                    seed: String::new(),
                    new_activated: 0,
                    cum_reward: history.reward(),
                });
            }
        }
    }
    Ok(CellTrace { rows, feedback: history.rounds().to_vec() })
}

/// Runs every `(policy, rep)` cell on a prepared instance. Rows come out
/// sorted by the config's policy order, then rep, then round.
pub fn run_on(instance: &Instance, config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let cells: Vec<(usize, PolicyId, usize)> = config
        .policies
        .iter()
        .enumerate()
        .flat_map(|(i, &p)| (0..config.reps).map(move |rep| (i, p, rep)))
        .collect();
    let run = |&(i, p, rep): &(usize, PolicyId, usize)| run_cell(instance, config, p, rep).map(|c| (i, rep, c.rows));
    let mut done: Vec<(usize, usize, Vec<ResultRow>)> = if config.parallel {
        cells.par_iter().map(run).collect::<Result<_>>()?
    } else {
        cells.iter().map(run).collect::<Result<_>>()?
    };
    done.sort_by_key(|d| (d.0, d.1));
    Ok(ResultTable { rows: done.into_iter().flat_map(|d| d.2).collect() })
}

/// Loads the instance named in `config` and runs it.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let instance = Instance::load(config)?;
    log::info!(
        "loaded {} nodes, {} arcs; {} rounds x {} reps",
        instance.graph.node_count(),
        instance.graph.arc_count(),
        instance.rounds(config),
        config.reps
    );
    run_on(&instance, config)
}
