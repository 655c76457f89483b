//! Adaptive influence maximization on directed social graphs.
//!
//! The crate simulates the multi-round Independent Cascade process in which a
//! node may relay influence as a non-seed (an *intermediary*) at most once:
//! after the round in which it first does so, all of its incoming arcs are
//! removed for good. On top of the simulator it provides
//!
//! * [`rr`]: reverse-reachable-set estimation of marginal gains and the
//!   approximate greedy seed oracle built on it,
//! * [`policies`] and [`learning`]: the seeding oracles (random, biggest
//!   degree, greedy with known probabilities, CUCB, and the linear-feature
//!   UCB learner),
//! * [`verify`]: exhaustive small-instance checks of the structural
//!   guarantees (sample-path dominance, monotonicity, the greedy ratio),
//! * [`harness`]: the multi-policy, multi-replication experiment runner that
//!   produces reward curves as CSV.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod diffusion;
pub mod error;
pub mod graph;
pub mod harness;
pub mod learning;
pub mod policies;
pub mod rng;
pub mod rr;
pub mod verify;

pub use diffusion::{
    is_consistent, replay, DrawSource, HistoryKey, ObservedHistory, PartialMatrix,
    RealizationMatrix, RoundFeedback, StreamingDraws,
};
pub use error::{Error, Result};
pub use graph::{
    derive_edge_features, graph_stats, synth_node_features, ArcId, DiGraph, Edge,
    EdgeFeatureTable, GraphBuilder, GraphStats, LiveGraphView, LoadOptions, NodeId,
};
pub use harness::{aggregate, run_experiment, ExperimentConfig, Instance, ResultTable};
pub use learning::{recommended_c, LinUcbState, UcbAimi};
pub use policies::{Policy, PolicyId};
pub use rr::{estimate_marginals, greedy_select, sample_rr_set, GreedyParams, RrSet};
