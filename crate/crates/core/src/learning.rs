//! Linear-feature UCB estimation of arc probabilities (UCB-AIMI).
//!
//! Each arc carries a feature vector `x_e`, and its probability is modelled
//! as `x_e . theta` for an unknown `theta`. The learner keeps the regularized
//! Gram matrix `N = I + sum x x^T` and the response vector `B = sum x y` over
//! every observed arc, and seeds greedily under the optimistic estimates
//!
//! ```text
//! U(e) = clamp01(x_e . theta_hat + c * sqrt(x_e^T N^-1 x_e)),  N theta_hat = B.
//! ```
//!
//! `N` is factored with Cholesky after each update; both `theta_hat` and the
//! quadratic form come from triangular solves against that factor.

use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::RngCore;

use crate::diffusion::{ObservedHistory, RoundFeedback};
use crate::error::{Error, Result};
use crate::graph::{EdgeFeatureTable, LiveGraphView, NodeId};
use crate::policies::{Policy, PolicyId};
use crate::rr::{greedy_select, GreedyParams};

/// `sqrt(d ln(1 + T |E| / d) + 2 ln(1 / delta)) + theta_norm`.
pub fn recommended_c(dim: usize, rounds: usize, edges: usize, delta: f64, theta_norm: f64) -> f64 {
    let d = dim as f64;
    (d * (1.0 + rounds as f64 * edges as f64 / d).ln() + 2.0 * (1.0 / delta).ln()).sqrt() + theta_norm
}

#[derive(Clone, Debug)]
pub struct LinUcbState {
    gram: DMatrix<f64>,
    response: DVector<f64>,
    theta_hat: DVector<f64>,
    factor: Cholesky<f64, Dyn>,
    c: f64,
    round: usize,
}

impl LinUcbState {
    pub fn new(dim: usize, c: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("feature dimension must be positive".into()));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Validation(format!("exploration weight {c} must be finite and non-negative")));
        }
        let gram = DMatrix::identity(dim, dim);
        let factor = Cholesky::new(gram.clone()).expect("identity is positive definite");
        Ok(Self { gram, response: DVector::zeros(dim), theta_hat: DVector::zeros(dim), factor, c, round: 0 })
    }

    pub fn dim(&self) -> usize {
        self.response.len()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Number of feedback batches absorbed so far.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    /// `x^T N^-1 x`, computed as the squared norm of `L^-1 x`.
    pub fn confidence_width(&self, x: &[f64]) -> f64 {
        let y = self
            .factor
            .l_dirty()
            .solve_lower_triangular(&DVector::from_column_slice(x))
            .expect("Cholesky factor has a nonzero diagonal");
        y.norm_squared()
    }

    /// Optimistic estimate for one feature vector.
    pub fn ucb(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("edge feature"));
        }
        let mean: f64 = x.iter().zip(self.theta_hat.iter()).map(|(a, b)| a * b).sum();
        Ok((mean + self.c * self.confidence_width(x).sqrt()).clamp(0.0, 1.0))
    }

    /// Estimates for every live arc; removed arcs get 0.
    pub fn compute_ucb(&self, features: &EdgeFeatureTable, view: &LiveGraphView<'_>) -> Result<Vec<f64>> {
        if features.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: features.dim() });
        }
        view.graph()
            .arcs()
            .map(|e| if view.is_live(e) { self.ucb(features.get(e)) } else { Ok(0.0) })
            .collect()
    }

    /// Absorbs one round of feedback and re-solves for `theta_hat`.
    pub fn update(&mut self, feedback: &RoundFeedback, features: &EdgeFeatureTable) -> Result<()> {
        if features.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: features.dim() });
        }
        for &(e, bit) in &feedback.observed {
            let x = DVector::from_column_slice(features.get(e));
            self.gram.ger(1.0, &x, &x, 1.0);
            if bit {
                self.response += &x;
            }
        }
        self.round += 1;
        if !feedback.observed.is_empty() {
            self.refactor()?;
        }
        Ok(())
    }

    fn refactor(&mut self) -> Result<()> {
        if self.gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gram matrix"));
        }
        self.factor = Cholesky::new(self.gram.clone()).ok_or(Error::NonFinite("Gram matrix factorization"))?;
        self.theta_hat = self.factor.solve(&self.response);
        Ok(())
    }

    /// Plain-text dump of `(round, c, N, B)`.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        let d = self.dim();
        let _ = writeln!(out, "round {}", self.round);
        let _ = writeln!(out, "dim {d}");
        let _ = writeln!(out, "c {}", self.c);
        let _ = writeln!(out, "N");
        for i in 0..d {
            let row: Vec<String> = (0..d).map(|j| self.gram[(i, j)].to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        let _ = writeln!(out, "B");
        let row: Vec<String> = self.response.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse { line: 0, message: format!("missing {what}") });
        let field = |(line, text): (usize, &str), name: &str| -> Result<String> {
            text.strip_prefix(name)
                .map(|rest| rest.trim().to_string())
                .ok_or_else(|| Error::Parse { line, message: format!("expected `{name}`") })
        };
        let nums = |(line, text): (usize, &str), want: usize| -> Result<Vec<f64>> {
            let v = text
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line, message: e.to_string() })?;
            if v.len() != want {
                return Err(Error::Parse { line, message: format!("expected {want} values, found {}", v.len()) });
            }
            Ok(v)
        };
        let bad = |line: usize, m: String| Error::Parse { line, message: m };

        let l = next("round")?;
        let round = field(l, "round")?.parse::<usize>().map_err(|e| bad(l.0, e.to_string()))?;
        let l = next("dim")?;
        let dim = field(l, "dim")?.parse::<usize>().map_err(|e| bad(l.0, e.to_string()))?;
        let l = next("c")?;
        let c = field(l, "c")?.parse::<f64>().map_err(|e| bad(l.0, e.to_string()))?;
        let mut state = Self::new(dim, c)?;
        let l = next("N")?;
        field(l, "N")?;
        for i in 0..dim {
            let row = nums(next("N row")?, dim)?;
            for (j, v) in row.into_iter().enumerate() {
                state.gram[(i, j)] = v;
            }
        }
        let l = next("B")?;
        field(l, "B")?;
        state.response = DVector::from_vec(nums(next("B row")?, dim)?);
        state.round = round;
        state.refactor()?;
        Ok(state)
    }
}

/// Greedy seeding under the linear UCB estimates (`grd_lf`).
#[derive(Clone, Debug)]
pub struct UcbAimi {
    state: LinUcbState,
    features: EdgeFeatureTable,
    params: GreedyParams,
    last_ucb: Vec<f64>,
}

impl UcbAimi {
    pub fn new(features: EdgeFeatureTable, c: f64, params: GreedyParams) -> Result<Self> {
        let state = LinUcbState::new(features.dim(), c)?;
        Ok(Self { state, features, params, last_ucb: Vec::new() })
    }

    pub fn state(&self) -> &LinUcbState {
        &self.state
    }

    /// Estimates used for the most recent seeding decision.
    pub fn last_ucb(&self) -> &[f64] {
        &self.last_ucb
    }
}

impl Policy for UcbAimi {
    fn id(&self) -> PolicyId {
        PolicyId::LinearUcb
    }

    fn next_seed(&mut self, history: &ObservedHistory<'_>, _round: usize, rng: &mut dyn RngCore) -> Result<Option<NodeId>> {
        if self.features.len() != history.graph().arc_count() {
            return Err(Error::DimensionMismatch { expected: history.graph().arc_count(), found: self.features.len() });
        }
        self.last_ucb = self.state.compute_ucb(&self.features, history.view())?;
        greedy_select(history, &self.last_ucb, &self.params, rng)
    }

    fn observe(&mut self, feedback: &RoundFeedback) {
        // Features were validated against the graph in next_seed.
        self.state.update(feedback, &self.features).expect("feature table matches the graph");
    }
}
