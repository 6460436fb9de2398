//! Minimax solvers.
//!
//! Every solver is a stepper: [`Solver::step`] performs one communication
//! round (one iteration for the single-agent methods). Randomness comes
//! from [`stream_key`], which maps `(master seed, agent, round, local step)`
//! to an independent 64-bit key, so trajectories do not depend on how agent
//! work is scheduled across threads.

mod adahmm;
mod fed_mima;
mod local_dima;
mod sgda;

use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};
use crate::momentum::{safe_normalize, Accumulators, MomentumPair};
use crate::problems::{HvpQuery, PointPair, ProblemOracle, YDomain};

pub use adahmm::AdaHmm;
pub use fed_mima::FedMima;
pub use local_dima::LocalDima;
pub use sgda::Sgda;

/// Round index used for the initial momentum draw.
pub const INIT_ROUND: u64 = u64::MAX;

/// Step sizes and loop lengths shared by all solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparams {
    /// Global (communication-round) step sizes.
    pub mu_x: f64,
    pub mu_y: f64,
    /// Local step sizes.
    pub local_mu_x: f64,
    pub local_mu_y: f64,
    /// Momentum smoothing factor.
    pub beta: f64,
    /// 1 enables the Hessian correction, 0 gives plain momentum.
    pub gamma: f64,
    pub local_steps: usize,
    pub rounds: usize,
}

impl Hyperparams {
    /// Hard requirements; violating any of them is an error.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        for (name, v) in [
            ("mu_x", self.mu_x),
            ("mu_y", self.mu_y),
            ("local_mu_x", self.local_mu_x),
            ("local_mu_y", self.local_mu_y),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a nonnegative number, got {v}"));
            }
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta must lie in (0, 1], got {}", self.beta));
        }
        if self.gamma != 0.0 && self.gamma != 1.0 {
            return bad(format!("gamma must be 0 or 1, got {}", self.gamma));
        }
        if self.local_steps == 0 {
            return bad("local_steps must be at least 1".into());
        }
        Ok(())
    }

    /// Stability conditions of the convergence theory
    /// (`μx ≤ μy/(6κ)`, `μ̄x ≤ μ̄y`, `β < 1`). Returns one message per
    /// violated condition.
    pub fn stability_violations(&self, kappa: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.mu_x > self.mu_y / (6.0 * kappa) * (1.0 + 1e-12) {
            out.push(format!(
                "mu_x = {} exceeds mu_y / (6 kappa) = {}",
                self.mu_x,
                self.mu_y / (6.0 * kappa)
            ));
        }
        if self.local_mu_x > self.local_mu_y {
            out.push(format!(
                "local_mu_x = {} exceeds local_mu_y = {}",
                self.local_mu_x, self.local_mu_y
            ));
        }
        if self.beta >= 1.0 {
            out.push("beta = 1 (momentum disabled)".into());
        }
        out
    }

    pub fn warn_if_unstable(&self, kappa: f64) {
        for msg in self.stability_violations(kappa) {
            warn!("hyperparameters outside the stability region: {msg}");
        }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream key of `(master, agent, round, step)`:
/// `s(s(s(s(master) ^ agent) ^ round) ^ step)` with `s` = [`splitmix64`].
/// The initial momentum uses `round = INIT_ROUND`.
pub fn stream_key(master: u64, agent: u64, round: u64, step: u64) -> u64 {
    let h = splitmix64(master);
    let h = splitmix64(h ^ agent);
    let h = splitmix64(h ^ round);
    splitmix64(h ^ step)
}

/// One agent's iterate, its HVP anchor, momentum and tracker.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub agent: usize,
    pub current: PointPair,
    /// Iterate at the start of the previous round.
    pub prev_anchor: PointPair,
    pub momentum: MomentumPair,
    pub tracker: MomentumPair,
}

impl AgentState {
    /// Fresh state at `init` with `prev_anchor = init` (so the first HVP
    /// correction vanishes) and `tracker = momentum`.
    pub fn new(agent: usize, init: PointPair, momentum: MomentumPair) -> Self {
        Self {
            agent,
            prev_anchor: init.clone(),
            current: init,
            tracker: momentum.clone(),
            momentum,
        }
    }
}

/// Result of one agent's local phase.
#[derive(Clone, Debug)]
pub struct LocalOutcome {
    /// Mean of the `N` local stochastic gradients.
    pub grad: PointPair,
    /// Mean of the `N` stochastic HVPs.
    pub hvp: PointPair,
    /// Local iterate after `N` steps.
    pub end: PointPair,
    /// `‖x_n − x_0‖` and `‖y_n − y_0‖` for `n = 1..=N`.
    pub drift_x: Vec<f64>,
    pub drift_y: Vec<f64>,
}

/// `N` normalized local descent-ascent steps from `start` with the local
/// step sizes. The HVPs are evaluated at `start` against `prev_anchor`
/// with the same sample as the gradient of that step.
#[allow(clippy::too_many_arguments)]
pub fn local_phase(
    oracle: &dyn ProblemOracle,
    shard: usize,
    start: &PointPair,
    prev_anchor: &PointPair,
    hp: &Hyperparams,
    master: u64,
    agent: usize,
    round: u64,
) -> Result<LocalOutcome> {
    let (m1, m2) = oracle.dims();
    let domain = oracle.y_domain();
    let n_steps = hp.local_steps;
    let mut acc = Accumulators::new(m1, m2, n_steps);
    let mut z = start.clone();
    let mut drift_x = Vec::with_capacity(n_steps);
    let mut drift_y = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let key = stream_key(master, agent as u64, round, n as u64);
        let sample = oracle.draw_sample(shard, key);
        let g = oracle.stoch_grad(shard, &z, sample)?;
        let h = oracle.stoch_hvp(
            shard,
            &HvpQuery {
                eval: start,
                anchor: prev_anchor,
                sample,
            },
        )?;
        z.x.axpy(-hp.local_mu_x, &safe_normalize(&g.x)?, 1.0);
        z.y.axpy(hp.local_mu_y, &safe_normalize(&g.y)?, 1.0);
        domain.project(&mut z.y);
        acc.push(&g, &h);
        drift_x.push((&z.x - &start.x).norm());
        drift_y.push((&z.y - &start.y).norm());
    }
    let (grad, hvp) = acc.into_means();
    if !grad.is_finite() || !hvp.is_finite() {
        return Err(Error::NonFinite("local phase"));
    }
    Ok(LocalOutcome {
        grad,
        hvp,
        end: z,
        drift_x,
        drift_y,
    })
}

/// `x ← x − μx·dx`, `y ← Proj(y + μy·dy)`.
pub(crate) fn descend_ascend(
    p: &PointPair,
    dir_x: &nalgebra::DVector<f64>,
    dir_y: &nalgebra::DVector<f64>,
    mu_x: f64,
    mu_y: f64,
    domain: YDomain,
) -> Result<PointPair> {
    let mut next = p.clone();
    next.x.axpy(-mu_x, dir_x, 1.0);
    next.y.axpy(mu_y, dir_y, 1.0);
    domain.project(&mut next.y);
    if !next.is_finite() {
        return Err(Error::NonFinite("iterate"));
    }
    Ok(next)
}

/// Common stepping interface used by the experiment harness.
pub trait Solver: Send {
    fn name(&self) -> &'static str;

    /// Completed rounds.
    fn round(&self) -> usize;

    fn step(&mut self) -> Result<()>;

    /// Per-agent iterates (a single point for server-based and
    /// single-agent solvers).
    fn agent_points(&self) -> Vec<PointPair>;

    fn samples_used(&self) -> u64;

    fn comm_rounds(&self) -> u64 {
        self.round() as u64
    }

    fn centroid(&self) -> PointPair {
        centroid(&self.agent_points())
    }
}

/// Network average in agent-index order.
pub fn centroid(points: &[PointPair]) -> PointPair {
    let (m1, m2) = points[0].dims();
    let mut c = PointPair::zeros(m1, m2);
    for p in points {
        c.axpy(1.0, p);
    }
    c.scaled(1.0 / points.len() as f64)
}

pub(crate) fn check_init(oracle: &Arc<dyn ProblemOracle>, init: &PointPair) -> Result<()> {
    let (m1, m2) = oracle.dims();
    init.check("initial point", m1, m2)?;
    if !init.is_finite() {
        return Err(Error::NonFinite("initial point"));
    }
    Ok(())
}
