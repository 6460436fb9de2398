use std::sync::Arc;

use rayon::prelude::*;

use super::{check_init, descend_ascend, local_phase, stream_key, AgentState, Hyperparams, LocalOutcome, Solver, INIT_ROUND};
use crate::error::{Error, Result};
use crate::momentum::{corrected_momentum_step, safe_normalize};
use crate::problems::{PointPair, ProblemOracle};

/// Server-based method: `K` clients run normalized local descent-ascent
/// from the server model and report mean gradients and mean HVPs; the
/// server folds their averages into its corrected momentum and takes a
/// normalized step.
pub struct FedMima {
    oracle: Arc<dyn ProblemOracle>,
    hp: Hyperparams,
    server: AgentState,
    clients: usize,
    seed: u64,
    round: usize,
    parallel: bool,
    last_local: Vec<LocalOutcome>,
}

impl FedMima {
    /// One client per oracle shard. The initial server momentum is the
    /// client average of one stochastic gradient each at `init`.
    pub fn new(oracle: Arc<dyn ProblemOracle>, hp: Hyperparams, init: PointPair, seed: u64) -> Result<Self> {
        hp.validate()?;
        check_init(&oracle, &init)?;
        hp.warn_if_unstable(oracle.smoothness().kappa());
        let clients = oracle.num_shards();
        let (m1, m2) = oracle.dims();
        let mut m0 = PointPair::zeros(m1, m2);
        for k in 0..clients {
            let sample = oracle.draw_sample(k, stream_key(seed, k as u64, INIT_ROUND, 0));
            m0.axpy(1.0, &oracle.stoch_grad(k, &init, sample)?);
        }
        let m0 = m0.scaled(1.0 / clients as f64);
        Ok(Self {
            server: AgentState::new(0, init, m0),
            oracle,
            hp,
            clients,
            seed,
            round: 0,
            parallel: false,
            last_local: Vec::new(),
        })
    }

    /// Runs the client phases on the current rayon pool.
    pub fn parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    pub fn server(&self) -> &AgentState {
        &self.server
    }

    /// Client outcomes of the most recent round.
    pub fn last_local(&self) -> &[LocalOutcome] {
        &self.last_local
    }
}

impl Solver for FedMima {
    fn name(&self) -> &'static str {
        "fed-mima"
    }

    fn round(&self) -> usize {
        self.round
    }

    fn step(&mut self) -> Result<()> {
        let round = self.round as u64;
        let oracle = self.oracle.as_ref();
        let server = &self.server;
        let run = |k: usize| {
            local_phase(oracle, k, &server.current, &server.prev_anchor, &self.hp, self.seed, k, round)
        };
        let outcomes: Vec<LocalOutcome> = if self.parallel {
            (0..self.clients).into_par_iter().map(run).collect::<Result<_>>()?
        } else {
            (0..self.clients).map(run).collect::<Result<_>>()?
        };

        let (m1, m2) = oracle.dims();
        let mut g = PointPair::zeros(m1, m2);
        let mut h = PointPair::zeros(m1, m2);
        for o in &outcomes {
            g.axpy(1.0, &o.grad);
            h.axpy(1.0, &o.hvp);
        }
        let inv_k = 1.0 / self.clients as f64;
        let m = corrected_momentum_step(&server.momentum, &h.scaled(inv_k), &g.scaled(inv_k), self.hp.beta, self.hp.gamma)?;
        let next = descend_ascend(
            &server.current,
            &safe_normalize(&m.x)?,
            &safe_normalize(&m.y)?,
            self.hp.mu_x,
            self.hp.mu_y,
            oracle.y_domain(),
        )?;
        if !m.is_finite() {
            return Err(Error::NonFinite("server momentum"));
        }

        let s = &mut self.server;
        s.prev_anchor = std::mem::replace(&mut s.current, next);
        s.tracker = m.clone();
        s.momentum = m;
        self.last_local = outcomes;
        self.round += 1;
        Ok(())
    }

    fn agent_points(&self) -> Vec<PointPair> {
        vec![self.server.current.clone()]
    }

    fn samples_used(&self) -> u64 {
        (self.clients * self.hp.local_steps * self.round) as u64
    }
}
