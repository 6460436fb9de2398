use std::sync::Arc;

use rayon::prelude::*;

use super::{check_init, local_phase, stream_key, AgentState, Hyperparams, LocalOutcome, Solver, INIT_ROUND};
use crate::error::{Error, Result};
use crate::momentum::{corrected_momentum_step, safe_normalize, MomentumPair};
use crate::problems::{PointPair, ProblemOracle};
use crate::topology::MixingMatrix;

/// Fully decentralized method with local steps, momentum tracking and
/// adapt-then-combine diffusion over a mixing matrix `A`.
///
/// Each round, agent `k`
/// 1. runs `N` normalized local steps from `x_k`, averaging gradients and
///    HVPs (anchored at its previous round-start iterate),
/// 2. updates its corrected momentum `m_k`,
/// 3. tracks the network momentum: `u_k ← Σ_l a_kl (u_l + m_l − m_l^prev)`,
/// 4. diffuses: `x_k ← Σ_l a_kl (x_l − μx u^x_l/‖u^x_l‖)`, ascent for `y`.
///
/// Trackers start equal to the momenta, so the network averages of `u` and
/// `m` coincide after every round.
pub struct LocalDima {
    oracle: Arc<dyn ProblemOracle>,
    mixing: MixingMatrix,
    hp: Hyperparams,
    agents: Vec<AgentState>,
    seed: u64,
    round: usize,
    parallel: bool,
}

impl LocalDima {
    /// Every agent starts at `init`; agent `k` owns oracle shard `k`.
    pub fn new(
        oracle: Arc<dyn ProblemOracle>,
        mixing: MixingMatrix,
        hp: Hyperparams,
        init: PointPair,
        seed: u64,
    ) -> Result<Self> {
        let k = mixing.size();
        Self::with_initial_points(oracle, mixing, hp, vec![init; k], seed)
    }

    pub fn with_initial_points(
        oracle: Arc<dyn ProblemOracle>,
        mixing: MixingMatrix,
        hp: Hyperparams,
        inits: Vec<PointPair>,
        seed: u64,
    ) -> Result<Self> {
        hp.validate()?;
        let k = mixing.size();
        if oracle.num_shards() != k || inits.len() != k {
            return Err(Error::InvalidParameter(format!(
                "mixing matrix has {k} agents but the oracle has {} shards and {} initial points were given",
                oracle.num_shards(),
                inits.len()
            )));
        }
        hp.warn_if_unstable(oracle.smoothness().kappa());
        let agents = inits
            .into_iter()
            .enumerate()
            .map(|(agent, init)| {
                check_init(&oracle, &init)?;
                let sample = oracle.draw_sample(agent, stream_key(seed, agent as u64, INIT_ROUND, 0));
                let m0 = oracle.stoch_grad(agent, &init, sample)?;
                Ok(AgentState::new(agent, init, m0))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            oracle,
            mixing,
            hp,
            agents,
            seed,
            round: 0,
            parallel: false,
        })
    }

    /// Runs the local phases on the current rayon pool.
    pub fn parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn mixing(&self) -> &MixingMatrix {
        &self.mixing
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    /// `Σ_l a_kl v_l`, summed in ascending `l`.
    fn combine(&self, k: usize, vs: &[PointPair]) -> PointPair {
        let (m1, m2) = vs[0].dims();
        let mut out = PointPair::zeros(m1, m2);
        for (l, v) in vs.iter().enumerate() {
            let w = self.mixing.weight(k, l);
            if w != 0.0 {
                out.axpy(w, v);
            }
        }
        out
    }
}

impl Solver for LocalDima {
    fn name(&self) -> &'static str {
        "local-dima"
    }

    fn round(&self) -> usize {
        self.round
    }

    fn step(&mut self) -> Result<()> {
        let round = self.round as u64;
        let oracle = self.oracle.as_ref();
        let hp = &self.hp;
        let seed = self.seed;
        let run = |a: &AgentState| local_phase(oracle, a.agent, &a.current, &a.prev_anchor, hp, seed, a.agent, round);
        let outcomes: Vec<LocalOutcome> = if self.parallel {
            self.agents.par_iter().map(run).collect::<Result<_>>()?
        } else {
            self.agents.iter().map(run).collect::<Result<_>>()?
        };

        let momenta: Vec<MomentumPair> = self
            .agents
            .iter()
            .zip(&outcomes)
            .map(|(a, o)| corrected_momentum_step(&a.momentum, &o.hvp, &o.grad, hp.beta, hp.gamma))
            .collect::<Result<_>>()?;

        // tracking: u_k = Σ_l a_kl (u_l + m_l − m_l^prev)
        let corrected_trackers: Vec<PointPair> = self
            .agents
            .iter()
            .zip(&momenta)
            .map(|(a, m)| {
                let mut w = a.tracker.clone();
                w.axpy(1.0, m);
                w.axpy(-1.0, &a.momentum);
                w
            })
            .collect();
        let trackers: Vec<PointPair> = (0..self.agents.len())
            .map(|k| self.combine(k, &corrected_trackers))
            .collect();

        // diffusion: x_k = Σ_l a_kl (x_l − μx u^x_l/‖u^x_l‖)
        let adapted: Vec<PointPair> = self
            .agents
            .iter()
            .zip(&trackers)
            .map(|(a, u)| {
                let mut z = a.current.clone();
                z.x.axpy(-hp.mu_x, &safe_normalize(&u.x)?, 1.0);
                z.y.axpy(hp.mu_y, &safe_normalize(&u.y)?, 1.0);
                Ok(z)
            })
            .collect::<Result<_>>()?;
        let domain = oracle.y_domain();
        let next: Vec<PointPair> = (0..self.agents.len())
            .map(|k| {
                let mut p = self.combine(k, &adapted);
                domain.project(&mut p.y);
                p
            })
            .collect();
        if next.iter().chain(&trackers).any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("diffusion"));
        }

        for ((a, p), (m, u)) in self.agents.iter_mut().zip(next).zip(momenta.into_iter().zip(trackers)) {
            a.prev_anchor = std::mem::replace(&mut a.current, p);
            a.momentum = m;
            a.tracker = u;
        }
        self.round += 1;
        Ok(())
    }

    fn agent_points(&self) -> Vec<PointPair> {
        self.agents.iter().map(|a| a.current.clone()).collect()
    }

    fn samples_used(&self) -> u64 {
        (self.agents.len() * self.hp.local_steps * self.round) as u64
    }
}
