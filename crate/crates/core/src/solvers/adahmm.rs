use std::sync::Arc;

use super::{check_init, descend_ascend, stream_key, AgentState, Hyperparams, Solver, INIT_ROUND};
use crate::error::Result;
use crate::momentum::{corrected_momentum_step, scaled_normalized_direction, ScalingMode, ScalingState};
use crate::problems::{HvpQuery, PointPair, ProblemOracle};

/// Single-agent adaptive Hessian-corrected momentum method.
///
/// Per iteration: one sample, its gradient at the current iterate and its
/// HVP against the previous iterate; corrected momentum; second-moment
/// update; then the scaled normalized step
/// `x ← x − μx N⁻¹m_x / ‖N^{−1/2}m_x‖` (ascent for `y`).
pub struct AdaHmm {
    oracle: Arc<dyn ProblemOracle>,
    hp: Hyperparams,
    state: AgentState,
    scaling: ScalingState,
    second_moment_beta: f64,
    seed: u64,
    round: usize,
}

impl AdaHmm {
    /// The initial momentum is one stochastic gradient at `init`.
    pub fn new(
        oracle: Arc<dyn ProblemOracle>,
        hp: Hyperparams,
        init: PointPair,
        mode: ScalingMode,
        seed: u64,
    ) -> Result<Self> {
        hp.validate()?;
        check_init(&oracle, &init)?;
        hp.warn_if_unstable(oracle.smoothness().kappa());
        let (shard, sample) = oracle.draw_global(stream_key(seed, 0, INIT_ROUND, 0));
        let m0 = oracle.stoch_grad(shard, &init, sample)?;
        let (m1, m2) = oracle.dims();
        Ok(Self {
            scaling: ScalingState::new(m1, m2, mode),
            state: AgentState::new(0, init, m0),
            second_moment_beta: hp.beta,
            oracle,
            hp,
            seed,
            round: 0,
        })
    }

    /// Uses a separate smoothing factor for the Adam second moment.
    pub fn with_second_moment_beta(mut self, beta2: f64) -> Self {
        self.second_moment_beta = beta2;
        self
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn scaling(&self) -> &ScalingState {
        &self.scaling
    }
}

impl Solver for AdaHmm {
    fn name(&self) -> &'static str {
        "adahmm"
    }

    fn round(&self) -> usize {
        self.round
    }

    fn step(&mut self) -> Result<()> {
        let key = stream_key(self.seed, 0, self.round as u64, 0);
        let (shard, sample) = self.oracle.draw_global(key);
        let st = &self.state;
        let g = self.oracle.stoch_grad(shard, &st.current, sample)?;
        let h = self.oracle.stoch_hvp(
            shard,
            &HvpQuery {
                eval: &st.current,
                anchor: &st.prev_anchor,
                sample,
            },
        )?;
        let m = corrected_momentum_step(&st.momentum, &h, &g, self.hp.beta, self.hp.gamma)?;
        self.scaling.update(&g, self.second_moment_beta);
        let dx = scaled_normalized_direction(&m.x, self.scaling.diag_x().as_ref())?;
        let dy = scaled_normalized_direction(&m.y, self.scaling.diag_y().as_ref())?;
        let next = descend_ascend(&st.current, &dx, &dy, self.hp.mu_x, self.hp.mu_y, self.oracle.y_domain())?;

        let st = &mut self.state;
        st.prev_anchor = std::mem::replace(&mut st.current, next);
        st.tracker = m.clone();
        st.momentum = m;
        self.round += 1;
        Ok(())
    }

    fn agent_points(&self) -> Vec<PointPair> {
        vec![self.state.current.clone()]
    }

    fn samples_used(&self) -> u64 {
        self.round as u64
    }
}
