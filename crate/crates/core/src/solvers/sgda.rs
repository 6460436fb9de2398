use std::sync::Arc;

use super::{check_init, descend_ascend, stream_key, Hyperparams, Solver};
use crate::error::Result;
use crate::problems::{PointPair, ProblemOracle};

/// Plain single-loop stochastic gradient descent-ascent:
/// `x ← x − μx g_x`, `y ← y + μy g_y` (unnormalized).
pub struct Sgda {
    oracle: Arc<dyn ProblemOracle>,
    hp: Hyperparams,
    current: PointPair,
    seed: u64,
    round: usize,
}

impl Sgda {
    pub fn new(oracle: Arc<dyn ProblemOracle>, hp: Hyperparams, init: PointPair, seed: u64) -> Result<Self> {
        hp.validate()?;
        check_init(&oracle, &init)?;
        Ok(Self {
            oracle,
            hp,
            current: init,
            seed,
            round: 0,
        })
    }

    pub fn current(&self) -> &PointPair {
        &self.current
    }
}

impl Solver for Sgda {
    fn name(&self) -> &'static str {
        "sgda"
    }

    fn round(&self) -> usize {
        self.round
    }

    fn step(&mut self) -> Result<()> {
        let (shard, sample) = self.oracle.draw_global(stream_key(self.seed, 0, self.round as u64, 0));
        let g = self.oracle.stoch_grad(shard, &self.current, sample)?;
        self.current = descend_ascend(&self.current, &g.x, &g.y, self.hp.mu_x, self.hp.mu_y, self.oracle.y_domain())?;
        self.round += 1;
        Ok(())
    }

    fn agent_points(&self) -> Vec<PointPair> {
        vec![self.current.clone()]
    }

    fn samples_used(&self) -> u64 {
        self.round as u64
    }
}
