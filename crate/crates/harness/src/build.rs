//! Turns a validated config into an oracle, a mixing matrix, step sizes
//! and a solver.

use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;

use minimax_core::problems::{
    partition_dataset, read_libsvm, synthetic_classification, LogRegParams, QuadraticPL, QuadraticSpec, RobustLogReg,
};
use minimax_core::schedule::{schedule_adahmm, schedule_fed_mima, schedule_local_dima, ScheduleSpec};
use minimax_core::solvers::{AdaHmm, FedMima, Hyperparams, LocalDima, Sgda, Solver};
use minimax_core::topology::{metropolis_weights, Graph, MixingMatrix};
use minimax_core::{PointPair, ProblemOracle};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{ExperimentConfig, ProblemConfig, SolverKind, TopologyKind};
use crate::error::{HarnessError, Result};

/// Problem with one shard per agent.
pub fn build_oracle(cfg: &ExperimentConfig) -> Result<Arc<dyn ProblemOracle>> {
    let shards = cfg.topology.agents;
    Ok(match &cfg.problem {
        ProblemConfig::Quadratic {
            m1,
            m2,
            kappa,
            c_max,
            coupling,
            x_curvature,
            reg,
            sigma_g,
            sigma_h,
            heterogeneity,
            seed,
        } => Arc::new(QuadraticPL::generate(&QuadraticSpec {
            m1: *m1,
            m2: *m2,
            kappa: *kappa,
            c_max: *c_max,
            coupling: *coupling,
            x_curvature: *x_curvature,
            reg: (*reg).into(),
            sigma_g: *sigma_g,
            sigma_h: *sigma_h,
            shards,
            heterogeneity: *heterogeneity,
            seed: *seed,
        })?),
        ProblemConfig::Logreg {
            dataset,
            synthetic,
            rho1,
            reg,
            partition_seed,
            envelope_max_iter,
        } => {
            let data = match (dataset, synthetic) {
                (Some(path), _) => read_libsvm(path)?,
                (None, Some(s)) => synthetic_classification(s.samples, s.dim, s.flip_prob, s.seed),
                (None, None) => unreachable!("validated"),
            };
            let parts = partition_dataset(data.len(), shards, *partition_seed)?;
            let params = LogRegParams {
                rho1: *rho1,
                reg: (*reg).into(),
                envelope_max_iter: *envelope_max_iter,
            };
            Arc::new(RobustLogReg::new(&data, parts, params)?)
        }
    })
}

/// Metropolis weights on the configured graph.
pub fn build_mixing(cfg: &ExperimentConfig) -> Result<MixingMatrix> {
    let t = &cfg.topology;
    let graph = match t.kind {
        TopologyKind::Complete => Graph::complete(t.agents),
        TopologyKind::Ring => Graph::ring(t.agents),
        TopologyKind::ErdosRenyi => Graph::erdos_renyi(t.agents, t.p.expect("validated"), t.seed)?,
        TopologyKind::File => {
            let path = t.path.as_ref().expect("validated");
            let file = File::open(path).map_err(|e| HarnessError::Io(path.clone(), e))?;
            Graph::from_edge_list(BufReader::new(file), t.agents)?
        }
    };
    Ok(metropolis_weights(&graph)?)
}

/// Explicit step sizes, or the schedule for the configured solver.
pub fn hyperparams(cfg: &ExperimentConfig, oracle: &dyn ProblemOracle, mixing_rate: f64) -> Result<Hyperparams> {
    let s = &cfg.solver;
    if let Some(h) = &cfg.hyperparams {
        let n = s.local_steps as f64;
        let hp = Hyperparams {
            mu_x: h.mu_x,
            mu_y: h.mu_y,
            local_mu_x: h.local_mu_x.unwrap_or(h.mu_x / n),
            local_mu_y: h.local_mu_y.unwrap_or(h.mu_y / n),
            beta: h.beta,
            gamma: s.gamma,
            local_steps: s.local_steps,
            rounds: s.rounds,
        };
        hp.validate()?;
        return Ok(hp);
    }
    let c = cfg.schedule.as_ref().expect("validated");
    let smooth = oracle.smoothness();
    let spec = ScheduleSpec {
        rounds: s.rounds,
        local_steps: s.local_steps,
        agents: cfg.topology.agents,
        kappa: c.kappa.unwrap_or_else(|| smooth.kappa()),
        mixing_rate,
        lipschitz: c.lipschitz.unwrap_or(smooth.lipschitz),
        c_beta: c.c_beta,
        c_y: c.c_y,
        c_x: c.c_x,
        scaling_lower: c.scaling_lower,
        scaling_upper: c.scaling_upper,
        gamma: s.gamma,
    };
    Ok(match s.kind {
        SolverKind::LocalDima => schedule_local_dima(&spec)?,
        SolverKind::FedMima => schedule_fed_mima(&spec)?,
        SolverKind::Adahmm | SolverKind::Sgda => schedule_adahmm(&spec)?,
    })
}

/// Seeded Gaussian initial point with `y` projected onto its domain or set
/// to the maximizer.
pub fn initial_point(cfg: &ExperimentConfig, oracle: &dyn ProblemOracle) -> Result<PointPair> {
    let (m1, m2) = oracle.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.init.seed);
    let mut draw = |n: usize, scale: f64| DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let x = draw(m1, cfg.init.x_scale);
    let mut y = draw(m2, cfg.init.y_scale);
    if cfg.init.y_maximizer {
        y = oracle.maximizer_and_envelope(&x, cfg.run.envelope_tol)?.0;
    }
    oracle.y_domain().project(&mut y);
    Ok(PointPair::new(x, y))
}

/// Everything a run needs apart from the seed; shared across replicates.
pub struct Setup {
    pub oracle: Arc<dyn ProblemOracle>,
    pub mixing: Option<MixingMatrix>,
    pub hp: Hyperparams,
    pub init: PointPair,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let oracle = build_oracle(cfg)?;
        let mixing = match cfg.solver.kind {
            SolverKind::LocalDima => Some(build_mixing(cfg)?),
            _ => None,
        };
        let lambda = mixing.as_ref().map_or(0.0, MixingMatrix::lambda);
        let hp = hyperparams(cfg, oracle.as_ref(), lambda)?;
        let init = initial_point(cfg, oracle.as_ref())?;
        Ok(Self {
            oracle,
            mixing,
            hp,
            init,
        })
    }

    pub fn solver(&self, cfg: &ExperimentConfig, seed: u64, parallel: bool) -> Result<Box<dyn Solver>> {
        let oracle = self.oracle.clone();
        let init = self.init.clone();
        let s = &cfg.solver;
        Ok(match s.kind {
            SolverKind::LocalDima => {
                let mixing = self.mixing.clone().expect("built for local-dima");
                Box::new(LocalDima::new(oracle, mixing, self.hp, init, seed)?.parallel(parallel))
            }
            SolverKind::FedMima => Box::new(FedMima::new(oracle, self.hp, init, seed)?.parallel(parallel)),
            SolverKind::Adahmm => {
                let solver = AdaHmm::new(oracle, self.hp, init, s.scaling.into(), seed)?;
                match s.second_moment_beta {
                    Some(b) => Box::new(solver.with_second_moment_beta(b)),
                    None => Box::new(solver),
                }
            }
            SolverKind::Sgda => Box::new(Sgda::new(oracle, self.hp, init, seed)?),
        })
    }
}
