//! Stochastic minimax problems.
//!
//! A [`ProblemOracle`] exposes the local cost of each of its `K` shards
//! (one shard per agent) through sampled gradients and sampled
//! Hessian-vector products, and the global cost `J = (1/K) Σ_k J_k`
//! through exact gradients and an envelope solver used by the metrics.
//!
//! Oracles are immutable. Randomness never lives inside an oracle: a caller
//! hands over a 64-bit stream key and the oracle turns it into a
//! [`Sample`] with [`ProblemOracle::draw_sample`].

mod data;
mod libsvm;
mod logreg;
mod quadratic;
mod regularizer;
mod simplex;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Result};

pub use data::{partition_dataset, synthetic_classification, Dataset};
pub use libsvm::{parse_libsvm, read_libsvm};
pub use logreg::{LogRegParams, RobustLogReg};
pub use quadratic::{QuadraticPL, QuadraticSpec};
pub use regularizer::NonconvexReg;
pub use simplex::project_simplex;

/// A primal/dual pair `(x, y)`. Also used for block-split gradients,
/// Hessian-vector products and momenta, which share the same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct PointPair {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl PointPair {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Self {
        Self { x, y }
    }

    pub fn zeros(m1: usize, m2: usize) -> Self {
        Self {
            x: DVector::zeros(m1),
            y: DVector::zeros(m2),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &PointPair) {
        self.x.axpy(alpha, &other.x, 1.0);
        self.y.axpy(alpha, &other.y, 1.0);
    }

    pub fn sub(&self, other: &PointPair) -> PointPair {
        PointPair::new(&self.x - &other.x, &self.y - &other.y)
    }

    pub fn scaled(&self, alpha: f64) -> PointPair {
        PointPair::new(&self.x * alpha, &self.y * alpha)
    }

    /// Euclidean norm of the stacked vector `col{x, y}`.
    pub fn norm(&self) -> f64 {
        (self.x.norm_squared() + self.y.norm_squared()).sqrt()
    }

    pub(crate) fn check(&self, what: &'static str, m1: usize, m2: usize) -> Result<()> {
        check_dim(what, m1, self.x.len())?;
        check_dim(what, m2, self.y.len())
    }
}

/// Oracle-specific sample identifier. For finite sample spaces it is the
/// index of a data point inside the shard; for noise models it is the seed
/// of the noise draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Sample(pub u64);

/// Where the maximization variable lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YDomain {
    Free,
    /// Probability simplex `{y ≥ 0, Σ y = 1}`.
    Simplex,
}

impl YDomain {
    /// Puts `y` back into the domain (no-op for [`YDomain::Free`]).
    pub fn project(&self, y: &mut DVector<f64>) {
        if let YDomain::Simplex = self {
            *y = project_simplex(y);
        }
    }
}

/// Smoothness metadata: gradient Lipschitz constant `L_f` and PL modulus `ν`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smoothness {
    pub lipschitz: f64,
    pub pl_modulus: f64,
}

impl Smoothness {
    /// Condition number `κ = L_f / ν`.
    pub fn kappa(&self) -> f64 {
        self.lipschitz / self.pl_modulus
    }
}

/// Arguments of a stochastic Hessian-vector product: the Hessian is taken
/// at `eval` and applied to the displacement `eval - anchor`.
#[derive(Clone, Copy, Debug)]
pub struct HvpQuery<'a> {
    pub eval: &'a PointPair,
    pub anchor: &'a PointPair,
    pub sample: Sample,
}

pub trait ProblemOracle: Send + Sync {
    /// `(M1, M2)`
    fn dims(&self) -> (usize, usize);

    /// Number of local cost functions `J_k`.
    fn num_shards(&self) -> usize;

    fn smoothness(&self) -> Smoothness;

    fn y_domain(&self) -> YDomain {
        YDomain::Free
    }

    /// Maps a stream key to a sample of shard `shard`.
    fn draw_sample(&self, shard: usize, key: u64) -> Sample;

    /// Size of the shard's sample space when it is finite. Samples are then
    /// `Sample(0) .. Sample(n - 1)`, all equally likely.
    fn sample_space_size(&self, shard: usize) -> Option<usize>;

    /// `(∇_x Q, ∇_y Q)` of shard `shard` at `p` for one sample.
    fn stoch_grad(&self, shard: usize, p: &PointPair, sample: Sample) -> Result<PointPair>;

    /// `∇²Q(eval; sample) · (eval - anchor)` split into x and y blocks.
    fn stoch_hvp(&self, shard: usize, q: &HvpQuery<'_>) -> Result<PointPair>;

    /// Global cost `J(x, y)`.
    fn value(&self, p: &PointPair) -> Result<f64>;

    /// Exact gradient of the global cost.
    fn exact_grad(&self, p: &PointPair) -> Result<PointPair>;

    /// Exact gradient of the local cost `J_k`.
    fn shard_exact_grad(&self, shard: usize, p: &PointPair) -> Result<PointPair>;

    /// `(y°(x), P(x))` with `y°(x) = argmax_y J(x, y)` and `P(x) = J(x, y°(x))`.
    fn maximizer_and_envelope(&self, x: &DVector<f64>, tol: f64) -> Result<(DVector<f64>, f64)>;

    /// Draws a sample of the global cost: a uniformly chosen shard, then a
    /// sample of that shard. Used by the single-agent solvers.
    fn draw_global(&self, key: u64) -> (usize, Sample) {
        let k = self.num_shards();
        if k <= 1 {
            return (0, self.draw_sample(0, key));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let shard = rng.gen_range(0..k);
        (shard, self.draw_sample(shard, rng.gen()))
    }
}
