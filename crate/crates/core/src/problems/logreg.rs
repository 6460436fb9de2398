//! Distributionally robust logistic regression
//!
//! `J_k(x, y) = Σ_{i∈S_k} y_i Q_i(x) − V(y) + g(x)` with
//! `Q_i(x) = log(1 + exp(−l_i r_iᵀx))`, `V(y) = ½ ρ₁ ‖L y − 1‖²`, and
//! `y ∈ Δ_L`. The global cost is `J = (1/K) Σ_k J_k`.
//!
//! Sample `j` of shard `k` is the data point `i = S_k[j]`, and the sampled
//! cost is `|S_k| y_i Q_i(x) − V(y) + g(x)` so that its mean over the shard
//! is `J_k`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{project_simplex, Dataset, HvpQuery, NonconvexReg, PointPair, ProblemOracle, Sample, Smoothness, YDomain};
use crate::error::{check_dim, Error, Result};

/// Cost constants. `rho1 = None` means `1 / L²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRegParams {
    pub rho1: Option<f64>,
    pub reg: NonconvexReg,
    pub envelope_max_iter: usize,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            rho1: None,
            reg: NonconvexReg::default(),
            envelope_max_iter: 100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RobustLogReg {
    features: Vec<DVector<f64>>,
    labels: Vec<f64>,
    shards: Vec<Vec<usize>>,
    rho1: f64,
    reg: NonconvexReg,
    envelope_max_iter: usize,
    smoothness: Smoothness,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl RobustLogReg {
    pub fn new(data: &Dataset, shards: Vec<Vec<usize>>, params: LogRegParams) -> Result<Self> {
        let n = data.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty dataset".into()));
        }
        if shards.is_empty() || shards.iter().any(Vec::is_empty) {
            return Err(Error::InvalidParameter("shards must be non-empty".into()));
        }
        let mut seen = vec![false; n];
        for &i in shards.iter().flatten() {
            if i >= n || seen[i] {
                return Err(Error::InvalidParameter(format!(
                    "shards must partition 0..{n} (bad or repeated index {i})"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter("shards do not cover the dataset".into()));
        }
        if data.labels.iter().any(|&l| l != 1.0 && l != -1.0) {
            return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
        }

        let features = data.dense_rows();
        let k = shards.len() as f64;
        let rho1 = params.rho1.unwrap_or(1.0 / (n * n) as f64);
        let pl_modulus = rho1 * (n * n) as f64;
        let max_sq = features.iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
        let frob = features.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt();
        let lipschitz = max_sq / (4.0 * k) + params.reg.curvature_bound() + frob / k + pl_modulus;

        Ok(Self {
            features,
            labels: data.labels.clone(),
            shards,
            rho1,
            reg: params.reg,
            envelope_max_iter: params.envelope_max_iter,
            smoothness: Smoothness {
                lipschitz,
                pl_modulus,
            },
        })
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    fn margin(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.labels[i] * self.features[i].dot(x)
    }

    /// `Q_i(x)`
    pub fn loss(&self, i: usize, x: &DVector<f64>) -> f64 {
        softplus(-self.margin(i, x))
    }

    /// `∇Q_i(x) = −l_i σ(−m_i) r_i`
    fn loss_grad(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        let m = self.margin(i, x);
        &self.features[i] * (-self.labels[i] * sigmoid(-m))
    }

    fn divergence(&self, y: &DVector<f64>) -> f64 {
        let n = self.num_samples() as f64;
        0.5 * self.rho1 * y.iter().map(|&v| (n * v - 1.0).powi(2)).sum::<f64>()
    }

    fn divergence_grad(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.num_samples() as f64;
        y.map(|v| self.rho1 * n * (n * v - 1.0))
    }

    fn check_point(&self, p: &PointPair) -> Result<()> {
        let (m1, m2) = self.dims();
        p.check("point", m1, m2)
    }

    fn resolve(&self, shard: usize, sample: Sample) -> Result<(usize, f64)> {
        let s = self
            .shards
            .get(shard)
            .ok_or_else(|| Error::InvalidParameter(format!("shard {shard} out of range")))?;
        let j = sample.0 as usize;
        let i = *s
            .get(j)
            .ok_or_else(|| Error::InvalidParameter(format!("sample {j} out of range for shard {shard}")))?;
        Ok((i, s.len() as f64))
    }

    fn y_gradient(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let k = self.shards.len() as f64;
        let mut gy = -self.divergence_grad(y);
        for i in 0..self.num_samples() {
            gy[i] += self.loss(i, x) / k;
        }
        gy
    }
}

impl ProblemOracle for RobustLogReg {
    fn dims(&self) -> (usize, usize) {
        (self.features[0].len(), self.num_samples())
    }

    fn num_shards(&self) -> usize {
        self.shards.len()
    }

    fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    fn y_domain(&self) -> YDomain {
        YDomain::Simplex
    }

    fn draw_sample(&self, shard: usize, key: u64) -> Sample {
        let n = self.shards[shard].len();
        Sample(ChaCha8Rng::seed_from_u64(key).gen_range(0..n) as u64)
    }

    fn sample_space_size(&self, shard: usize) -> Option<usize> {
        self.shards.get(shard).map(Vec::len)
    }

    fn stoch_grad(&self, shard: usize, p: &PointPair, sample: Sample) -> Result<PointPair> {
        self.check_point(p)?;
        let (i, n) = self.resolve(shard, sample)?;
        let gx = self.loss_grad(i, &p.x) * (n * p.y[i]) + self.reg.grad(&p.x);
        let mut gy = -self.divergence_grad(&p.y);
        gy[i] += n * self.loss(i, &p.x);
        Ok(PointPair::new(gx, gy))
    }

    fn stoch_hvp(&self, shard: usize, q: &HvpQuery<'_>) -> Result<PointPair> {
        self.check_point(q.eval)?;
        self.check_point(q.anchor)?;
        let (i, n) = self.resolve(shard, q.sample)?;
        let d = q.eval.sub(q.anchor);
        let (x, y) = (&q.eval.x, &q.eval.y);
        let r = &self.features[i];
        let m = self.margin(i, x);
        let curv = sigmoid(m) * sigmoid(-m);
        let grad_i = self.loss_grad(i, x);

        let mut hx = r * (n * y[i] * curv * r.dot(&d.x));
        hx += self.reg.hess_diag(x).component_mul(&d.x);
        hx.axpy(n * d.y[i], &grad_i, 1.0);

        let big_l = self.num_samples() as f64;
        let mut hy = &d.y * (-self.rho1 * big_l * big_l);
        hy[i] += n * grad_i.dot(&d.x);
        Ok(PointPair::new(hx, hy))
    }

    fn value(&self, p: &PointPair) -> Result<f64> {
        self.check_point(p)?;
        let k = self.shards.len() as f64;
        let weighted: f64 = (0..self.num_samples()).map(|i| p.y[i] * self.loss(i, &p.x)).sum();
        Ok(weighted / k - self.divergence(&p.y) + self.reg.value(&p.x))
    }

    fn exact_grad(&self, p: &PointPair) -> Result<PointPair> {
        self.check_point(p)?;
        let k = self.shards.len() as f64;
        let mut gx = self.reg.grad(&p.x);
        for i in 0..self.num_samples() {
            gx.axpy(p.y[i] / k, &self.loss_grad(i, &p.x), 1.0);
        }
        Ok(PointPair::new(gx, self.y_gradient(&p.x, &p.y)))
    }

    fn shard_exact_grad(&self, shard: usize, p: &PointPair) -> Result<PointPair> {
        self.check_point(p)?;
        let s = self
            .shards
            .get(shard)
            .ok_or_else(|| Error::InvalidParameter(format!("shard {shard} out of range")))?;
        let mut gx = self.reg.grad(&p.x);
        let mut gy = -self.divergence_grad(&p.y);
        for &i in s {
            gx.axpy(p.y[i], &self.loss_grad(i, &p.x), 1.0);
            gy[i] += self.loss(i, &p.x);
        }
        Ok(PointPair::new(gx, gy))
    }

    /// Projected gradient ascent on `y ∈ Δ_L` with step `1 / (ρ₁ L²)`,
    /// started at the uniform distribution.
    fn maximizer_and_envelope(&self, x: &DVector<f64>, tol: f64) -> Result<(DVector<f64>, f64)> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        check_dim("x", self.dims().0, x.len())?;
        let n = self.num_samples();
        let step = 1.0 / self.smoothness.pl_modulus;
        let mut y = DVector::from_element(n, 1.0 / n as f64);
        let mut residual = f64::INFINITY;
        for _ in 0..self.envelope_max_iter {
            let g = self.y_gradient(x, &y);
            let next = project_simplex(&(&y + &g * step));
            residual = (&next - &y).norm() / step;
            if !residual.is_finite() {
                break;
            }
            if residual <= tol {
                let p = self.value(&PointPair::new(x.clone(), y.clone()))?;
                return Ok((y, p));
            }
            y = next;
        }
        Err(Error::EnvelopeSolverFailed {
            iterations: self.envelope_max_iter,
            residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{parse_libsvm, partition_dataset, synthetic_classification};

    #[test]
    fn zero_margin_gradient_is_half_the_feature() {
        let data = parse_libsvm("-1 1:2 2:-4\n".as_bytes()).unwrap();
        let params = LogRegParams {
            reg: NonconvexReg::zero(),
            ..Default::default()
        };
        let o = RobustLogReg::new(&data, vec![vec![0]], params).unwrap();
        let p = PointPair::new(DVector::zeros(2), DVector::from_element(1, 1.0));
        let g = o.stoch_grad(0, &p, Sample(0)).unwrap();
        // −l r / 2 with l = −1
        assert_eq!(g.x.as_slice(), &[1.0, -2.0]);
    }

    #[test]
    fn shard_means_reproduce_exact_gradient() {
        let data = synthetic_classification(13, 4, 0.1, 3);
        let shards = partition_dataset(13, 3, 1).unwrap();
        let o = RobustLogReg::new(&data, shards.clone(), LogRegParams::default()).unwrap();
        let x = DVector::from_vec(vec![0.3, -0.7, 1.1, 0.05]);
        let y = project_simplex(&DVector::from_fn(13, |i, _| ((i * 7) % 5) as f64 / 10.0));
        let p = PointPair::new(x, y);
        let mut mean = PointPair::zeros(4, 13);
        for (k, s) in shards.iter().enumerate() {
            let mut local = PointPair::zeros(4, 13);
            for j in 0..s.len() {
                local.axpy(1.0 / s.len() as f64, &o.stoch_grad(k, &p, Sample(j as u64)).unwrap());
            }
            assert!(local.sub(&o.shard_exact_grad(k, &p).unwrap()).norm() < 1e-12);
            mean.axpy(1.0 / 3.0, &local);
        }
        assert!(mean.sub(&o.exact_grad(&p).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn rejects_bad_partition() {
        let data = synthetic_classification(4, 2, 0.0, 0);
        assert!(RobustLogReg::new(&data, vec![vec![0, 1], vec![1, 2, 3]], LogRegParams::default()).is_err());
        assert!(RobustLogReg::new(&data, vec![vec![0, 1], vec![2]], LogRegParams::default()).is_err());
    }

    #[test]
    fn envelope_solver_reports_failure() {
        let data = synthetic_classification(6, 2, 0.0, 0);
        let params = LogRegParams {
            envelope_max_iter: 0,
            ..Default::default()
        };
        let o = RobustLogReg::new(&data, vec![(0..6).collect()], params).unwrap();
        match o.maximizer_and_envelope(&DVector::zeros(2), 1e-8) {
            Err(Error::EnvelopeSolverFailed { iterations, .. }) => assert_eq!(iterations, 0),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn sampled_indices_stay_in_shard() {
        let data = synthetic_classification(10, 2, 0.0, 0);
        let shards = partition_dataset(10, 3, 0).unwrap();
        let o = RobustLogReg::new(&data, shards, LogRegParams::default()).unwrap();
        for key in 0..200u64 {
            for k in 0..3 {
                let s = o.draw_sample(k, key);
                assert!((s.0 as usize) < o.sample_space_size(k).unwrap());
            }
        }
    }
}
