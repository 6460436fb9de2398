//! Analytic nonconvex–strongly-concave quadratic game
//!
//! `J(x, y) = g(x) + ½ xᵀA x + xᵀB y − ½ yᵀC y` with `C ≻ 0`, so
//! `y°(x) = C⁻¹Bᵀx` and `P(x) = g(x) + ½ xᵀ(A + B C⁻¹ Bᵀ) x` are available in
//! closed form. Shard `k` adds a linear tilt `c_kᵀx + d_kᵀy`; the tilts sum to
//! zero so the global cost is untouched.
//!
//! Stochastic gradients add i.i.d. `N(0, σ_g²)` noise. Stochastic HVPs use
//! `(H + σ_h E)·d` with `E` symmetric with i.i.d. standard normal entries.
//! Both draws are seeded by the sample, on separate ChaCha streams.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{HvpQuery, NonconvexReg, PointPair, ProblemOracle, Sample, Smoothness};
use crate::error::{check_dim, Error, Result};

const GRAD_STREAM: u64 = 0;
const HESS_STREAM: u64 = 1;

#[derive(Clone, Debug)]
pub struct QuadraticPL {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    c_inv: DMatrix<f64>,
    /// `A + B C⁻¹ Bᵀ`
    envelope_hess: DMatrix<f64>,
    reg: NonconvexReg,
    sigma_g: f64,
    sigma_h: f64,
    offsets: Vec<PointPair>,
    smoothness: Smoothness,
}

/// Recipe for a random instance with a prescribed condition number.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSpec {
    pub m1: usize,
    pub m2: usize,
    /// Target `κ = L_f / ν`.
    pub kappa: f64,
    /// Largest eigenvalue of `C`.
    pub c_max: f64,
    /// Every singular value of `B` equals this.
    pub coupling: f64,
    /// `A = x_curvature · I`; negative values make `J(·, y)` concave.
    pub x_curvature: f64,
    pub reg: NonconvexReg,
    pub sigma_g: f64,
    pub sigma_h: f64,
    pub shards: usize,
    /// Scale of the per-shard linear tilts.
    pub heterogeneity: f64,
    pub seed: u64,
}

impl Default for QuadraticSpec {
    fn default() -> Self {
        Self {
            m1: 20,
            m2: 20,
            kappa: 10.0,
            c_max: 1.0,
            coupling: 1.0,
            x_curvature: 0.0,
            reg: NonconvexReg::default(),
            sigma_g: 0.0,
            sigma_h: 0.0,
            shards: 1,
            heterogeneity: 0.0,
            seed: 0,
        }
    }
}

fn spectral_bound(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let (m1, m2) = b.shape();
    let mut h = DMatrix::zeros(m1 + m2, m1 + m2);
    h.view_mut((0, 0), (m1, m1)).copy_from(a);
    h.view_mut((0, m1), (m1, m2)).copy_from(b);
    h.view_mut((m1, 0), (m2, m1)).copy_from(&b.transpose());
    h.view_mut((m1, m1), (m2, m2)).copy_from(&(-c));
    h.symmetric_eigenvalues().amax()
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

impl QuadraticPL {
    /// Single-shard instance. `a` must be symmetric, `c` symmetric positive
    /// definite.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        reg: NonconvexReg,
        sigma_g: f64,
        sigma_h: f64,
    ) -> Result<Self> {
        let (m1, m2) = b.shape();
        if a.shape() != (m1, m1) {
            return Err(Error::DimensionMismatch {
                what: "A",
                expected: m1,
                got: a.nrows(),
            });
        }
        if c.shape() != (m2, m2) {
            return Err(Error::DimensionMismatch {
                what: "C",
                expected: m2,
                got: c.nrows(),
            });
        }
        if sigma_g < 0.0 || sigma_h < 0.0 {
            return Err(Error::InvalidParameter("noise scales must be nonnegative".into()));
        }
        let nu = c.symmetric_eigenvalues().min();
        if !(nu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "C must be positive definite (smallest eigenvalue {nu})"
            )));
        }
        let c_inv = c
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("C is not positive definite".into()))?
            .inverse();
        let envelope_hess = &a + &b * &c_inv * b.transpose();
        let lipschitz = spectral_bound(&a, &b, &c) + reg.curvature_bound();
        Ok(Self {
            a,
            b,
            c,
            c_inv,
            envelope_hess,
            reg,
            sigma_g,
            sigma_h,
            offsets: vec![PointPair::zeros(m1, m2)],
            smoothness: Smoothness {
                lipschitz,
                pl_modulus: nu,
            },
        })
    }

    /// Replaces the shard tilts. They are re-centred to sum to zero.
    pub fn with_shard_offsets(mut self, mut offsets: Vec<PointPair>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidParameter("at least one shard is required".into()));
        }
        let (m1, m2) = self.dims();
        let mut mean = PointPair::zeros(m1, m2);
        for o in &offsets {
            o.check("shard offset", m1, m2)?;
            mean.axpy(1.0 / offsets.len() as f64, o);
        }
        for o in &mut offsets {
            o.axpy(-1.0, &mean);
        }
        self.offsets = offsets;
        Ok(self)
    }

    /// Random instance following `spec`. `ν` is chosen so that the reported
    /// `L_f / ν` equals `spec.kappa`.
    pub fn generate(spec: &QuadraticSpec) -> Result<Self> {
        if spec.m1 == 0 || spec.m2 == 0 || spec.shards == 0 {
            return Err(Error::InvalidParameter("dimensions and shard count must be positive".into()));
        }
        if !(spec.kappa >= 1.0) || !(spec.c_max > 0.0) {
            return Err(Error::InvalidParameter("need kappa >= 1 and c_max > 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (m1, m2) = (spec.m1, spec.m2);
        let a = DMatrix::identity(m1, m1) * spec.x_curvature;
        let u = random_orthogonal(m1, &mut rng);
        let w = random_orthogonal(m2, &mut rng);
        let b = u * DMatrix::identity(m1, m2) * w.transpose() * spec.coupling;
        let v = random_orthogonal(m2, &mut rng);

        let build_c = |nu: f64| {
            let eig = DVector::from_fn(m2, |i, _| {
                if m2 == 1 {
                    nu
                } else {
                    let t = i as f64 / (m2 - 1) as f64;
                    nu * (spec.c_max / nu).powf(t)
                }
            });
            let mut c = &v * DMatrix::from_diagonal(&eig) * v.transpose();
            c = (&c + c.transpose()) * 0.5;
            c
        };

        // fixed point of ν = L_f(ν) / κ; L_f barely depends on ν
        let mut nu = spec.c_max / spec.kappa;
        for _ in 0..100 {
            let l = spectral_bound(&a, &b, &build_c(nu)) + spec.reg.curvature_bound();
            let next = l / spec.kappa;
            if next > spec.c_max {
                return Err(Error::InvalidParameter(format!(
                    "kappa = {} is unreachable: L_f = {l} exceeds kappa * c_max",
                    spec.kappa
                )));
            }
            let done = (next - nu).abs() <= 1e-15 * nu;
            nu = next;
            if done {
                break;
            }
        }
        let mut q = Self::new(a, b, build_c(nu), spec.reg, spec.sigma_g, spec.sigma_h)?;
        q.smoothness.pl_modulus = nu;

        let offsets = (0..spec.shards)
            .map(|_| {
                let x = DVector::from_fn(m1, |_, _| spec.heterogeneity * rng.sample::<f64, _>(StandardNormal));
                let y = DVector::from_fn(m2, |_, _| spec.heterogeneity * rng.sample::<f64, _>(StandardNormal));
                PointPair::new(x, y)
            })
            .collect();
        q.with_shard_offsets(offsets)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn sigma_g(&self) -> f64 {
        self.sigma_g
    }

    /// `∇P(x) = g'(x) + (A + B C⁻¹ Bᵀ) x`
    pub fn envelope_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        self.reg.grad(x) + &self.envelope_hess * x
    }

    fn check_point(&self, p: &PointPair) -> Result<()> {
        let (m1, m2) = self.dims();
        p.check("point", m1, m2)
    }

    fn check_shard(&self, shard: usize) -> Result<()> {
        if shard >= self.offsets.len() {
            return Err(Error::InvalidParameter(format!(
                "shard {shard} out of range (have {})",
                self.offsets.len()
            )));
        }
        Ok(())
    }

    fn global_grad(&self, p: &PointPair) -> PointPair {
        let gx = self.reg.grad(&p.x) + &self.a * &p.x + &self.b * &p.y;
        let gy = self.b.tr_mul(&p.x) - &self.c * &p.y;
        PointPair::new(gx, gy)
    }
}

impl ProblemOracle for QuadraticPL {
    fn dims(&self) -> (usize, usize) {
        self.b.shape()
    }

    fn num_shards(&self) -> usize {
        self.offsets.len()
    }

    fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    fn draw_sample(&self, _shard: usize, key: u64) -> Sample {
        Sample(key)
    }

    fn sample_space_size(&self, _shard: usize) -> Option<usize> {
        None
    }

    fn stoch_grad(&self, shard: usize, p: &PointPair, sample: Sample) -> Result<PointPair> {
        let mut g = self.shard_exact_grad(shard, p)?;
        if self.sigma_g > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(sample.0);
            rng.set_stream(GRAD_STREAM);
            for v in g.x.iter_mut().chain(g.y.iter_mut()) {
                *v += self.sigma_g * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(g)
    }

    fn stoch_hvp(&self, shard: usize, q: &HvpQuery<'_>) -> Result<PointPair> {
        self.check_shard(shard)?;
        self.check_point(q.eval)?;
        self.check_point(q.anchor)?;
        let d = q.eval.sub(q.anchor);
        let curv = self.reg.hess_diag(&q.eval.x);
        let mut hx = curv.component_mul(&d.x) + &self.a * &d.x + &self.b * &d.y;
        let mut hy = self.b.tr_mul(&d.x) - &self.c * &d.y;
        if self.sigma_h > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(q.sample.0);
            rng.set_stream(HESS_STREAM);
            let m1 = hx.len();
            let n = m1 + hy.len();
            let disp = |i: usize| if i < m1 { d.x[i] } else { d.y[i - m1] };
            let mut noise = vec![0.0; n];
            for i in 0..n {
                for j in i..n {
                    let e = self.sigma_h * rng.sample::<f64, _>(StandardNormal);
                    noise[i] += e * disp(j);
                    if i != j {
                        noise[j] += e * disp(i);
                    }
                }
            }
            for (i, v) in noise.into_iter().enumerate() {
                if i < m1 {
                    hx[i] += v;
                } else {
                    hy[i - m1] += v;
                }
            }
        }
        Ok(PointPair::new(hx, hy))
    }

    fn value(&self, p: &PointPair) -> Result<f64> {
        self.check_point(p)?;
        Ok(self.reg.value(&p.x) + 0.5 * p.x.dot(&(&self.a * &p.x)) + p.x.dot(&(&self.b * &p.y))
            - 0.5 * p.y.dot(&(&self.c * &p.y)))
    }

    fn exact_grad(&self, p: &PointPair) -> Result<PointPair> {
        self.check_point(p)?;
        Ok(self.global_grad(p))
    }

    fn shard_exact_grad(&self, shard: usize, p: &PointPair) -> Result<PointPair> {
        self.check_shard(shard)?;
        self.check_point(p)?;
        let mut g = self.global_grad(p);
        g.axpy(1.0, &self.offsets[shard]);
        Ok(g)
    }

    fn maximizer_and_envelope(&self, x: &DVector<f64>, tol: f64) -> Result<(DVector<f64>, f64)> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        check_dim("x", self.b.nrows(), x.len())?;
        let y = &self.c_inv * self.b.tr_mul(x);
        let p = self.value(&PointPair::new(x.clone(), y.clone()))?;
        Ok((y, p))
    }
}
