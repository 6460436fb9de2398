use minimax_core::problems::{
    partition_dataset, synthetic_classification, HvpQuery, LogRegParams, NonconvexReg, QuadraticPL, QuadraticSpec,
    RobustLogReg, Sample,
};
use minimax_core::{PointPair, ProblemOracle};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const FD_STEP: f64 = 1e-4;

fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn random_point(rng: &mut ChaCha8Rng, m1: usize, m2: usize, scale: f64) -> PointPair {
    PointPair::new(gaussian(rng, m1, scale), gaussian(rng, m2, scale))
}

fn random_unit(rng: &mut ChaCha8Rng, m1: usize, m2: usize) -> PointPair {
    let d = random_point(rng, m1, m2, 1.0);
    let n = d.norm();
    d.scaled(1.0 / n)
}

fn quadratic(sigma_g: f64, sigma_h: f64, shards: usize, heterogeneity: f64) -> QuadraticPL {
    QuadraticPL::generate(&QuadraticSpec {
        m1: 8,
        m2: 6,
        kappa: 10.0,
        sigma_g,
        sigma_h,
        shards,
        heterogeneity,
        seed: 11,
        ..Default::default()
    })
    .unwrap()
}

fn logreg(samples: usize, shards: usize) -> RobustLogReg {
    let data = synthetic_classification(samples, 20, 0.1, 5);
    let parts = partition_dataset(samples, shards, 6).unwrap();
    RobustLogReg::new(&data, parts, LogRegParams::default()).unwrap()
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let v = DVector::from_fn(n, |_, _| rng.gen_range(0.01..1.0));
    let s = v.sum();
    v / s
}

/// Central difference of the sampled gradient along `dir` against the HVP
/// at `z` with anchor `z − dir`.
fn hvp_relative_error(oracle: &dyn ProblemOracle, shard: usize, z: &PointPair, dir: &PointPair, sample: Sample) -> f64 {
    let mut plus = z.clone();
    plus.axpy(FD_STEP, dir);
    let mut minus = z.clone();
    minus.axpy(-FD_STEP, dir);
    let fd = oracle
        .stoch_grad(shard, &plus, sample)
        .unwrap()
        .sub(&oracle.stoch_grad(shard, &minus, sample).unwrap())
        .scaled(0.5 / FD_STEP);
    let mut anchor = z.clone();
    anchor.axpy(-1.0, dir);
    let hvp = oracle
        .stoch_hvp(
            shard,
            &HvpQuery {
                eval: z,
                anchor: &anchor,
                sample,
            },
        )
        .unwrap();
    hvp.sub(&fd).norm() / fd.norm().max(1e-12)
}

#[test]
fn quadratic_hvp_matches_central_differences() {
    // Hessian noise is independent of the gradient noise, so the check runs
    // with exact Hessians; gradient noise cancels in the difference.
    let q = quadratic(0.5, 0.0, 3, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for t in 0..120 {
        let z = random_point(&mut rng, 8, 6, 2.0);
        let d = random_unit(&mut rng, 8, 6);
        let shard = t % 3;
        let sample = q.draw_sample(shard, rng.gen());
        worst = worst.max(hvp_relative_error(&q, shard, &z, &d, sample));
    }
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

#[test]
fn logreg_hvp_matches_central_differences() {
    let o = logreg(60, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for t in 0..120 {
        let z = PointPair::new(gaussian(&mut rng, 20, 0.5), random_simplex(&mut rng, 60));
        let d = random_unit(&mut rng, 20, 60);
        let shard = t % 3;
        let sample = o.draw_sample(shard, rng.gen());
        worst = worst.max(hvp_relative_error(&o, shard, &z, &d, sample));
    }
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

fn directional_fd(oracle: &dyn ProblemOracle, z: &PointPair, dir: &PointPair) -> f64 {
    let mut plus = z.clone();
    plus.axpy(FD_STEP, dir);
    let mut minus = z.clone();
    minus.axpy(-FD_STEP, dir);
    (oracle.value(&plus).unwrap() - oracle.value(&minus).unwrap()) / (2.0 * FD_STEP)
}

fn dot(a: &PointPair, b: &PointPair) -> f64 {
    a.x.dot(&b.x) + a.y.dot(&b.y)
}

#[test]
fn exact_gradients_match_value_differences() {
    let q = quadratic(0.0, 0.0, 2, 1.0);
    let o = logreg(40, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let z = random_point(&mut rng, 8, 6, 1.5);
        let d = random_unit(&mut rng, 8, 6);
        let err = (dot(&q.exact_grad(&z).unwrap(), &d) - directional_fd(&q, &z, &d)).abs();
        assert!(err <= 1e-6, "quadratic: {err:e}");

        let z = PointPair::new(gaussian(&mut rng, 20, 0.5), random_simplex(&mut rng, 40));
        let d = random_unit(&mut rng, 20, 40);
        let err = (dot(&o.exact_grad(&z).unwrap(), &d) - directional_fd(&o, &z, &d)).abs();
        assert!(err <= 1e-6, "logreg: {err:e}");
    }
}

#[test]
fn quadratic_shard_gradients_average_to_global() {
    let q = quadratic(0.0, 0.0, 5, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let z = random_point(&mut rng, 8, 6, 1.0);
        let mut mean = PointPair::zeros(8, 6);
        for k in 0..5 {
            mean.axpy(0.2, &q.stoch_grad(k, &z, Sample(rng.gen())).unwrap());
        }
        assert!(mean.sub(&q.exact_grad(&z).unwrap()).norm() <= 1e-12);
    }
}

#[test]
fn logreg_sample_gradients_average_to_shard_and_global() {
    let o = logreg(30, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let z = PointPair::new(gaussian(&mut rng, 20, 0.5), random_simplex(&mut rng, 30));
    let mut global = PointPair::zeros(20, 30);
    for k in 0..3 {
        let n = o.sample_space_size(k).unwrap();
        let mut mean = PointPair::zeros(20, 30);
        for j in 0..n {
            mean.axpy(1.0 / n as f64, &o.stoch_grad(k, &z, Sample(j as u64)).unwrap());
        }
        let shard = o.shard_exact_grad(k, &z).unwrap();
        assert!(mean.sub(&shard).norm() <= 1e-10);
        global.axpy(1.0 / 3.0, &shard);
    }
    assert!(global.sub(&o.exact_grad(&z).unwrap()).norm() <= 1e-10);
}

#[test]
fn quadratic_gradient_noise_is_centred() {
    let sigma = 0.7;
    let q = QuadraticPL::generate(&QuadraticSpec {
        m1: 3,
        m2: 3,
        kappa: 5.0,
        sigma_g: sigma,
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let z = PointPair::new(DVector::from_element(3, 0.3), DVector::from_element(3, -0.2));
    let n = 100_000;
    let mut mean = PointPair::zeros(3, 3);
    for key in 0..n {
        mean.axpy(1.0 / n as f64, &q.stoch_grad(0, &z, q.draw_sample(0, key)).unwrap());
    }
    let exact = q.exact_grad(&z).unwrap();
    let bound = 3.0 * sigma / (n as f64).sqrt();
    let dev = mean.sub(&exact);
    for v in dev.x.iter().chain(dev.y.iter()) {
        assert!(v.abs() < bound, "{v} vs {bound}");
    }
}

#[test]
fn quadratic_envelope_gradient_matches_differences() {
    let q = QuadraticPL::generate(&QuadraticSpec {
        m1: 6,
        m2: 4,
        kappa: 10.0,
        reg: NonconvexReg::default(),
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..30 {
        let x = gaussian(&mut rng, 6, 1.0);
        let d = gaussian(&mut rng, 6, 1.0).normalize();
        let p = |x: &DVector<f64>| q.maximizer_and_envelope(x, 1e-12).unwrap().1;
        let fd = (p(&(&x + &d * FD_STEP)) - p(&(&x - &d * FD_STEP))) / (2.0 * FD_STEP);
        let (y_opt, _) = q.maximizer_and_envelope(&x, 1e-12).unwrap();
        let via_game = q.exact_grad(&PointPair::new(x.clone(), y_opt)).unwrap().x;
        assert!((via_game.dot(&d) - fd).abs() <= 1e-6);
        assert!((q.envelope_grad(&x) - &via_game).norm() <= 1e-9);
    }
}

#[test]
fn quadratic_pl_and_quadratic_growth_hold() {
    let q = quadratic(0.0, 0.0, 1, 0.0);
    let nu = q.smoothness().pl_modulus;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let z = random_point(&mut rng, 8, 6, 3.0);
        let (y_opt, p) = q.maximizer_and_envelope(&z.x, 1e-12).unwrap();
        let gap = p - q.value(&z).unwrap();
        let gy = q.exact_grad(&z).unwrap().y;
        assert!(gap >= -1e-9);
        assert!(0.5 * gy.norm_squared() >= nu * gap - 1e-9);
        assert!(gap >= 0.5 * nu * (&z.y - &y_opt).norm_squared() - 1e-9);
    }
}

/// Exact maximum of `J(x, ·)` over the simplex grid with spacing `1/units`,
/// using separability of the cost in the coordinates of `y`.
fn grid_envelope(o: &RobustLogReg, x: &DVector<f64>, units: usize) -> f64 {
    let l = o.num_samples();
    let k = o.num_shards() as f64;
    let rho1 = o.rho1();
    let reg = LogRegParams::default().reg.value(x);
    let term = |i: usize, t: usize| {
        let yi = t as f64 / units as f64;
        yi * o.loss(i, x) / k - 0.5 * rho1 * (l as f64 * yi - 1.0).powi(2)
    };
    let mut best = vec![f64::NEG_INFINITY; units + 1];
    best[0] = 0.0;
    for i in 0..l {
        let mut next = vec![f64::NEG_INFINITY; units + 1];
        for (used, &b) in best.iter().enumerate() {
            if b == f64::NEG_INFINITY {
                continue;
            }
            for t in 0..=units - used {
                let v = b + term(i, t);
                if v > next[used + t] {
                    next[used + t] = v;
                }
            }
        }
        best = next;
    }
    best[units] + reg
}

#[test]
fn logreg_envelope_agrees_with_grid_search() {
    let o = logreg(10, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let x = gaussian(&mut rng, 20, 1.0);
        let (y, p) = o.maximizer_and_envelope(&x, 1e-10).unwrap();
        assert!((y.sum() - 1.0).abs() < 1e-12 && y.min() >= 0.0);
        let grid = grid_envelope(&o, &x, 100);
        assert!(grid <= p + 1e-9, "grid {grid} above solver {p}");
        assert!(p - grid <= 1e-2, "solver {p} vs grid {grid}");
    }
}

#[test]
fn stationarity_at_the_maximizer_reduces_to_envelope_gradient() {
    use minimax_core::metrics::game_stationarity;
    let q = quadratic(0.0, 0.0, 1, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let x = gaussian(&mut rng, 8, 1.0);
        let (y, _) = q.maximizer_and_envelope(&x, 1e-12).unwrap();
        let (gx, gy) = game_stationarity(&q, &PointPair::new(x.clone(), y)).unwrap();
        assert!(gy <= 1e-10);
        assert!((gx - q.envelope_grad(&x).norm()).abs() <= 1e-8);
    }
}
