//! Numerical building blocks shared by the solvers: safe normalization,
//! Hessian-corrected momentum, local accumulation and adaptive scaling.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problems::PointPair;

/// Norms at or below this are treated as zero by the normalizers.
pub const NORM_FLOOR: f64 = 1e-30;

/// Damping added to `√b` in the adaptive scaling matrices.
pub const DEFAULT_DAMPING: f64 = 1e-8;

/// Momenta `(m_x, m_y)` share the block layout of a point.
pub type MomentumPair = PointPair;

/// `v / ‖v‖`, or the zero vector when `‖v‖ ≤ 1e-30` so the step becomes a
/// no-op.
pub fn safe_normalize(v: &DVector<f64>) -> Result<DVector<f64>> {
    let norm = v.norm();
    if !norm.is_finite() {
        return Err(Error::NonFinite("normalize"));
    }
    if norm <= NORM_FLOOR {
        return Ok(DVector::zeros(v.len()));
    }
    Ok(v / norm)
}

/// `m = (1 − β)(m_prev + γ h) + β g`, applied to both blocks.
pub fn corrected_momentum_step(
    m_prev: &MomentumPair,
    h: &PointPair,
    g: &PointPair,
    beta: f64,
    gamma: f64,
) -> Result<MomentumPair> {
    let block = |m: &DVector<f64>, h: &DVector<f64>, g: &DVector<f64>| {
        let mut out = m.clone();
        out.axpy(gamma, h, 1.0);
        out *= 1.0 - beta;
        out.axpy(beta, g, 1.0);
        out
    };
    let m = MomentumPair::new(block(&m_prev.x, &h.x, &g.x), block(&m_prev.y, &h.y, &g.y));
    if !m.is_finite() {
        return Err(Error::NonFinite("momentum"));
    }
    Ok(m)
}

/// Running means of the local stochastic gradients and HVPs of one
/// communication round. Each push adds `v / N`.
#[derive(Clone, Debug)]
pub struct Accumulators {
    pub grad: PointPair,
    pub hvp: PointPair,
    count: usize,
    total: usize,
}

impl Accumulators {
    pub fn new(m1: usize, m2: usize, total: usize) -> Self {
        assert!(total >= 1, "need at least one local step");
        Self {
            grad: PointPair::zeros(m1, m2),
            hvp: PointPair::zeros(m1, m2),
            count: 0,
            total,
        }
    }

    pub fn push(&mut self, g: &PointPair, h: &PointPair) {
        let w = 1.0 / self.total as f64;
        self.grad.axpy(w, g);
        self.hvp.axpy(w, h);
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `(mean gradient, mean HVP)`. Only meaningful after `N` pushes.
    pub fn into_means(self) -> (PointPair, PointPair) {
        debug_assert_eq!(self.count, self.total);
        (self.grad, self.hvp)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalingMode {
    /// `N = I`
    None,
    /// `b ← (1 − β₂) b + β₂ g⊙g`
    Adam,
    /// `b ← b + g⊙g`
    AdaGrad,
}

impl std::str::FromStr for ScalingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "adam" => Ok(Self::Adam),
            "adagrad" => Ok(Self::AdaGrad),
            other => Err(Error::InvalidParameter(format!("unknown scaling mode `{other}`"))),
        }
    }
}

/// Second-moment estimates behind the diagonal scaling matrices
/// `N = diag(√b + damping)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingState {
    pub bx: DVector<f64>,
    pub by: DVector<f64>,
    pub mode: ScalingMode,
    pub damping: f64,
}

impl ScalingState {
    pub fn new(m1: usize, m2: usize, mode: ScalingMode) -> Self {
        Self {
            bx: DVector::zeros(m1),
            by: DVector::zeros(m2),
            mode,
            damping: DEFAULT_DAMPING,
        }
    }

    pub fn update(&mut self, g: &PointPair, beta: f64) {
        match self.mode {
            ScalingMode::None => {}
            ScalingMode::Adam => {
                let step = |b: &mut DVector<f64>, g: &DVector<f64>| {
                    b.zip_apply(g, |bi, gi| *bi = (1.0 - beta) * *bi + beta * gi * gi)
                };
                step(&mut self.bx, &g.x);
                step(&mut self.by, &g.y);
            }
            ScalingMode::AdaGrad => {
                self.bx.zip_apply(&g.x, |bi, gi| *bi += gi * gi);
                self.by.zip_apply(&g.y, |bi, gi| *bi += gi * gi);
            }
        }
    }

    fn diag(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        match self.mode {
            ScalingMode::None => None,
            _ => Some(b.map(|v| v.sqrt() + self.damping)),
        }
    }

    /// Diagonal of `N_x`, or `None` for the identity.
    pub fn diag_x(&self) -> Option<DVector<f64>> {
        self.diag(&self.bx)
    }

    pub fn diag_y(&self) -> Option<DVector<f64>> {
        self.diag(&self.by)
    }
}

/// `N⁻¹ m / ‖N^{−1/2} m‖` for a diagonal `N` (identity when `diag` is
/// `None`), with the same zero rule as [`safe_normalize`].
pub fn scaled_normalized_direction(m: &DVector<f64>, diag: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    let Some(n) = diag else {
        return safe_normalize(m);
    };
    if n.len() != m.len() {
        return Err(Error::DimensionMismatch {
            what: "scaling diagonal",
            expected: m.len(),
            got: n.len(),
        });
    }
    if n.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("scaling matrix must be positive definite".into()));
    }
    let denom = m.iter().zip(n.iter()).map(|(mi, ni)| mi * mi / ni).sum::<f64>().sqrt();
    if denom.is_nan() || !denom.is_finite() {
        return Err(Error::NonFinite("scaled direction"));
    }
    if denom <= NORM_FLOOR {
        return Ok(DVector::zeros(m.len()));
    }
    Ok(m.component_div(n) / denom)
}
