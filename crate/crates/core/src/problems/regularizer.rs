use nalgebra::DVector;

/// Separable nonconvex regularizer `g(x) = ρ₂ Σ_i ρ x_i² / (1 + λ_g x_i²)`.
///
/// `lambda_g` is the shape constant of the regularizer; it is unrelated to
/// the mixing rate of a communication graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonconvexReg {
    pub rho: f64,
    pub rho2: f64,
    pub lambda_g: f64,
}

impl Default for NonconvexReg {
    fn default() -> Self {
        Self {
            rho: 10.0,
            rho2: 0.001,
            lambda_g: 1.0,
        }
    }
}

impl NonconvexReg {
    /// `g ≡ 0`
    pub fn zero() -> Self {
        Self {
            rho: 0.0,
            rho2: 0.0,
            lambda_g: 1.0,
        }
    }

    fn weight(&self) -> f64 {
        self.rho * self.rho2
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let w = self.weight();
        x.iter()
            .map(|&t| w * t * t / (1.0 + self.lambda_g * t * t))
            .sum()
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let w = self.weight();
        x.map(|t| {
            let d = 1.0 + self.lambda_g * t * t;
            w * 2.0 * t / (d * d)
        })
    }

    /// Diagonal of the Hessian.
    pub fn hess_diag(&self, x: &DVector<f64>) -> DVector<f64> {
        let w = self.weight();
        x.map(|t| {
            let s = self.lambda_g * t * t;
            let d = 1.0 + s;
            w * (2.0 - 6.0 * s) / (d * d * d)
        })
    }

    /// Upper bound on `|g''|`, attained at the origin.
    pub fn curvature_bound(&self) -> f64 {
        2.0 * self.weight().abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let reg = NonconvexReg::default();
        let eps = 1e-5;
        for &t in &[-2.3, -0.4, 0.0, 0.7, 1.9] {
            let at = |s: f64| DVector::from_vec(vec![s]);
            let fd1 = (reg.value(&at(t + eps)) - reg.value(&at(t - eps))) / (2.0 * eps);
            let fd2 = (reg.grad(&at(t + eps))[0] - reg.grad(&at(t - eps))[0]) / (2.0 * eps);
            assert!((reg.grad(&at(t))[0] - fd1).abs() < 1e-9);
            assert!((reg.hess_diag(&at(t))[0] - fd2).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_regularizer_vanishes() {
        let x = DVector::from_vec(vec![1.0, -3.0]);
        let reg = NonconvexReg::zero();
        assert_eq!(reg.value(&x), 0.0);
        assert_eq!(reg.grad(&x).norm(), 0.0);
    }
}
