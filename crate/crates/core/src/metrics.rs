//! Per-round diagnostics computed from exact (population) gradients.

use nalgebra::DVector;

use crate::error::Result;
use crate::problems::{PointPair, ProblemOracle};
use crate::solvers::{centroid, Solver};

/// CSV header of a trajectory file.
pub const CSV_HEADER: &str = "round,grad_x_norm,grad_y_norm,consensus_xi,consensus_xi_sq,envelope,y_gap,samples_used";

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub round: usize,
    pub grad_x_norm: f64,
    pub grad_y_norm: f64,
    pub consensus_xi: f64,
    pub consensus_xi_sq: f64,
    pub envelope: Option<f64>,
    pub y_gap: Option<f64>,
    pub samples_used: u64,
    pub comm_rounds: u64,
}

impl TrajectoryRecord {
    /// `‖∇_x J‖ + ‖∇_y J‖` at the centroid.
    pub fn stationarity(&self) -> f64 {
        self.grad_x_norm + self.grad_y_norm
    }

    /// One CSV row matching [`CSV_HEADER`]; absent metrics are empty fields.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.round,
            self.grad_x_norm,
            self.grad_y_norm,
            self.consensus_xi,
            self.consensus_xi_sq,
            opt(self.envelope),
            opt(self.y_gap),
            self.samples_used
        )
    }
}

/// `(‖∇_x J(p)‖, ‖∇_y J(p)‖)`
pub fn game_stationarity(oracle: &dyn ProblemOracle, p: &PointPair) -> Result<(f64, f64)> {
    let g = oracle.exact_grad(p)?;
    Ok((g.x.norm(), g.y.norm()))
}

/// `Ξ = ‖𝒳 − 𝒳_c‖ + ‖𝒴 − 𝒴_c‖` and `Ξ² = ‖𝒳 − 𝒳_c‖² + ‖𝒴 − 𝒴_c‖²` over the
/// stacked agent iterates.
pub fn consensus(points: &[PointPair]) -> (f64, f64) {
    if points.len() <= 1 {
        return (0.0, 0.0);
    }
    let c = centroid(points);
    let (mut sx, mut sy) = (0.0, 0.0);
    for p in points {
        sx += (&p.x - &c.x).norm_squared();
        sy += (&p.y - &c.y).norm_squared();
    }
    (sx.sqrt() + sy.sqrt(), sx + sy)
}

/// `(P(x_c), ‖y_c − y°(x_c)‖)`
pub fn envelope_at_centroid(oracle: &dyn ProblemOracle, centroid: &PointPair, tol: f64) -> Result<(f64, f64)> {
    let (y_opt, p): (DVector<f64>, f64) = oracle.maximizer_and_envelope(&centroid.x, tol)?;
    Ok((p, (&centroid.y - y_opt).norm()))
}

/// Builds trajectory records from solver snapshots.
#[derive(Clone, Copy, Debug)]
pub struct Recorder {
    /// Envelope is evaluated when `round % cadence == 0`; 0 disables it.
    pub envelope_cadence: usize,
    pub envelope_tol: f64,
}

impl Default for Recorder {
    fn default() -> Self {
        Self {
            envelope_cadence: 10,
            envelope_tol: 1e-8,
        }
    }
}

impl Recorder {
    pub fn record(&self, oracle: &dyn ProblemOracle, solver: &dyn Solver) -> Result<TrajectoryRecord> {
        let points = solver.agent_points();
        let c = centroid(&points);
        let (gx, gy) = game_stationarity(oracle, &c)?;
        let (xi, xi_sq) = consensus(&points);
        let round = solver.round();
        let (envelope, y_gap) = if self.envelope_cadence > 0 && round.is_multiple_of(self.envelope_cadence) {
            match envelope_at_centroid(oracle, &c, self.envelope_tol) {
                Ok((p, gap)) => (Some(p), Some(gap)),
                Err(e) => {
                    log::warn!("envelope evaluation failed at round {round}: {e}");
                    (None, None)
                }
            }
        } else {
            (None, None)
        };
        Ok(TrajectoryRecord {
            round,
            grad_x_norm: gx,
            grad_y_norm: gy,
            consensus_xi: xi,
            consensus_xi_sq: xi_sq,
            envelope,
            y_gap,
            samples_used: solver.samples_used(),
            comm_rounds: solver.comm_rounds(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{NonconvexReg, QuadraticPL};
    use nalgebra::DMatrix;

    fn pp(x: &[f64], y: &[f64]) -> PointPair {
        PointPair::new(DVector::from_column_slice(x), DVector::from_column_slice(y))
    }

    fn unit_quadratic() -> QuadraticPL {
        let one = || DMatrix::from_element(1, 1, 1.0);
        QuadraticPL::new(DMatrix::zeros(1, 1), one(), one(), NonconvexReg::zero(), 0.0, 0.0).unwrap()
    }

    #[test]
    fn stationarity_examples() {
        let q = unit_quadratic();
        assert_eq!(game_stationarity(&q, &pp(&[0.0], &[0.0])).unwrap(), (0.0, 0.0));
        assert_eq!(game_stationarity(&q, &pp(&[1.0], &[1.0])).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn consensus_examples() {
        let same = vec![pp(&[1.0, 2.0], &[3.0]); 4];
        assert_eq!(consensus(&same), (0.0, 0.0));
        let (xi, xi_sq) = consensus(&[pp(&[1.0], &[5.0]), pp(&[-1.0], &[5.0])]);
        assert!((xi - 2f64.sqrt()).abs() < 1e-15);
        assert!((xi_sq - 2.0).abs() < 1e-15);
        assert_eq!(consensus(&[pp(&[7.0], &[1.0])]), (0.0, 0.0));
    }

    #[test]
    fn consensus_zero_iff_identical() {
        let a = pp(&[1.0, 2.0], &[3.0]);
        let b = pp(&[1.0, 2.0], &[3.0 + 1e-9]);
        let (xi, xi_sq) = consensus(&[a.clone(), b]);
        assert!(xi > 0.0);
        assert!(xi_sq <= xi * xi);
        assert_eq!(consensus(&[a.clone(), a]).0, 0.0);
    }

    #[test]
    fn envelope_gap_vanishes_at_maximizer() {
        let q = unit_quadratic();
        let (p, gap) = envelope_at_centroid(&q, &pp(&[2.0], &[2.0]), 1e-8).unwrap();
        assert_eq!((p, gap), (2.0, 0.0));
        let (_, gap) = envelope_at_centroid(&q, &pp(&[2.0], &[0.5]), 1e-8).unwrap();
        assert!((gap - 1.5).abs() < 1e-15);
    }

    #[test]
    fn csv_row_leaves_missing_fields_empty() {
        let r = TrajectoryRecord {
            round: 3,
            grad_x_norm: 0.5,
            grad_y_norm: 0.25,
            consensus_xi: 0.0,
            consensus_xi_sq: 0.0,
            envelope: None,
            y_gap: Some(1.0),
            samples_used: 24,
            comm_rounds: 3,
        };
        assert_eq!(r.csv_row(), "3,0.5,0.25,0,0,,1,24");
        assert_eq!(CSV_HEADER.split(',').count(), r.csv_row().split(',').count());
    }
}
