use nalgebra::DVector;

/// Euclidean projection onto the probability simplex `{y ≥ 0, Σ y = 1}`.
///
/// Sort-based threshold search: find the largest `ρ` with
/// `u_ρ - (Σ_{j≤ρ} u_j - 1)/ρ > 0` over the decreasingly sorted `u`, then
/// clip at `τ = (Σ_{j≤ρ} u_j - 1)/ρ`.
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    if n == 0 {
        return v.clone();
    }
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.map(|vi| (vi - tau).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent route: bisection on the threshold of Σ max(v - τ, 0) = 1.
    fn project_by_bisection(v: &DVector<f64>) -> DVector<f64> {
        let mut lo = v.min() - 1.0;
        let mut hi = v.max();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s: f64 = v.iter().map(|&x| (x - mid).max(0.0)).sum();
            if s > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        v.map(|x| (x - tau).max(0.0))
    }

    #[test]
    fn feasible_point_is_fixed() {
        let v = DVector::from_vec(vec![0.2, 0.3, 0.5]);
        assert!((project_simplex(&v) - &v).norm() < 1e-15);
    }

    #[test]
    fn single_coordinate() {
        let v = DVector::from_vec(vec![-4.0]);
        assert_eq!(project_simplex(&v)[0], 1.0);
    }

    #[test]
    fn dominant_coordinate_takes_all_mass() {
        let v = DVector::from_vec(vec![5.0, 0.0, -1.0]);
        let p = project_simplex(&v);
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn matches_bisection(v in proptest::collection::vec(-3.0f64..3.0, 1..30)) {
            let v = DVector::from_vec(v);
            let p = project_simplex(&v);
            let q = project_by_bisection(&v);
            prop_assert!((p.sum() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((&p - &q).amax() < 1e-9);
        }
    }
}
