//! Step-size schedules of the convergence theory with tunable leading
//! constants.
//!
//! With `base = (NK)^{1/3} / T^{2/3}`:
//!
//! | solver      | β             | μy                  | μx                                        |
//! |-------------|---------------|---------------------|-------------------------------------------|
//! | Local-DiMA  | min(c_β·base, 1) | c_y √(1−λ) base  | min(c_x √(1−λ) base / κ, μy / (6κ))        |
//! | Fed-MiMA    | min(c_β·base, 1) | c_y base         | min(c_x base / κ, μy / (6κ))               |
//! | AdaHMM      | min(c_β T^{−2/3}, 1) | c_y T^{−2/3} | min(c_x T^{−2/3} / κ, √a μy / (6√b κ))     |
//!
//! Local steps use `μ̄ = μ / (N L_f)`.

use log::warn;

use crate::error::{Error, Result};
use crate::solvers::Hyperparams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleSpec {
    pub rounds: usize,
    pub local_steps: usize,
    pub agents: usize,
    pub kappa: f64,
    /// Mixing rate of the communication graph (decentralized schedule only).
    pub mixing_rate: f64,
    pub lipschitz: f64,
    pub c_beta: f64,
    pub c_y: f64,
    pub c_x: f64,
    /// Bounds `a ≤ N ≤ b` on the adaptive scaling matrices.
    pub scaling_lower: f64,
    pub scaling_upper: f64,
    pub gamma: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            rounds: 1000,
            local_steps: 1,
            agents: 1,
            kappa: 1.0,
            mixing_rate: 0.0,
            lipschitz: 1.0,
            c_beta: 1.0,
            c_y: 1.0,
            c_x: 1.0,
            scaling_lower: 1.0,
            scaling_upper: 1.0,
            gamma: 1.0,
        }
    }
}

impl ScheduleSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.rounds == 0 || self.local_steps == 0 || self.agents == 0 {
            return bad("rounds, local_steps and agents must be positive");
        }
        if !(self.kappa >= 1.0) {
            return bad("kappa must be at least 1");
        }
        if !(self.lipschitz > 0.0) {
            return bad("lipschitz constant must be positive");
        }
        if !(self.c_beta > 0.0 && self.c_y > 0.0 && self.c_x > 0.0) {
            return bad("leading constants must be positive");
        }
        if !(self.scaling_lower > 0.0 && self.scaling_upper >= self.scaling_lower) {
            return bad("scaling bounds must satisfy 0 < a <= b");
        }
        Ok(())
    }

    fn base(&self) -> f64 {
        ((self.local_steps * self.agents) as f64).cbrt() / (self.rounds as f64).powf(2.0 / 3.0)
    }

    fn finish(&self, beta: f64, mu_x: f64, mu_y: f64) -> Hyperparams {
        if beta >= 1.0 {
            warn!("momentum factor clamped at 1; the horizon T = {} is too short for the schedule", self.rounds);
        }
        let n_l = self.local_steps as f64 * self.lipschitz;
        Hyperparams {
            mu_x,
            mu_y,
            local_mu_x: mu_x / n_l,
            local_mu_y: mu_y / n_l,
            beta,
            gamma: self.gamma,
            local_steps: self.local_steps,
            rounds: self.rounds,
        }
    }

    fn with_gap(&self, gap: f64) -> Hyperparams {
        let base = self.base();
        let beta = (self.c_beta * base).min(1.0);
        let mu_y = self.c_y * gap * base;
        let mu_x = (self.c_x * gap * base / self.kappa).min(mu_y / (6.0 * self.kappa));
        self.finish(beta, mu_x, mu_y)
    }
}

pub fn schedule_local_dima(spec: &ScheduleSpec) -> Result<Hyperparams> {
    spec.validate()?;
    if !(spec.mixing_rate >= 0.0 && spec.mixing_rate < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "mixing rate must lie in [0, 1), got {}",
            spec.mixing_rate
        )));
    }
    Ok(spec.with_gap((1.0 - spec.mixing_rate).sqrt()))
}

pub fn schedule_fed_mima(spec: &ScheduleSpec) -> Result<Hyperparams> {
    spec.validate()?;
    Ok(spec.with_gap(1.0))
}

/// Single agent: `N` and `K` are ignored (taken as 1).
pub fn schedule_adahmm(spec: &ScheduleSpec) -> Result<Hyperparams> {
    spec.validate()?;
    let single = ScheduleSpec {
        local_steps: 1,
        agents: 1,
        ..*spec
    };
    let base = single.base();
    let beta = (spec.c_beta * base).min(1.0);
    let mu_y = spec.c_y * base;
    let ratio = (spec.scaling_lower / spec.scaling_upper).sqrt();
    let mu_x = (spec.c_x * base / spec.kappa).min(ratio * mu_y / (6.0 * spec.kappa));
    Ok(single.finish(beta, mu_x, mu_y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec() -> ScheduleSpec {
        ScheduleSpec {
            rounds: 64,
            local_steps: 2,
            agents: 4,
            ..Default::default()
        }
    }

    #[test]
    fn local_dima_by_hand() {
        let hp = schedule_local_dima(&spec()).unwrap();
        assert!((hp.beta - 0.125).abs() < 1e-15);
        assert!((hp.mu_y - 0.125).abs() < 1e-15);
        assert!((hp.mu_x - 0.125 / 6.0).abs() < 1e-15);
        assert!((hp.local_mu_y - 0.125 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn beta_scales_with_horizon() {
        let short = schedule_local_dima(&spec()).unwrap();
        let long = schedule_local_dima(&ScheduleSpec { rounds: 512, ..spec() }).unwrap();
        assert!((short.beta / long.beta - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mixing_rate_must_be_below_one() {
        assert!(schedule_local_dima(&ScheduleSpec { mixing_rate: 1.0, ..spec() }).is_err());
    }

    #[test]
    fn fed_mima_ignores_mixing_rate() {
        let a = schedule_fed_mima(&spec()).unwrap();
        let b = schedule_fed_mima(&ScheduleSpec { mixing_rate: 0.9, ..spec() }).unwrap();
        assert_eq!(a, b);
        let hp = schedule_fed_mima(&ScheduleSpec { rounds: 1, local_steps: 1, agents: 1, ..spec() }).unwrap();
        assert_eq!(hp.beta, 1.0);
        let s = ScheduleSpec { lipschitz: 3.5, local_steps: 7, ..spec() };
        let hp = schedule_fed_mima(&s).unwrap();
        assert!((hp.local_mu_y * 7.0 * 3.5 - hp.mu_y).abs() < 1e-15);
    }

    #[test]
    fn adahmm_examples() {
        let hp = schedule_adahmm(&ScheduleSpec { rounds: 1000, ..Default::default() }).unwrap();
        assert!((hp.beta - 0.01).abs() < 1e-15);
        let big = schedule_adahmm(&ScheduleSpec { rounds: 1000, kappa: 1e9, ..Default::default() }).unwrap();
        assert_eq!(big.mu_y, hp.mu_y);
        assert!(big.mu_x < 1e-10);
        let tiny = schedule_adahmm(&ScheduleSpec { rounds: 1, c_beta: 50.0, ..Default::default() }).unwrap();
        assert_eq!(tiny.beta, 1.0);
    }

    proptest! {
        #[test]
        fn schedules_satisfy_stability_conditions(
            rounds in 1usize..1_000_000,
            n in 1usize..20,
            k in 1usize..64,
            kappa in 1.0f64..1e4,
            lambda in 0.0f64..0.999,
            lf in 0.01f64..100.0,
            cb in 0.01f64..100.0,
            cy in 0.01f64..100.0,
            cx in 0.01f64..100.0,
        ) {
            let s = ScheduleSpec {
                rounds, local_steps: n, agents: k, kappa, mixing_rate: lambda, lipschitz: lf,
                c_beta: cb, c_y: cy, c_x: cx, ..Default::default()
            };
            for hp in [schedule_local_dima(&s).unwrap(), schedule_fed_mima(&s).unwrap(), schedule_adahmm(&s).unwrap()] {
                prop_assert!(hp.mu_x <= hp.mu_y / (6.0 * kappa));
                prop_assert!(hp.local_mu_x <= hp.local_mu_y);
                prop_assert!(hp.beta <= 1.0 && hp.beta > 0.0);
                prop_assert!(hp.validate().is_ok());
            }
        }
    }
}
