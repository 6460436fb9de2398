//! Rounds and samples needed to reach a stationarity level, across solvers.

use std::fmt::Write as _;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::runner::{params_label, run_all};

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub solver: String,
    pub params: String,
    /// Seeds that reached the threshold, out of `seeds`.
    pub reached: usize,
    pub seeds: usize,
    /// Over the seeds that reached the threshold; `None` if none did.
    pub rounds: Option<MeanStd>,
    pub samples: Option<MeanStd>,
}

/// Runs every config (all grid points and seeds) and tabulates the rounds
/// and samples each needed to reach stationarity `≤ eps`. All configs
/// must share the problem section and the seed list.
pub fn compare_solvers(cfgs: &[ExperimentConfig], eps: f64, workers: usize) -> Result<Vec<ComparisonRow>> {
    let Some(first) = cfgs.first() else {
        return Err(HarnessError::Mismatch("no configs given".into()));
    };
    for c in &cfgs[1..] {
        if c.problem != first.problem {
            return Err(HarnessError::Mismatch(format!(
                "{} and {} use different problems",
                first.name, c.name
            )));
        }
        if c.run.seeds != first.run.seeds {
            return Err(HarnessError::Mismatch(format!(
                "{} and {} use different seed lists",
                first.name, c.name
            )));
        }
    }
    let mut rows = Vec::new();
    for cfg in cfgs {
        let runs = run_all(cfg, workers)?;
        for (g, point) in cfg.grid_points().iter().enumerate() {
            let group: Vec<_> = runs.iter().filter(|r| r.grid_index == g).collect();
            let hits: Vec<_> = group.iter().filter_map(|r| r.first_below(eps)).collect();
            let rounds: Vec<f64> = hits.iter().map(|h| h.round as f64).collect();
            let samples: Vec<f64> = hits.iter().map(|h| h.samples_used as f64).collect();
            rows.push(ComparisonRow {
                name: cfg.name.clone(),
                solver: cfg.solver.kind.as_str().into(),
                params: params_label(point),
                reached: hits.len(),
                seeds: group.len(),
                rounds: MeanStd::of(&rounds),
                samples: MeanStd::of(&samples),
            });
        }
    }
    Ok(rows)
}

pub fn format_table(rows: &[ComparisonRow], eps: f64) -> String {
    let cell = |m: &Option<MeanStd>| match m {
        Some(m) => format!("{:.1} ± {:.1}", m.mean, m.std),
        None => "not reached".into(),
    };
    let mut out = String::new();
    let _ = writeln!(out, "threshold: stationarity <= {eps}");
    let _ = writeln!(
        out,
        "{:<24} {:<11} {:<28} {:>7} {:>22} {:>24}",
        "name", "solver", "params", "reached", "rounds", "samples"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<24} {:<11} {:<28} {:>7} {:>22} {:>24}",
            r.name,
            r.solver,
            r.params,
            format!("{}/{}", r.reached, r.seeds),
            cell(&r.rounds),
            cell(&r.samples)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std() {
        assert_eq!(MeanStd::of(&[]), None);
        assert_eq!(MeanStd::of(&[3.0]), Some(MeanStd { mean: 3.0, std: 0.0 }));
        let m = MeanStd::of(&[1.0, 3.0]).unwrap();
        assert_eq!(m.mean, 2.0);
        assert!((m.std - 2f64.sqrt()).abs() < 1e-15);
    }
}
