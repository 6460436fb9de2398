//! Seeded replicate runs, CSV traces and run summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use minimax_core::metrics::{Recorder, TrajectoryRecord, CSV_HEADER};
use rayon::prelude::*;

use crate::build::Setup;
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// Trajectory of one `(grid point, seed)` replicate.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub grid_index: usize,
    pub params: Vec<(String, f64)>,
    pub seed: u64,
    /// Rounds `0..=T`, or up to the failing round.
    pub records: Vec<TrajectoryRecord>,
    /// Set when the solver stopped with an error.
    pub failure: Option<String>,
}

impl RunResult {
    pub fn final_stationarity(&self) -> Option<f64> {
        self.records.last().map(TrajectoryRecord::stationarity)
    }

    pub fn best_stationarity(&self) -> Option<f64> {
        self.records.iter().map(TrajectoryRecord::stationarity).reduce(f64::min)
    }

    /// First record with stationarity at or below `eps`.
    pub fn first_below(&self, eps: f64) -> Option<&TrajectoryRecord> {
        self.records.iter().find(|r| r.stationarity() <= eps)
    }

    pub fn csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn params_label(&self) -> String {
        params_label(&self.params)
    }
}

pub fn params_label(params: &[(String, f64)]) -> String {
    if params.is_empty() {
        return "-".into();
    }
    params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

/// Runs one replicate in memory. Setup errors are returned; numeric
/// failures during stepping end the run and are recorded in the result.
pub fn simulate(cfg: &ExperimentConfig, setup: &Setup, seed: u64, parallel: bool) -> Result<(Vec<TrajectoryRecord>, Option<String>)> {
    let mut solver = setup.solver(cfg, seed, parallel)?;
    let recorder = Recorder {
        envelope_cadence: cfg.run.cadence,
        envelope_tol: cfg.run.envelope_tol,
    };
    let oracle = setup.oracle.as_ref();
    let mut records = Vec::with_capacity(cfg.solver.rounds + 1);
    records.push(recorder.record(oracle, solver.as_ref())?);
    for _ in 0..cfg.solver.rounds {
        let step = solver.step().and_then(|()| recorder.record(oracle, solver.as_ref()));
        match step {
            Ok(r) if r.stationarity().is_finite() => records.push(r),
            Ok(_) => return Ok((records, Some("non-finite stationarity".into()))),
            Err(e) => return Ok((records, Some(e.to_string()))),
        }
    }
    Ok((records, None))
}

/// Runs every `(grid point, seed)` pair of `cfg` on a pool of `workers`
/// threads (0 = all cores). Results come back in grid-major, seed-minor
/// order regardless of scheduling.
pub fn run_all(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<RunResult>> {
    let points = cfg.grid_points();
    let mut jobs = Vec::new();
    let mut setups = Vec::with_capacity(points.len());
    for (g, point) in points.iter().enumerate() {
        let sub = cfg.with_grid_point(point)?;
        setups.push(Setup::new(&sub)?);
        for &seed in &cfg.run.seeds {
            jobs.push((g, point.clone(), sub.clone(), seed));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
    let parallel = pool.current_num_threads() > 1;
    pool.install(|| {
        jobs.par_iter()
            .map(|(g, point, sub, seed)| {
                let (records, failure) = simulate(sub, &setups[*g], *seed, parallel)?;
                if let Some(msg) = &failure {
                    warn!("{} grid point {g} seed {seed} failed: {msg}", sub.name);
                }
                Ok(RunResult {
                    grid_index: *g,
                    params: point.clone(),
                    seed: *seed,
                    records,
                    failure,
                })
            })
            .collect()
    })
}

/// Paths written by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub trajectories: Vec<PathBuf>,
    pub summary: PathBuf,
    pub runs: Vec<RunResult>,
}

pub const SUMMARY_HEADER: &str =
    "grid_point,params,seed,status,final_stationarity,best_stationarity,rounds_to_threshold,samples_to_threshold";

fn trajectory_name(cfg: &ExperimentConfig, run: &RunResult) -> String {
    if cfg.grid.is_empty() {
        format!("{}_seed{}.csv", cfg.name, run.seed)
    } else {
        format!("{}_g{}_seed{}.csv", cfg.name, run.grid_index, run.seed)
    }
}

pub fn summary_csv(runs: &[RunResult], threshold: f64) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in runs {
        let status = match &r.failure {
            None => "ok".to_string(),
            Some(msg) => format!("failed: {}", msg.replace([',', '\n'], " ")),
        };
        let hit = r.first_below(threshold);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.grid_index,
            r.params_label(),
            r.seed,
            status,
            opt(r.final_stationarity()),
            opt(r.best_stationarity()),
            hit.map(|h| h.round.to_string()).unwrap_or_default(),
            hit.map(|h| h.samples_used.to_string()).unwrap_or_default(),
        );
    }
    out
}

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| HarnessError::Io(tmp.clone(), e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))
}

/// Runs all replicates and writes one CSV per `(seed, grid point)` plus
/// `<name>_summary.csv` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, workers: usize) -> Result<ExperimentOutput> {
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::Io(out_dir.to_path_buf(), e))?;
    let runs = run_all(cfg, workers)?;
    let mut trajectories = Vec::with_capacity(runs.len());
    for r in &runs {
        let path = out_dir.join(trajectory_name(cfg, r));
        write_atomic(&path, &r.csv())?;
        trajectories.push(path);
    }
    let summary = out_dir.join(format!("{}_summary.csv", cfg.name));
    write_atomic(&summary, &summary_csv(&runs, cfg.run.threshold))?;
    let failed = runs.iter().filter(|r| r.failure.is_some()).count();
    info!(
        "{}: {} runs ({} failed), summary at {}",
        cfg.name,
        runs.len(),
        failed,
        summary.display()
    );
    Ok(ExperimentOutput {
        trajectories,
        summary,
        runs,
    })
}
