//! Experiment configuration (TOML).
//!
//! ```toml
//! name = "quadratic-ring"
//!
//! [problem]
//! kind = "quadratic"          # or "logreg"
//! m1 = 20
//! m2 = 20
//! kappa = 10.0
//! sigma_g = 0.1
//!
//! [solver]
//! kind = "local-dima"         # adahmm | fed-mima | local-dima | sgda
//! rounds = 1000
//! local_steps = 5
//!
//! [topology]
//! kind = "erdos-renyi"        # complete | ring | erdos-renyi | file
//! agents = 8
//! p = 0.5
//!
//! [schedule]                  # or [hyperparams], exactly one
//! c_x = 1.0
//!
//! [run]
//! seeds = [1, 2, 3]
//! ```
//!
//! Every field not shown has a default; see the struct definitions below.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use minimax_core::momentum::ScalingMode;
use minimax_core::problems::NonconvexReg;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Prefix of the output files.
    #[serde(default = "default_name")]
    pub name: String,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub init: InitConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub topology: TopologyConfig,
    pub schedule: Option<ScheduleConfig>,
    pub hyperparams: Option<HyperparamsConfig>,
    /// Parameter name → list of values; the experiment runs the Cartesian
    /// product, with names iterated in sorted order.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub run: RunConfig,
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RegConfig {
    pub rho: f64,
    pub rho2: f64,
    pub lambda: f64,
}

impl Default for RegConfig {
    fn default() -> Self {
        let r = NonconvexReg::default();
        Self {
            rho: r.rho,
            rho2: r.rho2,
            lambda: r.lambda_g,
        }
    }
}

impl From<RegConfig> for NonconvexReg {
    fn from(r: RegConfig) -> Self {
        NonconvexReg {
            rho: r.rho,
            rho2: r.rho2,
            lambda_g: r.lambda,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Random quadratic game, one shard per agent.
    Quadratic {
        #[serde(default = "d20")]
        m1: usize,
        #[serde(default = "d20")]
        m2: usize,
        #[serde(default = "d10")]
        kappa: f64,
        #[serde(default = "d1")]
        c_max: f64,
        #[serde(default = "d1")]
        coupling: f64,
        #[serde(default)]
        x_curvature: f64,
        #[serde(default)]
        reg: RegConfig,
        #[serde(default)]
        sigma_g: f64,
        #[serde(default)]
        sigma_h: f64,
        #[serde(default)]
        heterogeneity: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Distributionally robust logistic regression.
    Logreg {
        /// LIBSVM file; mutually exclusive with `synthetic`.
        dataset: Option<PathBuf>,
        synthetic: Option<SyntheticData>,
        /// Defaults to `1 / L²`.
        rho1: Option<f64>,
        #[serde(default)]
        reg: RegConfig,
        #[serde(default)]
        partition_seed: u64,
        #[serde(default = "d100k")]
        envelope_max_iter: usize,
    },
}

fn d20() -> usize {
    20
}
fn d10() -> f64 {
    10.0
}
fn d1() -> f64 {
    1.0
}
fn d100k() -> usize {
    100_000
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub samples: usize,
    pub dim: usize,
    #[serde(default)]
    pub flip_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Initial point: Gaussian entries with the given scales, `y` projected onto
/// its domain, or `y = argmax_y J(x, y)` with `y_maximizer`. All agents
/// start at the same point.
#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(default = "d1")]
    pub x_scale: f64,
    #[serde(default)]
    pub y_scale: f64,
    #[serde(default)]
    pub y_maximizer: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            x_scale: 1.0,
            y_scale: 0.0,
            y_maximizer: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Adahmm,
    FedMima,
    LocalDima,
    Sgda,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Adahmm => "adahmm",
            SolverKind::FedMima => "fed-mima",
            SolverKind::LocalDima => "local-dima",
            SolverKind::Sgda => "sgda",
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ScalingConfig {
    None,
    Adam,
    Adagrad,
}

impl From<ScalingConfig> for ScalingMode {
    fn from(s: ScalingConfig) -> Self {
        match s {
            ScalingConfig::None => ScalingMode::None,
            ScalingConfig::Adam => ScalingMode::Adam,
            ScalingConfig::Adagrad => ScalingMode::AdaGrad,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Communication rounds (iterations for single-agent solvers).
    pub rounds: usize,
    #[serde(default = "d1usize")]
    pub local_steps: usize,
    #[serde(default = "default_scaling")]
    pub scaling: ScalingConfig,
    /// 1 enables the Hessian correction.
    #[serde(default = "d1")]
    pub gamma: f64,
    /// Adam second-moment factor; defaults to the momentum factor.
    pub second_moment_beta: Option<f64>,
}

fn d1usize() -> usize {
    1
}
fn default_scaling() -> ScalingConfig {
    ScalingConfig::None
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    Complete,
    Ring,
    ErdosRenyi,
    File,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default = "default_topology")]
    pub kind: TopologyKind,
    #[serde(default = "d1usize")]
    pub agents: usize,
    /// Edge probability for `erdos-renyi`.
    pub p: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Edge-list file for `file`.
    pub path: Option<PathBuf>,
}

fn default_topology() -> TopologyKind {
    TopologyKind::Complete
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            kind: TopologyKind::Complete,
            agents: 1,
            p: None,
            seed: 0,
            path: None,
        }
    }
}

/// Leading constants of the theoretical step-size schedule. `kappa` and
/// `lipschitz` default to the problem's own estimates.
#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "d1")]
    pub c_beta: f64,
    #[serde(default = "d1")]
    pub c_y: f64,
    #[serde(default = "d1")]
    pub c_x: f64,
    #[serde(default = "d1")]
    pub scaling_lower: f64,
    #[serde(default = "d1")]
    pub scaling_upper: f64,
    pub kappa: Option<f64>,
    pub lipschitz: Option<f64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            c_beta: 1.0,
            c_y: 1.0,
            c_x: 1.0,
            scaling_lower: 1.0,
            scaling_upper: 1.0,
            kappa: None,
            lipschitz: None,
        }
    }
}

/// Explicit step sizes. Local step sizes default to the global ones
/// divided by the number of local steps.
#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HyperparamsConfig {
    pub mu_x: f64,
    pub mu_y: f64,
    pub local_mu_x: Option<f64>,
    pub local_mu_y: Option<f64>,
    pub beta: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Envelope evaluation interval in rounds (0 disables it).
    #[serde(default = "d10usize")]
    pub cadence: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_tol")]
    pub envelope_tol: f64,
    /// Stationarity level for the rounds/samples-to-threshold columns.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Thread count; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn d10usize() -> usize {
    10
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_tol() -> f64 {
    1e-8
}
fn default_threshold() -> f64 {
    0.1
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            cadence: 10,
            out_dir: default_out_dir(),
            envelope_tol: default_tol(),
            threshold: default_threshold(),
            workers: 0,
        }
    }
}

/// Parameters a `[grid]` table may sweep.
pub const GRID_KEYS: &[&str] = &[
    "mu_x",
    "mu_y",
    "local_mu_x",
    "local_mu_y",
    "beta",
    "c_beta",
    "c_x",
    "c_y",
    "local_steps",
    "rounds",
];

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Relative dataset and topology
    /// paths are resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            let rebase = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            };
            if let ProblemConfig::Logreg { dataset: Some(p), .. } = &mut cfg.problem {
                rebase(p);
            }
            if let Some(p) = &mut cfg.topology.path {
                rebase(p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        match (&self.schedule, &self.hyperparams) {
            (Some(_), Some(_)) => return bad("give either [schedule] or [hyperparams], not both".into()),
            (None, None) => return bad("one of [schedule] or [hyperparams] is required".into()),
            _ => {}
        }
        if self.solver.rounds == 0 || self.solver.local_steps == 0 {
            return bad("solver.rounds and solver.local_steps must be positive".into());
        }
        if self.topology.agents == 0 {
            return bad("topology.agents must be positive".into());
        }
        if self.solver.kind == SolverKind::Adahmm && self.topology.agents != 1 {
            return bad(format!("adahmm is single-agent but topology.agents = {}", self.topology.agents));
        }
        if matches!(self.solver.kind, SolverKind::Adahmm | SolverKind::Sgda) && self.solver.local_steps != 1 {
            return bad(format!("{} takes no local steps", self.solver.kind.as_str()));
        }
        match self.topology.kind {
            TopologyKind::ErdosRenyi if self.topology.p.is_none() => {
                return bad("erdos-renyi topology needs p".into());
            }
            TopologyKind::File if self.topology.path.is_none() => {
                return bad("file topology needs path".into());
            }
            _ => {}
        }
        if let ProblemConfig::Logreg { dataset, synthetic, .. } = &self.problem {
            if dataset.is_some() == synthetic.is_some() {
                return bad("logreg needs exactly one of dataset or synthetic".into());
            }
        }
        if self.run.seeds.is_empty() {
            return bad("run.seeds must not be empty".into());
        }
        for key in self.grid.keys() {
            if !GRID_KEYS.contains(&key.as_str()) {
                return bad(format!("unknown grid parameter {key:?}; expected one of {GRID_KEYS:?}"));
            }
            let in_schedule = key.starts_with("c_");
            if in_schedule && self.schedule.is_none() {
                return bad(format!("grid parameter {key} needs a [schedule] section"));
            }
            let in_hyperparams = key.starts_with("mu") || key.starts_with("local_mu") || key == "beta";
            if in_hyperparams && self.hyperparams.is_none() {
                return bad(format!("grid parameter {key} needs a [hyperparams] section"));
            }
        }
        if self.grid.values().any(|v| v.is_empty()) {
            return bad("grid value lists must not be empty".into());
        }
        Ok(())
    }

    /// Grid points in row-major order over the sorted parameter names. A
    /// config without a grid has a single empty point.
    pub fn grid_points(&self) -> Vec<Vec<(String, f64)>> {
        let mut points = vec![Vec::new()];
        for (key, values) in &self.grid {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push((key.clone(), v));
                        q
                    })
                })
                .collect();
        }
        points
    }

    /// Copy of `self` with one grid point applied and the grid removed.
    pub fn with_grid_point(&self, point: &[(String, f64)]) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.grid.clear();
        for (key, v) in point {
            let v = *v;
            let as_count = || {
                if v >= 1.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(HarnessError::Config(format!("{key} must be a positive integer, got {v}")))
                }
            };
            match key.as_str() {
                "local_steps" => cfg.solver.local_steps = as_count()?,
                "rounds" => cfg.solver.rounds = as_count()?,
                "c_beta" | "c_x" | "c_y" => {
                    let s = cfg.schedule.as_mut().expect("validated");
                    match key.as_str() {
                        "c_beta" => s.c_beta = v,
                        "c_x" => s.c_x = v,
                        _ => s.c_y = v,
                    }
                }
                _ => {
                    let h = cfg.hyperparams.as_mut().expect("validated");
                    match key.as_str() {
                        "mu_x" => h.mu_x = v,
                        "mu_y" => h.mu_y = v,
                        "local_mu_x" => h.local_mu_x = Some(v),
                        "local_mu_y" => h.local_mu_y = Some(v),
                        "beta" => h.beta = v,
                        other => return Err(HarnessError::Config(format!("unknown grid parameter {other}"))),
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [problem]
        kind = "quadratic"
        m1 = 3
        m2 = 2
        [solver]
        kind = "fed-mima"
        rounds = 10
        [topology]
        agents = 2
        [hyperparams]
        mu_x = 0.01
        mu_y = 0.1
        beta = 0.5
    "#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.name, "experiment");
        assert_eq!(cfg.run.seeds, vec![0]);
        assert_eq!(cfg.run.cadence, 10);
        assert_eq!(cfg.solver.local_steps, 1);
        assert_eq!(cfg.topology.kind, TopologyKind::Complete);
        assert!(matches!(cfg.problem, ProblemConfig::Quadratic { m1: 3, kappa, .. } if kappa == 10.0));
    }

    #[test]
    fn needs_exactly_one_step_size_source() {
        let both = format!("{BASE}\n[schedule]\nc_x = 2.0\n");
        assert!(ExperimentConfig::from_toml(&both).is_err());
        let neither = BASE.replace("[hyperparams]", "[run]").replace("mu_x = 0.01\n        mu_y = 0.1\n        beta = 0.5", "");
        assert!(ExperimentConfig::from_toml(&neither).is_err());
    }

    #[test]
    fn adahmm_must_be_single_agent() {
        let text = BASE.replace("fed-mima", "adahmm");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = text.replace("agents = 2", "agents = 1");
        assert!(ExperimentConfig::from_toml(&text).is_ok());
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = BASE.replace("rounds = 10", "rounds = 10\nlearning_rate = 3");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn grid_expands_in_sorted_order() {
        let text = format!("{BASE}\n[grid]\nmu_y = [0.1]\nmu_x = [0.01, 0.02]\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let points = cfg.grid_points();
        assert_eq!(points.len(), 2);
        assert_eq!(points[1], vec![("mu_x".to_string(), 0.02), ("mu_y".to_string(), 0.1)]);
        let applied = cfg.with_grid_point(&points[1]).unwrap();
        assert_eq!(applied.hyperparams.unwrap().mu_x, 0.02);
        assert!(applied.grid.is_empty());
    }

    #[test]
    fn grid_rejects_foreign_parameters() {
        let text = format!("{BASE}\n[grid]\nc_x = [1.0]\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = format!("{BASE}\n[grid]\ntemperature = [1.0]\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = format!("{BASE}\n[grid]\nlocal_steps = [1.5]\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert!(cfg.with_grid_point(&cfg.grid_points()[0]).is_err());
    }

    #[test]
    fn logreg_needs_one_data_source() {
        let text = BASE.replace(
            "kind = \"quadratic\"\n        m1 = 3\n        m2 = 2",
            "kind = \"logreg\"",
        );
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = text.replace("kind = \"logreg\"", "kind = \"logreg\"\nsynthetic = { samples = 20, dim = 3 }");
        assert!(ExperimentConfig::from_toml(&text).is_ok());
    }
}
