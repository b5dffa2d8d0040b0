//! First-order solvers over `Θ`.
//!
//! All methods share one driver: compute a direction, take a step, project
//! back onto `Θ` (or map back through the reparametrization), record. Runs are
//! single-threaded and deterministic given the config.

mod reparam;
mod smoothness;
mod solver;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use reparam::{reparametrized_solve, Reparametrization};
pub use smoothness::{estimate_smoothness, random_feasible_theta, random_interior_theta};
pub(crate) use solver::Clock;
pub use solver::{adam_family, pgd, solve, spgd, stationarity, stochastic_gradient};

use crate::error::Result;
use crate::formulation::{GradientOptions, ObjectiveBreakdown, ThetaPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pgd,
    Spgd,
    Adam,
    Nadam,
}

/// Step size schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    Constant {
        eta: f64,
    },
    /// `η = 1/M̂`.
    InverseSmoothness,
    /// `η_k = scale / (√(k+3)·log₂(k+3))`.
    Diminishing {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Backtracking on the projected step until the sufficient-decrease
    /// condition holds. Only meaningful for PGD.
    Armijo {
        #[serde(default = "one")]
        initial: f64,
        #[serde(default = "half")]
        shrink: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl StepRule {
    /// The default for each method: `1/M̂` for PGD, the diminishing schedule
    /// for SPGD and a constant `0.01` for the Adam family.
    pub fn default_for(method: Method) -> Self {
        match method {
            Method::Pgd => StepRule::InverseSmoothness,
            Method::Spgd => StepRule::Diminishing { scale: 1.0 },
            Method::Adam | Method::Nadam => StepRule::Constant { eta: 0.01 },
        }
    }

    pub fn eta(&self, k: usize, smoothness: Option<f64>) -> f64 {
        match *self {
            StepRule::Constant { eta } => eta,
            StepRule::InverseSmoothness => {
                1.0 / smoothness.expect("smoothness estimate resolved before the run")
            }
            StepRule::Diminishing { scale } => {
                let k3 = (k + 3) as f64;
                scale / (k3.sqrt() * k3.log2())
            }
            StepRule::Armijo { initial, .. } => initial,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stopping {
    /// Stop once the objective drops to this value.
    pub objective_tol: f64,
    /// Stop once `‖G_η‖₂` drops to this value; `0` disables the test.
    pub stationarity_tol: f64,
    /// Seconds of wall-clock time.
    pub wall_clock_budget: Option<f64>,
}

impl Default for Stopping {
    fn default() -> Self {
        Self {
            objective_tol: 1e-16,
            stationarity_tol: 0.0,
            wall_clock_budget: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: Method,
    pub max_iters: usize,
    /// `None` picks [`StepRule::default_for`] the method.
    pub step: Option<StepRule>,
    /// `M̂`; estimated with `smoothness_samples` pairs when needed and absent.
    pub smoothness_estimate: Option<f64>,
    pub smoothness_samples: usize,
    /// Terms per stochastic batch; `None` means a tenth of all terms.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub stopping: Stopping,
    /// Iterations between exploitability evaluations.
    pub eval_every: usize,
    /// Optimize unconstrained variables mapped onto `Θ` instead of
    /// projecting.
    pub reparametrized: bool,
    pub adam: AdamParams,
    pub allow_finite_differences: bool,
    /// Record wall-clock times; when false every `time_s` is zero so traces
    /// are reproducible byte for byte.
    pub record_time: bool,
    /// Abort once the objective exceeds this multiple of its initial value.
    pub divergence_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Pgd,
            max_iters: 1000,
            step: None,
            smoothness_estimate: None,
            smoothness_samples: 20,
            batch_size: None,
            seed: 0,
            stopping: Stopping::default(),
            eval_every: 10,
            reparametrized: false,
            adam: AdamParams::default(),
            allow_finite_differences: true,
            record_time: true,
            divergence_factor: 1e3,
        }
    }
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn step_rule(&self) -> StepRule {
        self.step.unwrap_or(StepRule::default_for(self.method))
    }

    pub fn gradient_options(&self) -> GradientOptions {
        GradientOptions {
            allow_finite_differences: self.allow_finite_differences,
        }
    }

    pub(crate) fn needs_smoothness(&self) -> bool {
        matches!(self.step_rule(), StepRule::InverseSmoothness)
    }
}

/// One row of a solver trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub wall_time_s: f64,
    pub objective: Option<ObjectiveBreakdown>,
    /// `‖G_η(θ_k)‖₂`
    pub grad_map_norm: Option<f64>,
    pub exploitability: Option<f64>,
    pub normalized_exploitability: Option<f64>,
    pub step_size: Option<f64>,
}

/// Receives records from a single producer, in order.
pub trait TraceSink {
    fn record(&mut self, rec: &IterationRecord) -> Result<()>;
}

impl TraceSink for Vec<IterationRecord> {
    fn record(&mut self, rec: &IterationRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: &IterationRecord) -> Result<()> {
        Ok(())
    }
}

pub const CSV_HEADER: &str =
    "iter,time_s,f_total,f_consistency,f_bellman,f_complementarity,grad_map_norm,expl,expl_normalized";

/// Writes records as CSV rows with 17 significant digits; missing values are
/// written as `nan`.
pub struct CsvSink<W: Write> {
    out: W,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

fn fmt_num(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.16e}"),
        None => "nan".into(),
    }
}

impl<W: Write> TraceSink for CsvSink<W> {
    fn record(&mut self, rec: &IterationRecord) -> Result<()> {
        let obj = rec.objective;
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{}",
            rec.iter,
            fmt_num(Some(rec.wall_time_s)),
            fmt_num(obj.map(|o| o.total)),
            fmt_num(obj.map(|o| o.consistency)),
            fmt_num(obj.map(|o| o.bellman)),
            fmt_num(obj.map(|o| o.complementarity)),
            fmt_num(rec.grad_map_norm),
            fmt_num(rec.exploitability),
            fmt_num(rec.normalized_exploitability),
        )?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ObjectiveTolerance,
    Stationary,
    WallClock,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutput {
    pub theta: ThetaPoint,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub final_objective: ObjectiveBreakdown,
    pub initial_exploitability: f64,
    pub final_exploitability: f64,
    /// False when the initial exploitability was zero and normalized values
    /// are absolute.
    pub normalized_by_initial: bool,
    /// `M̂` used by the run, if any.
    pub smoothness: Option<f64>,
}
