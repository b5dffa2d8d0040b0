//! Config-driven experiments: a game, a list of solvers, initializations and
//! seeds. Every (solver, init, seed) run writes a CSV trace; a summary JSON
//! collects final metrics and, when reference equilibria are given, which
//! equilibrium each run ended up at.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineConfig};
use crate::error::{Error, Result};
use crate::formulation::{warm_start, ThetaPoint};
use crate::game::{propagate_flow, MeanFieldGame};
use crate::io::{build_game, load_checkpoint, save_checkpoint, write_json, GameSpec};
use crate::mdp::policy_from_occupation;
use crate::optim::{solve, CsvSink, SolverConfig};
use crate::projection::{project_simplex, ThetaBounds};
use crate::types::{MeanFieldFlow, PolicySequence};
use crate::zoo::{CongregationGame, CongregationParams};

/// Environment variable naming the directory under which experiment outputs
/// are written.
pub const OUTPUT_ROOT_VAR: &str = "MFOMO_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverSpec {
    Mfomo {
        label: String,
        config: SolverConfig,
    },
    Baseline {
        label: String,
        config: BaselineConfig,
    },
}

impl SolverSpec {
    pub fn label(&self) -> &str {
        match self {
            SolverSpec::Mfomo { label, .. } | SolverSpec::Baseline { label, .. } => label,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    /// Warm start from the uniform flow.
    Uniform,
    /// Warm start from a random perturbation of reference equilibrium
    /// `reference` (an index into `ne_references`).
    NearReference {
        reference: usize,
        epsilon: f64,
    },
    FromCheckpoint {
        path: PathBuf,
    },
}

impl InitSpec {
    fn label(&self, index: usize) -> String {
        match self {
            InitSpec::Uniform => "uniform".into(),
            InitSpec::NearReference { reference, epsilon } => {
                format!("near{reference}_eps{epsilon}")
            }
            InitSpec::FromCheckpoint { .. } => format!("checkpoint{index}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// The gathering equilibrium of a congregation game at `location`.
    Congregation { location: usize },
    /// An explicit stacked flow.
    Flow { data: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Classification {
    /// A run counts as converged when its final normalized exploitability is
    /// at most this value.
    pub expl_tol: f64,
}

impl Default for Classification {
    fn default() -> Self {
        Self { expl_tol: 1e-3 }
    }
}

fn default_inits() -> Vec<InitSpec> {
    vec![InitSpec::Uniform]
}

fn default_output() -> String {
    "experiment".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub solvers: Vec<SolverSpec>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_inits")]
    pub inits: Vec<InitSpec>,
    #[serde(default)]
    pub ne_references: Vec<ReferenceSpec>,
    #[serde(default)]
    pub classification: Classification,
    /// Output directory, relative to the output root.
    #[serde(default = "default_output")]
    pub output_dir: String,
    /// Save each final point of an MF-OMO run as a checkpoint.
    #[serde(default)]
    pub save_checkpoints: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() || self.seeds.is_empty() || self.inits.is_empty() {
            return Err(Error::Config(
                "an experiment needs at least one solver, one seed and one init".into(),
            ));
        }
        for init in &self.inits {
            if let InitSpec::NearReference { reference, epsilon } = init {
                if *reference >= self.ne_references.len() {
                    return Err(Error::Config(format!(
                        "init refers to missing reference {reference}"
                    )));
                }
                if !(*epsilon >= 0.0) {
                    return Err(Error::Config("epsilon must be nonnegative".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub solver: String,
    pub init: String,
    pub seed: u64,
    pub completed: bool,
    pub error: Option<String>,
    pub trace: Option<String>,
    pub iterations: Option<usize>,
    pub final_objective: Option<f64>,
    pub final_exploitability: Option<f64>,
    pub final_normalized_exploitability: Option<f64>,
    pub converged: Option<bool>,
    /// Index of the nearest reference equilibrium (ℓ2 on the flow).
    pub nearest_reference: Option<usize>,
}

/// Outcome proportions for one (solver, init) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub solver: String,
    pub init: String,
    pub runs: usize,
    /// Did not converge.
    pub p0: f64,
    /// Converged to the reference the init was drawn around.
    pub p1: Option<f64>,
    /// Converged to some other reference.
    pub p2: Option<f64>,
    /// Converged runs per nearest reference.
    pub by_reference: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub output_dir: PathBuf,
    pub runs: Vec<RunSummary>,
    pub cells: Vec<CellSummary>,
}

impl ExperimentSummary {
    pub fn all_completed(&self) -> bool {
        self.runs.iter().all(|r| r.completed)
    }
}

/// The output root: `$MFOMO_OUTPUT_ROOT` or `./mfomo-output`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("mfomo-output"))
}

/// Perturbs `ne_flow` by noise of ℓ1 size `epsilon` per time slice, projects
/// each slice back onto the simplex and warm-starts from the result.
pub fn neighborhood_init<G: MeanFieldGame + ?Sized>(
    game: &G,
    ne_flow: &MeanFieldFlow,
    epsilon: f64,
    seed: u64,
) -> Result<ThetaPoint> {
    let dims = ne_flow.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(dims.flow_len());
    for t in 0..dims.n_times() {
        let noise: Vec<f64> = (0..dims.sa()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let size: f64 = noise.iter().map(|x| x.abs()).sum();
        let scale = if size > 0.0 { epsilon / size } else { 0.0 };
        let moved: Vec<f64> = ne_flow
            .slice(t)
            .iter()
            .zip(&noise)
            .map(|(l, n)| l + scale * n)
            .collect();
        data.extend(project_simplex(&moved));
    }
    warm_start(game, &MeanFieldFlow::from_raw(dims, data)?)
}

fn reference_flows(
    game_spec: &GameSpec,
    game: &dyn MeanFieldGame,
    refs: &[ReferenceSpec],
) -> Result<Vec<MeanFieldFlow>> {
    refs.iter()
        .map(|r| match r {
            ReferenceSpec::Congregation { location } => match game_spec {
                GameSpec::Congregation(p) => congregation_reference(p, *location),
                _ => Err(Error::Config(
                    "congregation references need a congregation game".into(),
                )),
            },
            ReferenceSpec::Flow { data } => MeanFieldFlow::new(game.dims(), data.clone()),
        })
        .collect()
}

fn congregation_reference(params: &CongregationParams, location: usize) -> Result<MeanFieldFlow> {
    Ok(CongregationGame::new(params.clone())?
        .nash_construction(location)?
        .1)
}

struct RunPlan {
    solver: usize,
    init: usize,
    seed: u64,
}

enum Start {
    Theta(ThetaPoint),
    Policy(PolicySequence),
}

fn start_point(
    game: &dyn MeanFieldGame,
    init: &InitSpec,
    refs: &[MeanFieldFlow],
    seed: u64,
    for_baseline: bool,
) -> Result<Start> {
    let dims = game.dims();
    let theta = match init {
        InitSpec::Uniform => {
            if for_baseline {
                return Ok(Start::Policy(PolicySequence::uniform(dims)));
            }
            warm_start(game, &MeanFieldFlow::uniform(dims))?
        }
        InitSpec::NearReference { reference, epsilon } => {
            neighborhood_init(game, &refs[*reference], *epsilon, seed)?
        }
        InitSpec::FromCheckpoint { path } => {
            let theta = load_checkpoint(path)?;
            if theta.dims != dims {
                return Err(Error::Config(format!(
                    "checkpoint {} does not match the game dimensions",
                    path.display()
                )));
            }
            theta
        }
    };
    if for_baseline {
        Ok(Start::Policy(policy_from_occupation(&theta.flow(), None)))
    } else {
        Ok(Start::Theta(theta))
    }
}

fn nearest(refs: &[MeanFieldFlow], flow: &MeanFieldFlow) -> Option<usize> {
    refs.iter()
        .enumerate()
        .map(|(i, r)| (i, r.l2_distance(flow)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

struct RunResult {
    iterations: usize,
    final_objective: Option<f64>,
    final_expl: f64,
    final_normalized: f64,
    flow: MeanFieldFlow,
}

#[allow(clippy::too_many_arguments)]
fn execute(
    game: &dyn MeanFieldGame,
    solver: &SolverSpec,
    init: &InitSpec,
    refs: &[MeanFieldFlow],
    seed: u64,
    csv: &Path,
    checkpoint: Option<&Path>,
) -> Result<RunResult> {
    let file = BufWriter::new(File::create(csv)?);
    let mut sink = CsvSink::new(file)?;
    let normalized = |e: f64, e0: f64| if e0 > 0.0 { e / e0 } else { e };
    match solver {
        SolverSpec::Mfomo { config, .. } => {
            let Start::Theta(theta0) = start_point(game, init, refs, seed, false)? else {
                unreachable!()
            };
            let cfg = SolverConfig {
                seed,
                ..config.clone()
            };
            let out = solve(game, &theta0, &cfg, &mut sink)?;
            if let Some(path) = checkpoint {
                save_checkpoint(path, &out.theta)?;
            }
            Ok(RunResult {
                iterations: out.iterations,
                final_objective: Some(out.final_objective.total),
                final_expl: out.final_exploitability,
                final_normalized: normalized(out.final_exploitability, out.initial_exploitability),
                flow: out.theta.flow(),
            })
        }
        SolverSpec::Baseline { config, .. } => {
            let Start::Policy(pi0) = start_point(game, init, refs, seed, true)? else {
                unreachable!()
            };
            let cfg = BaselineConfig {
                seed,
                ..config.clone()
            };
            let out = run_baseline(game, &pi0, &cfg, &mut sink)?;
            Ok(RunResult {
                iterations: out.iterations,
                final_objective: None,
                final_expl: out.final_exploitability,
                final_normalized: normalized(out.final_exploitability, out.initial_exploitability),
                flow: propagate_flow(game, &out.policy),
            })
        }
    }
}

/// Runs every (solver, init, seed) combination in parallel and writes
/// `summary.json` next to the traces. Failed runs are reported in the summary
/// rather than aborting the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    run_experiment_in(cfg, &output_root())
}

pub fn run_experiment_in(cfg: &ExperimentConfig, root: &Path) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let game = build_game(&cfg.game)?;
    let refs = reference_flows(&cfg.game, game.as_ref(), &cfg.ne_references)?;
    let out_dir = root.join(&cfg.output_dir);
    std::fs::create_dir_all(&out_dir)?;

    let mut plans = Vec::new();
    for solver in 0..cfg.solvers.len() {
        for init in 0..cfg.inits.len() {
            for &seed in &cfg.seeds {
                plans.push(RunPlan { solver, init, seed });
            }
        }
    }
    let runs: Vec<RunSummary> = plans
        .par_iter()
        .map(|plan| {
            let solver = &cfg.solvers[plan.solver];
            let init = &cfg.inits[plan.init];
            let init_label = init.label(plan.init);
            let stem = format!("{}_{}_seed{}", solver.label(), init_label, plan.seed);
            let csv = out_dir.join(format!("{stem}.csv"));
            let ckpt = cfg
                .save_checkpoints
                .then(|| out_dir.join(format!("{stem}.final.json")));
            let mut summary = RunSummary {
                solver: solver.label().to_string(),
                init: init_label,
                seed: plan.seed,
                completed: false,
                error: None,
                trace: Some(csv.display().to_string()),
                iterations: None,
                final_objective: None,
                final_exploitability: None,
                final_normalized_exploitability: None,
                converged: None,
                nearest_reference: None,
            };
            match execute(
                game.as_ref(),
                solver,
                init,
                &refs,
                plan.seed,
                &csv,
                ckpt.as_deref(),
            ) {
                Ok(res) => {
                    summary.completed = true;
                    summary.iterations = Some(res.iterations);
                    summary.final_objective = res.final_objective;
                    summary.final_exploitability = Some(res.final_expl);
                    summary.final_normalized_exploitability = Some(res.final_normalized);
                    summary.converged = Some(res.final_normalized <= cfg.classification.expl_tol);
                    summary.nearest_reference = nearest(&refs, &res.flow);
                }
                Err(e) => {
                    log::error!("run {stem} failed: {e}");
                    summary.error = Some(e.to_string());
                }
            }
            summary
        })
        .collect();

    let cells = summarize_cells(cfg, &runs);
    let summary = ExperimentSummary {
        output_dir: out_dir.clone(),
        runs,
        cells,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn summarize_cells(cfg: &ExperimentConfig, runs: &[RunSummary]) -> Vec<CellSummary> {
    let mut cells = Vec::new();
    for solver in &cfg.solvers {
        for (i, init) in cfg.inits.iter().enumerate() {
            let label = init.label(i);
            let group: Vec<&RunSummary> = runs
                .iter()
                .filter(|r| r.solver == solver.label() && r.init == label)
                .collect();
            let n = group.len();
            let mut by_reference = vec![0usize; cfg.ne_references.len()];
            let mut failed = 0usize;
            for r in &group {
                if r.converged == Some(true) {
                    if let Some(j) = r.nearest_reference {
                        by_reference[j] += 1;
                    }
                } else {
                    failed += 1;
                }
            }
            let frac = |c: usize| if n > 0 { c as f64 / n as f64 } else { 0.0 };
            let converged_total = n - failed;
            let (p1, p2) = match init {
                InitSpec::NearReference { reference, .. } if !cfg.ne_references.is_empty() => {
                    let home = by_reference[*reference];
                    (Some(frac(home)), Some(frac(converged_total - home)))
                }
                _ => (None, None),
            };
            cells.push(CellSummary {
                solver: solver.label().to_string(),
                init: label,
                runs: n,
                p0: frac(failed),
                p1,
                p2,
                by_reference,
            });
        }
    }
    cells
}

/// Radii of `Θ` for a built game, for feasibility checks on loaded points.
pub fn bounds_for(game: &dyn MeanFieldGame) -> ThetaBounds {
    ThetaBounds::new(game.dims(), game.r_max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::objective;
    use crate::projection::is_feasible;

    #[test]
    fn zero_radius_neighborhood_is_the_equilibrium() {
        let params = CongregationParams::new(3, 3, vec![1.0, 0.5, 1.0]);
        let game = CongregationGame::new(params).unwrap();
        let (_, flow) = game.nash_construction(0).unwrap();
        let theta = neighborhood_init(&game, &flow, 0.0, 1).unwrap();
        assert_eq!(theta.l, flow.data);
        assert!(objective(&game, &theta).total < 1e-20);
        let near = neighborhood_init(&game, &flow, 0.05, 7).unwrap();
        assert!(is_feasible(&near, &bounds_for(&game), 1e-12));
        for t in 0..4 {
            let d: f64 = near
                .flow()
                .slice(t)
                .iter()
                .zip(flow.slice(t))
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert!(d <= 0.05 + 1e-12);
        }
    }
}
