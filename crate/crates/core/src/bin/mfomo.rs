use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use mfomo::bench::{bounds_for, output_root, run_experiment, ExperimentConfig};
use mfomo::formulation::{
    exploitability_bound_constant, extract_solution, objective, solution_modification,
};
use mfomo::game::NashReport;
use mfomo::io::{build_game, load_checkpoint, read_json, save_checkpoint, write_json, GameSpec};
use mfomo::lcp::{solve_by_enumeration, EnumerationOptions, DEFAULT_MAX_DIM};
use mfomo::projection::is_feasible;
use mfomo::ObjectiveBreakdown;

#[derive(Parser)]
#[command(
    name = "mfomo",
    version,
    about = "Mean-field game equilibria by occupation-measure optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config; outputs go under $MFOMO_OUTPUT_ROOT.
    Run { config: PathBuf },
    /// Check a saved point against a game.
    Verify {
        checkpoint: PathBuf,
        /// Game spec JSON (`{"name": ..., "params": ...}`).
        #[arg(long)]
        game: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Enumerate every equilibrium of a linear complementarity game.
    EnumerateLcp { config: PathBuf },
}

#[derive(Deserialize)]
struct EnumerateConfig {
    game: GameSpec,
    #[serde(default = "default_max_dim")]
    max_dim: usize,
    #[serde(default = "default_output")]
    output_dir: String,
}

fn default_max_dim() -> usize {
    DEFAULT_MAX_DIM
}

fn default_output() -> String {
    "lcp".into()
}

#[derive(Serialize)]
struct VerifyReport {
    feasible: bool,
    objective: ObjectiveBreakdown,
    nash: NashReport,
    /// `f·√obj + obj` when the game reports Lipschitz constants.
    exploitability_bound: Option<f64>,
}

#[derive(Serialize)]
struct EnumeratedPoint {
    checkpoint: PathBuf,
    objective: f64,
    nash: NashReport,
}

fn run(config: PathBuf) -> mfomo::Result<bool> {
    let cfg: ExperimentConfig = read_json(&config)?;
    let summary = run_experiment(&cfg)?;
    let failed = summary.runs.iter().filter(|r| !r.completed).count();
    println!(
        "{} runs, {} failed; summary in {}",
        summary.runs.len(),
        failed,
        summary.output_dir.join("summary.json").display()
    );
    Ok(failed == 0)
}

fn verify(checkpoint: PathBuf, game: PathBuf, tol: f64) -> mfomo::Result<bool> {
    let spec: GameSpec = read_json(&game)?;
    let game = build_game(&spec)?;
    let theta = load_checkpoint(&checkpoint)?;
    if theta.dims != game.dims() {
        return Err(mfomo::Error::Dimension(
            "checkpoint does not match the game".into(),
        ));
    }
    let feasible = is_feasible(&theta, &bounds_for(game.as_ref()), 1e-9);
    let obj = objective(game.as_ref(), &theta);
    let (_, nash) = extract_solution(game.as_ref(), &theta, tol)?;
    let d = game.dims();
    let exploitability_bound = game.lipschitz().map(|lip| {
        let c = exploitability_bound_constant(
            d.n_states,
            d.n_actions,
            d.horizon,
            lip.transition,
            lip.reward,
            game.r_max(),
        );
        c * obj.total.max(0.0).sqrt() + obj.total
    });
    let report = VerifyReport {
        feasible,
        objective: obj,
        nash,
        exploitability_bound,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(feasible)
}

fn enumerate(config: PathBuf) -> mfomo::Result<bool> {
    let cfg: EnumerateConfig = read_json(&config)?;
    let game = build_game(&cfg.game)?;
    let opts = EnumerationOptions {
        max_dim: cfg.max_dim,
        ..EnumerationOptions::default()
    };
    let points = solve_by_enumeration(game.as_ref(), opts)?;
    let dir = output_root().join(&cfg.output_dir);
    let mut listing = Vec::new();
    for (i, raw) in points.iter().enumerate() {
        let theta = solution_modification(game.as_ref(), raw)?;
        let path = dir.join(format!("ne{i}.json"));
        save_checkpoint(&path, &theta)?;
        let (_, nash) = extract_solution(game.as_ref(), raw, 1e-8)?;
        listing.push(EnumeratedPoint {
            checkpoint: path,
            objective: objective(game.as_ref(), raw).total,
            nash,
        });
    }
    write_json(&dir.join("equilibria.json"), &listing)?;
    println!("{} equilibria written to {}", listing.len(), dir.display());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config } => run(config),
        Command::Verify {
            checkpoint,
            game,
            tol,
        } => verify(checkpoint, game, tol),
        Command::EnumerateLcp { config } => enumerate(config),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
