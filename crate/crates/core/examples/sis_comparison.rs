//! SIS epidemic game, horizon 50: MF-OMO with Adam against fictitious play and
//! online mirror descent under the same wall-clock budget. Prints the time at
//! which each method first reaches normalized exploitability 1e-2.
//!
//! cargo run --release --example sis_comparison -- [budget_seconds]

use mfomo::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use mfomo::formulation::warm_start;
use mfomo::optim::{solve, IterationRecord, Method, SolverConfig, StepRule, Stopping};
use mfomo::zoo::{SisGame, SisParams};
use mfomo::{MeanFieldFlow, MeanFieldGame, PolicySequence};

fn first_hit(trace: &[IterationRecord], level: f64) -> Option<f64> {
    trace
        .iter()
        .find(|r| r.normalized_exploitability.is_some_and(|e| e <= level))
        .map(|r| r.wall_time_s)
}

fn last_expl(trace: &[IterationRecord]) -> f64 {
    trace
        .iter()
        .rev()
        .find_map(|r| r.normalized_exploitability)
        .unwrap_or(f64::NAN)
}

fn main() -> mfomo::Result<()> {
    let budget: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10.0);
    let game = SisGame::new(SisParams {
        horizon: 50,
        ..SisParams::default()
    })?;
    let dims = game.dims();

    let cfg = SolverConfig {
        method: Method::Adam,
        // The default 0.01 settles at a non-equilibrium stationary point here.
        step: Some(StepRule::Constant { eta: 0.1 }),
        max_iters: usize::MAX,
        eval_every: 10,
        stopping: Stopping {
            wall_clock_budget: Some(budget),
            ..Stopping::default()
        },
        ..SolverConfig::default()
    };
    let theta0 = warm_start(&game, &MeanFieldFlow::uniform(dims))?;
    let mut adam = Vec::new();
    solve(&game, &theta0, &cfg, &mut adam)?;

    let mut rows = vec![("mfomo-adam".to_string(), adam)];
    for (label, method, lr) in [
        ("fp", BaselineMethod::FictitiousPlay, 0.1),
        ("omd-0.1", BaselineMethod::OnlineMirrorDescent, 0.1),
        ("omd-1", BaselineMethod::OnlineMirrorDescent, 1.0),
    ] {
        let bcfg = BaselineConfig {
            method,
            learning_rate: lr,
            max_iters: usize::MAX,
            wall_clock_budget: Some(budget),
            ..BaselineConfig::default()
        };
        let mut trace = Vec::new();
        run_baseline(&game, &PolicySequence::uniform(dims), &bcfg, &mut trace)?;
        rows.push((label.to_string(), trace));
    }

    println!(
        "{:<12} {:>8} {:>14} {:>14}",
        "method", "iters", "t(1e-2) [s]", "final expl"
    );
    for (label, trace) in &rows {
        let hit = first_hit(trace, 1e-2).map_or("never".to_string(), |t| format!("{t:.3}"));
        println!(
            "{:<12} {:>8} {:>14} {:>14.3e}",
            label,
            trace.len() - 1,
            hit,
            last_expl(trace)
        );
    }
    Ok(())
}
