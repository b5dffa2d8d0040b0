//! Solve a congregation game with projected gradient descent and check the
//! result.
//!
//! cargo run --release --example quickstart

use mfomo::formulation::{exploitability_bound_constant, extract_solution, warm_start};
use mfomo::optim::{pgd, IterationRecord, SolverConfig, StepRule};
use mfomo::zoo::{CongregationGame, CongregationParams};
use mfomo::{MeanFieldFlow, MeanFieldGame};

fn main() -> mfomo::Result<()> {
    let game = CongregationGame::new(CongregationParams::new(4, 6, vec![1.0, 0.8, 0.6, 0.4]))?;
    let dims = game.dims();
    println!(
        "S={} A={} T={} r_max={:.3}",
        dims.n_states,
        dims.n_actions,
        dims.horizon,
        game.r_max()
    );

    let theta0 = warm_start(&game, &MeanFieldFlow::uniform(dims))?;
    let cfg = SolverConfig {
        step: Some(StepRule::Armijo {
            initial: 1.0,
            shrink: 0.5,
        }),
        max_iters: 3000,
        eval_every: 250,
        ..SolverConfig::default()
    };
    let mut trace: Vec<IterationRecord> = Vec::new();
    let out = pgd(&game, &theta0, &cfg, &mut trace)?;
    for r in trace.iter().filter(|r| r.exploitability.is_some()) {
        println!(
            "iter {:>5}  f {:.3e}  expl {:.3e}",
            r.iter,
            r.objective.map_or(f64::NAN, |o| o.total),
            r.exploitability.unwrap()
        );
    }
    println!(
        "stopped after {} iterations: {:?}",
        out.iterations, out.stop_reason
    );

    let (pi, report) = extract_solution(&game, &out.theta, 1e-6)?;
    println!(
        "consistency residual {:.2e}, exploitability {:.2e}, nash: {}",
        report.consistency_residual, report.optimality_gap, report.is_nash
    );
    if let Some(lip) = game.lipschitz() {
        let f = out.final_objective.total;
        let c = exploitability_bound_constant(
            dims.n_states,
            dims.n_actions,
            dims.horizon,
            lip.transition,
            lip.reward,
            game.r_max(),
        );
        println!(
            "a priori bound from the objective: {:.2e}",
            c * f.sqrt() + f
        );
    }
    println!(
        "policy at t=0, state 0: {:?}",
        (0..dims.n_actions)
            .map(|a| pi.get(0, 0, a))
            .collect::<Vec<_>>()
    );
    Ok(())
}
