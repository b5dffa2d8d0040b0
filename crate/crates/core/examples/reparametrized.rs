//! Adam on unconstrained variables mapped onto the feasible set, next to
//! projected Adam from the same start.
//!
//! cargo run --release --example reparametrized

use mfomo::formulation::warm_start;
use mfomo::optim::{solve, Method, NullSink, SolverConfig, StepRule};
use mfomo::zoo::{CongregationGame, CongregationParams};
use mfomo::{MeanFieldFlow, MeanFieldGame};

fn main() -> mfomo::Result<()> {
    let game = CongregationGame::new(CongregationParams::new(3, 8, vec![1.0, 1.0, 0.5]))?;
    let theta0 = warm_start(&game, &MeanFieldFlow::uniform(game.dims()))?;
    for reparametrized in [false, true] {
        let cfg = SolverConfig {
            method: Method::Adam,
            reparametrized,
            step: Some(StepRule::Constant { eta: 0.05 }),
            max_iters: 2000,
            ..SolverConfig::default()
        };
        let out = solve(&game, &theta0, &cfg, &mut NullSink)?;
        println!(
            "{:<14} f {:.3e}  exploitability {:.3e} -> {:.3e}",
            if reparametrized {
                "reparametrized"
            } else {
                "projected"
            },
            out.final_objective.total,
            out.initial_exploitability,
            out.final_exploitability
        );
    }
    Ok(())
}
