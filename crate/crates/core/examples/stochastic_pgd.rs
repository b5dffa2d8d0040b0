//! Stochastic PGD with minibatches of objective terms, at several batch sizes.
//!
//! cargo run --release --example stochastic_pgd

use mfomo::formulation::{term_count, warm_start};
use mfomo::optim::{spgd, Method, NullSink, SolverConfig, StepRule};
use mfomo::zoo::{CongregationGame, CongregationParams};
use mfomo::{MeanFieldFlow, MeanFieldGame};

fn main() -> mfomo::Result<()> {
    let game = CongregationGame::new(CongregationParams::new(4, 6, vec![1.0, 0.8, 0.6, 0.4]))?;
    let theta0 = warm_start(&game, &MeanFieldFlow::uniform(game.dims()))?;
    let n = term_count(game.dims());
    println!("{n} objective terms");
    for batch in [n / 20, n / 5, n] {
        let cfg = SolverConfig {
            method: Method::Spgd,
            batch_size: Some(batch.max(1)),
            // The default diminishing schedule is too aggressive for this game.
            step: Some(StepRule::Constant { eta: 0.01 }),
            max_iters: 2000,
            seed: 7,
            ..SolverConfig::default()
        };
        let out = spgd(&game, &theta0, &cfg, &mut NullSink)?;
        println!(
            "batch {:>5}: f {:.3e}, exploitability {:.3e} -> {:.3e}",
            batch, out.final_objective.total, out.initial_exploitability, out.final_exploitability
        );
    }
    Ok(())
}
