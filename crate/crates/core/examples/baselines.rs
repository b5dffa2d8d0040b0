//! Fictitious play, online mirror descent and damped fixed-point iteration on
//! the SIS epidemic game.
//!
//! cargo run --release --example baselines -- [iterations]

use mfomo::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use mfomo::optim::NullSink;
use mfomo::zoo::{SisGame, SisParams};
use mfomo::{MeanFieldGame, PolicySequence};

fn main() -> mfomo::Result<()> {
    let iters: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(500);
    let game = SisGame::new(SisParams {
        horizon: 20,
        ..SisParams::default()
    })?;
    let pi0 = PolicySequence::uniform(game.dims());
    for method in [
        BaselineMethod::FictitiousPlay,
        BaselineMethod::OnlineMirrorDescent,
        BaselineMethod::DampedFixedPoint,
    ] {
        let cfg = BaselineConfig {
            max_iters: iters,
            ..BaselineConfig::new(method)
        };
        let out = run_baseline(&game, &pi0, &cfg, &mut NullSink)?;
        println!(
            "{:<22} exploitability {:.3e} -> {:.3e}",
            format!("{method:?}"),
            out.initial_exploitability,
            out.final_exploitability
        );
    }
    Ok(())
}
