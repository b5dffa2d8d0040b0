//! Runs an experiment config, as the `mfomo run` command does, and prints the
//! per-cell summary.
//!
//! cargo run --release --example run_config -- crates/core/examples/configs/congregation_small.json

use mfomo::bench::{run_experiment, ExperimentConfig};

fn main() -> mfomo::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/examples/configs/congregation_small.json".into());
    let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    let summary = run_experiment(&cfg)?;
    for cell in &summary.cells {
        println!(
            "{:<8} {:<18} runs {:>3}  p0 {:.2}  p1 {}  p2 {}",
            cell.solver,
            cell.init,
            cell.runs,
            cell.p0,
            cell.p1.map_or("-".into(), |p| format!("{p:.2}")),
            cell.p2.map_or("-".into(), |p| format!("{p:.2}"))
        );
    }
    println!("results in {}", summary.output_dir.display());
    Ok(())
}
