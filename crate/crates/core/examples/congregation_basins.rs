//! Basins of attraction of the three gathering equilibria of a five-location
//! congregation game: NAdam started in an ε-neighborhood of each equilibrium.
//!
//! cargo run --release --example congregation_basins -- [epsilon] [seeds]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mfomo::bench::{
    run_experiment, Classification, ExperimentConfig, InitSpec, ReferenceSpec, SolverSpec,
};
use mfomo::io::GameSpec;
use mfomo::optim::{Method, SolverConfig};
use mfomo::zoo::CongregationParams;

fn main() -> mfomo::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epsilon: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let n_seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);

    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    let horizon = 10;
    let mut params = CongregationParams::new(
        5,
        horizon,
        vec![1.5, 1.5, 1.5, rng.gen::<f64>(), rng.gen::<f64>()],
    );
    params.noise = (1..horizon).map(|_| rng.gen::<f64>()).collect();

    let solver = SolverConfig {
        method: Method::Nadam,
        max_iters: 400,
        eval_every: 400,
        ..SolverConfig::default()
    };
    let cfg = ExperimentConfig {
        game: GameSpec::Congregation(params),
        solvers: vec![SolverSpec::Mfomo {
            label: "nadam".into(),
            config: solver,
        }],
        seeds: (0..n_seeds).collect(),
        inits: (0..3)
            .map(|reference| InitSpec::NearReference { reference, epsilon })
            .collect(),
        ne_references: (0..3)
            .map(|location| ReferenceSpec::Congregation { location })
            .collect(),
        classification: Classification::default(),
        output_dir: "congregation_basins".into(),
        save_checkpoints: false,
    };
    let summary = run_experiment(&cfg)?;
    println!("{:<16} {:>6} {:>6} {:>6}", "init", "p0", "p1", "p2");
    for cell in &summary.cells {
        println!(
            "{:<16} {:>6.2} {:>6.2} {:>6.2}",
            cell.init,
            cell.p0,
            cell.p1.unwrap_or(f64::NAN),
            cell.p2.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
