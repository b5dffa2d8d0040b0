//! Support enumeration on the two-location coordination game, cross-checked
//! against a random-restart sweep of projected gradient descent.
//!
//! cargo run --release --example lcp_enumeration -- [restarts]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use mfomo::formulation::warm_start;
use mfomo::lcp::{solve_by_enumeration, EnumerationOptions};
use mfomo::optim::{pgd, NullSink, SolverConfig, StepRule, Stopping};
use mfomo::zoo::{coordination_game, CoordinationParams};
use mfomo::{MeanFieldFlow, MeanFieldGame};

fn main() -> mfomo::Result<()> {
    let restarts: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1000);
    let game = coordination_game(&CoordinationParams::default())?;
    let dims = game.dims();

    let start = std::time::Instant::now();
    let enumerated = solve_by_enumeration(&game, EnumerationOptions::default())?;
    println!(
        "enumeration: {} equilibria in {:.2?}",
        enumerated.len(),
        start.elapsed()
    );

    let cfg = SolverConfig {
        max_iters: 3000,
        eval_every: usize::MAX,
        step: Some(StepRule::Armijo {
            initial: 1.0,
            shrink: 0.5,
        }),
        stopping: Stopping {
            objective_tol: 1e-26,
            ..Stopping::default()
        },
        record_time: false,
        ..SolverConfig::default()
    };
    let start = std::time::Instant::now();
    let finals: Vec<(f64, Vec<f64>)> = (0..restarts)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut data = Vec::with_capacity(dims.flow_len());
            for _ in 0..dims.n_times() {
                data.extend(simplex_point(dims.sa(), &mut rng));
            }
            let flow = MeanFieldFlow::new(dims, data).expect("simplex sample");
            let theta0 = warm_start(&game, &flow).expect("warm start");
            let out = pgd(&game, &theta0, &cfg, &mut NullSink).expect("pgd run");
            (out.final_objective.total, out.theta.l)
        })
        .collect();
    println!("sweep: {restarts} restarts in {:.2?}", start.elapsed());

    let mut hits = vec![0usize; enumerated.len()];
    let (mut unconverged, mut unmatched) = (0, 0);
    for (f, l) in &finals {
        if *f > 1e-20 {
            unconverged += 1;
            continue;
        }
        let m = enumerated.iter().position(|e| {
            e.l.iter()
                .zip(l)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                <= 1e-6
        });
        match m {
            Some(i) => hits[i] += 1,
            None => unmatched += 1,
        }
    }
    println!("unconverged {unconverged}, converged but unmatched {unmatched}");
    for (i, (h, e)) in hits.iter().zip(&enumerated).enumerate() {
        if *h > 0 {
            println!("NE {i:>2} found {h:>5} times, L = {:.4?}", e.l);
        }
    }
    Ok(())
}

/// A uniform draw from the probability simplex.
fn simplex_point(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}
