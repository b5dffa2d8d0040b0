//! Sampling points of `Θ` and estimating the smoothness constant of the
//! objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::formulation::{gradient_with, GradientOptions, ThetaPoint};
use crate::game::MeanFieldGame;
use crate::projection::ThetaBounds;
use crate::types::Dims;

const SAFETY: f64 = 1.5;
const POWER_STEPS: usize = 12;
const PROBE: f64 = 1e-6;

/// Uniform draw from the simplex of dimension `n`.
fn dirichlet_one<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn sample_y_z<R: Rng>(dims: Dims, bounds: &ThetaBounds, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mut y: Vec<f64> = (0..dims.value_len())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let radius = bounds.y_radius * rng.gen::<f64>();
    if norm > 0.0 {
        y.iter_mut().for_each(|v| *v *= radius / norm);
    }
    let mass = bounds.z_budget * rng.gen::<f64>();
    let z = dirichlet_one(dims.flow_len(), rng)
        .into_iter()
        .map(|v| v * mass)
        .collect();
    (y, z)
}

/// A random point of `Θ` whose flow entries are all at least `0.1/(SA)`.
pub fn random_interior_theta<R: Rng>(dims: Dims, bounds: &ThetaBounds, rng: &mut R) -> ThetaPoint {
    let sa = dims.sa();
    let (y, z) = sample_y_z(dims, bounds, rng);
    let mut l = Vec::with_capacity(dims.flow_len());
    for _ in 0..dims.n_times() {
        l.extend(
            dirichlet_one(sa, rng)
                .into_iter()
                .map(|v| 0.9 * v + 0.1 / sa as f64),
        );
    }
    ThetaPoint { dims, y, z, l }
}

/// A random point of `Θ`; some flow entries may be exactly zero.
pub fn random_feasible_theta<R: Rng>(dims: Dims, bounds: &ThetaBounds, rng: &mut R) -> ThetaPoint {
    let sa = dims.sa();
    let (y, z) = sample_y_z(dims, bounds, rng);
    let mut l = Vec::with_capacity(dims.flow_len());
    for _ in 0..dims.n_times() {
        let mut slice = dirichlet_one(sa, rng);
        let keep = rng.gen_range(0..sa);
        for (k, v) in slice.iter_mut().enumerate() {
            if k != keep && rng.gen_bool(0.2) {
                *v = 0.0;
            }
        }
        let total: f64 = slice.iter().sum();
        l.extend(slice.into_iter().map(|v| v / total));
    }
    ThetaPoint { dims, y, z, l }
}

/// `M̂`: the largest gradient difference quotient seen over random pairs of
/// points and over a few power-iteration probes of the local curvature at
/// each sample, times a safety factor of 1.5.
pub fn estimate_smoothness<G: MeanFieldGame + ?Sized>(
    game: &G,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let dims = game.dims();
    let bounds = ThetaBounds::new(dims, game.r_max());
    let opts = GradientOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let mut best = 0.0f64;
    for _ in 0..n_samples.max(1) {
        let a = random_interior_theta(dims, &bounds, &mut rng);
        let b = random_interior_theta(dims, &bounds, &mut rng);
        let ga = gradient_with(game, &a, opts)?;
        let gb = gradient_with(game, &b, opts)?;
        let gap = a.distance(&b);
        if gap > 0.0 {
            best = best.max(ga.distance(&gb) / gap);
        }
        let mut dir = ThetaPoint::from_vec(
            dims,
            &(0..a.len())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect::<Vec<f64>>(),
        )?;
        for _ in 0..POWER_STEPS {
            let norm = dir.norm();
            if norm == 0.0 {
                break;
            }
            let probe = a.add_scaled(PROBE / norm, &dir);
            let gp = gradient_with(game, &probe, opts)?;
            let diff = gp.add_scaled(-1.0, &ga);
            best = best.max(diff.norm() / PROBE);
            dir = diff;
        }
    }
    Ok(SAFETY * best.max(1e-12))
}
