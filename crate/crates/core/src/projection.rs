//! Euclidean projections onto the feasible set `Θ`.
//!
//! `Θ` is the product of a ball for `y`, a capped nonnegative orthant for `z`
//! and one probability simplex per time slice of `L`. The radii are large
//! enough to contain the value/advantage point of any flow.

use serde::{Deserialize, Serialize};

use crate::formulation::ThetaPoint;
use crate::types::Dims;

/// Projection of `v` onto `{x ≥ 0, Σx = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    project_scaled_simplex(v, 1.0)
}

/// Projection onto `{x ≥ 0, Σx = mass}` by sorting.
pub fn project_scaled_simplex(v: &[f64], mass: f64) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - mass) / (i + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Projection onto `{x ≥ 0, Σx ≤ budget}`.
pub fn project_capped_nonneg(v: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    if budget <= 0.0 {
        return vec![0.0; v.len()];
    }
    project_scaled_simplex(v, budget)
}

/// Projection onto the Euclidean ball of the given radius.
pub fn project_l2_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let scale = radius / norm;
    v.iter().map(|x| x * scale).collect()
}

/// Radii of `Θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaBounds {
    /// `‖y‖₂ ≤ S(T+1)(T+2)·r_max/2`
    pub y_radius: f64,
    /// `Σz ≤ SA(T²+T+2)·r_max`
    pub z_budget: f64,
}

impl ThetaBounds {
    pub fn new(dims: Dims, r_max: f64) -> Self {
        let (s, a, t) = (
            dims.n_states as f64,
            dims.n_actions as f64,
            dims.horizon as f64,
        );
        Self {
            y_radius: s * (t + 1.0) * (t + 2.0) * r_max / 2.0,
            z_budget: s * a * (t * t + t + 2.0) * r_max,
        }
    }
}

pub fn project_theta(theta: &ThetaPoint, bounds: &ThetaBounds) -> ThetaPoint {
    let dims = theta.dims;
    let sa = dims.sa();
    let mut l = Vec::with_capacity(theta.l.len());
    for slice in theta.l.chunks(sa) {
        l.extend(project_simplex(slice));
    }
    ThetaPoint {
        dims,
        y: project_l2_ball(&theta.y, bounds.y_radius),
        z: project_capped_nonneg(&theta.z, bounds.z_budget),
        l,
    }
}

/// Membership in `Θ` up to `tol`.
pub fn is_feasible(theta: &ThetaPoint, bounds: &ThetaBounds, tol: f64) -> bool {
    let y_norm = theta.y.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !theta.is_finite() || y_norm > bounds.y_radius + tol {
        return false;
    }
    if theta.z.iter().any(|&x| x < -tol) || theta.z.iter().sum::<f64>() > bounds.z_budget + tol {
        return false;
    }
    theta.l.chunks(theta.dims.sa()).all(|slice| {
        slice.iter().all(|&x| x >= -tol) && (slice.iter().sum::<f64>() - 1.0).abs() <= tol
    })
}
