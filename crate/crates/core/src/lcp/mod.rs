//! Exact equilibria of linear-reward games by support enumeration.
//!
//! When the transitions ignore the flow and rewards are linear in it, the
//! equilibrium conditions are the linear complementarity problem
//!
//! ```text
//! A L = b,  Aᵀy + z = c̄ + C̄ L,  L ≥ 0,  z ≥ 0,  zᵀL = 0.
//! ```
//!
//! For each candidate support `D` of `L` (with `z` vanishing on `D`) the
//! remaining conditions are linear, so a feasibility LP decides whether an
//! equilibrium with that support exists.

pub mod simplex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formulation::{build_system, ThetaPoint};
use crate::game::MeanFieldGame;
use crate::types::{Dims, MeanFieldFlow};
use simplex::{simplex_lp, LpProblem, LpStatus};

/// Default bound on `SA(T+1)`; the enumeration visits up to `2^{SA(T+1)}`
/// supports.
pub const DEFAULT_MAX_DIM: usize = 20;

/// The data `(A, b, c̄, C̄)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LcpSystem {
    pub dims: Dims,
    /// Dense `A` rows.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c_bar: Vec<f64>,
    /// Row-major `n×n`, block diagonal over time.
    pub c_mat: Vec<Vec<f64>>,
}

impl LcpSystem {
    /// `c̄ + C̄ L`
    pub fn cost(&self, l: &[f64]) -> Vec<f64> {
        self.c_bar
            .iter()
            .zip(&self.c_mat)
            .map(|(c, row)| c + row.iter().zip(l).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

/// Builds the complementarity data. Fails unless the game has flow-independent
/// dynamics and linear rewards.
pub fn assemble_lcp<G: MeanFieldGame + ?Sized>(game: &G) -> Result<LcpSystem> {
    let dims = game.dims();
    let linear = match (
        game.mean_field_independent_dynamics(),
        game.linear_rewards(),
    ) {
        (true, Some(lin)) => lin,
        _ => {
            return Err(Error::Unsupported(format!(
                "game `{}` is not a linear complementarity problem: it needs flow-independent \
                 transitions and linear rewards",
                game.name()
            )))
        }
    };
    let sys = build_system(game, &MeanFieldFlow::uniform(dims));
    let (sa, n) = (dims.sa(), dims.flow_len());
    let mut c_bar = Vec::with_capacity(n);
    let mut c_mat = vec![vec![0.0; n]; n];
    for t in 0..dims.n_times() {
        for j in 0..sa {
            c_bar.push(-linear.base[t][j]);
            for k in 0..sa {
                c_mat[t * sa + j][t * sa + k] = -linear.coupling[t][j * sa + k];
            }
        }
    }
    Ok(LcpSystem {
        dims,
        a: sys.matrix(),
        b: sys.b,
        c_bar,
        c_mat,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnumerationOptions {
    /// Largest `SA(T+1)` accepted.
    pub max_dim: usize,
    /// Solutions whose flows agree to this sup-norm distance are merged.
    pub dedupe_tol: f64,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            max_dim: DEFAULT_MAX_DIM,
            dedupe_tol: 1e-8,
        }
    }
}

/// Every equilibrium found by support enumeration, as raw LP points
/// `(y, z, L)`, deduplicated on `L`. Supports are visited in increasing mask
/// order so the output order is deterministic.
pub fn solve_by_enumeration<G: MeanFieldGame + ?Sized>(
    game: &G,
    opts: EnumerationOptions,
) -> Result<Vec<ThetaPoint>> {
    let lcp = assemble_lcp(game)?;
    let dims = lcp.dims;
    let n = dims.flow_len();
    if n > opts.max_dim {
        return Err(Error::Unsupported(format!(
            "support enumeration over {n} flow entries exceeds the limit of {}; \
             use one of the gradient-based solvers instead",
            opts.max_dim
        )));
    }
    let found: Vec<ThetaPoint> = (1u64..(1u64 << n))
        .into_par_iter()
        .filter(|&mask| every_slice_supported(dims, mask))
        .map(|mask| solve_support(&lcp, mask))
        .collect::<Result<Vec<Option<ThetaPoint>>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut unique: Vec<ThetaPoint> = Vec::new();
    for theta in found {
        let duplicate = unique.iter().any(|u| {
            u.l.iter()
                .zip(&theta.l)
                .all(|(a, b)| (a - b).abs() <= opts.dedupe_tol)
        });
        if !duplicate {
            unique.push(theta);
        }
    }
    Ok(unique)
}

/// Each `L_t` sums to one, so every time slice needs a nonempty support.
fn every_slice_supported(dims: Dims, mask: u64) -> bool {
    let sa = dims.sa();
    let slice_mask = (1u64 << sa) - 1;
    (0..dims.n_times()).all(|t| (mask >> (t * sa)) & slice_mask != 0)
}

fn solve_support(lcp: &LcpSystem, mask: u64) -> Result<Option<ThetaPoint>> {
    let dims = lcp.dims;
    let (m, n) = (dims.value_len(), dims.flow_len());
    let support: Vec<usize> = (0..n).filter(|&k| mask >> k & 1 == 1).collect();
    let free: Vec<usize> = (0..n).filter(|&k| mask >> k & 1 == 0).collect();
    // Columns: y⁺ (m), y⁻ (m), L_D, z_{Dᶜ}.
    let n_var = 2 * m + support.len() + free.len();
    let mut rows = Vec::with_capacity(m + n);
    let mut rhs = Vec::with_capacity(m + n);
    for (i, a_row) in lcp.a.iter().enumerate() {
        let mut row = vec![0.0; n_var];
        for (pos, &k) in support.iter().enumerate() {
            row[2 * m + pos] = a_row[k];
        }
        rows.push(row);
        rhs.push(lcp.b[i]);
    }
    for j in 0..n {
        let mut row = vec![0.0; n_var];
        for i in 0..m {
            row[i] = lcp.a[i][j];
            row[m + i] = -lcp.a[i][j];
        }
        for (pos, &k) in support.iter().enumerate() {
            row[2 * m + pos] = -lcp.c_mat[j][k];
        }
        if let Ok(pos) = free.binary_search(&j) {
            row[2 * m + support.len() + pos] = 1.0;
        }
        rows.push(row);
        rhs.push(lcp.c_bar[j]);
    }
    let sol = simplex_lp(&LpProblem::new(vec![0.0; n_var], rows, rhs))?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let x = &sol.x;
    let y: Vec<f64> = (0..m).map(|i| x[i] - x[m + i]).collect();
    let mut l = vec![0.0; n];
    for (pos, &k) in support.iter().enumerate() {
        l[k] = x[2 * m + pos].max(0.0);
    }
    let mut z = vec![0.0; n];
    for (pos, &k) in free.iter().enumerate() {
        z[k] = x[2 * m + support.len() + pos].max(0.0);
    }
    ThetaPoint::new(dims, y, z, l).map(Some)
}
