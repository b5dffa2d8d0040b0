//! The occupation-measure optimization problem.
//!
//! For a fixed flow `L` the best-response problem of a single agent is the LP
//! `min c_Lᵀd  s.t.  A_L d = b, d ≥ 0`. Requiring `d = L` and folding the
//! KKT conditions of that LP into a penalty gives the objective
//!
//! ```text
//! f(y, z, L) = ‖A_L L − b‖² + ‖A_Lᵀ y + z − c_L‖² + zᵀL
//! ```
//!
//! minimized over the product set `Θ` (see [`crate::projection::ThetaBounds`]).
//! Its zeros are exactly the Nash equilibria of the game.
//!
//! `A_L` has `T+1` block rows of height `S` and `T+1` block columns of width
//! `S·A`. Block row `t < T` holds `W_t(L_t)` in column `t` and `−Z` in column
//! `t+1`, where row `l` of `W_t` is `p_t(l|·,·,L_t)` and `Z = [I_S … I_S]`. The
//! final block row is `[Z 0 … 0]`, matched by `b = [0, …, 0, μ0]`.

mod terms;

use serde::{Deserialize, Serialize};

pub(crate) use terms::{accumulate_term_gradients, TimeEvals};
pub use terms::{term_count, GradientOptions, TermKind};

use crate::error::{Error, Result};
use crate::game::{clamp_slice, induced_mdp, verify_nash, MeanFieldGame, NashReport};
use crate::mdp::{policy_from_occupation, value_iteration};
use crate::types::{Dims, MeanFieldFlow, PolicySequence};

/// A point `θ = (y, z, L)`. Also used for gradients and other vectors of the
/// same shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaPoint {
    pub dims: Dims,
    /// Length `S·(T+1)`, block `t` at `[t·S, (t+1)·S)`.
    pub y: Vec<f64>,
    /// Length `S·A·(T+1)`, flow layout.
    pub z: Vec<f64>,
    /// Length `S·A·(T+1)`, flow layout.
    pub l: Vec<f64>,
}

impl ThetaPoint {
    pub fn new(dims: Dims, y: Vec<f64>, z: Vec<f64>, l: Vec<f64>) -> Result<Self> {
        if y.len() != dims.value_len() || z.len() != dims.flow_len() || l.len() != dims.flow_len() {
            return Err(Error::Dimension(format!(
                "theta blocks have lengths ({}, {}, {}), expected ({}, {}, {})",
                y.len(),
                z.len(),
                l.len(),
                dims.value_len(),
                dims.flow_len(),
                dims.flow_len()
            )));
        }
        Ok(Self { dims, y, z, l })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            y: vec![0.0; dims.value_len()],
            z: vec![0.0; dims.flow_len()],
            l: vec![0.0; dims.flow_len()],
        }
    }

    /// `(y, z) = 0` with the given flow.
    pub fn from_flow(flow: &MeanFieldFlow) -> Self {
        let mut theta = Self::zeros(flow.dims);
        theta.l.copy_from_slice(&flow.data);
        theta
    }

    pub fn flow(&self) -> MeanFieldFlow {
        MeanFieldFlow {
            dims: self.dims,
            data: self.l.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len() + self.z.len() + self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenation `[y; z; L]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.y);
        v.extend_from_slice(&self.z);
        v.extend_from_slice(&self.l);
        v
    }

    pub fn from_vec(dims: Dims, v: &[f64]) -> Result<Self> {
        let (ny, nz) = (dims.value_len(), dims.flow_len());
        if v.len() != ny + 2 * nz {
            return Err(Error::Dimension(format!(
                "flat theta has {} entries, expected {}",
                v.len(),
                ny + 2 * nz
            )));
        }
        Ok(Self {
            dims,
            y: v[..ny].to_vec(),
            z: v[ny..ny + nz].to_vec(),
            l: v[ny + nz..].to_vec(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.y.iter().chain(&self.z).chain(&self.l)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.y
            .iter_mut()
            .chain(self.z.iter_mut())
            .chain(self.l.iter_mut())
    }

    /// `self + alpha·other`
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        let mut out = self.clone();
        out.iter_mut()
            .zip(other.iter())
            .for_each(|(a, b)| *a += alpha * b);
        out
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

/// The three penalty terms and their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// `‖A_L L − b‖²`
    pub consistency: f64,
    /// `‖A_Lᵀ y + z − c_L‖²`
    pub bellman: f64,
    /// `zᵀL`
    pub complementarity: f64,
    pub total: f64,
}

impl ObjectiveBreakdown {
    fn from_terms(consistency: f64, bellman: f64, complementarity: f64) -> Self {
        Self {
            consistency,
            bellman,
            complementarity,
            total: consistency + bellman + complementarity,
        }
    }
}

/// `A_L`, `b` and `c_L` for a fixed flow.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub dims: Dims,
    /// `W_t` for `t < T`, stored as the transition tensor `p_t(·|·,·,L_t)`
    /// (column-major `S×SA`).
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl LinearSystem {
    pub fn n_rows(&self) -> usize {
        self.dims.value_len()
    }

    pub fn n_cols(&self) -> usize {
        self.dims.flow_len()
    }

    /// Entry `(l, j)` of `W_t`.
    pub fn w_entry(&self, t: usize, l: usize, j: usize) -> f64 {
        self.w[t][l + self.dims.n_states * j]
    }

    /// Dense `A_L` as a list of rows.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let d = self.dims;
        let (s_n, sa) = (d.n_states, d.sa());
        let mut rows = vec![vec![0.0; self.n_cols()]; self.n_rows()];
        for t in 0..d.horizon {
            for l in 0..s_n {
                let row = &mut rows[t * s_n + l];
                for j in 0..sa {
                    row[t * sa + j] = self.w_entry(t, l, j);
                }
                for a in 0..d.n_actions {
                    row[(t + 1) * sa + d.idx(l, a)] = -1.0;
                }
            }
        }
        for s in 0..s_n {
            for a in 0..d.n_actions {
                rows[d.horizon * s_n + s][d.idx(s, a)] = 1.0;
            }
        }
        rows
    }

    /// `A_L x`, block by block.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dims;
        let (s_n, sa) = (d.n_states, d.sa());
        let mut out = vec![0.0; self.n_rows()];
        for t in 0..d.horizon {
            let xt = &x[t * sa..(t + 1) * sa];
            let next = z_apply(d, &x[(t + 1) * sa..(t + 2) * sa]);
            let block = &mut out[t * s_n..(t + 1) * s_n];
            for (j, col) in self.w[t].chunks(s_n).enumerate() {
                block.iter_mut().zip(col).for_each(|(o, p)| *o += p * xt[j]);
            }
            block.iter_mut().zip(&next).for_each(|(o, n)| *o -= n);
        }
        let first = z_apply(d, &x[..sa]);
        out[d.horizon * s_n..].copy_from_slice(&first);
        out
    }

    /// `A_Lᵀ y`, block by block.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dims;
        let (s_n, sa) = (d.n_states, d.sa());
        let mut out = vec![0.0; self.n_cols()];
        for t in 0..d.n_times() {
            let block = &mut out[t * sa..(t + 1) * sa];
            if t < d.horizon {
                let yt = &y[t * s_n..(t + 1) * s_n];
                for (j, col) in self.w[t].chunks(s_n).enumerate() {
                    block[j] += col.iter().zip(yt).map(|(p, v)| p * v).sum::<f64>();
                }
            }
            for a in 0..d.n_actions {
                for s in 0..s_n {
                    let j = d.idx(s, a);
                    if t == 0 {
                        block[j] += y[d.horizon * s_n + s];
                    }
                    if t >= 1 {
                        block[j] -= y[(t - 1) * s_n + s];
                    }
                }
            }
        }
        out
    }
}

/// `Z x` for one `S·A` slice: the state marginal.
pub fn z_apply(dims: Dims, x: &[f64]) -> Vec<f64> {
    crate::types::state_marginal(dims, x)
}

/// Assembles `A_L`, `b`, `c_L` at `flow`.
pub fn build_system<G: MeanFieldGame + ?Sized>(game: &G, flow: &MeanFieldFlow) -> LinearSystem {
    let dims = game.dims();
    let w = (0..dims.horizon)
        .map(|t| game.transition(t, &clamp_slice(flow.slice(t))))
        .collect();
    let c = (0..dims.n_times())
        .flat_map(|t| game.reward(t, &clamp_slice(flow.slice(t))))
        .map(|r| -r)
        .collect();
    let mut b = vec![0.0; dims.value_len()];
    b[dims.horizon * dims.n_states..].copy_from_slice(game.initial_distribution());
    LinearSystem { dims, w, b, c }
}

/// Objective via the time-decoupled expansion (no `A_L` is formed).
pub fn objective<G: MeanFieldGame + ?Sized>(game: &G, theta: &ThetaPoint) -> ObjectiveBreakdown {
    let evals = TimeEvals::new(game, theta, false);
    terms::objective_from_evals(game, theta, &evals)
}

/// Objective through the dense matrix form, used to cross-check
/// [`objective`].
pub fn objective_matrix_form<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta: &ThetaPoint,
) -> ObjectiveBreakdown {
    let sys = build_system(game, &theta.flow());
    let a = sys.matrix();
    let consistency = a
        .iter()
        .zip(&sys.b)
        .map(|(row, b)| {
            let r = row.iter().zip(&theta.l).map(|(x, l)| x * l).sum::<f64>() - b;
            r * r
        })
        .sum();
    let bellman = (0..sys.n_cols())
        .map(|j| {
            let aty: f64 = a.iter().zip(&theta.y).map(|(row, y)| row[j] * y).sum();
            let r = aty + theta.z[j] - sys.c[j];
            r * r
        })
        .sum();
    let complementarity = theta.z.iter().zip(&theta.l).map(|(z, l)| z * l).sum();
    ObjectiveBreakdown::from_terms(consistency, bellman, complementarity)
}

/// Full gradient, with finite-difference Jacobians when the game lacks
/// analytic ones.
pub fn gradient<G: MeanFieldGame + ?Sized>(game: &G, theta: &ThetaPoint) -> ThetaPoint {
    gradient_with(game, theta, GradientOptions::default())
        .expect("finite-difference fallback is enabled")
}

/// Full gradient and objective in one pass.
pub fn objective_and_gradient<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta: &ThetaPoint,
    opts: GradientOptions,
) -> Result<(ObjectiveBreakdown, ThetaPoint)> {
    let evals = TimeEvals::with_options(game, theta, true, opts)?;
    let obj = terms::objective_from_evals(game, theta, &evals);
    let mut grad = ThetaPoint::zeros(theta.dims);
    let n = term_count(theta.dims);
    accumulate_term_gradients(game, theta, &evals, (0..n).map(|i| (i, 1.0)), &mut grad);
    Ok((obj, grad))
}

pub fn gradient_with<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta: &ThetaPoint,
    opts: GradientOptions,
) -> Result<ThetaPoint> {
    objective_and_gradient(game, theta, opts).map(|(_, g)| g)
}

/// The value/advantage point `(ŷ, ẑ, L)` built from the MDP induced by `flow`:
/// `ŷ = [V_1, …, V_T, −V_0]`, `ẑ_t(s,a) = V_t(s) − r_t(s,a) − Σ_{s'} p_t(s'|s,a) V_{t+1}(s')`.
pub fn warm_start<G: MeanFieldGame + ?Sized>(game: &G, flow: &MeanFieldFlow) -> Result<ThetaPoint> {
    let dims = game.dims();
    let mdp = induced_mdp(game, flow)?;
    let vt = value_iteration(&mdp);
    let s_n = dims.n_states;
    let mut y = vec![0.0; dims.value_len()];
    for t in 1..dims.n_times() {
        y[(t - 1) * s_n..t * s_n].copy_from_slice(&vt.values[t]);
    }
    for (slot, v) in y[dims.horizon * s_n..].iter_mut().zip(&vt.values[0]) {
        *slot = -v;
    }
    let mut z = vec![0.0; dims.flow_len()];
    for t in 0..dims.n_times() {
        for a in 0..dims.n_actions {
            for s in 0..s_n {
                let j = dims.idx(s, a);
                z[t * dims.sa() + j] = vt.values[t][s] - vt.q[t][j];
            }
        }
    }
    Ok(ThetaPoint {
        dims,
        y,
        z,
        l: flow.data.clone(),
    })
}

/// Replaces `(y, z)` by the value/advantage pair of `𝓜(L)`, keeping `L`.
pub fn solution_modification<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta: &ThetaPoint,
) -> Result<ThetaPoint> {
    warm_start(game, &theta.flow())
}

/// Recovers `π ∈ Π(L)` and checks whether `(π, L)` is an equilibrium.
pub fn extract_solution<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta: &ThetaPoint,
    tol: f64,
) -> Result<(PolicySequence, NashReport)> {
    let flow = theta.flow();
    let pi = policy_from_occupation(&flow, None);
    let report = verify_nash(game, &pi, &flow, tol)?;
    Ok((pi, report))
}

/// Constant `f(S, A, T, C_P, C_r, r_max)` with `Expl(π) ≤ f·ε + ε²` whenever
/// the objective is at most `ε²`.
pub fn exploitability_bound_constant(
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    c_p: f64,
    c_r: f64,
    r_max: f64,
) -> f64 {
    let (s, a, t) = (n_states as f64, n_actions as f64, horizon as f64);
    let tail = s.powf(1.5) * a * (t + 2.0).powi(3) * r_max + (s * a * (t + 1.0)).sqrt() + t.sqrt();
    if c_p == 0.0 {
        return c_r * (t + 1.0) * (t + 2.0) * s.sqrt() + tail;
    }
    let growth = (c_p + 1.0).powi(horizon as i32 + 1) - 1.0;
    T4_CURVATURE(horizon + 2, c_p) * 2.0 * c_r * s.sqrt()
        + t * (t + 1.0) * r_max * growth * s.sqrt()
        + tail
}

/// `((1+c)^n − n·c − 1) / c²`, summed as `Σ_{k≥2} C(n,k) c^{k−2}` for small `c`
/// to avoid cancellation.
#[allow(non_snake_case)]
fn T4_CURVATURE(n: usize, c: f64) -> f64 {
    if c >= 1.0 {
        return ((1.0 + c).powi(n as i32) - n as f64 * c - 1.0) / (c * c);
    }
    let mut binom = n as f64 * (n as f64 - 1.0) / 2.0;
    let mut power = 1.0;
    let mut sum = 0.0;
    for k in 2..=n {
        sum += binom * power;
        binom *= (n - k) as f64 / (k + 1) as f64;
        power *= c;
    }
    sum
}
