//! The objective as a sum of `S(T+1)(2A+1)` scalar terms.
//!
//! Term order: `S` initial-distribution residuals, `S·T` flow residuals
//! (time major), `SA(T+1)` Bellman residuals, `SA(T+1)` complementarity
//! products. The first three kinds enter squared.

use super::{ObjectiveBreakdown, ThetaPoint};
use crate::error::{Error, Result};
use crate::game::{clamp_slice, finite_difference_jacobian, MeanFieldGame};
use crate::types::Dims;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    Init { s: usize },
    Flow { t: usize, next: usize },
    Bellman { t: usize, j: usize },
    Complementarity { t: usize, j: usize },
}

impl TermKind {
    pub fn of_index(dims: Dims, i: usize) -> Self {
        let (s_n, sa) = (dims.n_states, dims.sa());
        let n_flow = s_n * dims.horizon;
        let n_slots = sa * dims.n_times();
        if i < s_n {
            TermKind::Init { s: i }
        } else if i < s_n + n_flow {
            let k = i - s_n;
            TermKind::Flow {
                t: k / s_n,
                next: k % s_n,
            }
        } else if i < s_n + n_flow + n_slots {
            let k = i - s_n - n_flow;
            TermKind::Bellman {
                t: k / sa,
                j: k % sa,
            }
        } else {
            let k = i - s_n - n_flow - n_slots;
            assert!(k < n_slots, "term index {i} out of range");
            TermKind::Complementarity {
                t: k / sa,
                j: k % sa,
            }
        }
    }

    /// Time slice whose game evaluations the term depends on.
    pub fn time(&self) -> Option<usize> {
        match *self {
            TermKind::Flow { t, .. } | TermKind::Bellman { t, .. } => Some(t),
            _ => None,
        }
    }
}

/// `S(T+1)(2A+1)`
pub fn term_count(dims: Dims) -> usize {
    dims.n_states * dims.n_times() * (2 * dims.n_actions + 1)
}

/// How Jacobians of the game are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GradientOptions {
    /// Fall back to central differences when the game has no analytic
    /// Jacobian. When `false` such games are rejected.
    pub allow_finite_differences: bool,
}

impl Default for GradientOptions {
    fn default() -> Self {
        Self {
            allow_finite_differences: true,
        }
    }
}

/// Game evaluations at one time slice plus products reused by many terms.
pub(crate) struct SliceEval {
    /// `p_t`, absent at `t = T`.
    p: Option<Vec<f64>>,
    r: Vec<f64>,
    /// `Σ_j L_t(j) p_t(·|j)`
    pushed: Vec<f64>,
    /// `Σ_{s'} p_t(s'|j) y_t(s')` per `j`.
    py: Vec<f64>,
    derivs: Option<SliceDerivs>,
}

struct SliceDerivs {
    /// `Σ_j L_t(j) ∂p_t(s'|j)/∂L_t(k)` at `s'·SA + k`; `None` if zero.
    l_dp: Option<Vec<f64>>,
    /// `Σ_{s'} ∂p_t(s'|j)/∂L_t(k) y_t(s')` at `j·SA + k`; `None` if zero.
    dp_y: Option<Vec<f64>>,
    /// `∂r_t(j)/∂L_t(k)` at `j·SA + k`; `None` if zero.
    dr: Option<Vec<f64>>,
}

pub(crate) struct TimeEvals {
    slices: Vec<Option<SliceEval>>,
}

impl TimeEvals {
    /// Evaluates every time slice.
    pub fn new<G: MeanFieldGame + ?Sized>(game: &G, theta: &ThetaPoint, derivs: bool) -> Self {
        Self::with_options(game, theta, derivs, GradientOptions::default())
            .expect("finite-difference fallback is enabled")
    }

    pub fn with_options<G: MeanFieldGame + ?Sized>(
        game: &G,
        theta: &ThetaPoint,
        derivs: bool,
        opts: GradientOptions,
    ) -> Result<Self> {
        let all = vec![true; theta.dims.n_times()];
        Self::for_times(game, theta, &all, derivs, opts)
    }

    /// Evaluates only the slices flagged in `needed`.
    pub fn for_times<G: MeanFieldGame + ?Sized>(
        game: &G,
        theta: &ThetaPoint,
        needed: &[bool],
        derivs: bool,
        opts: GradientOptions,
    ) -> Result<Self> {
        let slices = needed
            .iter()
            .enumerate()
            .map(|(t, &need)| {
                if need {
                    eval_slice(game, theta, t, derivs, opts).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { slices })
    }

    fn at(&self, t: usize) -> &SliceEval {
        self.slices[t]
            .as_ref()
            .unwrap_or_else(|| panic!("time slice {t} was not evaluated"))
    }
}

fn eval_slice<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta: &ThetaPoint,
    t: usize,
    derivs: bool,
    opts: GradientOptions,
) -> Result<SliceEval> {
    let dims = theta.dims;
    let (s_n, sa) = (dims.n_states, dims.sa());
    let l_t = clamp_slice(&theta.l[t * sa..(t + 1) * sa]);
    let raw_l = &theta.l[t * sa..(t + 1) * sa];
    let has_next = t < dims.horizon;
    let p = has_next.then(|| game.transition(t, &l_t));
    let r = game.reward(t, &l_t);
    let y_t = has_next.then(|| &theta.y[t * s_n..(t + 1) * s_n]);

    let mut pushed = vec![0.0; s_n];
    let mut py = vec![0.0; sa];
    if let (Some(p), Some(y_t)) = (&p, y_t) {
        for (j, col) in p.chunks(s_n).enumerate() {
            for (next, &prob) in col.iter().enumerate() {
                pushed[next] += raw_l[j] * prob;
            }
            py[j] = col.iter().zip(y_t).map(|(a, b)| a * b).sum();
        }
    }

    let derivs = if derivs {
        let dp = if has_next && !game.mean_field_independent_dynamics() {
            Some(match game.transition_jacobian(t, &l_t) {
                Some(j) => j,
                None => fallback(opts, game.name(), || {
                    finite_difference_jacobian(&l_t, |l| game.transition(t, l))
                })?,
            })
        } else {
            None
        };
        let dr = match game.linear_rewards() {
            Some(lin) => Some(lin.coupling[t].clone()),
            None => match game.reward_jacobian(t, &l_t) {
                Some(j) => Some(j),
                None => Some(fallback(opts, game.name(), || {
                    finite_difference_jacobian(&l_t, |l| game.reward(t, l))
                })?),
            },
        };
        let (l_dp, dp_y) = match (&dp, y_t) {
            (Some(dp), Some(y_t)) => {
                let mut l_dp = vec![0.0; s_n * sa];
                let mut dp_y = vec![0.0; sa * sa];
                for j in 0..sa {
                    for next in 0..s_n {
                        let row = &dp[(next + s_n * j) * sa..(next + s_n * j + 1) * sa];
                        let (lj, yn) = (raw_l[j], y_t[next]);
                        let dst = &mut l_dp[next * sa..(next + 1) * sa];
                        dst.iter_mut().zip(row).for_each(|(o, d)| *o += lj * d);
                        let dst = &mut dp_y[j * sa..(j + 1) * sa];
                        dst.iter_mut().zip(row).for_each(|(o, d)| *o += yn * d);
                    }
                }
                (Some(l_dp), Some(dp_y))
            }
            _ => (None, None),
        };
        Some(SliceDerivs { l_dp, dp_y, dr })
    } else {
        None
    };
    Ok(SliceEval {
        p,
        r,
        pushed,
        py,
        derivs,
    })
}

fn fallback(opts: GradientOptions, name: &str, fd: impl FnOnce() -> Vec<f64>) -> Result<Vec<f64>> {
    if opts.allow_finite_differences {
        Ok(fd())
    } else {
        Err(Error::Config(format!(
            "game `{name}` has no analytic Jacobian and finite differences are disabled"
        )))
    }
}

fn marginal_at(dims: Dims, slice: &[f64], s: usize) -> f64 {
    (0..dims.n_actions).map(|a| slice[dims.idx(s, a)]).sum()
}

/// Value of a residual term (before squaring) or of a complementarity
/// product.
fn term_value(theta: &ThetaPoint, mu0: &[f64], evals: &TimeEvals, kind: TermKind) -> f64 {
    let dims = theta.dims;
    let (s_n, sa) = (dims.n_states, dims.sa());
    match kind {
        TermKind::Init { s } => marginal_at(dims, &theta.l[..sa], s) - mu0[s],
        TermKind::Flow { t, next } => {
            let l_next = &theta.l[(t + 1) * sa..(t + 2) * sa];
            marginal_at(dims, l_next, next) - evals.at(t).pushed[next]
        }
        TermKind::Bellman { t, j } => {
            let ev = evals.at(t);
            let s = j % s_n;
            let mut g = ev.py[j] + theta.z[t * sa + j] + ev.r[j];
            if t == 0 {
                g += theta.y[dims.horizon * s_n + s];
            }
            if t >= 1 {
                g -= theta.y[(t - 1) * s_n + s];
            }
            g
        }
        TermKind::Complementarity { t, j } => theta.z[t * sa + j] * theta.l[t * sa + j],
    }
}

pub(crate) fn objective_from_evals<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta: &ThetaPoint,
    evals: &TimeEvals,
) -> ObjectiveBreakdown {
    let dims = theta.dims;
    let mu0 = game.initial_distribution();
    let (mut consistency, mut bellman, mut comp) = (0.0, 0.0, 0.0);
    for i in 0..term_count(dims) {
        let kind = TermKind::of_index(dims, i);
        let v = term_value(theta, mu0, evals, kind);
        match kind {
            TermKind::Init { .. } | TermKind::Flow { .. } => consistency += v * v,
            TermKind::Bellman { .. } => bellman += v * v,
            TermKind::Complementarity { .. } => comp += v,
        }
    }
    ObjectiveBreakdown::from_terms(consistency, bellman, comp)
}

/// Adds `Σ w_i ∇f_i(θ)` into `grad`, visiting terms in the given order.
pub(crate) fn accumulate_term_gradients<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta: &ThetaPoint,
    evals: &TimeEvals,
    weighted: impl IntoIterator<Item = (usize, f64)>,
    grad: &mut ThetaPoint,
) {
    let dims = theta.dims;
    let (s_n, sa, na) = (dims.n_states, dims.sa(), dims.n_actions);
    let mu0 = game.initial_distribution();
    for (i, w) in weighted {
        let kind = TermKind::of_index(dims, i);
        let v = term_value(theta, mu0, evals, kind);
        match kind {
            TermKind::Init { s } => {
                for a in 0..na {
                    grad.l[dims.idx(s, a)] += w * 2.0 * v;
                }
            }
            TermKind::Flow { t, next } => {
                let c = w * 2.0 * v;
                for a in 0..na {
                    grad.l[(t + 1) * sa + dims.idx(next, a)] += c;
                }
                let ev = evals.at(t);
                let p = ev.p.as_ref().expect("flow terms live at t < T");
                let l_dp = ev.derivs.as_ref().and_then(|d| d.l_dp.as_ref());
                let dst = &mut grad.l[t * sa..(t + 1) * sa];
                for (k, o) in dst.iter_mut().enumerate() {
                    let mut d = p[next + s_n * k];
                    if let Some(l_dp) = l_dp {
                        d += l_dp[next * sa + k];
                    }
                    *o -= c * d;
                }
            }
            TermKind::Bellman { t, j } => {
                let c = w * 2.0 * v;
                let s = j % s_n;
                let ev = evals.at(t);
                if let Some(p) = &ev.p {
                    let col = &p[s_n * j..s_n * (j + 1)];
                    let dst = &mut grad.y[t * s_n..(t + 1) * s_n];
                    dst.iter_mut().zip(col).for_each(|(o, pr)| *o += c * pr);
                }
                if t == 0 {
                    grad.y[dims.horizon * s_n + s] += c;
                }
                if t >= 1 {
                    grad.y[(t - 1) * s_n + s] -= c;
                }
                grad.z[t * sa + j] += c;
                let derivs = ev
                    .derivs
                    .as_ref()
                    .expect("gradient needs derivative evaluations");
                let dst = &mut grad.l[t * sa..(t + 1) * sa];
                if let Some(dp_y) = &derivs.dp_y {
                    let row = &dp_y[j * sa..(j + 1) * sa];
                    dst.iter_mut().zip(row).for_each(|(o, d)| *o += c * d);
                }
                if let Some(dr) = &derivs.dr {
                    let row = &dr[j * sa..(j + 1) * sa];
                    dst.iter_mut().zip(row).for_each(|(o, d)| *o += c * d);
                }
            }
            TermKind::Complementarity { t, j } => {
                let k = t * sa + j;
                grad.z[k] += w * theta.l[k];
                grad.l[k] += w * theta.z[k];
            }
        }
    }
}
