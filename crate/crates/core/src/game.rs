//! Mean-field game interface and the quantities defined on top of it.

use crate::error::Result;
use crate::mdp::{self, FiniteMdp};
use crate::types::{Dims, MeanFieldFlow, PolicySequence};

/// Entries of `L_t` are clamped into this neighborhood of the simplex before
/// a game is evaluated.
pub const SIMPLEX_SLACK: f64 = 1e-9;

/// Exploitability values above `-EXPL_CLAMP` are reported as nonnegative.
pub const EXPL_CLAMP: f64 = 1e-10;

/// Rewards of the form `r_t(s,a,L_t) = r̄_{s,a,t} + L_tᵀ R̄_{s,a,t}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRewards {
    /// `T+1` column-major `S×A` matrices of `r̄`.
    pub base: Vec<Vec<f64>>,
    /// `T+1` row-major `SA×SA` matrices; row `j = s + S·a` is `R̄_{s,a,t}`.
    pub coupling: Vec<Vec<f64>>,
}

impl LinearRewards {
    pub fn evaluate(&self, dims: Dims, t: usize, l_t: &[f64]) -> Vec<f64> {
        let sa = dims.sa();
        (0..sa)
            .map(|j| {
                let row = &self.coupling[t][j * sa..(j + 1) * sa];
                self.base[t][j] + row.iter().zip(l_t).map(|(r, l)| r * l).sum::<f64>()
            })
            .collect()
    }
}

/// Lipschitz constants of the dynamics and rewards in `L_t`, with respect to
/// `‖·‖₁` on the flow and `‖·‖∞,1` / `‖·‖∞` on the outputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lipschitz {
    pub transition: f64,
    pub reward: f64,
}

/// A discrete-time, finite-horizon mean-field game.
///
/// Implementations must be pure: evaluation may happen concurrently from many
/// threads. Inputs `l_t` may lie slightly outside the simplex (entries within
/// [`SIMPLEX_SLACK`] of `[0, 1]`).
pub trait MeanFieldGame: Send + Sync {
    fn dims(&self) -> Dims;

    fn initial_distribution(&self) -> &[f64];

    /// Transition tensor `p(s'|s,a)` at time `t < T`, indexed by [`Dims::p_idx`].
    fn transition(&self, t: usize, l_t: &[f64]) -> Vec<f64>;

    /// Column-major `S×A` reward matrix at time `t ≤ T`.
    fn reward(&self, t: usize, l_t: &[f64]) -> Vec<f64>;

    /// `∂p(s'|j)/∂L_t(k)` stored at `(s' + S·j)·SA + k`.
    fn transition_jacobian(&self, _t: usize, _l_t: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// `∂r(j)/∂L_t(k)` stored row-major at `j·SA + k`.
    fn reward_jacobian(&self, _t: usize, _l_t: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Bound on `|r_t(s,a,L)|` over the simplex.
    fn r_max(&self) -> f64;

    /// Whether the transitions ignore the mean field.
    fn mean_field_independent_dynamics(&self) -> bool {
        false
    }

    fn linear_rewards(&self) -> Option<&LinearRewards> {
        None
    }

    fn lipschitz(&self) -> Option<Lipschitz> {
        None
    }

    fn name(&self) -> &str {
        "game"
    }
}

pub(crate) fn clamp_slice(l_t: &[f64]) -> Vec<f64> {
    l_t.iter()
        .map(|x| x.clamp(-SIMPLEX_SLACK, 1.0 + SIMPLEX_SLACK))
        .collect()
}

fn fd_step(l_t: &[f64]) -> f64 {
    1e-6 * l_t.iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

/// Central finite differences of a vector-valued map of `L_t`, laid out like
/// the analytic Jacobians (output index major).
pub fn finite_difference_jacobian(l_t: &[f64], f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let h = fd_step(l_t);
    let sa = l_t.len();
    let mut probe = l_t.to_vec();
    let mut columns = Vec::with_capacity(sa);
    for k in 0..sa {
        probe[k] = l_t[k] + h;
        let up = f(&probe);
        probe[k] = l_t[k] - h;
        let down = f(&probe);
        probe[k] = l_t[k];
        columns.push(
            up.iter()
                .zip(&down)
                .map(|(u, d)| (u - d) / (2.0 * h))
                .collect::<Vec<f64>>(),
        );
    }
    let n_out = columns.first().map_or(0, Vec::len);
    let mut jac = vec![0.0; n_out * sa];
    for (k, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            jac[i * sa + k] = *v;
        }
    }
    jac
}

/// Analytic transition Jacobian, or central differences when the game has
/// none.
pub fn transition_jacobian_or_fd<G: MeanFieldGame + ?Sized>(
    game: &G,
    t: usize,
    l_t: &[f64],
) -> Vec<f64> {
    game.transition_jacobian(t, l_t)
        .unwrap_or_else(|| finite_difference_jacobian(l_t, |l| game.transition(t, l)))
}

pub fn reward_jacobian_or_fd<G: MeanFieldGame + ?Sized>(
    game: &G,
    t: usize,
    l_t: &[f64],
) -> Vec<f64> {
    game.reward_jacobian(t, l_t)
        .unwrap_or_else(|| finite_difference_jacobian(l_t, |l| game.reward(t, l)))
}

/// Materializes the MDP `𝓜(L)` faced by a single agent when the population
/// follows `flow`.
pub fn induced_mdp<G: MeanFieldGame + ?Sized>(game: &G, flow: &MeanFieldFlow) -> Result<FiniteMdp> {
    let dims = game.dims();
    let transitions = (0..dims.horizon)
        .map(|t| game.transition(t, &clamp_slice(flow.slice(t))))
        .collect();
    let rewards = (0..dims.n_times())
        .map(|t| game.reward(t, &clamp_slice(flow.slice(t))))
        .collect();
    FiniteMdp::new(
        dims,
        game.initial_distribution().to_vec(),
        transitions,
        rewards,
    )
    .map_err(|e| crate::Error::Model(format!("{}: {e}", game.name())))
}

/// The flow `Γ(π)` generated when the whole population plays `pi`; the
/// transitions at each step are evaluated at the flow being built.
pub fn propagate_flow<G: MeanFieldGame + ?Sized>(game: &G, pi: &PolicySequence) -> MeanFieldFlow {
    let dims = game.dims();
    let mut flow = MeanFieldFlow::zeros(dims);
    let mut marginal = game.initial_distribution().to_vec();
    for t in 0..dims.n_times() {
        let pit = pi.slice(t);
        {
            let lt = flow.slice_mut(t);
            for a in 0..dims.n_actions {
                for s in 0..dims.n_states {
                    let j = dims.idx(s, a);
                    lt[j] = marginal[s] * pit[j];
                }
            }
        }
        if t < dims.horizon {
            let p = game.transition(t, &clamp_slice(flow.slice(t)));
            marginal = mdp::push_forward(dims, flow.slice(t), &p);
        }
    }
    flow
}

/// Exploitability and its two ingredients, evaluated at `Γ(π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExploitabilityReport {
    pub exploitability: f64,
    pub optimal_value: f64,
    pub policy_value: f64,
    pub flow: MeanFieldFlow,
}

pub fn exploitability_report<G: MeanFieldGame + ?Sized>(
    game: &G,
    pi: &PolicySequence,
) -> Result<ExploitabilityReport> {
    let flow = propagate_flow(game, pi);
    let mdp = induced_mdp(game, &flow)?;
    let optimal_value = mdp::value_iteration(&mdp).initial_value(mdp.mu0());
    let policy_value = mdp::policy_evaluation(&mdp, pi)?.initial_value(mdp.mu0());
    let mut gap = optimal_value - policy_value;
    if gap < 0.0 && gap > -EXPL_CLAMP {
        gap = 0.0;
    }
    Ok(ExploitabilityReport {
        exploitability: gap,
        optimal_value,
        policy_value,
        flow,
    })
}

/// `Expl(π) = V⋆_{μ0}(Γ(π)) − V^π_{μ0}(Γ(π))`.
pub fn exploitability<G: MeanFieldGame + ?Sized>(game: &G, pi: &PolicySequence) -> Result<f64> {
    exploitability_report(game, pi).map(|r| r.exploitability)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NashReport {
    /// `Σ_t ‖Γ(π)_t − L_t‖₁`
    pub consistency_residual: f64,
    /// `Expl(π)`
    pub optimality_gap: f64,
    pub is_nash: bool,
}

/// Checks both equilibrium conditions for the pair `(π, L)`.
pub fn verify_nash<G: MeanFieldGame + ?Sized>(
    game: &G,
    pi: &PolicySequence,
    flow: &MeanFieldFlow,
    tol: f64,
) -> Result<NashReport> {
    let report = exploitability_report(game, pi)?;
    let consistency_residual = report.flow.l1_distance(flow);
    Ok(NashReport {
        consistency_residual,
        optimality_gap: report.exploitability,
        is_nash: consistency_residual <= tol && report.exploitability <= tol,
    })
}

/// `‖p‖∞,1 = max_{t<T, s, a} Σ_{s'} |p_t(s'|s,a)|` over a sequence of
/// transition tensors.
pub fn transition_norm(dims: Dims, p: &[Vec<f64>]) -> f64 {
    p.iter()
        .flat_map(|pt| pt.chunks(dims.n_states))
        .map(|col| col.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `‖x‖1,∞ = Σ_t max_{s,a} |x_t(s,a)|` over a sequence of `S×A` slices.
pub fn flow_norm(x: &[Vec<f64>]) -> f64 {
    x.iter()
        .map(|xt| xt.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .sum()
}

/// Both norms at once: `(‖p_diff‖∞,1, ‖x_diff‖1,∞)`.
pub fn flow_norms(dims: Dims, p_diff: &[Vec<f64>], x_diff: &[Vec<f64>]) -> (f64, f64) {
    (transition_norm(dims, p_diff), flow_norm(x_diff))
}

/// `Σ_t Σ_{s,a} (L¹_t − L²_t)(r_t(·,L¹_t) − r_t(·,L²_t))`. A positive value
/// shows the game is not weakly monotone.
pub fn weak_monotonicity_witness<G: MeanFieldGame + ?Sized>(
    game: &G,
    l1: &MeanFieldFlow,
    l2: &MeanFieldFlow,
) -> f64 {
    let dims = game.dims();
    (0..dims.n_times())
        .map(|t| {
            let (a, b) = (l1.slice(t), l2.slice(t));
            let ra = game.reward(t, &clamp_slice(a));
            let rb = game.reward(t, &clamp_slice(b));
            (0..dims.sa())
                .map(|j| (a[j] - b[j]) * (ra[j] - rb[j]))
                .sum::<f64>()
        })
        .sum()
}
