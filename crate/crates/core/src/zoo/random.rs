//! Seeded random games with smooth mean-field dependence.
//!
//! Rewards are `a_j + κ(b_jᵀL + q_j‖L‖²)` and transitions are a softmax over
//! next states of logits `u_{j,s'} + κ v_{j,s'}ᵀL`, with all coefficients
//! drawn uniformly. The knob `κ ∈ [0, 1]` scales the strength of the
//! interaction. Rewards stay within `[-1, 1]` on the simplex.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::{Lipschitz, MeanFieldGame};
use crate::types::Dims;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomGameParams {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub seed: u64,
    #[serde(default = "default_knob")]
    pub lipschitz_knob: f64,
    /// When false the transitions ignore the flow.
    #[serde(default = "default_true")]
    pub mean_field_dynamics: bool,
}

fn default_knob() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl RandomGameParams {
    pub fn new(n_states: usize, n_actions: usize, horizon: usize, seed: u64) -> Self {
        Self {
            n_states,
            n_actions,
            horizon,
            seed,
            lipschitz_knob: 1.0,
            mean_field_dynamics: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomGame {
    params: RandomGameParams,
    dims: Dims,
    mu0: Vec<f64>,
    /// Per `t`: `a` (SA), `b` (SA×SA row-major), `q` (SA).
    reward_a: Vec<Vec<f64>>,
    reward_b: Vec<Vec<f64>>,
    reward_q: Vec<Vec<f64>>,
    /// Per `t < T`: `u` (S·SA, transition layout) and `v` ((S·SA)×SA).
    logit_u: Vec<Vec<f64>>,
    logit_v: Vec<Vec<f64>>,
}

/// Draws a game from `params`. Panics on empty state or action spaces.
pub fn random_game(params: &RandomGameParams) -> RandomGame {
    let dims = Dims::new(params.n_states, params.n_actions, params.horizon);
    assert!(
        dims.sa() > 0,
        "random game needs nonempty state and action spaces"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let sa = dims.sa();
    let mut draw =
        |n: usize, half: f64| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-half..=half)).collect() };
    let mut reward_a = Vec::new();
    let mut reward_b = Vec::new();
    let mut reward_q = Vec::new();
    for _ in 0..dims.n_times() {
        reward_a.push(draw(sa, 0.4));
        reward_b.push(draw(sa * sa, 0.3));
        reward_q.push(draw(sa, 0.3));
    }
    let mut logit_u = Vec::new();
    let mut logit_v = Vec::new();
    for _ in 0..dims.horizon {
        logit_u.push(draw(dims.transition_len(), 1.0));
        logit_v.push(draw(dims.transition_len() * sa, 1.0));
    }
    let raw: Vec<f64> = draw(dims.n_states, 1.0).iter().map(|x| x.exp()).collect();
    let total: f64 = raw.iter().sum();
    let mu0 = raw.iter().map(|x| x / total).collect();
    RandomGame {
        params: params.clone(),
        dims,
        mu0,
        reward_a,
        reward_b,
        reward_q,
        logit_u,
        logit_v,
    }
}

impl RandomGame {
    pub fn params(&self) -> &RandomGameParams {
        &self.params
    }

    fn knob(&self) -> f64 {
        self.params.lipschitz_knob
    }

    fn logits(&self, t: usize, l_t: &[f64]) -> Vec<f64> {
        let sa = self.dims.sa();
        let k = if self.params.mean_field_dynamics {
            self.knob()
        } else {
            0.0
        };
        self.logit_u[t]
            .iter()
            .enumerate()
            .map(|(i, u)| {
                if k == 0.0 {
                    return *u;
                }
                let v = &self.logit_v[t][i * sa..(i + 1) * sa];
                u + k * v.iter().zip(l_t).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }
}

impl MeanFieldGame for RandomGame {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn initial_distribution(&self) -> &[f64] {
        &self.mu0
    }

    fn transition(&self, t: usize, l_t: &[f64]) -> Vec<f64> {
        let mut p = self.logits(t, l_t);
        for col in p.chunks_mut(self.dims.n_states) {
            let m = col.iter().cloned().fold(f64::MIN, f64::max);
            col.iter_mut().for_each(|x| *x = (*x - m).exp());
            let total: f64 = col.iter().sum();
            col.iter_mut().for_each(|x| *x /= total);
        }
        p
    }

    fn reward(&self, t: usize, l_t: &[f64]) -> Vec<f64> {
        let sa = self.dims.sa();
        let sq: f64 = l_t.iter().map(|x| x * x).sum();
        (0..sa)
            .map(|j| {
                let b = &self.reward_b[t][j * sa..(j + 1) * sa];
                let lin: f64 = b.iter().zip(l_t).map(|(x, y)| x * y).sum();
                self.reward_a[t][j] + self.knob() * (lin + self.reward_q[t][j] * sq)
            })
            .collect()
    }

    fn transition_jacobian(&self, t: usize, l_t: &[f64]) -> Option<Vec<f64>> {
        let d = self.dims;
        let (s_n, sa) = (d.n_states, d.sa());
        let mut jac = vec![0.0; d.transition_len() * sa];
        if !self.params.mean_field_dynamics || self.knob() == 0.0 {
            return Some(jac);
        }
        let k = self.knob();
        let p = self.transition(t, l_t);
        for j in 0..sa {
            let col = &p[j * s_n..(j + 1) * s_n];
            // Σ_{s''} p(s'') ∂ℓ(s'')/∂L_k
            let mut mean = vec![0.0; sa];
            for (next, pr) in col.iter().enumerate() {
                let v = &self.logit_v[t][(next + s_n * j) * sa..(next + s_n * j + 1) * sa];
                mean.iter_mut().zip(v).for_each(|(m, x)| *m += pr * k * x);
            }
            for (next, pr) in col.iter().enumerate() {
                let row = (next + s_n * j) * sa;
                let v = &self.logit_v[t][row..row + sa];
                for kk in 0..sa {
                    jac[row + kk] = pr * (k * v[kk] - mean[kk]);
                }
            }
        }
        Some(jac)
    }

    fn reward_jacobian(&self, t: usize, l_t: &[f64]) -> Option<Vec<f64>> {
        let sa = self.dims.sa();
        let k = self.knob();
        let mut jac = vec![0.0; sa * sa];
        for j in 0..sa {
            let b = &self.reward_b[t][j * sa..(j + 1) * sa];
            let q = self.reward_q[t][j];
            for kk in 0..sa {
                jac[j * sa + kk] = k * (b[kk] + 2.0 * q * l_t[kk]);
            }
        }
        Some(jac)
    }

    fn r_max(&self) -> f64 {
        1.0
    }

    fn mean_field_independent_dynamics(&self) -> bool {
        !self.params.mean_field_dynamics || self.knob() == 0.0
    }

    fn lipschitz(&self) -> Option<Lipschitz> {
        let k = self.knob().abs();
        Some(Lipschitz {
            transition: if self.mean_field_independent_dynamics() {
                0.0
            } else {
                2.0 * k
            },
            reward: 0.9 * k,
        })
    }

    fn name(&self) -> &str {
        "random"
    }
}
