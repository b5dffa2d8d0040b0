//! Reference implementations used by the integration tests. Everything here is
//! written from the definitions, without calling into the solver internals it
//! checks.

#![allow(dead_code)]

use mfomo::mdp::FiniteMdp;
use mfomo::{Dims, MeanFieldGame, PolicySequence};
use rand::Rng;

/// A uniform draw from the probability simplex of dimension `n`.
pub fn simplex_point(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// A random policy; with probability `sparsity` a row puts all its mass on
/// one action.
pub fn random_policy(dims: Dims, sparsity: f64, rng: &mut impl Rng) -> PolicySequence {
    let mut data = vec![0.0; dims.flow_len()];
    for t in 0..dims.n_times() {
        for s in 0..dims.n_states {
            let row = if rng.gen::<f64>() < sparsity {
                let mut r = vec![0.0; dims.n_actions];
                r[rng.gen_range(0..dims.n_actions)] = 1.0;
                r
            } else {
                simplex_point(dims.n_actions, rng)
            };
            for (a, p) in row.into_iter().enumerate() {
                data[t * dims.sa() + s + dims.n_states * a] = p;
            }
        }
    }
    PolicySequence::new(dims, data).unwrap()
}

/// Random transitions and rewards in `[-1, 1]`.
pub fn random_mdp(dims: Dims, rng: &mut impl Rng) -> FiniteMdp {
    let (s, a) = (dims.n_states, dims.n_actions);
    let mu0 = simplex_point(s, rng);
    let transitions = (0..dims.horizon)
        .map(|_| (0..s * a).flat_map(|_| simplex_point(s, rng)).collect())
        .collect();
    let rewards = (0..dims.n_times())
        .map(|_| (0..s * a).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    FiniteMdp::new(dims, mu0, transitions, rewards).unwrap()
}

/// A tabular model in plain nested vectors: `p[t][s][a][s']`, `r[t][s][a]`.
#[derive(Clone, Debug)]
pub struct Tables {
    pub s: usize,
    pub a: usize,
    pub horizon: usize,
    pub mu0: Vec<f64>,
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
    pub r: Vec<Vec<Vec<f64>>>,
}

impl Tables {
    pub fn from_mdp(mdp: &FiniteMdp) -> Self {
        let d = mdp.dims();
        let (s, a) = (d.n_states, d.n_actions);
        let p = (0..d.horizon)
            .map(|t| {
                let pt = mdp.transition(t);
                (0..s)
                    .map(|i| {
                        (0..a)
                            .map(|j| (0..s).map(|k| pt[k + s * (i + s * j)]).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let r = (0..=d.horizon)
            .map(|t| {
                let rt = mdp.reward(t);
                (0..s)
                    .map(|i| (0..a).map(|j| rt[i + s * j]).collect())
                    .collect()
            })
            .collect();
        Self {
            s,
            a,
            horizon: d.horizon,
            mu0: mdp.mu0().to_vec(),
            p,
            r,
        }
    }

    pub fn r_max(&self) -> f64 {
        self.r
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Optimal expected total reward from `mu0` by backward induction.
    pub fn optimal_value(&self) -> f64 {
        let mut v = vec![0.0; self.s];
        for t in (0..=self.horizon).rev() {
            v = (0..self.s)
                .map(|i| {
                    (0..self.a)
                        .map(|j| self.r[t][i][j] + self.continuation(t, i, j, &v))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
        }
        dot(&self.mu0, &v)
    }

    /// Expected total reward of `pi` from `mu0` by backward induction.
    pub fn policy_value(&self, pi: &PolicySequence) -> f64 {
        let mut v = vec![0.0; self.s];
        for t in (0..=self.horizon).rev() {
            v = (0..self.s)
                .map(|i| {
                    (0..self.a)
                        .map(|j| {
                            pi.get(t, i, j) * (self.r[t][i][j] + self.continuation(t, i, j, &v))
                        })
                        .sum()
                })
                .collect();
        }
        dot(&self.mu0, &v)
    }

    fn continuation(&self, t: usize, i: usize, j: usize, v: &[f64]) -> f64 {
        if t < self.horizon {
            dot(&self.p[t][i][j], v)
        } else {
            0.0
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `max_{t,s,a} Σ_{s'} |p¹ − p²|`
pub fn transition_gap(a: &Tables, b: &Tables) -> f64 {
    let mut m: f64 = 0.0;
    for t in 0..a.horizon {
        for i in 0..a.s {
            for j in 0..a.a {
                let d: f64 = a.p[t][i][j]
                    .iter()
                    .zip(&b.p[t][i][j])
                    .map(|(x, y)| (x - y).abs())
                    .sum();
                m = m.max(d);
            }
        }
    }
    m
}

/// `Σ_t max_{s,a} |r¹ − r²|`
pub fn reward_gap(a: &Tables, b: &Tables) -> f64 {
    (0..=a.horizon)
        .map(|t| {
            a.r[t]
                .iter()
                .flatten()
                .zip(b.r[t].iter().flatten())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        })
        .sum()
}

/// Forward recursion of the population flow under `pi`, one `S×A` slice per
/// time in column-major order.
pub fn flow_of<G: MeanFieldGame + ?Sized>(game: &G, pi: &PolicySequence) -> Vec<Vec<f64>> {
    let d = game.dims();
    let (s, a) = (d.n_states, d.n_actions);
    let mut marginal = game.initial_distribution().to_vec();
    let mut flow = Vec::new();
    for t in 0..=d.horizon {
        let lt: Vec<f64> = (0..s * a)
            .map(|k| marginal[k % s] * pi.get(t, k % s, k / s))
            .collect();
        if t < d.horizon {
            let p = game.transition(t, &lt);
            marginal = (0..s)
                .map(|next| (0..s * a).map(|k| lt[k] * p[next + s * k]).sum())
                .collect();
        }
        flow.push(lt);
    }
    flow
}

/// The MDP an individual faces when the population follows `flow`.
pub fn induced_tables<G: MeanFieldGame + ?Sized>(game: &G, flow: &[Vec<f64>]) -> Tables {
    let d = game.dims();
    let (s, a) = (d.n_states, d.n_actions);
    let p = (0..d.horizon)
        .map(|t| {
            let pt = game.transition(t, &flow[t]);
            (0..s)
                .map(|i| {
                    (0..a)
                        .map(|j| (0..s).map(|k| pt[k + s * (i + s * j)]).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    let r = (0..=d.horizon)
        .map(|t| {
            let rt = game.reward(t, &flow[t]);
            (0..s)
                .map(|i| (0..a).map(|j| rt[i + s * j]).collect())
                .collect()
        })
        .collect();
    Tables {
        s,
        a,
        horizon: d.horizon,
        mu0: game.initial_distribution().to_vec(),
        p,
        r,
    }
}

/// `Expl(π)` from the definition.
pub fn exploitability_oracle<G: MeanFieldGame + ?Sized>(game: &G, pi: &PolicySequence) -> f64 {
    let flow = flow_of(game, pi);
    let m = induced_tables(game, &flow);
    m.optimal_value() - m.policy_value(pi)
}

/// Rows of `flow` normalized into a policy; rows without mass are uniform.
pub fn policy_of_flow(dims: Dims, l: &[f64]) -> PolicySequence {
    let (s, a) = (dims.n_states, dims.n_actions);
    let mut data = vec![0.0; dims.flow_len()];
    for t in 0..dims.n_times() {
        for i in 0..s {
            let idx: Vec<usize> = (0..a).map(|j| t * s * a + i + s * j).collect();
            let total: f64 = idx.iter().map(|&k| l[k].max(0.0)).sum();
            for &k in &idx {
                data[k] = if total > 0.0 {
                    l[k].max(0.0) / total
                } else {
                    1.0 / a as f64
                };
            }
        }
    }
    PolicySequence::new(dims, data).unwrap()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean projection onto `{x ≥ 0, Σx = mass}` by trying every support:
/// on a support `I` the KKT point is `v_I − τ` with a common shift `τ`.
pub fn brute_simplex(v: &[f64], mass: f64) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let tau = (members.iter().map(|&i| v[i]).sum::<f64>() - mass) / members.len() as f64;
        let mut x = vec![0.0; n];
        for &i in &members {
            x[i] = v[i] - tau;
        }
        if x.iter().all(|&xi| xi >= -1e-12) {
            let x: Vec<f64> = x.into_iter().map(|xi| xi.max(0.0)).collect();
            let d = sq_dist(&x, v);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
    }
    best.unwrap().1
}

/// Euclidean projection onto `{x ≥ 0, Σx ≤ budget}`: either the budget is
/// inactive (clip at zero) or active (a scaled simplex).
pub fn brute_capped(v: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    brute_simplex(v, budget)
}

/// Euclidean projection onto the ball of radius `radius`.
pub fn brute_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let candidates = [v.to_vec(), {
        let norm = dot(v, v).sqrt();
        v.iter().map(|x| x * radius / norm).collect()
    }];
    candidates
        .into_iter()
        .filter(|x| dot(x, x).sqrt() <= radius * (1.0 + 1e-12) && x.iter().all(|c| c.is_finite()))
        .min_by(|a, b| sq_dist(a, v).total_cmp(&sq_dist(b, v)))
        .unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}
