//! Congregation game with multiple equilibria.
//!
//! States and actions are the same `n` locations; action `j` means "move to
//! `j`". At `t = 0` moves are deterministic and unrewarded. From `t = 1` on an
//! agent at `i` choosing to stay earns `r^i(1 − ‖L_t − e_ii‖²/2)`, and the
//! farther the crowd is from `(i, i)` the noisier the moves out of `i` get.
//! Every location `j*` with maximal `r^{j*}` gives an equilibrium where the
//! whole population gathers at `j*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Lipschitz, MeanFieldGame};
use crate::types::{check_distribution, Dims, MeanFieldFlow, PolicySequence, PROB_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CongregationParams {
    pub n_locations: usize,
    pub horizon: usize,
    pub mu0: Vec<f64>,
    /// `r^i ≥ 0`, one per location.
    pub rewards: Vec<f64>,
    /// Noise strengths `C_1, …, C_{T−1}` (one per transition with `t ≥ 1`).
    /// Missing entries default to the last one, or to `1` when empty.
    #[serde(default)]
    pub noise: Vec<f64>,
}

impl CongregationParams {
    pub fn new(n_locations: usize, horizon: usize, rewards: Vec<f64>) -> Self {
        Self {
            n_locations,
            horizon,
            mu0: vec![1.0 / n_locations as f64; n_locations],
            rewards,
            noise: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CongregationGame {
    params: CongregationParams,
    dims: Dims,
    noise: Vec<f64>,
}

impl CongregationGame {
    pub fn new(params: CongregationParams) -> Result<Self> {
        let n = params.n_locations;
        let dims = Dims::new(n, n, params.horizon);
        dims.check_nonempty()?;
        if params.mu0.len() != n || params.rewards.len() != n {
            return Err(Error::Dimension(format!(
                "congregation game with {n} locations needs {n} initial masses and rewards"
            )));
        }
        check_distribution(&params.mu0, PROB_TOL, "mu0")?;
        if params.rewards.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Invalid(
                "location rewards must be nonnegative".into(),
            ));
        }
        if params.noise.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Invalid("noise strengths must be nonnegative".into()));
        }
        let fill = params.noise.last().copied().unwrap_or(1.0);
        let noise = (0..params.horizon)
            .map(|t| {
                if t == 0 {
                    0.0
                } else {
                    params.noise.get(t - 1).copied().unwrap_or(fill)
                }
            })
            .collect();
        Ok(Self {
            params,
            dims,
            noise,
        })
    }

    pub fn params(&self) -> &CongregationParams {
        &self.params
    }

    /// Locations with maximal reward.
    pub fn best_locations(&self) -> Vec<usize> {
        let best = self.params.rewards.iter().cloned().fold(f64::MIN, f64::max);
        (0..self.params.n_locations)
            .filter(|&i| self.params.rewards[i] == best)
            .collect()
    }

    /// The equilibrium gathering at `j_star`: everyone moves to `j_star` at
    /// `t = 0` and stays there. Intended for `j_star` with maximal reward; other
    /// locations are accepted with a warning.
    pub fn nash_construction(&self, j_star: usize) -> Result<(PolicySequence, MeanFieldFlow)> {
        let n = self.params.n_locations;
        if j_star >= n {
            return Err(Error::Invalid(format!("location {j_star} out of range")));
        }
        if !self.best_locations().contains(&j_star) {
            log::warn!(
                "location {j_star} does not have maximal reward; the flow is not an equilibrium"
            );
        }
        let d = self.dims;
        let pi = PolicySequence::deterministic(d, |_, _| j_star);
        let mut flow = MeanFieldFlow::zeros(d);
        for s in 0..n {
            flow.data[d.idx(s, j_star)] = self.params.mu0[s];
        }
        for t in 1..d.n_times() {
            flow.data[t * d.sa() + d.idx(j_star, j_star)] = 1.0;
        }
        Ok((pi, flow))
    }

    /// `‖L − e_ii‖²` for every location `i`.
    fn distances(&self, l_t: &[f64]) -> Vec<f64> {
        let sq: f64 = l_t.iter().map(|x| x * x).sum();
        (0..self.params.n_locations)
            .map(|i| sq - 2.0 * l_t[self.dims.idx(i, i)] + 1.0)
            .collect()
    }
}

impl MeanFieldGame for CongregationGame {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn initial_distribution(&self) -> &[f64] {
        &self.params.mu0
    }

    fn transition(&self, t: usize, l_t: &[f64]) -> Vec<f64> {
        let d = self.dims;
        let n = d.n_states;
        let c = self.noise[t];
        let dist = self.distances(l_t);
        let mut p = vec![0.0; d.transition_len()];
        for i in 0..n {
            let noise = c * dist[i];
            let denom = 1.0 + n as f64 * noise;
            for j in 0..n {
                for next in 0..n {
                    let hit = if next == j { 1.0 } else { 0.0 };
                    p[d.p_idx(next, i, j)] = (hit + noise) / denom;
                }
            }
        }
        p
    }

    fn reward(&self, t: usize, l_t: &[f64]) -> Vec<f64> {
        let d = self.dims;
        let mut r = vec![0.0; d.sa()];
        if t == 0 {
            return r;
        }
        for (i, dist) in self.distances(l_t).into_iter().enumerate() {
            r[d.idx(i, i)] = self.params.rewards[i] * (1.0 - dist / 2.0);
        }
        r
    }

    fn transition_jacobian(&self, t: usize, l_t: &[f64]) -> Option<Vec<f64>> {
        let d = self.dims;
        let (n, sa) = (d.n_states, d.sa());
        let c = self.noise[t];
        let dist = self.distances(l_t);
        let mut jac = vec![0.0; d.transition_len() * sa];
        if c == 0.0 {
            return Some(jac);
        }
        for i in 0..n {
            let denom = 1.0 + n as f64 * c * dist[i];
            let ii = d.idx(i, i);
            for j in 0..n {
                for next in 0..n {
                    let hit = if next == j { 1.0 } else { 0.0 };
                    let dp_ddist = c * (1.0 - n as f64 * hit) / (denom * denom);
                    let row = d.p_idx(next, i, j) * sa;
                    for k in 0..sa {
                        let ddist = 2.0 * l_t[k] - if k == ii { 2.0 } else { 0.0 };
                        jac[row + k] = dp_ddist * ddist;
                    }
                }
            }
        }
        Some(jac)
    }

    fn reward_jacobian(&self, t: usize, l_t: &[f64]) -> Option<Vec<f64>> {
        let d = self.dims;
        let sa = d.sa();
        let mut jac = vec![0.0; sa * sa];
        if t == 0 {
            return Some(jac);
        }
        for i in 0..d.n_states {
            let ii = d.idx(i, i);
            let ri = self.params.rewards[i];
            for k in 0..sa {
                let ddist = 2.0 * l_t[k] - if k == ii { 2.0 } else { 0.0 };
                jac[ii * sa + k] = -ri * ddist / 2.0;
            }
        }
        Some(jac)
    }

    fn r_max(&self) -> f64 {
        self.params.rewards.iter().cloned().fold(0.0, f64::max)
    }

    fn lipschitz(&self) -> Option<Lipschitz> {
        let n = self.params.n_locations as f64;
        let c_max = self.noise.iter().cloned().fold(0.0, f64::max);
        Some(Lipschitz {
            transition: 4.0 * (n - 1.0) * c_max,
            reward: self.r_max(),
        })
    }

    fn name(&self) -> &str {
        "congregation"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{finite_difference_jacobian, verify_nash, weak_monotonicity_witness};

    fn game() -> CongregationGame {
        CongregationGame::new(CongregationParams {
            n_locations: 3,
            horizon: 3,
            mu0: vec![0.2, 0.5, 0.3],
            rewards: vec![1.0, 0.4, 1.0],
            noise: vec![0.7, 1.3],
        })
        .unwrap()
    }

    #[test]
    fn gathering_flows_are_equilibria() {
        let g = game();
        for j in g.best_locations() {
            let (pi, flow) = g.nash_construction(j).unwrap();
            let rep = verify_nash(&g, &pi, &flow, 1e-12).unwrap();
            assert!(rep.is_nash, "{rep:?}");
        }
    }

    #[test]
    fn lone_deviators_earn_nothing() {
        // Once the crowd sits at (1, 1), staying anywhere else pays zero, so
        // even the low-reward gathering cannot be exploited.
        let g = game();
        let (pi, flow) = g.nash_construction(1).unwrap();
        let rep = verify_nash(&g, &pi, &flow, 1e-12).unwrap();
        assert!(rep.is_nash, "{rep:?}");
    }

    #[test]
    fn monotonicity_witness_between_gatherings() {
        let g = game();
        let (_, a) = g.nash_construction(0).unwrap();
        let (_, b) = g.nash_construction(2).unwrap();
        let w = weak_monotonicity_witness(&g, &a, &b);
        assert!((w - 2.0 * 3.0 * 1.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_jacobians_match_differences() {
        let g = game();
        let l: Vec<f64> = (0..9).map(|k| (k as f64 + 1.0) / 45.0).collect();
        for t in 0..3 {
            let a = g.transition_jacobian(t, &l).unwrap();
            let f = finite_difference_jacobian(&l, |x| g.transition(t, x));
            assert!(a.iter().zip(&f).all(|(x, y)| (x - y).abs() < 1e-7));
        }
        for t in 0..4 {
            let a = g.reward_jacobian(t, &l).unwrap();
            let f = finite_difference_jacobian(&l, |x| g.reward(t, x));
            assert!(a.iter().zip(&f).all(|(x, y)| (x - y).abs() < 1e-7));
        }
    }
}
