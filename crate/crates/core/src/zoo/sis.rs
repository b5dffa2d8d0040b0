//! Susceptible-infected-susceptible epidemic with social distancing.
//!
//! State 0 is susceptible, state 1 infected. Action 0 goes out, action 1
//! keeps distance. A susceptible agent going out is infected with probability
//! `infection_rate · (infected mass)`; distancing avoids infection entirely.
//! Infected agents recover with probability `recovery_rate`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Lipschitz, MeanFieldGame};
use crate::types::{check_distribution, Dims, PROB_TOL};

const SUSCEPTIBLE: usize = 0;
const INFECTED: usize = 1;
const GO_OUT: usize = 0;
const DISTANCE: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SisParams {
    pub horizon: usize,
    pub infection_rate: f64,
    pub recovery_rate: f64,
    pub distancing_cost: f64,
    pub infection_cost: f64,
    pub mu0: Vec<f64>,
}

impl Default for SisParams {
    fn default() -> Self {
        Self {
            horizon: 10,
            infection_rate: 0.8,
            recovery_rate: 0.3,
            distancing_cost: 0.5,
            infection_cost: 2.0,
            mu0: vec![0.9, 0.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SisGame {
    params: SisParams,
}

impl SisGame {
    pub fn new(params: SisParams) -> Result<Self> {
        check_distribution(&params.mu0, PROB_TOL, "mu0")?;
        if params.mu0.len() != 2 {
            return Err(Error::Dimension(
                "SIS initial distribution needs 2 entries".into(),
            ));
        }
        for (name, v) in [
            ("infection_rate", params.infection_rate),
            ("recovery_rate", params.recovery_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Invalid(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if params.distancing_cost < 0.0 || params.infection_cost < 0.0 {
            return Err(Error::Invalid("SIS costs must be nonnegative".into()));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &SisParams {
        &self.params
    }
}

impl MeanFieldGame for SisGame {
    fn dims(&self) -> Dims {
        Dims::new(2, 2, self.params.horizon)
    }

    fn initial_distribution(&self) -> &[f64] {
        &self.params.mu0
    }

    fn transition(&self, _t: usize, l_t: &[f64]) -> Vec<f64> {
        let d = self.dims();
        let infected = l_t[d.idx(INFECTED, GO_OUT)] + l_t[d.idx(INFECTED, DISTANCE)];
        let q = (self.params.infection_rate * infected).clamp(0.0, 1.0);
        let rec = self.params.recovery_rate;
        let mut p = vec![0.0; d.transition_len()];
        p[d.p_idx(INFECTED, SUSCEPTIBLE, GO_OUT)] = q;
        p[d.p_idx(SUSCEPTIBLE, SUSCEPTIBLE, GO_OUT)] = 1.0 - q;
        p[d.p_idx(SUSCEPTIBLE, SUSCEPTIBLE, DISTANCE)] = 1.0;
        for a in [GO_OUT, DISTANCE] {
            p[d.p_idx(SUSCEPTIBLE, INFECTED, a)] = rec;
            p[d.p_idx(INFECTED, INFECTED, a)] = 1.0 - rec;
        }
        p
    }

    fn reward(&self, _t: usize, _l_t: &[f64]) -> Vec<f64> {
        let d = self.dims();
        let mut r = vec![0.0; d.sa()];
        for s in 0..2 {
            for a in 0..2 {
                let mut v = 0.0;
                if a == DISTANCE {
                    v -= self.params.distancing_cost;
                }
                if s == INFECTED {
                    v -= self.params.infection_cost;
                }
                r[d.idx(s, a)] = v;
            }
        }
        r
    }

    fn transition_jacobian(&self, _t: usize, _l_t: &[f64]) -> Option<Vec<f64>> {
        let d = self.dims();
        let sa = d.sa();
        let beta = self.params.infection_rate;
        let mut jac = vec![0.0; d.transition_len() * sa];
        for a in [GO_OUT, DISTANCE] {
            let k = d.idx(INFECTED, a);
            jac[d.p_idx(INFECTED, SUSCEPTIBLE, GO_OUT) * sa + k] = beta;
            jac[d.p_idx(SUSCEPTIBLE, SUSCEPTIBLE, GO_OUT) * sa + k] = -beta;
        }
        Some(jac)
    }

    fn reward_jacobian(&self, _t: usize, _l_t: &[f64]) -> Option<Vec<f64>> {
        let sa = self.dims().sa();
        Some(vec![0.0; sa * sa])
    }

    fn r_max(&self) -> f64 {
        self.params.distancing_cost + self.params.infection_cost
    }

    fn mean_field_independent_dynamics(&self) -> bool {
        self.params.infection_rate == 0.0
    }

    fn lipschitz(&self) -> Option<Lipschitz> {
        Some(Lipschitz {
            transition: 2.0 * self.params.infection_rate,
            reward: 0.0,
        })
    }

    fn name(&self) -> &str {
        "sis"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::finite_difference_jacobian;

    #[test]
    fn transitions_are_stochastic_and_jacobian_matches() {
        let g = SisGame::new(SisParams::default()).unwrap();
        let l = [0.5, 0.2, 0.2, 0.1];
        let p = g.transition(0, &l);
        for col in p.chunks(2) {
            assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert!((p[g.dims().p_idx(INFECTED, SUSCEPTIBLE, GO_OUT)] - 0.8 * 0.3).abs() < 1e-15);
        let a = g.transition_jacobian(0, &l).unwrap();
        let f = finite_difference_jacobian(&l, |x| g.transition(0, x));
        assert!(a.iter().zip(&f).all(|(x, y)| (x - y).abs() < 1e-8));
    }

    #[test]
    fn zero_infection_rate_decouples_dynamics() {
        let g = SisGame::new(SisParams {
            infection_rate: 0.0,
            ..SisParams::default()
        })
        .unwrap();
        assert!(g.mean_field_independent_dynamics());
    }
}
