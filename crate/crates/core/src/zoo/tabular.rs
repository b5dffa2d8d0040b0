//! Games given by explicit tables.

use crate::error::{Error, Result};
use crate::game::{LinearRewards, Lipschitz, MeanFieldGame};
use crate::mdp::FiniteMdp;
use crate::types::Dims;

#[derive(Clone, Debug, PartialEq)]
enum Rewards {
    Fixed(Vec<Vec<f64>>),
    Linear(LinearRewards),
}

/// Mean-field independent transitions with either fixed rewards or rewards
/// linear in the flow.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularGame {
    mdp: FiniteMdp,
    rewards: Rewards,
    r_max: f64,
    name: String,
}

impl TabularGame {
    /// A game that is just an MDP.
    pub fn mean_field_independent(
        dims: Dims,
        mu0: Vec<f64>,
        transitions: Vec<Vec<f64>>,
        rewards: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Self::from_mdp(FiniteMdp::new(dims, mu0, transitions, rewards)?)
    }

    pub fn from_mdp(mdp: FiniteMdp) -> Result<Self> {
        let r_max = mdp.r_max();
        Ok(Self {
            rewards: Rewards::Fixed(mdp.rewards().to_vec()),
            mdp,
            r_max,
            name: "tabular".into(),
        })
    }

    /// Rewards `r̄_t + R̄_tᵀ L_t` on top of fixed transitions.
    pub fn with_linear_rewards(
        dims: Dims,
        mu0: Vec<f64>,
        transitions: Vec<Vec<f64>>,
        linear: LinearRewards,
    ) -> Result<Self> {
        Self::linear_from_mdp(
            FiniteMdp::new(dims, mu0, transitions, linear.base.clone())?,
            linear,
        )
    }

    pub(crate) fn linear_from_mdp(mdp: FiniteMdp, linear: LinearRewards) -> Result<Self> {
        let dims = mdp.dims();
        let sa = dims.sa();
        if linear.coupling.len() != dims.n_times()
            || linear.coupling.iter().any(|c| c.len() != sa * sa)
        {
            return Err(Error::Dimension(format!(
                "linear reward coupling must be {} matrices of {sa}x{sa}",
                dims.n_times()
            )));
        }
        // A linear function on the simplex peaks at a vertex.
        let mut r_max = 0.0f64;
        for t in 0..dims.n_times() {
            for j in 0..sa {
                let row = &linear.coupling[t][j * sa..(j + 1) * sa];
                for c in row {
                    r_max = r_max.max((linear.base[t][j] + c).abs());
                }
            }
        }
        Ok(Self {
            mdp,
            rewards: Rewards::Linear(linear),
            r_max,
            name: "tabular-linear".into(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn mdp(&self) -> &FiniteMdp {
        &self.mdp
    }
}

impl MeanFieldGame for TabularGame {
    fn dims(&self) -> Dims {
        self.mdp.dims()
    }

    fn initial_distribution(&self) -> &[f64] {
        self.mdp.mu0()
    }

    fn transition(&self, t: usize, _l_t: &[f64]) -> Vec<f64> {
        self.mdp.transition(t).to_vec()
    }

    fn reward(&self, t: usize, l_t: &[f64]) -> Vec<f64> {
        match &self.rewards {
            Rewards::Fixed(r) => r[t].clone(),
            Rewards::Linear(lin) => lin.evaluate(self.dims(), t, l_t),
        }
    }

    fn transition_jacobian(&self, _t: usize, _l_t: &[f64]) -> Option<Vec<f64>> {
        let d = self.dims();
        Some(vec![0.0; d.transition_len() * d.sa()])
    }

    fn reward_jacobian(&self, t: usize, _l_t: &[f64]) -> Option<Vec<f64>> {
        let sa = self.dims().sa();
        Some(match &self.rewards {
            Rewards::Fixed(_) => vec![0.0; sa * sa],
            Rewards::Linear(lin) => lin.coupling[t].clone(),
        })
    }

    fn r_max(&self) -> f64 {
        self.r_max
    }

    fn mean_field_independent_dynamics(&self) -> bool {
        true
    }

    fn linear_rewards(&self) -> Option<&LinearRewards> {
        match &self.rewards {
            Rewards::Linear(lin) => Some(lin),
            Rewards::Fixed(_) => None,
        }
    }

    fn lipschitz(&self) -> Option<Lipschitz> {
        let reward = match &self.rewards {
            Rewards::Fixed(_) => 0.0,
            Rewards::Linear(lin) => lin
                .coupling
                .iter()
                .flatten()
                .fold(0.0f64, |m, c| m.max(c.abs())),
        };
        Some(Lipschitz {
            transition: 0.0,
            reward,
        })
    }

    fn name(&self) -> &str {
        &self.name
    }
}
