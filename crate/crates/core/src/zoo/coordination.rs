//! Small coordination game with rewards linear in the flow.
//!
//! States and actions are the same `n` locations and action `a` moves the
//! agent to location `a`. The reward for `(s, a)` is `r̄_t(s, a) + κ·L_t(s, a)`,
//! so agents like doing what others do. With `κ > 0` the game typically has
//! several isolated equilibria, which makes it a test case for support
//! enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::LinearRewards;
use crate::types::Dims;
use crate::zoo::tabular::TabularGame;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoordinationParams {
    pub n_locations: usize,
    pub horizon: usize,
    pub mu0: Vec<f64>,
    /// `κ`
    pub strength: f64,
    /// `T+1` column-major `n×n` base rewards.
    pub base: Vec<Vec<f64>>,
}

impl Default for CoordinationParams {
    fn default() -> Self {
        Self {
            n_locations: 2,
            horizon: 1,
            mu0: vec![0.6, 0.4],
            strength: 1.0,
            base: vec![vec![0.1, 0.0, 0.0, 0.05], vec![0.05, 0.0, 0.0, 0.0]],
        }
    }
}

pub fn coordination_game(params: &CoordinationParams) -> Result<TabularGame> {
    let n = params.n_locations;
    let dims = Dims::new(n, n, params.horizon);
    let sa = dims.sa();
    if params.base.len() != dims.n_times() || params.base.iter().any(|b| b.len() != sa) {
        return Err(Error::Dimension(format!(
            "coordination base rewards must be {} matrices of {n}x{n}",
            dims.n_times()
        )));
    }
    let mut step = vec![0.0; dims.transition_len()];
    for s in 0..n {
        for a in 0..n {
            step[dims.p_idx(a, s, a)] = 1.0;
        }
    }
    let mut coupling = vec![0.0; sa * sa];
    for j in 0..sa {
        coupling[j * sa + j] = params.strength;
    }
    let linear = LinearRewards {
        base: params.base.clone(),
        coupling: vec![coupling; dims.n_times()],
    };
    Ok(TabularGame::with_linear_rewards(
        dims,
        params.mu0.clone(),
        vec![step; params.horizon],
        linear,
    )?
    .with_name("coordination"))
}
