//! JSON formats for games and checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulation::ThetaPoint;
use crate::game::{LinearRewards, MeanFieldGame};
use crate::mdp::FiniteMdp;
use crate::types::Dims;
use crate::zoo::{
    coordination_game, random_game, CongregationGame, CongregationParams, CoordinationParams,
    RandomGameParams, SisGame, SisParams, TabularGame,
};

/// A game given by an explicit table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub mu0: Vec<f64>,
    /// `T` tensors indexed `s' + S·(s + S·a)`.
    pub transitions: Vec<Vec<f64>>,
    /// `T+1` column-major `S×A` matrices. Ignored when `linear_rewards` is
    /// present.
    #[serde(default)]
    pub rewards: Vec<Vec<f64>>,
    /// Rewards `base + coupling·L_t` (`coupling` row-major `SA×SA`).
    #[serde(default)]
    pub linear_rewards: Option<LinearRewardsSpec>,
    /// Rescale probability vectors to sum to one before validation.
    #[serde(default)]
    pub renormalize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRewardsSpec {
    pub base: Vec<Vec<f64>>,
    pub coupling: Vec<Vec<f64>>,
}

/// `{"name": ..., "params": {...}}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum GameSpec {
    Congregation(CongregationParams),
    Sis(#[serde(default)] SisParams),
    Random(RandomGameParams),
    Coordination(#[serde(default)] CoordinationParams),
    Tabular(TabularSpec),
}

pub fn build_game(spec: &GameSpec) -> Result<Box<dyn MeanFieldGame>> {
    Ok(match spec {
        GameSpec::Congregation(p) => Box::new(CongregationGame::new(p.clone())?),
        GameSpec::Sis(p) => Box::new(SisGame::new(p.clone())?),
        GameSpec::Random(p) => {
            if p.n_states == 0 || p.n_actions == 0 {
                return Err(Error::Config("random game needs S, A ≥ 1".into()));
            }
            Box::new(random_game(p))
        }
        GameSpec::Coordination(p) => Box::new(coordination_game(p)?),
        GameSpec::Tabular(t) => Box::new(tabular_game(t)?),
    })
}

fn tabular_game(spec: &TabularSpec) -> Result<TabularGame> {
    let dims = Dims::new(spec.n_states, spec.n_actions, spec.horizon);
    let rewards = match &spec.linear_rewards {
        Some(lin) => lin.base.clone(),
        None => spec.rewards.clone(),
    };
    let mdp = if spec.renormalize {
        FiniteMdp::new_renormalized(dims, spec.mu0.clone(), spec.transitions.clone(), rewards)?
    } else {
        FiniteMdp::new(dims, spec.mu0.clone(), spec.transitions.clone(), rewards)?
    };
    match &spec.linear_rewards {
        Some(lin) => TabularGame::linear_from_mdp(
            mdp,
            LinearRewards {
                base: lin.base.clone(),
                coupling: lin.coupling.clone(),
            },
        ),
        None => TabularGame::from_mdp(mdp),
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// On-disk form of a point `θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    #[serde(rename = "L")]
    pub l: Vec<f64>,
}

impl From<&ThetaPoint> for Checkpoint {
    fn from(theta: &ThetaPoint) -> Self {
        Self {
            n_states: theta.dims.n_states,
            n_actions: theta.dims.n_actions,
            horizon: theta.dims.horizon,
            y: theta.y.clone(),
            z: theta.z.clone(),
            l: theta.l.clone(),
        }
    }
}

impl Checkpoint {
    pub fn into_theta(self) -> Result<ThetaPoint> {
        let dims = Dims::new(self.n_states, self.n_actions, self.horizon);
        let theta = ThetaPoint::new(dims, self.y, self.z, self.l)?;
        if !theta.is_finite() {
            return Err(Error::Invalid(
                "checkpoint contains non-finite values".into(),
            ));
        }
        Ok(theta)
    }
}

pub fn save_checkpoint(path: &Path, theta: &ThetaPoint) -> Result<()> {
    write_json(path, &Checkpoint::from(theta))
}

pub fn load_checkpoint(path: &Path) -> Result<ThetaPoint> {
    read_json::<Checkpoint>(path)?.into_theta()
}
