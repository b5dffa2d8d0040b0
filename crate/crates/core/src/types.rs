//! Shapes shared by every module.
//!
//! Every `S×A` matrix is stored column-major (state index fastest), so entry
//! `(s, a)` lives at `s + S·a`. Time-indexed sequences of such matrices are
//! stacked, giving a vector of length `S·A·(T+1)` whose `t`-th block is the
//! slice `[t·S·A, (t+1)·S·A)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating probability vectors built in memory.
pub const PROB_TOL: f64 = 1e-12;

/// Tolerance used when validating flows and occupation measures.
pub const FLOW_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub n_states: usize,
    pub n_actions: usize,
    /// Last time index; times run over `0..=horizon`.
    pub horizon: usize,
}

impl Dims {
    pub fn new(n_states: usize, n_actions: usize, horizon: usize) -> Self {
        Self {
            n_states,
            n_actions,
            horizon,
        }
    }

    /// `S·A`
    #[inline]
    pub fn sa(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// `T+1`
    #[inline]
    pub fn n_times(&self) -> usize {
        self.horizon + 1
    }

    /// `S·A·(T+1)`, the length of a stacked flow.
    #[inline]
    pub fn flow_len(&self) -> usize {
        self.sa() * self.n_times()
    }

    /// `S·(T+1)`, the length of the value variable `y`.
    #[inline]
    pub fn value_len(&self) -> usize {
        self.n_states * self.n_times()
    }

    /// Length of one transition tensor `p(s'|s,a)`.
    #[inline]
    pub fn transition_len(&self) -> usize {
        self.n_states * self.sa()
    }

    #[inline]
    pub fn idx(&self, s: usize, a: usize) -> usize {
        s + self.n_states * a
    }

    /// Index of `p(s'|s,a)` inside a transition tensor.
    #[inline]
    pub fn p_idx(&self, next: usize, s: usize, a: usize) -> usize {
        next + self.n_states * self.idx(s, a)
    }

    pub(crate) fn check_nonempty(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::Dimension(format!(
                "empty state or action space (S={}, A={})",
                self.n_states, self.n_actions
            )));
        }
        Ok(())
    }
}

/// Checks that `v` is a probability vector within `tol`.
pub fn check_distribution(v: &[f64], tol: f64, what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite() || *x < -tol) {
        return Err(Error::Invalid(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::Invalid(format!(
            "{what} sums to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Sequence of joint state-action distributions `L_t`, `t = 0..=T`.
///
/// The same shape holds occupation measures of a single agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldFlow {
    pub dims: Dims,
    /// Stacked column-major slices, length `S·A·(T+1)`.
    pub data: Vec<f64>,
}

impl MeanFieldFlow {
    /// Builds a flow and validates every slice (nonnegative, sums to one).
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<Self> {
        let flow = Self::from_raw(dims, data)?;
        flow.validate(FLOW_TOL)?;
        Ok(flow)
    }

    /// Builds a flow after checking the length only.
    pub fn from_raw(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.flow_len() {
            return Err(Error::Dimension(format!(
                "flow has {} entries, expected {}",
                data.len(),
                dims.flow_len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn uniform(dims: Dims) -> Self {
        let w = 1.0 / dims.sa() as f64;
        Self {
            dims,
            data: vec![w; dims.flow_len()],
        }
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.flow_len()],
        }
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        for t in 0..self.dims.n_times() {
            check_distribution(self.slice(t), tol, &format!("flow slice {t}"))?;
        }
        Ok(())
    }

    #[inline]
    pub fn slice(&self, t: usize) -> &[f64] {
        let sa = self.dims.sa();
        &self.data[t * sa..(t + 1) * sa]
    }

    #[inline]
    pub fn slice_mut(&mut self, t: usize) -> &mut [f64] {
        let sa = self.dims.sa();
        &mut self.data[t * sa..(t + 1) * sa]
    }

    #[inline]
    pub fn get(&self, t: usize, s: usize, a: usize) -> f64 {
        self.data[t * self.dims.sa() + self.dims.idx(s, a)]
    }

    /// State marginal `Σ_a L_t(s, a)`.
    pub fn state_marginal(&self, t: usize) -> Vec<f64> {
        state_marginal(self.dims, self.slice(t))
    }

    /// `Σ_t Σ_{s,a} |L_t(s,a) − L'_t(s,a)|`
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn l2_distance(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}

pub(crate) fn state_marginal(dims: Dims, slice: &[f64]) -> Vec<f64> {
    let s_n = dims.n_states;
    let mut m = vec![0.0; s_n];
    for a in 0..dims.n_actions {
        for (s, ms) in m.iter_mut().enumerate() {
            *ms += slice[s + s_n * a];
        }
    }
    m
}

/// Randomized Markov policy `π_t(a|s)`, stored like a flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySequence {
    pub dims: Dims,
    pub data: Vec<f64>,
}

impl PolicySequence {
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.flow_len() {
            return Err(Error::Dimension(format!(
                "policy has {} entries, expected {}",
                data.len(),
                dims.flow_len()
            )));
        }
        let pi = Self { dims, data };
        pi.validate(PROB_TOL)?;
        Ok(pi)
    }

    pub fn uniform(dims: Dims) -> Self {
        let w = 1.0 / dims.n_actions as f64;
        Self {
            dims,
            data: vec![w; dims.flow_len()],
        }
    }

    /// Deterministic policy choosing `action(t, s)`.
    pub fn deterministic(dims: Dims, action: impl Fn(usize, usize) -> usize) -> Self {
        let mut data = vec![0.0; dims.flow_len()];
        for t in 0..dims.n_times() {
            for s in 0..dims.n_states {
                data[t * dims.sa() + dims.idx(s, action(t, s))] = 1.0;
            }
        }
        Self { dims, data }
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        for t in 0..self.dims.n_times() {
            for s in 0..self.dims.n_states {
                let row: Vec<f64> = (0..self.dims.n_actions)
                    .map(|a| self.get(t, s, a))
                    .collect();
                check_distribution(&row, tol, &format!("policy row (t={t}, s={s})"))?;
            }
        }
        Ok(())
    }

    #[inline]
    pub fn slice(&self, t: usize) -> &[f64] {
        let sa = self.dims.sa();
        &self.data[t * sa..(t + 1) * sa]
    }

    #[inline]
    pub fn get(&self, t: usize, s: usize, a: usize) -> f64 {
        self.data[t * self.dims.sa() + self.dims.idx(s, a)]
    }

    #[inline]
    pub fn set(&mut self, t: usize, s: usize, a: usize, v: f64) {
        let i = t * self.dims.sa() + self.dims.idx(s, a);
        self.data[i] = v;
    }
}
