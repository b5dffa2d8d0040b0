//! Reference fixed-point methods for comparison: fictitious play, a damped
//! best-response iteration and online mirror descent.
//!
//! These are the textbook variants. They emit the same records as the
//! optimizers, with the objective fields left empty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{exploitability, induced_mdp, propagate_flow, MeanFieldGame};
use crate::mdp::{policy_evaluation, policy_from_occupation, value_iteration};
use crate::optim::{IterationRecord, TraceSink};
use crate::types::{MeanFieldFlow, PolicySequence};

/// Floor for the logarithm of the initial policy in mirror descent.
const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    FictitiousPlay,
    OnlineMirrorDescent,
    DampedFixedPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    /// Mirror-descent step on accumulated Q-values.
    pub learning_rate: f64,
    /// Weight of the new best-response flow in the damped iteration.
    pub damping: f64,
    pub max_iters: usize,
    pub eval_every: usize,
    pub seed: u64,
    pub wall_clock_budget: Option<f64>,
    pub record_time: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            method: BaselineMethod::FictitiousPlay,
            learning_rate: 0.1,
            damping: 0.5,
            max_iters: 200,
            eval_every: 1,
            seed: 0,
            wall_clock_budget: None,
            record_time: true,
        }
    }
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config("damping must lie in (0, 1]".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineOutput {
    pub policy: PolicySequence,
    pub iterations: usize,
    pub initial_exploitability: f64,
    pub final_exploitability: f64,
}

struct Recorder<'a> {
    sink: &'a mut dyn TraceSink,
    clock: crate::optim::Clock,
    initial: f64,
    eval_every: usize,
    last: f64,
}

impl Recorder<'_> {
    fn emit<G: MeanFieldGame + ?Sized>(
        &mut self,
        game: &G,
        k: usize,
        pi: &PolicySequence,
        step: f64,
        force: bool,
    ) -> Result<()> {
        let expl = if k.is_multiple_of(self.eval_every) || force {
            self.last = exploitability(game, pi)?;
            Some(self.last)
        } else {
            None
        };
        let initial = self.initial;
        self.sink.record(&IterationRecord {
            iter: k,
            wall_time_s: self.clock.stamp(),
            objective: None,
            grad_map_norm: None,
            exploitability: expl,
            normalized_exploitability: expl.map(|e| if initial > 0.0 { e / initial } else { e }),
            step_size: Some(step),
        })
    }
}

fn best_response<G: MeanFieldGame + ?Sized>(
    game: &G,
    flow: &MeanFieldFlow,
) -> Result<PolicySequence> {
    let mdp = induced_mdp(game, flow)?;
    Ok(value_iteration(&mdp).greedy_policy(game.dims()))
}

/// Runs the configured baseline from `pi0`.
pub fn run_baseline<G: MeanFieldGame + ?Sized>(
    game: &G,
    pi0: &PolicySequence,
    cfg: &BaselineConfig,
    sink: &mut dyn TraceSink,
) -> Result<BaselineOutput> {
    match cfg.method {
        BaselineMethod::FictitiousPlay => fictitious_play(game, pi0, cfg, sink),
        BaselineMethod::DampedFixedPoint => damped_fixed_point(game, pi0, cfg, sink),
        BaselineMethod::OnlineMirrorDescent => online_mirror_descent(game, pi0, cfg, sink),
    }
}

/// Averages best-response flows: `L̄_k = L̄_{k−1} + (Γ(BR(L̄_{k−1})) − L̄_{k−1})/k`,
/// reporting `Expl(Π(L̄_k))`.
pub fn fictitious_play<G: MeanFieldGame + ?Sized>(
    game: &G,
    pi0: &PolicySequence,
    cfg: &BaselineConfig,
    sink: &mut dyn TraceSink,
) -> Result<BaselineOutput> {
    averaged_best_responses(game, pi0, cfg, sink, |k| 1.0 / k as f64)
}

/// `L_k = (1 − δ)L_{k−1} + δ·Γ(BR(L_{k−1}))` with constant damping `δ`.
pub fn damped_fixed_point<G: MeanFieldGame + ?Sized>(
    game: &G,
    pi0: &PolicySequence,
    cfg: &BaselineConfig,
    sink: &mut dyn TraceSink,
) -> Result<BaselineOutput> {
    let d = cfg.damping;
    averaged_best_responses(game, pi0, cfg, sink, |_| d)
}

fn averaged_best_responses<G: MeanFieldGame + ?Sized>(
    game: &G,
    pi0: &PolicySequence,
    cfg: &BaselineConfig,
    sink: &mut dyn TraceSink,
    weight: impl Fn(usize) -> f64,
) -> Result<BaselineOutput> {
    cfg.check()?;
    let initial = exploitability(game, pi0)?;
    let mut rec = Recorder {
        sink,
        clock: crate::optim::Clock::start(cfg.record_time),
        initial,
        eval_every: cfg.eval_every,
        last: initial,
    };
    let mut flow = propagate_flow(game, pi0);
    let mut pi = pi0.clone();
    rec.emit(game, 0, &pi, 0.0, cfg.max_iters == 0)?;
    let mut k = 0;
    while k < cfg.max_iters && !rec.clock.over(cfg.wall_clock_budget) {
        k += 1;
        let br = best_response(game, &flow)?;
        let br_flow = propagate_flow(game, &br);
        let w = weight(k);
        flow.data
            .iter_mut()
            .zip(&br_flow.data)
            .for_each(|(l, b)| *l += w * (b - *l));
        pi = policy_from_occupation(&flow, None);
        let last = k == cfg.max_iters || rec.clock.over(cfg.wall_clock_budget);
        rec.emit(game, k, &pi, w, last)?;
    }
    Ok(BaselineOutput {
        policy: pi,
        iterations: k,
        initial_exploitability: initial,
        final_exploitability: rec.last,
    })
}

/// Accumulates `Q^{π_k}` evaluated at `Γ(π_k)` and plays the per-state
/// softmax of the running sum, started from `ln π0`.
pub fn online_mirror_descent<G: MeanFieldGame + ?Sized>(
    game: &G,
    pi0: &PolicySequence,
    cfg: &BaselineConfig,
    sink: &mut dyn TraceSink,
) -> Result<BaselineOutput> {
    cfg.check()?;
    let dims = game.dims();
    let initial = exploitability(game, pi0)?;
    let mut rec = Recorder {
        sink,
        clock: crate::optim::Clock::start(cfg.record_time),
        initial,
        eval_every: cfg.eval_every,
        last: initial,
    };
    let mut scores: Vec<f64> = pi0.data.iter().map(|p| p.max(LOG_FLOOR).ln()).collect();
    let mut pi = pi0.clone();
    rec.emit(game, 0, &pi, cfg.learning_rate, cfg.max_iters == 0)?;
    let mut k = 0;
    while k < cfg.max_iters && !rec.clock.over(cfg.wall_clock_budget) {
        k += 1;
        let flow = propagate_flow(game, &pi);
        let mdp = induced_mdp(game, &flow)?;
        let q = policy_evaluation(&mdp, &pi)?.q;
        for t in 0..dims.n_times() {
            let base = t * dims.sa();
            for (j, qv) in q[t].iter().enumerate() {
                scores[base + j] += cfg.learning_rate * qv;
            }
        }
        pi = softmax_policy(dims, &scores);
        let last = k == cfg.max_iters || rec.clock.over(cfg.wall_clock_budget);
        rec.emit(game, k, &pi, cfg.learning_rate, last)?;
    }
    Ok(BaselineOutput {
        policy: pi,
        iterations: k,
        initial_exploitability: initial,
        final_exploitability: rec.last,
    })
}

fn softmax_policy(dims: crate::types::Dims, scores: &[f64]) -> PolicySequence {
    let mut data = vec![0.0; dims.flow_len()];
    for t in 0..dims.n_times() {
        let base = t * dims.sa();
        for s in 0..dims.n_states {
            let idx: Vec<usize> = (0..dims.n_actions).map(|a| base + dims.idx(s, a)).collect();
            let m = idx.iter().map(|&i| scores[i]).fold(f64::MIN, f64::max);
            let total: f64 = idx.iter().map(|&i| (scores[i] - m).exp()).sum();
            for &i in &idx {
                data[i] = (scores[i] - m).exp() / total;
            }
        }
    }
    PolicySequence { dims, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Dims;
    use crate::zoo::tabular::TabularGame;

    fn bandit() -> TabularGame {
        TabularGame::mean_field_independent(
            Dims::new(1, 2, 0),
            vec![1.0],
            vec![],
            vec![vec![1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn fictitious_play_on_dominant_action_converges_at_once() {
        let g = bandit();
        let mut trace = Vec::new();
        let cfg = BaselineConfig {
            max_iters: 3,
            ..BaselineConfig::default()
        };
        let out =
            fictitious_play(&g, &PolicySequence::uniform(g.dims()), &cfg, &mut trace).unwrap();
        assert_eq!(trace[1].exploitability, Some(0.0));
        assert_eq!(out.final_exploitability, 0.0);
    }

    #[test]
    fn mirror_descent_moves_mass_to_the_better_arm() {
        let g = bandit();
        let mut trace = Vec::new();
        let cfg = BaselineConfig {
            method: BaselineMethod::OnlineMirrorDescent,
            max_iters: 20,
            ..BaselineConfig::default()
        };
        online_mirror_descent(&g, &PolicySequence::uniform(g.dims()), &cfg, &mut trace).unwrap();
        let expl: Vec<f64> = trace.iter().map(|r| r.exploitability.unwrap()).collect();
        assert!(expl.windows(2).all(|w| w[1] < w[0]));
    }
}
