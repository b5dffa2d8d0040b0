//! Unconstrained parametrization of `Θ`.
//!
//! ```text
//! L_t = softmax(u_t)
//! y   = ρ/√(S(T+1)) · sin(w)
//! z   = B · exp(v) / (Σ exp(v) + exp(w0))
//! ```
//!
//! Each map lands inside its factor of `Θ` for any real input: `|y_i| ≤
//! ρ/√(S(T+1))` bounds `‖y‖₂` by `ρ`, and the extra slot `w0` lets `Σz` range
//! over `(0, B)`. Exponentials are shifted by their maximum before use.

use super::solver::{
    check_config, flow_exploitability, resolve_smoothness, AdamState, Clock, ExplScale,
};
use super::{IterationRecord, Method, SolveOutput, SolverConfig, StepRule, StopReason, TraceSink};
use crate::error::{Error, Result};
use crate::formulation::{objective_and_gradient, ThetaPoint};
use crate::game::MeanFieldGame;
use crate::projection::{project_theta, ThetaBounds};
use crate::types::Dims;

/// Floor applied before taking logarithms in [`Reparametrization::inverse`].
const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reparametrization {
    pub dims: Dims,
    pub bounds: ThetaBounds,
}

impl Reparametrization {
    pub fn new(dims: Dims, bounds: ThetaBounds) -> Self {
        Self { dims, bounds }
    }

    /// Length of the flat parameter vector `[u; v; w0; w]`.
    pub fn len(&self) -> usize {
        2 * self.dims.flow_len() + 1 + self.dims.value_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn y_scale(&self) -> f64 {
        self.bounds.y_radius / (self.dims.value_len() as f64).sqrt()
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], f64, &'a [f64]) {
        let n = self.dims.flow_len();
        (&p[..n], &p[n..2 * n], p[2 * n], &p[2 * n + 1..])
    }

    /// Shifted exponentials of `v` and `w0` and their total.
    fn z_weights(&self, v: &[f64], w0: f64) -> (Vec<f64>, f64, f64) {
        let m = v.iter().cloned().fold(w0, f64::max);
        let ev: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
        let e0 = (w0 - m).exp();
        let total = ev.iter().sum::<f64>() + e0;
        (ev, e0, total)
    }

    pub fn map(&self, p: &[f64]) -> ThetaPoint {
        let d = self.dims;
        let (u, v, w0, w) = self.split(p);
        let mut l = Vec::with_capacity(d.flow_len());
        for ut in u.chunks(d.sa()) {
            let m = ut.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = ut.iter().map(|x| (x - m).exp()).collect();
            let s: f64 = e.iter().sum();
            l.extend(e.into_iter().map(|x| x / s));
        }
        let c = self.y_scale();
        let y = w.iter().map(|x| c * x.sin()).collect();
        let (ev, _, total) = self.z_weights(v, w0);
        let z = ev
            .iter()
            .map(|e| self.bounds.z_budget * e / total)
            .collect();
        ThetaPoint { dims: d, y, z, l }
    }

    /// Parameters mapping to (approximately) `theta`; points on the boundary
    /// of `Θ` are pulled slightly inside.
    pub fn inverse(&self, theta: &ThetaPoint) -> Vec<f64> {
        let d = self.dims;
        let mut p = Vec::with_capacity(self.len());
        p.extend(theta.l.iter().map(|x| x.max(LOG_FLOOR).ln()));
        let b = self.bounds.z_budget;
        if b > 0.0 {
            let used: f64 = theta.z.iter().map(|x| x.max(0.0)).sum();
            let slack = (b - used).max(LOG_FLOOR * b);
            p.extend(theta.z.iter().map(|x| (x.max(0.0) / b).max(LOG_FLOOR).ln()));
            p.push((slack / b).ln());
        } else {
            p.extend(std::iter::repeat_n(0.0, d.flow_len()));
            p.push(0.0);
        }
        let c = self.y_scale();
        p.extend(theta.y.iter().map(|y| {
            if c > 0.0 {
                (y / c).clamp(-1.0, 1.0).asin()
            } else {
                0.0
            }
        }));
        p
    }

    /// Chain rule: gradient with respect to the parameters from the gradient
    /// with respect to `θ = map(p)`.
    pub fn pullback(&self, p: &[f64], theta: &ThetaPoint, grad: &ThetaPoint) -> Vec<f64> {
        let d = self.dims;
        let (_, v, w0, w) = self.split(p);
        let mut out = Vec::with_capacity(self.len());
        for (lt, gt) in theta.l.chunks(d.sa()).zip(grad.l.chunks(d.sa())) {
            let mean: f64 = lt.iter().zip(gt).map(|(a, b)| a * b).sum();
            out.extend(lt.iter().zip(gt).map(|(l, g)| l * (g - mean)));
        }
        let b = self.bounds.z_budget;
        let zg: f64 = theta.z.iter().zip(&grad.z).map(|(z, g)| z * g).sum();
        if b > 0.0 {
            out.extend(theta.z.iter().zip(&grad.z).map(|(z, g)| z * (g - zg / b)));
            let (_, e0, total) = self.z_weights(v, w0);
            out.push(-zg * e0 / total);
        } else {
            out.extend(std::iter::repeat_n(0.0, d.flow_len()));
            out.push(0.0);
        }
        let c = self.y_scale();
        out.extend(w.iter().zip(&grad.y).map(|(x, g)| g * c * x.cos()));
        out
    }
}

/// Runs plain gradient descent (`method = pgd`), Adam or NAdam on the
/// unconstrained parameters, starting from the parameters of `theta0`.
pub fn reparametrized_solve<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta0: &ThetaPoint,
    cfg: &SolverConfig,
    sink: &mut dyn TraceSink,
) -> Result<SolveOutput> {
    check_config(cfg)?;
    if cfg.method == Method::Spgd {
        return Err(Error::Config(
            "stochastic batches are not available in reparametrized mode".into(),
        ));
    }
    if matches!(cfg.step_rule(), StepRule::Armijo { .. }) {
        return Err(Error::Config("Armijo steps need the projected mode".into()));
    }
    let dims = game.dims();
    if theta0.dims != dims {
        return Err(Error::Dimension(
            "initial point does not match the game".into(),
        ));
    }
    let bounds = ThetaBounds::new(dims, game.r_max());
    let rep = Reparametrization::new(dims, bounds);
    let mut params = rep.inverse(&project_theta(theta0, &bounds));
    let opts = cfg.gradient_options();
    let smoothness = resolve_smoothness(game, cfg)?;
    let rule = cfg.step_rule();
    let clock = Clock::start(cfg.record_time);
    let mut adam = AdamState::new(rep.len());

    let mut theta = rep.map(&params);
    let (mut obj, mut grad) = objective_and_gradient(game, &theta, opts)?;
    let f0 = obj.total;
    let scale = ExplScale {
        initial: flow_exploitability(game, &theta)?,
    };
    let mut last_expl = scale.initial;
    let mut k = 0usize;
    let stop_reason = loop {
        let eta = rule.eta(k, smoothness);
        let pgrad = rep.pullback(&params, &theta, &grad);
        let step: Vec<f64> = match cfg.method {
            Method::Adam | Method::Nadam => adam.direction(&pgrad, cfg),
            _ => pgrad.clone(),
        };
        let grad_map = pgrad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let stop = if obj.total <= cfg.stopping.objective_tol {
            Some(StopReason::ObjectiveTolerance)
        } else if cfg.stopping.stationarity_tol > 0.0 && grad_map <= cfg.stopping.stationarity_tol {
            Some(StopReason::Stationary)
        } else if clock.over(cfg.stopping.wall_clock_budget) {
            Some(StopReason::WallClock)
        } else if k >= cfg.max_iters {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        let expl = if k.is_multiple_of(cfg.eval_every) || stop.is_some() {
            last_expl = flow_exploitability(game, &theta)?;
            Some(last_expl)
        } else {
            None
        };
        sink.record(&IterationRecord {
            iter: k,
            wall_time_s: clock.stamp(),
            objective: Some(obj),
            grad_map_norm: Some(grad_map),
            exploitability: expl,
            normalized_exploitability: expl.map(|e| scale.normalized(e)),
            step_size: Some(eta),
        })?;
        if let Some(reason) = stop {
            break reason;
        }
        let next: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p - eta * s).collect();
        let next_theta = rep.map(&next);
        let (o, g) = objective_and_gradient(game, &next_theta, opts)?;
        k += 1;
        if !o.total.is_finite() || (f0 > 0.0 && o.total > cfg.divergence_factor * f0) {
            return Err(Error::Diverged {
                iter: k,
                reason: format!("objective {} against initial {f0}", o.total),
                last_good: Box::new(theta),
            });
        }
        params = next;
        theta = next_theta;
        obj = o;
        grad = g;
    };
    Ok(SolveOutput {
        theta,
        iterations: k,
        stop_reason,
        final_objective: obj,
        initial_exploitability: scale.initial,
        final_exploitability: last_expl,
        normalized_by_initial: scale.by_initial(),
        smoothness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::is_feasible;

    #[test]
    fn zero_parameters_map_to_uniform_flow_and_zero_values() {
        let dims = Dims::new(2, 3, 2);
        let rep = Reparametrization::new(dims, ThetaBounds::new(dims, 1.0));
        let theta = rep.map(&vec![0.0; rep.len()]);
        assert!(theta.l.iter().all(|x| (x - 1.0 / 6.0).abs() < 1e-15));
        assert!(theta.y.iter().all(|x| *x == 0.0));
        assert!(is_feasible(&theta, &rep.bounds, 1e-12));
    }

    #[test]
    fn huge_parameters_stay_finite() {
        let dims = Dims::new(2, 2, 1);
        let rep = Reparametrization::new(dims, ThetaBounds::new(dims, 1.0));
        let p: Vec<f64> = (0..rep.len()).map(|i| 800.0 * (i as f64).cos()).collect();
        let theta = rep.map(&p);
        assert!(theta.is_finite());
        assert!(is_feasible(&theta, &rep.bounds, 1e-12));
    }
}
