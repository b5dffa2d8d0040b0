use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    estimate_smoothness, IterationRecord, Method, SolveOutput, SolverConfig, StepRule, StopReason,
    TraceSink,
};
use crate::error::{Error, Result};
use crate::formulation::{
    accumulate_term_gradients, objective, objective_and_gradient, term_count, GradientOptions,
    TermKind, ThetaPoint, TimeEvals,
};
use crate::game::{exploitability, MeanFieldGame};
use crate::mdp::policy_from_occupation;
use crate::projection::{is_feasible, project_theta, ThetaBounds};

const MAX_BACKTRACKS: usize = 60;

pub(crate) struct Clock {
    start: Instant,
    record: bool,
}

impl Clock {
    pub fn start(record: bool) -> Self {
        Self {
            start: Instant::now(),
            record,
        }
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    pub fn stamp(&self) -> f64 {
        if self.record {
            self.elapsed()
        } else {
            0.0
        }
    }

    pub fn over(&self, budget: Option<f64>) -> bool {
        budget.is_some_and(|b| self.elapsed() >= b)
    }
}

/// `Expl(π)` for `π ∈ Π(L)` (uniform on unvisited states).
pub(crate) fn flow_exploitability<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta: &ThetaPoint,
) -> Result<f64> {
    let pi = policy_from_occupation(&theta.flow(), None);
    exploitability(game, &pi)
}

pub(crate) fn resolve_smoothness<G: MeanFieldGame + ?Sized>(
    game: &G,
    cfg: &SolverConfig,
) -> Result<Option<f64>> {
    if let Some(m) = cfg.smoothness_estimate {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Config(format!(
                "smoothness estimate must be positive, got {m}"
            )));
        }
        return Ok(Some(m));
    }
    if cfg.needs_smoothness() {
        return estimate_smoothness(game, cfg.smoothness_samples, cfg.seed).map(Some);
    }
    Ok(None)
}

/// Normalizes exploitability by its initial value, or returns it unchanged
/// when the initial value is zero.
pub(crate) struct ExplScale {
    pub initial: f64,
}

impl ExplScale {
    pub fn normalized(&self, expl: f64) -> f64 {
        if self.initial > 0.0 {
            expl / self.initial
        } else {
            expl
        }
    }

    pub fn by_initial(&self) -> bool {
        self.initial > 0.0
    }
}

pub(crate) fn check_config(cfg: &SolverConfig) -> Result<()> {
    if cfg.eval_every == 0 {
        return Err(Error::Config("eval_every must be at least 1".into()));
    }
    if let StepRule::Constant { eta } = cfg.step_rule() {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!(
                "step size must be positive, got {eta}"
            )));
        }
    }
    if let StepRule::Armijo { initial, shrink } = cfg.step_rule() {
        if !(initial > 0.0) || !(shrink > 0.0 && shrink < 1.0) {
            return Err(Error::Config(
                "Armijo needs initial > 0 and shrink in (0, 1)".into(),
            ));
        }
    }
    Ok(())
}

/// `‖G_η(θ)‖₂ = ‖θ − Proj_Θ(θ − η∇f(θ))‖₂ / η`.
pub fn stationarity<G: MeanFieldGame + ?Sized>(game: &G, theta: &ThetaPoint, eta: f64) -> f64 {
    let bounds = ThetaBounds::new(game.dims(), game.r_max());
    let grad = crate::formulation::gradient(game, theta);
    grad_map_norm(theta, &grad, eta, &bounds)
}

fn grad_map_norm(theta: &ThetaPoint, grad: &ThetaPoint, eta: f64, bounds: &ThetaBounds) -> f64 {
    let moved = project_theta(&theta.add_scaled(-eta, grad), bounds);
    theta.distance(&moved) / eta
}

/// Projected gradient descent, whatever `cfg.method` says.
pub fn pgd<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta0: &ThetaPoint,
    cfg: &SolverConfig,
    sink: &mut dyn TraceSink,
) -> Result<SolveOutput> {
    let cfg = SolverConfig {
        method: Method::Pgd,
        reparametrized: false,
        ..cfg.clone()
    };
    run_projected(game, theta0, &cfg, sink)
}

/// Projected stochastic gradient descent with minibatches of terms.
pub fn spgd<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta0: &ThetaPoint,
    cfg: &SolverConfig,
    sink: &mut dyn TraceSink,
) -> Result<SolveOutput> {
    let cfg = SolverConfig {
        method: Method::Spgd,
        reparametrized: false,
        ..cfg.clone()
    };
    run_projected(game, theta0, &cfg, sink)
}

/// Projected Adam or NAdam (`cfg.method` must be one of them).
pub fn adam_family<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta0: &ThetaPoint,
    cfg: &SolverConfig,
    sink: &mut dyn TraceSink,
) -> Result<SolveOutput> {
    if !matches!(cfg.method, Method::Adam | Method::Nadam) {
        return Err(Error::Config(
            "adam_family needs method adam or nadam".into(),
        ));
    }
    let cfg = SolverConfig {
        reparametrized: false,
        ..cfg.clone()
    };
    run_projected(game, theta0, &cfg, sink)
}

/// Runs the configured method.
pub fn solve<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta0: &ThetaPoint,
    cfg: &SolverConfig,
    sink: &mut dyn TraceSink,
) -> Result<SolveOutput> {
    if cfg.reparametrized {
        super::reparametrized_solve(game, theta0, cfg, sink)
    } else {
        run_projected(game, theta0, cfg, sink)
    }
}

/// Gradient estimate `(n/|B|)·Σ_{i∈B} ∇f_i` over a batch of `batch` terms
/// drawn without replacement.
pub fn stochastic_gradient<G: MeanFieldGame + ?Sized, R: Rng + ?Sized>(
    game: &G,
    theta: &ThetaPoint,
    batch: usize,
    rng: &mut R,
    opts: GradientOptions,
) -> Result<ThetaPoint> {
    let dims = theta.dims;
    let n = term_count(dims);
    if !(1..=n).contains(&batch) {
        return Err(Error::Config(format!(
            "batch size {batch} outside [1, {n}]"
        )));
    }
    let mut picked = rand::seq::index::sample(rng, n, batch).into_vec();
    picked.sort_unstable();
    let mut needed = vec![false; dims.n_times()];
    for &i in &picked {
        if let Some(t) = TermKind::of_index(dims, i).time() {
            needed[t] = true;
        }
    }
    let evals = TimeEvals::for_times(game, theta, &needed, true, opts)?;
    let w = n as f64 / batch as f64;
    let mut grad = ThetaPoint::zeros(dims);
    accumulate_term_gradients(
        game,
        theta,
        &evals,
        picked.into_iter().map(|i| (i, w)),
        &mut grad,
    );
    Ok(grad)
}

pub(crate) struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    steps: i32,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            steps: 0,
        }
    }

    /// Returns the update direction (to be scaled by `-η`).
    pub fn direction(&mut self, grad: &[f64], cfg: &SolverConfig) -> Vec<f64> {
        let p = cfg.adam;
        let nesterov = cfg.method == Method::Nadam;
        self.steps += 1;
        let c1 = 1.0 - p.beta1.powi(self.steps);
        let c2 = 1.0 - p.beta2.powi(self.steps);
        let mut dir = Vec::with_capacity(grad.len());
        for ((m, v), g) in self.m.iter_mut().zip(self.v.iter_mut()).zip(grad) {
            *m = p.beta1 * *m + (1.0 - p.beta1) * g;
            *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
            let m_hat = if nesterov {
                p.beta1 * *m / c1 + (1.0 - p.beta1) * g / c1
            } else {
                *m / c1
            };
            dir.push(m_hat / ((*v / c2).sqrt() + p.epsilon));
        }
        dir
    }
}

fn run_projected<G: MeanFieldGame + ?Sized>(
    game: &G,
    theta0: &ThetaPoint,
    cfg: &SolverConfig,
    sink: &mut dyn TraceSink,
) -> Result<SolveOutput> {
    check_config(cfg)?;
    let dims = game.dims();
    if theta0.dims != dims {
        return Err(Error::Dimension(format!(
            "initial point has dims {:?}, game has {:?}",
            theta0.dims, dims
        )));
    }
    let bounds = ThetaBounds::new(dims, game.r_max());
    let mut theta = theta0.clone();
    if !is_feasible(&theta, &bounds, 1e-12) {
        log::warn!("initial point is outside the feasible set; projecting it");
        theta = project_theta(&theta, &bounds);
    }
    let opts = cfg.gradient_options();
    let smoothness = resolve_smoothness(game, cfg)?;
    let rule = cfg.step_rule();
    let clock = Clock::start(cfg.record_time);
    let n_terms = term_count(dims);
    let batch = cfg.batch_size.unwrap_or((n_terms / 10).max(1));
    if cfg.method == Method::Spgd && !(1..=n_terms).contains(&batch) {
        return Err(Error::Config(format!(
            "batch size {batch} outside [1, {n_terms}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(theta.len());

    let stochastic = cfg.method == Method::Spgd;
    let (obj0, grad0) = objective_and_gradient(game, &theta, opts)?;
    let f0 = obj0.total;
    if !f0.is_finite() {
        return Err(Error::Numerical(
            "objective is not finite at the initial point".into(),
        ));
    }
    let mut obj = Some(obj0);
    let mut grad = Some(grad0);
    let scale = ExplScale {
        initial: flow_exploitability(game, &theta)?,
    };
    if !scale.by_initial() {
        log::warn!("initial exploitability is zero; reporting absolute exploitability");
    }
    let mut last_expl = scale.initial;
    let mut armijo_eta = match rule {
        StepRule::Armijo { initial, .. } => initial,
        _ => 0.0,
    };

    let mut k = 0usize;
    let stop_reason = loop {
        let eval_now = k.is_multiple_of(cfg.eval_every);
        if stochastic && eval_now && obj.is_none() {
            let (o, g) = objective_and_gradient(game, &theta, opts)?;
            if !o.total.is_finite() || (f0 > 0.0 && o.total > cfg.divergence_factor * f0) {
                return Err(Error::Diverged {
                    iter: k,
                    reason: format!("objective {} against initial {f0}", o.total),
                    last_good: Box::new(theta),
                });
            }
            obj = Some(o);
            grad = Some(g);
        }

        // Candidate step from θ_k.
        let mut eta = rule.eta(k, smoothness);
        let next = match cfg.method {
            Method::Pgd => {
                let g = grad.as_ref().expect("full gradient available");
                if let StepRule::Armijo { initial, shrink } = rule {
                    let f = obj.expect("objective available").total;
                    let mut trial = (armijo_eta / shrink).min(initial);
                    let mut accepted = None;
                    for _ in 0..MAX_BACKTRACKS {
                        let cand = project_theta(&theta.add_scaled(-trial, g), &bounds);
                        let diff = cand.add_scaled(-1.0, &theta);
                        let model = f + g.dot(&diff) + diff.dot(&diff) / (2.0 * trial);
                        if objective(game, &cand).total <= model {
                            accepted = Some(cand);
                            break;
                        }
                        trial *= shrink;
                    }
                    armijo_eta = trial;
                    eta = trial;
                    accepted.unwrap_or_else(|| theta.clone())
                } else {
                    project_theta(&theta.add_scaled(-eta, g), &bounds)
                }
            }
            Method::Spgd => {
                let g_hat = stochastic_gradient(game, &theta, batch, &mut rng, opts)?;
                project_theta(&theta.add_scaled(-eta, &g_hat), &bounds)
            }
            Method::Adam | Method::Nadam => {
                let g = grad.as_ref().expect("full gradient available");
                let dir = adam.direction(&g.to_vec(), cfg);
                let dir = ThetaPoint::from_vec(dims, &dir)?;
                project_theta(&theta.add_scaled(-eta, &dir), &bounds)
            }
        };

        let grad_map = match (cfg.method, &grad) {
            (Method::Pgd, _) => Some(theta.distance(&next) / eta),
            (_, Some(g)) => Some(grad_map_norm(&theta, g, eta, &bounds)),
            _ => None,
        };

        let stop = if obj.is_some_and(|o| o.total <= cfg.stopping.objective_tol) {
            Some(StopReason::ObjectiveTolerance)
        } else if cfg.stopping.stationarity_tol > 0.0
            && grad_map.is_some_and(|g| g <= cfg.stopping.stationarity_tol)
        {
            Some(StopReason::Stationary)
        } else if clock.over(cfg.stopping.wall_clock_budget) {
            Some(StopReason::WallClock)
        } else if k >= cfg.max_iters {
            Some(StopReason::MaxIterations)
        } else {
            None
        };

        let expl = if eval_now || stop.is_some() {
            last_expl = flow_exploitability(game, &theta)?;
            Some(last_expl)
        } else {
            None
        };
        sink.record(&IterationRecord {
            iter: k,
            wall_time_s: clock.stamp(),
            objective: obj,
            grad_map_norm: grad_map,
            exploitability: expl,
            normalized_exploitability: expl.map(|e| scale.normalized(e)),
            step_size: Some(eta),
        })?;
        if let Some(reason) = stop {
            break reason;
        }

        if !next.is_finite() {
            return Err(Error::Diverged {
                iter: k + 1,
                reason: "non-finite iterate".into(),
                last_good: Box::new(theta),
            });
        }
        let prev = std::mem::replace(&mut theta, next);
        k += 1;
        if stochastic {
            obj = None;
            grad = None;
        } else {
            let (o, g) = objective_and_gradient(game, &theta, opts)?;
            if !o.total.is_finite() || (f0 > 0.0 && o.total > cfg.divergence_factor * f0) {
                return Err(Error::Diverged {
                    iter: k,
                    reason: format!("objective {} against initial {f0}", o.total),
                    last_good: Box::new(prev),
                });
            }
            obj = Some(o);
            grad = Some(g);
        }
    };

    let final_objective = match obj {
        Some(o) => o,
        None => objective(game, &theta),
    };
    Ok(SolveOutput {
        theta,
        iterations: k,
        stop_reason,
        final_objective,
        initial_exploitability: scale.initial,
        final_exploitability: last_expl,
        normalized_by_initial: scale.by_initial(),
        smoothness,
    })
}
