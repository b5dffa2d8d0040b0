//! Finite-horizon tabular MDPs.
//!
//! Dynamic programming (optimal values and policy evaluation), forward
//! propagation of occupation measures, policy recovery from occupation
//! measures, and the occupation-measure linear program whose value equals the
//! value of the MDP.

use crate::error::{Error, Result};
use crate::lcp::simplex::{simplex_lp, LpProblem, LpStatus};
use crate::types::{check_distribution, Dims, MeanFieldFlow, PolicySequence, PROB_TOL};

/// Occupation measures `d_t(s,a) = P(s_t = s, a_t = a)` share the flow layout.
pub type OccupationMeasure = MeanFieldFlow;

/// Default size limit `S·A·(T+1)` for [`lp_oracle`].
pub const LP_ORACLE_LIMIT: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMdp {
    dims: Dims,
    mu0: Vec<f64>,
    /// `T` tensors, entry `p_t(s'|s,a)` at [`Dims::p_idx`].
    transitions: Vec<Vec<f64>>,
    /// `T+1` column-major `S×A` reward matrices.
    rewards: Vec<Vec<f64>>,
}

impl FiniteMdp {
    /// Validates shapes and probabilities to [`PROB_TOL`].
    pub fn new(
        dims: Dims,
        mu0: Vec<f64>,
        transitions: Vec<Vec<f64>>,
        rewards: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mdp = Self::from_parts_unchecked(dims, mu0, transitions, rewards)?;
        mdp.validate(PROB_TOL)?;
        Ok(mdp)
    }

    /// Like [`FiniteMdp::new`] but first rescales every distribution to sum to
    /// one. Meant for data loaded from text files; negative entries are still
    /// rejected.
    pub fn new_renormalized(
        dims: Dims,
        mut mu0: Vec<f64>,
        mut transitions: Vec<Vec<f64>>,
        rewards: Vec<Vec<f64>>,
    ) -> Result<Self> {
        renormalize(&mut mu0);
        for p in transitions.iter_mut() {
            for col in p.chunks_mut(dims.n_states) {
                renormalize(col);
            }
        }
        Self::new(dims, mu0, transitions, rewards)
    }

    fn from_parts_unchecked(
        dims: Dims,
        mu0: Vec<f64>,
        transitions: Vec<Vec<f64>>,
        rewards: Vec<Vec<f64>>,
    ) -> Result<Self> {
        dims.check_nonempty()?;
        if mu0.len() != dims.n_states {
            return Err(Error::Dimension(format!(
                "mu0 has {} entries, expected {}",
                mu0.len(),
                dims.n_states
            )));
        }
        if transitions.len() != dims.horizon {
            return Err(Error::Dimension(format!(
                "{} transition tensors, expected {}",
                transitions.len(),
                dims.horizon
            )));
        }
        if rewards.len() != dims.n_times() {
            return Err(Error::Dimension(format!(
                "{} reward matrices, expected {}",
                rewards.len(),
                dims.n_times()
            )));
        }
        if let Some(p) = transitions
            .iter()
            .find(|p| p.len() != dims.transition_len())
        {
            return Err(Error::Dimension(format!(
                "transition tensor has {} entries, expected {}",
                p.len(),
                dims.transition_len()
            )));
        }
        if let Some(r) = rewards.iter().find(|r| r.len() != dims.sa()) {
            return Err(Error::Dimension(format!(
                "reward matrix has {} entries, expected {}",
                r.len(),
                dims.sa()
            )));
        }
        Ok(Self {
            dims,
            mu0,
            transitions,
            rewards,
        })
    }

    fn validate(&self, tol: f64) -> Result<()> {
        check_distribution(&self.mu0, tol, "mu0")?;
        for (t, p) in self.transitions.iter().enumerate() {
            for (j, col) in p.chunks(self.dims.n_states).enumerate() {
                check_distribution(col, tol, &format!("p_{t}(.|column {j})"))?;
            }
        }
        if self.rewards.iter().flatten().any(|r| !r.is_finite()) {
            return Err(Error::Invalid("non-finite reward".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }

    pub fn transition(&self, t: usize) -> &[f64] {
        &self.transitions[t]
    }

    pub fn transitions(&self) -> &[Vec<f64>] {
        &self.transitions
    }

    pub fn reward(&self, t: usize) -> &[f64] {
        &self.rewards[t]
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.rewards
    }

    /// Largest absolute reward.
    pub fn r_max(&self) -> f64 {
        self.rewards
            .iter()
            .flatten()
            .fold(0.0, |m, r| f64::max(m, r.abs()))
    }

    /// `Σ_{s'} p_t(s'|s,a) v(s')` for every column `(s,a)`.
    fn expected_next(&self, t: usize, v: &[f64]) -> Vec<f64> {
        self.transitions[t]
            .chunks(self.dims.n_states)
            .map(|col| col.iter().zip(v).map(|(p, x)| p * x).sum())
            .collect()
    }
}

fn renormalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
}

/// Values `V_t` and Q-tables `q_t(s,a)` for `t = 0..=T`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub values: Vec<Vec<f64>>,
    /// Column-major `S×A` matrices.
    pub q: Vec<Vec<f64>>,
}

impl ValueTable {
    /// `Σ_s μ0(s) V_0(s)`
    pub fn initial_value(&self, mu0: &[f64]) -> f64 {
        self.values[0].iter().zip(mu0).map(|(v, m)| v * m).sum()
    }

    /// Deterministic greedy policy; the lowest action index wins ties.
    pub fn greedy_policy(&self, dims: Dims) -> PolicySequence {
        PolicySequence::deterministic(dims, |t, s| {
            let mut best = 0;
            for a in 1..dims.n_actions {
                if self.q[t][dims.idx(s, a)] > self.q[t][dims.idx(s, best)] {
                    best = a;
                }
            }
            best
        })
    }
}

/// Optimal values by backward recursion:
/// `V_T(s) = max_a r_T(s,a)`, `V_t(s) = max_a { r_t(s,a) + Σ_{s'} p_t(s'|s,a) V_{t+1}(s') }`.
pub fn value_iteration(mdp: &FiniteMdp) -> ValueTable {
    let dims = mdp.dims;
    let n = dims.n_times();
    let mut values = vec![Vec::new(); n];
    let mut q = vec![Vec::new(); n];
    for t in (0..n).rev() {
        let mut qt = mdp.rewards[t].clone();
        if t < dims.horizon {
            let next = mdp.expected_next(t, &values[t + 1]);
            qt.iter_mut().zip(&next).for_each(|(x, e)| *x += e);
        }
        values[t] = (0..dims.n_states)
            .map(|s| {
                (0..dims.n_actions)
                    .map(|a| qt[dims.idx(s, a)])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        q[t] = qt;
    }
    ValueTable { values, q }
}

/// Values of a fixed policy by backward recursion. The Q-tables hold
/// `q_t^π(s,a) = r_t(s,a) + Σ_{s'} p_t(s'|s,a) V_{t+1}^π(s')`.
pub fn policy_evaluation(mdp: &FiniteMdp, pi: &PolicySequence) -> Result<ValueTable> {
    let dims = mdp.dims;
    if pi.dims != dims {
        return Err(Error::Dimension(format!(
            "policy dims {:?} do not match MDP dims {:?}",
            pi.dims, dims
        )));
    }
    let n = dims.n_times();
    let mut values = vec![Vec::new(); n];
    let mut q = vec![Vec::new(); n];
    for t in (0..n).rev() {
        let mut qt = mdp.rewards[t].clone();
        if t < dims.horizon {
            let next = mdp.expected_next(t, &values[t + 1]);
            qt.iter_mut().zip(&next).for_each(|(x, e)| *x += e);
        }
        let pit = pi.slice(t);
        values[t] = (0..dims.n_states)
            .map(|s| {
                (0..dims.n_actions)
                    .map(|a| pit[dims.idx(s, a)] * qt[dims.idx(s, a)])
                    .sum()
            })
            .collect();
        q[t] = qt;
    }
    Ok(ValueTable { values, q })
}

/// Forward recursion `d_0(s,a) = μ0(s) π_0(a|s)`,
/// `d_{t+1}(s,a) = π_{t+1}(a|s) Σ_{s',a'} d_t(s',a') p_t(s|s',a')`.
pub fn propagate_occupation(mdp: &FiniteMdp, pi: &PolicySequence) -> Result<OccupationMeasure> {
    let dims = mdp.dims;
    if pi.dims != dims {
        return Err(Error::Dimension(format!(
            "policy dims {:?} do not match MDP dims {:?}",
            pi.dims, dims
        )));
    }
    let mut d = MeanFieldFlow::zeros(dims);
    let mut marginal = mdp.mu0.clone();
    for t in 0..dims.n_times() {
        let pit = pi.slice(t);
        {
            let dt = d.slice_mut(t);
            for a in 0..dims.n_actions {
                for s in 0..dims.n_states {
                    let j = dims.idx(s, a);
                    dt[j] = marginal[s] * pit[j];
                }
            }
        }
        if t < dims.horizon {
            marginal = push_forward(dims, d.slice(t), &mdp.transitions[t]);
        }
    }
    Ok(d)
}

/// State distribution after one step: `Σ_{s,a} d(s,a) p(s'|s,a)`.
pub(crate) fn push_forward(dims: Dims, d_t: &[f64], p_t: &[f64]) -> Vec<f64> {
    let s_n = dims.n_states;
    let mut next = vec![0.0; s_n];
    for (j, col) in p_t.chunks(s_n).enumerate() {
        let w = d_t[j];
        if w != 0.0 {
            next.iter_mut().zip(col).for_each(|(x, p)| *x += w * p);
        }
    }
    next
}

/// Policy recovery `π_t(a|s) = d_t(s,a) / Σ_{a'} d_t(s,a')`.
///
/// Rows with zero state marginal copy `tie_policy` when given, otherwise they
/// are uniform.
pub fn policy_from_occupation(
    d: &OccupationMeasure,
    tie_policy: Option<&PolicySequence>,
) -> PolicySequence {
    let dims = d.dims;
    let uniform = 1.0 / dims.n_actions as f64;
    let mut pi = PolicySequence {
        dims,
        data: vec![0.0; dims.flow_len()],
    };
    for t in 0..dims.n_times() {
        let dt = d.slice(t);
        for s in 0..dims.n_states {
            let total: f64 = (0..dims.n_actions)
                .map(|a| dt[dims.idx(s, a)].max(0.0))
                .sum();
            for a in 0..dims.n_actions {
                let v = if total > 0.0 {
                    dt[dims.idx(s, a)].max(0.0) / total
                } else {
                    tie_policy.map_or(uniform, |tp| tp.get(t, s, a))
                };
                pi.set(t, s, a, v);
            }
        }
    }
    pi
}

/// Solves the occupation-measure LP
/// `max Σ d_t(s,a) r_t(s,a)` subject to flow conservation and `Σ_a d_0(s,a) = μ0(s)`.
///
/// Returns the optimal value and an optimal occupation measure.
pub fn lp_oracle(mdp: &FiniteMdp) -> Result<(f64, OccupationMeasure)> {
    lp_oracle_with_limit(mdp, LP_ORACLE_LIMIT)
}

pub fn lp_oracle_with_limit(mdp: &FiniteMdp, limit: usize) -> Result<(f64, OccupationMeasure)> {
    let dims = mdp.dims;
    let n = dims.flow_len();
    if n > limit {
        return Err(Error::Invalid(format!(
            "occupation LP has {n} variables, limit is {limit}"
        )));
    }
    let (a_eq, b_eq) = occupation_constraints(mdp);
    let c: Vec<f64> = mdp.rewards.iter().flatten().map(|r| -r).collect();
    let sol = simplex_lp(&LpProblem::new(c, a_eq, b_eq))?;
    match sol.status {
        LpStatus::Optimal => {
            let mut d = MeanFieldFlow::from_raw(dims, sol.x)?;
            d.data.iter_mut().for_each(|x| *x = x.max(0.0));
            Ok((-sol.value, d))
        }
        other => Err(Error::Internal(format!(
            "occupation LP reported {other:?} for a valid MDP"
        ))),
    }
}

/// Rows of `A d = b` in the block layout shared with the optimization
/// formulation: rows `t·S..(t+1)·S` encode `Σ_{s,a} d_t(s,a) p_t(l|s,a) − Σ_a d_{t+1}(l,a) = 0`,
/// the final `S` rows encode `Σ_a d_0(s,a) = μ0(s)`.
pub(crate) fn occupation_constraints(mdp: &FiniteMdp) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dims = mdp.dims;
    let (s_n, sa, n) = (dims.n_states, dims.sa(), dims.flow_len());
    let mut rows = Vec::with_capacity(dims.value_len());
    let mut b = Vec::with_capacity(dims.value_len());
    for t in 0..dims.horizon {
        let p = &mdp.transitions[t];
        for l in 0..s_n {
            let mut row = vec![0.0; n];
            for j in 0..sa {
                row[t * sa + j] = p[l + s_n * j];
            }
            for a in 0..dims.n_actions {
                row[(t + 1) * sa + dims.idx(l, a)] -= 1.0;
            }
            rows.push(row);
            b.push(0.0);
        }
    }
    for s in 0..s_n {
        let mut row = vec![0.0; n];
        for a in 0..dims.n_actions {
            row[dims.idx(s, a)] = 1.0;
        }
        rows.push(row);
        b.push(mdp.mu0[s]);
    }
    (rows, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bandit(r: Vec<f64>) -> FiniteMdp {
        let a = r.len();
        FiniteMdp::new(Dims::new(1, a, 0), vec![1.0], vec![], vec![r]).unwrap()
    }

    fn single_cell(horizon: usize) -> FiniteMdp {
        FiniteMdp::new(
            Dims::new(1, 1, horizon),
            vec![1.0],
            vec![vec![1.0]; horizon],
            vec![vec![1.0]; horizon + 1],
        )
        .unwrap()
    }

    #[test]
    fn single_cell_values_sum_rewards() {
        let vt = value_iteration(&single_cell(1));
        assert_eq!(vt.values[0], vec![2.0]);
        assert_eq!(vt.values[1], vec![1.0]);
    }

    #[test]
    fn bandit_value_and_uniform_evaluation() {
        let mdp = bandit(vec![1.0, 0.0]);
        assert_eq!(value_iteration(&mdp).values[0], vec![1.0]);
        let pi = PolicySequence::uniform(mdp.dims());
        let v = policy_evaluation(&mdp, &pi).unwrap();
        assert!((v.initial_value(mdp.mu0()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn greedy_breaks_ties_toward_lowest_action() {
        let mdp = bandit(vec![1.0, 1.0, 0.5]);
        let pi = value_iteration(&mdp).greedy_policy(mdp.dims());
        assert_eq!(pi.slice(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn occupation_of_single_cell_is_one() {
        let mdp = single_cell(3);
        let d = propagate_occupation(&mdp, &PolicySequence::uniform(mdp.dims())).unwrap();
        assert!(d.data.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn deterministic_chain_traces_indicator() {
        // Three states on a ring; action 0 moves forward, action 1 stays.
        let dims = Dims::new(3, 2, 3);
        let mut p = vec![0.0; dims.transition_len()];
        for s in 0..3 {
            p[dims.p_idx((s + 1) % 3, s, 0)] = 1.0;
            p[dims.p_idx(s, s, 1)] = 1.0;
        }
        let mdp =
            FiniteMdp::new(dims, vec![1.0, 0.0, 0.0], vec![p; 3], vec![vec![0.0; 6]; 4]).unwrap();
        // forward, stay, forward, anything
        let pi = PolicySequence::deterministic(dims, |t, _| if t == 1 { 1 } else { 0 });
        let d = propagate_occupation(&mdp, &pi).unwrap();
        let expect = [(0, 0, 0), (1, 1, 1), (2, 1, 0), (3, 2, 0)];
        for (t, s, a) in expect {
            assert_eq!(d.get(t, s, a), 1.0, "t={t}");
            assert!((d.slice(t).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn policy_recovery_normalizes_and_defaults_uniform() {
        let dims = Dims::new(2, 2, 0);
        // state 0 row (0.2, 0.2); state 1 has zero mass... but slice must sum to 1
        let d = MeanFieldFlow::from_raw(dims, vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        let pi = policy_from_occupation(&d, None);
        assert_eq!(pi.get(0, 0, 0), 0.5);
        assert_eq!(pi.get(0, 0, 1), 0.5);
        assert_eq!(pi.get(0, 1, 0), 0.5);
        assert_eq!(pi.get(0, 1, 1), 0.5);

        let d = MeanFieldFlow::from_raw(dims, vec![0.2, 0.0, 0.2, 0.0]).unwrap();
        let tie = PolicySequence::deterministic(dims, |_, _| 1);
        let pi = policy_from_occupation(&d, Some(&tie));
        assert_eq!(pi.get(0, 0, 0), 0.5);
        assert_eq!(pi.get(0, 1, 1), 1.0);
        assert_eq!(pi.get(0, 1, 0), 0.0);
    }

    #[test]
    fn lp_oracle_small_cases() {
        let (v, d) = lp_oracle(&single_cell(1)).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert!(d.data.iter().all(|x| (x - 1.0).abs() < 1e-12));

        let (v, d) = lp_oracle(&bandit(vec![1.0, 0.0])).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!((d.data[0] - 1.0).abs() < 1e-12 && d.data[1].abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let dims = Dims::new(1, 2, 0);
        assert!(matches!(
            FiniteMdp::new(dims, vec![1.0], vec![], vec![vec![1.0]]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            FiniteMdp::new(dims, vec![0.9], vec![], vec![vec![1.0, 0.0]]),
            Err(Error::Invalid(_))
        ));
        let mdp = FiniteMdp::new_renormalized(
            Dims::new(2, 1, 1),
            vec![0.5, 0.5 + 1e-9],
            vec![vec![0.3, 0.7 + 1e-10, 1.0, 0.0]],
            vec![vec![0.0; 2]; 2],
        )
        .unwrap();
        assert!((mdp.mu0().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
