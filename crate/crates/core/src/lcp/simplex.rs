//! Dense revised simplex with Bland's rule.
//!
//! Solves `min cᵀx  s.t.  A x = b,  0 ≤ x ≤ u` for desk-scale problems. Upper
//! bounds become extra equality rows with slack columns. Phase one minimizes
//! the sum of artificial variables; rows whose artificial cannot be pivoted out
//! are redundant and are left with a basic artificial pinned at zero.

use crate::error::{Error, Result};

/// Largest number of structural variables accepted.
pub const MAX_VARIABLES: usize = 500;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub c: Vec<f64>,
    /// Equality rows, each of length `c.len()`.
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    /// Optional finite upper bound per variable; lower bounds are zero.
    pub upper: Vec<Option<f64>>,
}

impl LpProblem {
    pub fn new(c: Vec<f64>, a_eq: Vec<Vec<f64>>, b_eq: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            c,
            a_eq,
            b_eq,
            upper: vec![None; n],
        }
    }

    pub fn with_upper_bounds(mut self, upper: Vec<Option<f64>>) -> Self {
        self.upper = upper;
        self
    }

    fn check(&self) -> Result<()> {
        let n = self.c.len();
        if n > MAX_VARIABLES {
            return Err(Error::Invalid(format!(
                "LP has {n} variables, the dense simplex accepts at most {MAX_VARIABLES}"
            )));
        }
        if self.a_eq.len() != self.b_eq.len() {
            return Err(Error::Dimension(format!(
                "{} constraint rows but {} right-hand sides",
                self.a_eq.len(),
                self.b_eq.len()
            )));
        }
        if let Some(row) = self.a_eq.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "constraint row has {} entries, expected {n}",
                row.len()
            )));
        }
        if self.upper.len() != n {
            return Err(Error::Dimension("upper bound vector length".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point (structural variables only). Empty unless optimal.
    pub x: Vec<f64>,
    pub value: f64,
    /// Multipliers of the equality rows, then of the upper-bound rows, from
    /// the final basis.
    pub duals: Vec<f64>,
    /// `bᵀπ` including the upper-bound rows.
    pub dual_value: f64,
    pub pivots: usize,
}

impl LpSolution {
    fn status_only(status: LpStatus, pivots: usize) -> Self {
        Self {
            status,
            x: Vec::new(),
            value: f64::NAN,
            duals: Vec::new(),
            dual_value: f64::NAN,
            pivots,
        }
    }
}

/// Working tableau in revised form: columns of the standardized system plus
/// an explicit basis inverse.
struct Revised {
    m: usize,
    cols: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// Row-major `m×m`.
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Revised {
    fn binv_row(&self, r: usize) -> &[f64] {
        &self.binv[r * self.m..(r + 1) * self.m]
    }

    fn ftran(&self, col: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|r| self.binv_row(r).iter().zip(col).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let mut pi = vec![0.0; self.m];
        for (r, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                pi.iter_mut()
                    .zip(self.binv_row(r))
                    .for_each(|(p, v)| *p += cb * v);
            }
        }
        pi
    }

    fn pivot(&mut self, r: usize, entering: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        self.xb[r] /= piv;
        for i in 0..m {
            if i != r && alpha[i] != 0.0 {
                let f = alpha[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
                self.xb[i] -= f * self.xb[r];
            }
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[entering] = true;
        self.basis[r] = entering;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    /// Recomputes `B⁻¹` by Gauss-Jordan elimination with partial pivoting.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for i in 0..m {
                a[i * m + k] = self.cols[j][i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let (p, pmax) = (col..m)
                .map(|i| (i, a[i * m + col].abs()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax < 1e-12 {
                return Err(Error::Numerical(format!(
                    "basis matrix is singular (pivot {pmax:e} in column {col})"
                )));
            }
            if p != col {
                for k in 0..m {
                    a.swap(p * m + k, col * m + k);
                    inv.swap(p * m + k, col * m + k);
                }
            }
            let d = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for i in 0..m {
                if i != col {
                    let f = a[i * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            a[i * m + k] -= f * a[col * m + k];
                            inv[i * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.xb = self.ftran(&self.b.clone());
        self.since_refactor = 0;
        Ok(())
    }

    fn run_phase(&mut self, cost: &[f64], allowed: &[bool]) -> Result<PhaseEnd> {
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(Error::Numerical(format!(
                    "simplex exceeded {MAX_PIVOTS} pivots"
                )));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let pi = self.duals(cost);
            // Bland: first improving column.
            let entering = (0..self.cols.len()).find(|&j| {
                allowed[j] && !self.is_basic[j] && {
                    let d = cost[j]
                        - pi.iter()
                            .zip(&self.cols[j])
                            .map(|(p, a)| p * a)
                            .sum::<f64>();
                    d < -OPT_TOL
                }
            });
            let Some(entering) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let alpha = self.ftran(&self.cols[entering]);
            let mut leave: Option<(usize, f64)> = None;
            for (r, &a) in alpha.iter().enumerate() {
                if a > PIVOT_TOL {
                    let ratio = self.xb[r].max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };
            self.pivot(r, entering, &alpha);
        }
    }
}

/// Solves a dense LP with the two-phase revised simplex method.
pub fn simplex_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.check()?;
    let n = problem.c.len();
    let bounded: Vec<usize> = (0..n).filter(|&j| problem.upper[j].is_some()).collect();
    let m_eq = problem.a_eq.len();
    let m = m_eq + bounded.len();
    let n_slack = bounded.len();
    let n_struct = n + n_slack;

    // Standardized rows with nonnegative right-hand sides.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for (row, &rhs) in problem.a_eq.iter().zip(&problem.b_eq) {
        let mut r = row.clone();
        r.resize(n_struct, 0.0);
        rows.push(r);
        b.push(rhs);
    }
    for (k, &j) in bounded.iter().enumerate() {
        let mut r = vec![0.0; n_struct];
        r[j] = 1.0;
        r[n + k] = 1.0;
        rows.push(r);
        b.push(problem.upper[j].unwrap());
    }
    let sign: Vec<f64> = b
        .iter()
        .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
        .collect();
    for i in 0..m {
        if sign[i] < 0.0 {
            rows[i].iter_mut().for_each(|x| *x = -*x);
            b[i] = -b[i];
        }
    }
    if b.iter()
        .chain(rows.iter().flatten())
        .any(|x| !x.is_finite())
    {
        return Err(Error::Invalid("non-finite LP data".into()));
    }

    let total_cols = n_struct + m;
    let mut cols = vec![vec![0.0; m]; total_cols];
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            cols[j][i] = v;
        }
        cols[n_struct + i][i] = 1.0;
    }
    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        binv[i * m + i] = 1.0;
    }
    let mut is_basic = vec![false; total_cols];
    is_basic[n_struct..].iter_mut().for_each(|x| *x = true);
    let mut lp = Revised {
        m,
        cols,
        b: b.clone(),
        basis: (n_struct..total_cols).collect(),
        is_basic,
        binv,
        xb: b.clone(),
        pivots: 0,
        since_refactor: 0,
    };

    // Phase one.
    let mut cost1 = vec![0.0; total_cols];
    cost1[n_struct..].iter_mut().for_each(|x| *x = 1.0);
    let all = vec![true; total_cols];
    lp.run_phase(&cost1, &all)?;
    lp.refactor()?;
    let infeas: f64 = lp
        .basis
        .iter()
        .zip(&lp.xb)
        .filter(|(&j, _)| j >= n_struct)
        .map(|(_, &v)| v.max(0.0))
        .sum();
    let scale = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if infeas > FEAS_TOL * scale {
        return Ok(LpSolution::status_only(LpStatus::Infeasible, lp.pivots));
    }

    // Pivot basic artificials out where a structural column allows it.
    for r in 0..m {
        if lp.basis[r] < n_struct {
            continue;
        }
        let row = lp.binv_row(r).to_vec();
        let best = (0..n_struct)
            .filter(|&j| !lp.is_basic[j])
            .map(|j| {
                (
                    j,
                    row.iter().zip(&lp.cols[j]).map(|(a, c)| a * c).sum::<f64>(),
                )
            })
            .fold((usize::MAX, 0.0f64), |acc, (j, v)| {
                if v.abs() > acc.1.abs() {
                    (j, v)
                } else {
                    acc
                }
            });
        if best.0 != usize::MAX && best.1.abs() > 1e-7 {
            let alpha = lp.ftran(&lp.cols[best.0].clone());
            lp.pivot(r, best.0, &alpha);
        }
    }
    lp.refactor()?;

    // Phase two; artificials never re-enter.
    let mut cost2 = vec![0.0; total_cols];
    cost2[..n].copy_from_slice(&problem.c);
    let mut allowed = vec![true; total_cols];
    allowed[n_struct..].iter_mut().for_each(|x| *x = false);
    match lp.run_phase(&cost2, &allowed)? {
        PhaseEnd::Unbounded => return Ok(LpSolution::status_only(LpStatus::Unbounded, lp.pivots)),
        PhaseEnd::Optimal => {}
    }
    lp.refactor()?;

    let mut x = vec![0.0; n];
    for (r, &j) in lp.basis.iter().enumerate() {
        if j < n {
            x[j] = lp.xb[r].max(0.0);
        }
    }
    let value = problem.c.iter().zip(&x).map(|(c, v)| c * v).sum();
    let pi = lp.duals(&cost2);
    let dual_value = pi.iter().zip(&b).map(|(p, v)| p * v).sum();
    let duals = pi.iter().zip(&sign).map(|(p, s)| p * s).collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        value,
        duals,
        dual_value,
        pivots: lp.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximizes_sum_on_segment() {
        let lp = LpProblem::new(vec![-1.0, -1.0], vec![vec![1.0, 1.0]], vec![1.0]);
        let sol = simplex_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        let lp = LpProblem::new(vec![0.0], vec![vec![1.0]], vec![-1.0]);
        assert_eq!(simplex_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        // min -x0 s.t. x0 - x1 = 0
        let lp = LpProblem::new(vec![-1.0, 0.0], vec![vec![1.0, -1.0]], vec![0.0]);
        assert_eq!(simplex_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn respects_upper_bounds() {
        // min -x0 - 2 x1 s.t. x0 + x1 = 3, x1 <= 1
        let lp = LpProblem::new(vec![-1.0, -2.0], vec![vec![1.0, 1.0]], vec![3.0])
            .with_upper_bounds(vec![None, Some(1.0)]);
        let sol = simplex_lp(&lp).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 1.0).abs() < 1e-12);
        assert!((sol.value - sol.dual_value).abs() < 1e-12);
    }

    #[test]
    fn tolerates_redundant_rows() {
        let lp = LpProblem::new(
            vec![1.0, 2.0, 0.0],
            vec![
                vec![1.0, 1.0, 1.0],
                vec![2.0, 2.0, 2.0],
                vec![1.0, 0.0, 0.0],
            ],
            vec![1.0, 2.0, 0.25],
        );
        let sol = simplex_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_ragged_rows() {
        let lp = LpProblem::new(vec![1.0, 1.0], vec![vec![1.0]], vec![1.0]);
        assert!(matches!(simplex_lp(&lp), Err(Error::Dimension(_))));
    }
}
