//! Dense two-phase primal simplex with Bland's rule.
//!
//! Problems have the form `max c·x` subject to `A_ub x <= b_ub`,
//! `A_eq x = b_eq` and `x >= 0`. Sizes here are a few hundred columns at
//! most, so the tableau is kept dense.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_LP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpProblem<T> {
    pub c: Vec<T>,
    pub a_ub: Vec<Vec<T>>,
    pub b_ub: Vec<T>,
    pub a_eq: Vec<Vec<T>>,
    pub b_eq: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub objective: T,
    pub iterations: usize,
}

impl<T: Scalar> LpProblem<T> {
    pub fn new(c: Vec<T>) -> Self {
        Self {
            c,
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            a_eq: Vec::new(),
            b_eq: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn push_ub(&mut self, row: Vec<T>, rhs: T) {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
    }

    pub fn push_eq(&mut self, row: Vec<T>, rhs: T) {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if self.a_ub.len() != self.b_ub.len() || self.a_eq.len() != self.b_eq.len() {
            return Err(Error::InvalidLp(
                "row count does not match right-hand side".into(),
            ));
        }
        let rows = self.a_ub.iter().chain(&self.a_eq);
        if let Some(bad) = rows.clone().position(|r| r.len() != n) {
            return Err(Error::InvalidLp(format!(
                "row {bad} does not have {n} columns"
            )));
        }
        let finite = self
            .c
            .iter()
            .chain(self.b_ub.iter())
            .chain(self.b_eq.iter())
            .chain(rows.flatten())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidLp("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Largest violation of any constraint, including nonnegativity.
    pub fn max_violation(&self, x: &[T]) -> T {
        let dot = |row: &[T]| row.iter().zip(x).fold(T::zero(), |a, (&r, &v)| a + r * v);
        let ub = self
            .a_ub
            .iter()
            .zip(&self.b_ub)
            .map(|(r, &b)| (dot(r) - b).max(T::zero()));
        let eq = self
            .a_eq
            .iter()
            .zip(&self.b_eq)
            .map(|(r, &b)| (dot(r) - b).abs());
        let nonneg = x.iter().map(|&v| (-v).max(T::zero()));
        ub.chain(eq).chain(nonneg).fold(T::zero(), T::max)
    }

    pub fn objective_at(&self, x: &[T]) -> T {
        self.c
            .iter()
            .zip(x)
            .fold(T::zero(), |a, (&c, &v)| a + c * v)
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    /// Reduced profits `c_j - c_B B^-1 A_j` of the current phase.
    profit: Vec<T>,
    value: T,
    tol: T,
    iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, e: usize) {
        let inv = T::one() / self.rows[r][e];
        for v in self.rows[r].iter_mut() {
            *v *= inv;
        }
        self.rhs[r] *= inv;
        self.rows[r][e] = T::one();

        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for k in 0..self.rows.len() {
            if k == r {
                continue;
            }
            let f = self.rows[k][e];
            if f != T::zero() {
                for (v, &p) in self.rows[k].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                self.rows[k][e] = T::zero();
                self.rhs[k] -= f * pivot_rhs;
                if self.rhs[k] < T::zero() && self.rhs[k] > -self.tol {
                    self.rhs[k] = T::zero();
                }
            }
        }
        let f = self.profit[e];
        if f != T::zero() {
            for (v, &p) in self.profit.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.profit[e] = T::zero();
            self.value += f * pivot_rhs;
        }
        self.basis[r] = e;
        self.iterations += 1;
    }

    fn reset_profit(&mut self, cost: &[T]) {
        self.profit = cost.to_vec();
        self.value = T::zero();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != T::zero() {
                for (v, &a) in self.profit.iter_mut().zip(&self.rows[r]) {
                    *v -= cb * a;
                }
                self.value += cb * self.rhs[r];
            }
        }
        for &b in &self.basis {
            self.profit[b] = T::zero();
        }
    }

    /// Bland's rule: lowest-index improving column, lowest-index leaving
    /// variable among ratio ties.
    fn run(&mut self, allowed: usize, limit: usize) -> Result<Step> {
        loop {
            if self.iterations > limit {
                return Err(Error::InvalidLp("simplex iteration limit exceeded".into()));
            }
            let Some(e) = (0..allowed).find(|&j| self.profit[j] > self.tol) else {
                return Ok(Step::Optimal);
            };
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][e];
                if a <= self.tol {
                    continue;
                }
                let ratio = self.rhs[r].max(T::zero()) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, best)) => {
                        let slack = self.tol * (T::one() + best.abs());
                        if ratio < best - slack
                            || ((ratio - best).abs() <= slack && self.basis[r] < self.basis[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, best))
                        }
                    }
                };
            }
            match leave {
                Some((r, _)) => self.pivot(r, e),
                None => return Ok(Step::Unbounded),
            }
        }
    }
}

/// Solves `prob` with pivot tolerance `tol`.
///
/// Rows and columns are first equilibrated by powers of two, which is exact,
/// so badly scaled channel gains do not hide pivots below the tolerance.
pub fn solve_lp<T: Scalar>(prob: &LpProblem<T>, tol: T) -> Result<LpSolution<T>> {
    prob.validate()?;
    let (scaled, col_scale) = equilibrate(prob);
    let mut sol = solve_unscaled(&scaled, tol)?;
    for (x, &s) in sol.x.iter_mut().zip(&col_scale) {
        *x *= s;
    }
    if sol.status == LpStatus::Optimal {
        sol.objective = prob.objective_at(&sol.x);
    }
    Ok(sol)
}

/// Power of two nearest to `1 / magnitude`.
fn inverse_pow2<T: Scalar>(magnitude: T) -> T {
    if magnitude > T::zero() {
        T::lit(2f64.powi(-magnitude.as_f64().log2().round() as i32))
    } else {
        T::one()
    }
}

/// Returns the scaled problem and the column factors mapping its solution back.
fn equilibrate<T: Scalar>(prob: &LpProblem<T>) -> (LpProblem<T>, Vec<T>) {
    let n = prob.num_vars();
    let row_max = |r: &[T]| r.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let scale_rows = |rows: &[Vec<T>], rhs: &[T]| -> (Vec<Vec<T>>, Vec<T>) {
        rows.iter()
            .zip(rhs)
            .map(|(r, &b)| {
                let f = inverse_pow2(row_max(r));
                (r.iter().map(|&v| v * f).collect(), b * f)
            })
            .unzip()
    };
    let (mut a_ub, b_ub) = scale_rows(&prob.a_ub, &prob.b_ub);
    let (mut a_eq, b_eq) = scale_rows(&prob.a_eq, &prob.b_eq);
    let col_scale: Vec<T> = (0..n)
        .map(|j| {
            inverse_pow2(
                a_ub.iter()
                    .chain(&a_eq)
                    .fold(T::zero(), |a, r| a.max(r[j].abs())),
            )
        })
        .collect();
    for r in a_ub.iter_mut().chain(a_eq.iter_mut()) {
        for (v, &s) in r.iter_mut().zip(&col_scale) {
            *v *= s;
        }
    }
    let c = prob
        .c
        .iter()
        .zip(&col_scale)
        .map(|(&c, &s)| c * s)
        .collect();
    (
        LpProblem {
            c,
            a_ub,
            b_ub,
            a_eq,
            b_eq,
        },
        col_scale,
    )
}

fn solve_unscaled<T: Scalar>(prob: &LpProblem<T>, tol: T) -> Result<LpSolution<T>> {
    let n = prob.num_vars();
    let m_ub = prob.a_ub.len();
    let m = m_ub + prob.a_eq.len();

    // Columns: structural | slack per inequality row | artificial where needed.
    let needs_art: Vec<bool> = (0..m)
        .map(|r| {
            if r < m_ub {
                prob.b_ub[r] < T::zero()
            } else {
                true
            }
        })
        .collect();
    let n_art = needs_art.iter().filter(|&&b| b).count();
    let width = n + m_ub + n_art;
    let art_start = n + m_ub;

    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut next_art = art_start;
    for r in 0..m {
        let (src, b) = if r < m_ub {
            (&prob.a_ub[r], prob.b_ub[r])
        } else {
            (&prob.a_eq[r - m_ub], prob.b_eq[r - m_ub])
        };
        let sign = if b < T::zero() { -T::one() } else { T::one() };
        let mut row = vec![T::zero(); width];
        for (dst, &a) in row.iter_mut().zip(src) {
            *dst = sign * a;
        }
        if r < m_ub {
            row[n + r] = sign;
        }
        if needs_art[r] {
            row[next_art] = T::one();
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(n + r);
        }
        rows.push(row);
        rhs.push(sign * b);
    }

    let mut tab = Tableau {
        rows,
        rhs,
        basis,
        profit: vec![T::zero(); width],
        value: T::zero(),
        tol,
        iterations: 0,
    };
    let limit = 50 * (width + m + 1) * (width + m + 1);

    if n_art > 0 {
        let mut phase1 = vec![T::zero(); width];
        for v in &mut phase1[art_start..] {
            *v = -T::one();
        }
        tab.reset_profit(&phase1);
        // Phase one is bounded above by zero.
        tab.run(width, limit)?;
        let scale = T::one()
            + prob
                .b_ub
                .iter()
                .chain(&prob.b_eq)
                .fold(T::zero(), |a, &b| a.max(b.abs()));
        if -tab.value > tol * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![T::zero(); n],
                objective: T::nan(),
                iterations: tab.iterations,
            });
        }
        // Drive remaining artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= art_start {
                let col = (0..art_start).find(|&j| tab.rows[r][j].abs() > tol);
                match col {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        tab.rows.remove(r);
                        tab.rhs.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    let mut cost = vec![T::zero(); width];
    cost[..n].copy_from_slice(&prob.c);
    tab.reset_profit(&cost);
    let step = tab.run(art_start, limit)?;

    let mut x = vec![T::zero(); n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs[r];
        }
    }
    let status = match step {
        Step::Optimal => LpStatus::Optimal,
        Step::Unbounded => LpStatus::Unbounded,
    };
    let objective = match status {
        LpStatus::Optimal => prob.objective_at(&x),
        _ => T::infinity(),
    };
    Ok(LpSolution {
        status,
        x,
        objective,
        iterations: tab.iterations,
    })
}
