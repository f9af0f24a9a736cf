//! Brute-force references: grid searches over powers and prices, and vertex
//! enumeration for small linear programs. Slow by construction; they exist to
//! check the fast paths.

use crate::error::{Error, Result};
use crate::game::solve_ne_default;
use crate::lp::{LpProblem, LpStatus};
use crate::model::{NetworkInstance, PowerVector, PriceVector};
use crate::pricing::uniform::price_upper_bound;
use crate::scalar::Scalar;

pub const DEFAULT_PRICE_GRID: usize = 10_000;
pub const DEFAULT_POWER_GRID: usize = 10_000;
pub const DEFAULT_AXIS_GRID: usize = 200;
pub const MAX_GRID_USERS: usize = 4;

fn grid<T: Scalar>(hi: T, points: usize) -> impl Iterator<Item = T> {
    let last = T::from_usize(points.saturating_sub(1).max(1)).unwrap();
    (0..points).map(move |k| hi * T::from_usize(k).unwrap() / last)
}

fn payoff<T: Scalar>(inst: &NetworkInstance<T>, p: &[T], price: T, i: usize) -> T {
    let mut ipn = inst.sigma2();
    for (j, &pj) in p.iter().enumerate() {
        if j != i {
            ipn += pj * inst.h(j, i);
        }
    }
    inst.w()[i] * (p[i] * inst.h(i, i) / ipn).ln_1p() - p[i] * inst.g()[i] * price
}

/// Largest payoff gain any single user obtains by deviating from `p_claim`
/// to the best of `grid_points` equally spaced powers in `[0, p_max_i]`.
pub fn grid_ne_check<T: Scalar>(
    inst: &NetworkInstance<T>,
    prices: &[T],
    p_claim: &[T],
    grid_points: usize,
) -> Result<T> {
    let n = inst.n();
    if prices.len() != n || p_claim.len() != n {
        return Err(Error::Dimension(format!("expected {n} prices and powers")));
    }
    if grid_points < 2 {
        return Err(Error::InvalidConfig(
            "grid needs at least two points".into(),
        ));
    }
    let mut worst = T::neg_infinity();
    let mut p = p_claim.to_vec();
    for i in 0..n {
        let base = payoff(inst, &p, prices[i], i);
        let mut best = T::neg_infinity();
        for x in grid(inst.p_max()[i], grid_points) {
            p[i] = x;
            best = best.max(payoff(inst, &p, prices[i], i));
        }
        p[i] = p_claim[i];
        worst = worst.max(best - base);
    }
    Ok(worst)
}

/// Exhaustive uniform-price search over `price_grid_points` prices in
/// `[0, pi_u]`, without early stopping. Returns the feasible
/// revenue-maximizing `(price, revenue)`; ties go to the lowest price index.
pub fn grid_uniform_search<T: Scalar>(
    inst: &NetworkInstance<T>,
    price_grid_points: usize,
) -> Result<(T, T)> {
    if price_grid_points < 2 {
        return Err(Error::InvalidConfig(
            "grid needs at least two points".into(),
        ));
    }
    let n = inst.n();
    let mut best: Option<(T, T)> = None;
    for price in grid(price_upper_bound(inst), price_grid_points) {
        let ne = solve_ne_default(inst, &PriceVector::uniform(n, price))?;
        let itf = ne
            .powers
            .iter()
            .zip(inst.g())
            .fold(T::zero(), |a, (&p, &g)| a + p * g);
        if itf > inst.i_th() {
            continue;
        }
        let revenue = price * itf;
        if best.is_none_or(|(_, r)| revenue > r) {
            best = Some((price, revenue));
        }
    }
    Ok(best.expect("zero price or upper bound is always evaluated"))
}

/// Exhaustive search of `sum_i p_i w_i h_ii / (sum_j p_j h_ji + sigma2)` over
/// the power grid intersected with the interference constraint.
pub fn grid_revenue_max<T: Scalar>(
    inst: &NetworkInstance<T>,
    per_axis_points: usize,
) -> Result<(PowerVector<T>, T)> {
    let n = inst.n();
    if n > MAX_GRID_USERS {
        return Err(Error::OracleTooLarge {
            n,
            max: MAX_GRID_USERS,
        });
    }
    if per_axis_points < 2 {
        return Err(Error::InvalidConfig(
            "grid needs at least two points".into(),
        ));
    }
    let axes: Vec<Vec<T>> = (0..n)
        .map(|i| grid(inst.p_max()[i], per_axis_points).collect())
        .collect();
    let mut idx = vec![0usize; n];
    let mut p = vec![T::zero(); n];
    let mut best = (vec![T::zero(); n], T::neg_infinity());
    loop {
        for i in 0..n {
            p[i] = axes[i][idx[i]];
        }
        let itf = p
            .iter()
            .zip(inst.g())
            .fold(T::zero(), |a, (&x, &g)| a + x * g);
        if itf <= inst.i_th() {
            let mut obj = T::zero();
            for i in 0..n {
                let mut denom = inst.sigma2();
                for (j, &pj) in p.iter().enumerate() {
                    denom += pj * inst.h(j, i);
                }
                obj += p[i] * inst.w()[i] * inst.h(i, i) / denom;
            }
            if obj > best.1 {
                best = (p.clone(), obj);
            }
        }
        // Odometer increment; the last axis varies fastest.
        let mut k = n;
        loop {
            if k == 0 {
                return Ok((PowerVector(best.0), best.1));
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < per_axis_points {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Result of [`lp_vertex_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSearch<T> {
    pub status: LpStatus,
    pub objective: T,
    pub x: Vec<T>,
}

/// Solves a small LP by enumerating every basic solution.
///
/// Feasible LPs over `x >= 0` always have a vertex, so an empty vertex set
/// means infeasible. Unboundedness is decided by enumerating the vertices of
/// the normalized recession cone `{d >= 0, A_ub d <= 0, A_eq d = 0, sum d = 1}`
/// and checking for a direction with positive objective.
pub fn lp_vertex_search<T: Scalar>(prob: &LpProblem<T>, tol: T) -> Result<VertexSearch<T>> {
    prob.validate()?;
    let n = prob.num_vars();
    let best = best_vertex(&prob.c, &prob.a_ub, &prob.b_ub, &prob.a_eq, &prob.b_eq, tol);
    let Some((x, objective)) = best else {
        return Ok(VertexSearch {
            status: LpStatus::Infeasible,
            objective: T::nan(),
            x: vec![T::zero(); n],
        });
    };
    let mut cone_eq = prob.a_eq.clone();
    cone_eq.push(vec![T::one(); n]);
    let mut cone_b = vec![T::zero(); prob.a_eq.len()];
    cone_b.push(T::one());
    let zeros = vec![T::zero(); prob.a_ub.len()];
    if let Some((_, ray)) = best_vertex(&prob.c, &prob.a_ub, &zeros, &cone_eq, &cone_b, tol) {
        if ray > tol {
            return Ok(VertexSearch {
                status: LpStatus::Unbounded,
                objective: T::infinity(),
                x,
            });
        }
    }
    Ok(VertexSearch {
        status: LpStatus::Optimal,
        objective,
        x,
    })
}

fn best_vertex<T: Scalar>(
    c: &[T],
    a_ub: &[Vec<T>],
    b_ub: &[T],
    a_eq: &[Vec<T>],
    b_eq: &[T],
    tol: T,
) -> Option<(Vec<T>, T)> {
    let n = c.len();
    // Candidate active constraints: all rows plus the nonnegativity bounds.
    let mut rows: Vec<(Vec<T>, T)> = a_ub.iter().cloned().zip(b_ub.iter().copied()).collect();
    rows.extend(a_eq.iter().cloned().zip(b_eq.iter().copied()));
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        rows.push((e, T::zero()));
    }
    let feasible = |x: &[T]| {
        let dot = |r: &[T]| r.iter().zip(x).fold(T::zero(), |a, (&u, &v)| a + u * v);
        let scale = |b: T| tol * (T::one() + b.abs());
        x.iter().all(|&v| v >= -tol)
            && a_ub.iter().zip(b_ub).all(|(r, &b)| dot(r) <= b + scale(b))
            && a_eq
                .iter()
                .zip(b_eq)
                .all(|(r, &b)| (dot(r) - b).abs() <= scale(b))
    };

    let mut best: Option<(Vec<T>, T)> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    if rows.len() < n {
        return None;
    }
    loop {
        let a: Vec<Vec<T>> = pick.iter().map(|&k| rows[k].0.clone()).collect();
        let b: Vec<T> = pick.iter().map(|&k| rows[k].1).collect();
        if let Some(x) = gauss_solve(a, b) {
            if feasible(&x) {
                let obj = c
                    .iter()
                    .zip(&x)
                    .fold(T::zero(), |acc, (&u, &v)| acc + u * v);
                if best.as_ref().is_none_or(|(_, o)| obj > *o) {
                    best = Some((x, obj));
                }
            }
        }
        if !next_combination(&mut pick, rows.len()) {
            return best;
        }
    }
}

fn next_combination(pick: &mut [usize], total: usize) -> bool {
    let k = pick.len();
    for i in (0..k).rev() {
        if pick[i] < total - k + i {
            pick[i] += 1;
            for j in i + 1..k {
                pick[j] = pick[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting; `None` for (near-)singular systems.
fn gauss_solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(T::zero(), |m, &v| m.max(v.abs()));
    let eps = T::lit(1e-10) * (T::one() + scale);
    for col in 0..n {
        let piv =
            (col..n).max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap())?;
        if a[piv][col].abs() <= eps {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != T::zero() {
                let (top, bottom) = a.split_at_mut(r);
                for (dst, &v) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                    *dst -= f * v;
                }
                let v = b[col];
                b[r] -= f * v;
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s = (r + 1..n).fold(b[r], |acc, k| acc - a[r][k] * x[k]);
        x[r] = s / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve_lp;
    use approx::assert_relative_eq;

    fn single(i_th: f64) -> NetworkInstance<f64> {
        NetworkInstance::new(vec![vec![1.0]], vec![1.0], 1.0, vec![1.0], vec![10.0], i_th).unwrap()
    }

    #[test]
    fn ne_check_examples() {
        let one = single(20.0);
        let gain = grid_ne_check(&one, &[0.1], &[9.0], 100_001).unwrap();
        assert!(gain < 1e-6, "{gain}");

        let two = NetworkInstance::new(
            vec![vec![1.0, 0.1], vec![0.2, 1.0]],
            vec![1.0, 2.0],
            1.0,
            vec![1.0, 1.0],
            vec![10.0, 10.0],
            20.0,
        )
        .unwrap();
        assert!(grid_ne_check(&two, &[0.0, 0.0], &[0.0, 0.0], 1000).unwrap() > 1.0);
        let det = 1.0 - 0.02;
        let ne = [(9.0 - 0.8) / det, (4.0 - 0.9) / det];
        assert!(grid_ne_check(&two, &[0.1, 0.1], &ne, 100_001).unwrap() < 1e-6);
    }

    #[test]
    fn uniform_search_examples() {
        let (price, revenue) = grid_uniform_search(&single(5.0), 10_000).unwrap();
        assert!((price - 1.0 / 6.0).abs() < 2e-4);
        assert!((revenue - 5.0 / 6.0).abs() < 2e-4);
        let (price, revenue) = grid_uniform_search(&single(20.0), 10_000).unwrap();
        assert!((price - 1.0 / 11.0).abs() < 2e-4);
        assert!((revenue - 10.0 / 11.0).abs() < 2e-4);
    }

    #[test]
    fn uniform_search_returns_argmax() {
        let inst = single(5.0);
        let (_, best) = grid_uniform_search(&inst, 101).unwrap();
        for k in 0..101 {
            let price = k as f64 / 100.0;
            let p = solve_ne_default(&inst, &[price]).unwrap().powers[0];
            if p <= 5.0 {
                assert!(price * p <= best);
            }
        }
    }

    #[test]
    fn revenue_grid_examples() {
        let (p, obj) = grid_revenue_max(&single(5.0), 201).unwrap();
        assert_relative_eq!(p[0], 5.0, epsilon = 1e-12);
        assert_relative_eq!(obj, 5.0 / 6.0, epsilon = 1e-12);

        let (p, obj) = grid_revenue_max(&single(1e-9), 201).unwrap();
        assert_eq!(p[0], 0.0);
        assert_eq!(obj, 0.0);

        let big: NetworkInstance<f64> =
            crate::model::sample_network(&crate::model::TopologyConfig::new(5, 10.0, 0.05, 1))
                .unwrap();
        assert!(matches!(
            grid_revenue_max(&big, 3),
            Err(Error::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn refinement_never_worsens_much() {
        let inst: NetworkInstance<f64> =
            crate::model::sample_network(&crate::model::TopologyConfig::new(2, 20.0, 0.05, 11))
                .unwrap();
        let (_, coarse) = grid_revenue_max(&inst, 51).unwrap();
        let (_, fine) = grid_revenue_max(&inst, 101).unwrap();
        // 101 points per axis contain the 51-point grid.
        assert!(fine >= coarse - 1e-12);
    }

    #[test]
    fn vertex_search_matches_known_problems() {
        let mut p = LpProblem::new(vec![3.0, 5.0]);
        p.push_ub(vec![1.0, 0.0], 4.0);
        p.push_ub(vec![0.0, 2.0], 12.0);
        p.push_ub(vec![3.0, 2.0], 18.0);
        let v = lp_vertex_search(&p, 1e-9).unwrap();
        assert_eq!(v.status, LpStatus::Optimal);
        assert_relative_eq!(v.objective, 36.0, epsilon = 1e-9);

        let mut inf = LpProblem::new(vec![1.0]);
        inf.push_ub(vec![1.0], -1.0);
        assert_eq!(
            lp_vertex_search(&inf, 1e-9).unwrap().status,
            LpStatus::Infeasible
        );

        let unb = LpProblem::new(vec![1.0]);
        assert_eq!(
            lp_vertex_search(&unb, 1e-9).unwrap().status,
            LpStatus::Unbounded
        );
        assert_eq!(solve_lp(&unb, 1e-9).unwrap().status, LpStatus::Unbounded);
    }
}
