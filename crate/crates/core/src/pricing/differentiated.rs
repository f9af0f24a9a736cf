//! Differentiated (per-user) pricing.
//!
//! The optimal scheme writes the base-station revenue as a function of the
//! equilibrium powers, linearizes it into an LP over `(y, z)` with
//! `y_i = p_i z_i`, and maps the recovered powers back to prices. Because the
//! revenue is a sum of ratios with per-user denominators, that substitution is
//! not exact in general; every solution is therefore checked against the
//! original problem and the equilibrium it is supposed to induce.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{solve_ne, NeOptions};
use crate::lp::{solve_lp, LpProblem, LpStatus, DEFAULT_LP_TOL};
use crate::model::{NetworkInstance, PowerVector, PriceVector};
use crate::pricing::uniform::solve_uniform;
use crate::scalar::{clamp, max_abs_diff, Scalar};

/// Recovered `z_i` at or below this value is treated as degenerate.
pub const Z_FLOOR: f64 = 1e-12;

/// How the per-user normalization row of the LP is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpMode {
    /// `(sum_j h_ji) y_i + sigma2 z_i = 1`.
    AsWritten,
    /// `sum_j h_ji y_j + sigma2 z_i = 1`.
    #[default]
    CrossTerm,
}

/// Prices that make `p_star` the users' best responses to each other.
pub fn prices_from_powers<T: Scalar>(
    inst: &NetworkInstance<T>,
    p_star: &[T],
) -> Result<PriceVector<T>> {
    if p_star.len() != inst.n() {
        return Err(Error::Dimension(format!(
            "expected {} powers, got {}",
            inst.n(),
            p_star.len()
        )));
    }
    Ok(PriceVector(
        (0..inst.n())
            .map(|i| inst.w()[i] * inst.h(i, i) / (inst.g()[i] * inst.received_at(p_star, i)))
            .collect(),
    ))
}

/// Base-station revenue expressed through equilibrium powers:
/// `sum_i p_i w_i h_ii / (sum_j p_j h_ji + sigma2)`.
pub fn revenue_of_powers<T: Scalar>(inst: &NetworkInstance<T>, p: &[T]) -> T {
    (0..inst.n()).fold(T::zero(), |acc, i| {
        acc + p[i] * inst.w()[i] * inst.h(i, i) / inst.received_at(p, i)
    })
}

/// LP over `x = (y_1..y_N, z_1..z_N)`.
pub fn build_lp<T: Scalar>(inst: &NetworkInstance<T>, mode: LpMode) -> LpProblem<T> {
    let n = inst.n();
    let mut c: Vec<T> = (0..n).map(|i| inst.w()[i] * inst.h(i, i)).collect();
    c.resize(2 * n, T::zero());
    let mut lp = LpProblem::new(c);

    for i in 0..n {
        let mut row = vec![T::zero(); 2 * n];
        row[..n].copy_from_slice(inst.g());
        row[n + i] = -inst.i_th();
        lp.push_ub(row, T::zero());
    }
    for i in 0..n {
        let mut row = vec![T::zero(); 2 * n];
        row[i] = T::one();
        row[n + i] = -inst.p_max()[i];
        lp.push_ub(row, T::zero());
    }
    for i in 0..n {
        let mut row = vec![T::zero(); 2 * n];
        match mode {
            LpMode::AsWritten => {
                row[i] = (0..n).fold(T::zero(), |a, j| a + inst.h(j, i));
            }
            LpMode::CrossTerm => {
                for (j, slot) in row[..n].iter_mut().enumerate() {
                    *slot = inst.h(j, i);
                }
            }
        }
        row[n + i] = inst.sigma2();
        lp.push_eq(row, T::one());
    }
    lp
}

/// Post-hoc checks of a differentiated-pricing solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport<T> {
    /// Infinity norm between the claimed powers and the equilibrium actually
    /// reached at the claimed prices.
    pub fixed_point_residual: T,
    pub ne_converged: bool,
    /// Claimed powers satisfy the box and interference constraints within `1e-9`.
    pub original_feasible: bool,
    pub box_violation: T,
    /// `max(0, sum p_i g_i - I_th)`.
    pub interference_violation: T,
    /// Every claimed power lies strictly inside `(0, p_max)`.
    pub all_interior: bool,
    pub uniform_revenue: T,
    /// Revenue of the claimed powers minus the uniform-pricing revenue.
    pub revenue_vs_uniform: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffPricingResult<T> {
    pub prices: PriceVector<T>,
    pub powers: PowerVector<T>,
    /// Revenue of the recovered powers, `revenue_of_powers(powers)`.
    pub objective: T,
    pub lp_objective: T,
    pub lp_status: LpStatus,
    pub lp_iterations: usize,
    pub mode: LpMode,
    /// Users whose recovered `z_i` fell below [`Z_FLOOR`]; their power is set to zero.
    pub degenerate_users: Vec<usize>,
    pub verification: Option<VerificationReport<T>>,
}

impl<T: Scalar> DiffPricingResult<T> {
    pub fn is_degenerate(&self) -> bool {
        self.lp_status != LpStatus::Optimal || !self.degenerate_users.is_empty()
    }
}

pub fn solve_optimal<T: Scalar>(inst: &NetworkInstance<T>) -> Result<DiffPricingResult<T>> {
    solve_optimal_with(inst, LpMode::default())
}

pub fn solve_optimal_with<T: Scalar>(
    inst: &NetworkInstance<T>,
    mode: LpMode,
) -> Result<DiffPricingResult<T>> {
    let n = inst.n();
    let lp = build_lp(inst, mode);
    let sol = solve_lp(&lp, T::lit(DEFAULT_LP_TOL))?;

    if sol.status != LpStatus::Optimal {
        let powers = PowerVector::zeros(n);
        return Ok(DiffPricingResult {
            prices: prices_from_powers(inst, &powers)?,
            powers,
            objective: T::zero(),
            lp_objective: sol.objective,
            lp_status: sol.status,
            lp_iterations: sol.iterations,
            mode,
            degenerate_users: Vec::new(),
            verification: None,
        });
    }

    let floor = T::lit(Z_FLOOR);
    let mut degenerate_users = Vec::new();
    let mut powers = Vec::with_capacity(n);
    for i in 0..n {
        let (y, z) = (sol.x[i], sol.x[n + i]);
        if z <= floor {
            degenerate_users.push(i);
            powers.push(T::zero());
        } else {
            // `y <= p_max z` holds in the LP up to its tolerance; snap that noise
            // back onto the bound and leave larger excursions for `verify` to flag.
            let (p, cap) = ((y / z).max(T::zero()), inst.p_max()[i]);
            let noise = T::lit(DEFAULT_LP_TOL) * (T::one() + cap);
            powers.push(if p > cap && p - cap <= noise { cap } else { p });
        }
    }
    let powers = PowerVector(powers);
    let prices = prices_from_powers(inst, &powers)?;
    let verification = verify(inst, &prices, &powers)?;
    Ok(DiffPricingResult {
        objective: revenue_of_powers(inst, &powers),
        prices,
        powers,
        lp_objective: sol.objective,
        lp_status: sol.status,
        lp_iterations: sol.iterations,
        mode,
        degenerate_users,
        verification: Some(verification),
    })
}

/// Checks claimed `(prices, powers)` against the equilibrium they should
/// induce, the original constraints, and the uniform-pricing benchmark.
pub fn verify<T: Scalar>(
    inst: &NetworkInstance<T>,
    prices: &[T],
    powers: &[T],
) -> Result<VerificationReport<T>> {
    let n = inst.n();
    let zero = vec![T::zero(); n];
    let ne = solve_ne(
        inst,
        prices,
        &zero,
        NeOptions::<T>::default().tol,
        NeOptions::<T>::default().max_iter,
    )?;
    let fixed_point_residual = max_abs_diff(&ne.powers, powers);

    let box_violation = powers
        .iter()
        .zip(inst.p_max())
        .fold(T::zero(), |acc, (&p, &cap)| acc.max(-p).max(p - cap));
    let interference_violation = (inst.interference_of(powers) - inst.i_th()).max(T::zero());
    let slack = T::lit(1e-9);
    let original_feasible = box_violation <= slack && interference_violation <= inst.i_th() * slack;
    let all_interior = powers
        .iter()
        .zip(inst.p_max())
        .all(|(&p, &cap)| p > T::zero() && p < cap);

    let uniform_revenue = solve_uniform(inst, None)?.revenue;
    Ok(VerificationReport {
        fixed_point_residual,
        ne_converged: ne.converged,
        original_feasible,
        box_violation,
        interference_violation,
        all_interior,
        uniform_revenue,
        revenue_vs_uniform: revenue_of_powers(inst, powers) - uniform_revenue,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuboptimalPricing<T> {
    pub prices: PriceVector<T>,
    /// Powers predicted by the noise-only approximation of the best response.
    pub powers: PowerVector<T>,
}

/// Closed-form per-user prices from a proportional split of the interference
/// budget and the noise-limited best response.
pub fn solve_suboptimal<T: Scalar>(inst: &NetworkInstance<T>) -> SuboptimalPricing<T> {
    let n = inst.n();
    let g_sum = inst.g().iter().fold(T::zero(), |a, &g| a + g);
    let s2 = inst.sigma2();
    let mut prices = Vec::with_capacity(n);
    let mut powers = Vec::with_capacity(n);
    for i in 0..n {
        let (w, g, hii, cap) = (inst.w()[i], inst.g()[i], inst.h(i, i), inst.p_max()[i]);
        let target = if inst.i_th() >= cap * g_sum {
            cap
        } else {
            inst.i_th() / g_sum
        };
        let price = w * hii / (g * (target * hii + s2));
        prices.push(price);
        powers.push(clamp(w / (g * price) - s2 / hii, T::zero(), cap));
    }
    SuboptimalPricing {
        prices: PriceVector(prices),
        powers: PowerVector(powers),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::solve_ne_default;
    use crate::model::{sample_network, TopologyConfig};
    use approx::assert_relative_eq;

    fn single(i_th: f64) -> NetworkInstance<f64> {
        NetworkInstance::new(vec![vec![1.0]], vec![1.0], 1.0, vec![1.0], vec![10.0], i_th).unwrap()
    }

    fn two_user() -> NetworkInstance<f64> {
        NetworkInstance::new(
            vec![vec![1.0, 0.1], vec![0.2, 1.0]],
            vec![1.0, 2.0],
            1.0,
            vec![1.0, 1.0],
            vec![10.0, 10.0],
            20.0,
        )
        .unwrap()
    }

    #[test]
    fn price_power_relation_examples() {
        let one = single(20.0);
        assert_relative_eq!(prices_from_powers(&one, &[5.0]).unwrap()[0], 1.0 / 6.0);
        let two = two_user();
        let at_zero = prices_from_powers(&two, &[0.0, 0.0]).unwrap();
        assert_eq!(at_zero.as_slice(), &[1.0, 0.5]);
        assert!(prices_from_powers(&two, &[0.0]).is_err());
    }

    #[test]
    fn interior_powers_round_trip() {
        let two = two_user();
        let target = [4.0, 2.5];
        let prices = prices_from_powers(&two, &target).unwrap();
        let ne = solve_ne_default(&two, &prices).unwrap();
        assert!(max_abs_diff(&ne.powers, &target) < 1e-7);
    }

    #[test]
    fn lp_shape() {
        let two = two_user();
        for mode in [LpMode::AsWritten, LpMode::CrossTerm] {
            let lp = build_lp(&two, mode);
            assert_eq!(lp.num_vars(), 4);
            assert_eq!(lp.a_eq.len(), 2);
            assert_eq!(lp.a_ub.len(), 4);
            assert!(lp
                .a_ub
                .iter()
                .chain(&lp.a_eq)
                .flatten()
                .all(|x| x.is_finite()));
        }
        let a = build_lp(&two, LpMode::AsWritten);
        let c = build_lp(&two, LpMode::CrossTerm);
        assert_eq!(a.a_eq[0], vec![1.2, 0.0, 1.0, 0.0]);
        assert_eq!(c.a_eq[0], vec![1.0, 0.2, 1.0, 0.0]);

        let one = single(5.0);
        let lp = build_lp(&one, LpMode::CrossTerm);
        assert_eq!(lp, build_lp(&one, LpMode::AsWritten));
        assert_eq!(lp.c, vec![1.0, 0.0]);
        assert_eq!(lp.a_ub, vec![vec![1.0, -5.0], vec![1.0, -10.0]]);
        assert_eq!(lp.a_eq, vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn single_user_optimal_closed_forms() {
        for (i_th, p, price) in [(20.0, 10.0, 1.0 / 11.0), (5.0, 5.0, 1.0 / 6.0)] {
            let res = solve_optimal(&single(i_th)).unwrap();
            assert_eq!(res.lp_status, LpStatus::Optimal);
            assert_relative_eq!(res.powers[0], p, epsilon = 1e-9);
            assert_relative_eq!(res.prices[0], price, epsilon = 1e-12);
            assert_relative_eq!(res.objective, p / (p + 1.0), epsilon = 1e-12);
            assert_relative_eq!(res.lp_objective, p / (p + 1.0), epsilon = 1e-12);
            let v = res.verification.unwrap();
            assert!(v.original_feasible);
            assert!(v.fixed_point_residual < 1e-9);
        }
    }

    #[test]
    fn single_user_suboptimal_closed_forms() {
        let s = solve_suboptimal(&single(20.0));
        assert_relative_eq!(s.prices[0], 1.0 / 11.0);
        assert_relative_eq!(s.powers[0], 10.0, epsilon = 1e-12);
        let s = solve_suboptimal(&single(5.0));
        assert_relative_eq!(s.prices[0], 1.0 / 6.0);
        assert_relative_eq!(s.powers[0], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn suboptimal_respects_proportional_budget() {
        for seed in 0..50 {
            let inst: NetworkInstance<f64> =
                sample_network(&TopologyConfig::new(4, 20.0, 0.05, seed)).unwrap();
            let g_sum: f64 = inst.g().iter().sum();
            let s = solve_suboptimal(&inst);
            for i in 0..4 {
                let g = inst.g()[i];
                assert!(s.powers[i] * g <= g * inst.i_th() / g_sum + 1e-9);
                assert!(s.powers[i] <= inst.p_max()[i]);
            }
        }
    }

    #[test]
    fn two_user_optimal_beats_uniform() {
        let inst = two_user().with_i_th(3.0).unwrap();
        let res = solve_optimal(&inst).unwrap();
        let uniform = solve_uniform(&inst, None).unwrap();
        assert_eq!(res.lp_status, LpStatus::Optimal);
        assert!(res.lp_objective >= uniform.revenue - 1e-6);
        let v = res.verification.unwrap();
        assert!(v.original_feasible);
    }

    #[test]
    fn recovered_powers_stay_feasible() {
        for seed in 0..40 {
            let inst: NetworkInstance<f64> =
                sample_network(&TopologyConfig::new(4, 20.0, 0.05, seed)).unwrap();
            for mode in [LpMode::CrossTerm, LpMode::AsWritten] {
                let res = solve_optimal_with(&inst, mode).unwrap();
                assert_eq!(res.lp_status, LpStatus::Optimal);
                assert!(res.degenerate_users.is_empty());
                let v = res.verification.unwrap();
                assert!(v.original_feasible, "seed {seed} {mode:?}: {v:?}");
                assert!(v.ne_converged);
            }
        }
    }

    /// `y = 0, z = 1 / sigma2` is always feasible, so the LP never reports
    /// infeasible, even when direct gains span many orders of magnitude.
    #[test]
    fn lp_is_always_feasible() {
        for seed in 8000..8100 {
            for i_th in [0.01, 0.07] {
                let inst: NetworkInstance<f64> =
                    sample_network(&TopologyConfig::new(4, 20.0, i_th, seed)).unwrap();
                for mode in [LpMode::CrossTerm, LpMode::AsWritten] {
                    let res = solve_optimal_with(&inst, mode).unwrap();
                    assert_eq!(
                        res.lp_status,
                        LpStatus::Optimal,
                        "seed {seed} i_th {i_th} {mode:?}"
                    );
                }
            }
        }
    }
}
