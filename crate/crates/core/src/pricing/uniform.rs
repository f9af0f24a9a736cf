//! Uniform pricing: one price broadcast to every user, found by a descending
//! sweep between analytic bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{play, GameOutcome};
use crate::model::{NetworkInstance, PriceVector};
use crate::scalar::Scalar;

/// Smallest price at which every user is silent: `max_i w_i h_ii / (g_i sigma2)`.
pub fn price_upper_bound<T: Scalar>(inst: &NetworkInstance<T>) -> T {
    (0..inst.n())
        .map(|i| inst.w()[i] * inst.h(i, i) / (inst.g()[i] * inst.sigma2()))
        .fold(T::neg_infinity(), T::max)
}

/// Largest price at which every user still transmits at peak power.
pub fn price_lower_bound<T: Scalar>(inst: &NetworkInstance<T>) -> T {
    let peak = inst.p_max();
    (0..inst.n())
        .map(|i| {
            let hii = inst.h(i, i);
            let denom = inst.g()[i] * (peak[i] * hii + inst.ipn_at(peak, i));
            inst.w()[i] * hii / denom
        })
        .fold(T::infinity(), T::min)
}

/// Default sweep step: a thousandth of the bound gap.
pub fn default_step<T: Scalar>(inst: &NetworkInstance<T>) -> T {
    (price_upper_bound(inst) - price_lower_bound(inst)) / T::lit(1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint<T> {
    pub price: T,
    pub revenue: T,
    pub interference: T,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformPricing<T> {
    pub price: T,
    /// Price times measured interference at the chosen price.
    pub revenue: T,
    pub outcome: GameOutcome<T>,
    /// Every evaluated price in evaluation order.
    pub trace: Vec<SweepPoint<T>>,
}

const BOUNDARY_BISECTIONS: usize = 200;

/// Descending price sweep from the upper bound in steps of `step`.
///
/// The sweep stops at the first price whose equilibrium interference exceeds
/// the threshold, or after evaluating the lower bound itself. When it stops on
/// an infeasible price, the feasibility boundary between that price and the
/// last feasible one is located by bisection; feasible bisection points are
/// candidates too. The feasible candidate with the largest revenue wins; ties go to
/// the larger price.
pub fn solve_uniform<T: Scalar>(
    inst: &NetworkInstance<T>,
    step: Option<T>,
) -> Result<UniformPricing<T>> {
    let upper = price_upper_bound(inst);
    let lower = price_lower_bound(inst);
    let step = step.unwrap_or_else(|| default_step(inst));
    if !(step.is_finite() && step > T::zero()) {
        return Err(Error::InvalidConfig(format!(
            "price step must be positive, got {step}"
        )));
    }
    let n = inst.n();
    let i_th = inst.i_th();

    let mut trace = Vec::new();
    let mut evaluate = |price: T| -> Result<(GameOutcome<T>, SweepPoint<T>)> {
        let outcome = play(inst, PriceVector::uniform(n, price))?;
        let interference = outcome.total_interference;
        let point = SweepPoint {
            price,
            revenue: price * interference,
            interference,
            feasible: interference <= i_th,
        };
        trace.push(point);
        Ok((outcome, point))
    };

    let mut best: Option<(SweepPoint<T>, GameOutcome<T>)> = None;
    let mut consider = |point: SweepPoint<T>, outcome: GameOutcome<T>| {
        if best.as_ref().is_none_or(|(b, _)| point.revenue > b.revenue) {
            best = Some((point, outcome));
        }
    };

    let mut price = upper;
    let mut last_feasible = None;
    let mut first_infeasible = None;
    loop {
        let (outcome, point) = evaluate(price)?;
        if !point.feasible {
            first_infeasible = Some(price);
            break;
        }
        last_feasible = Some(price);
        consider(point, outcome);
        if price <= lower {
            break;
        }
        price = (price - step).max(lower);
    }

    if let (Some(mut good), Some(mut bad)) = (last_feasible, first_infeasible) {
        let two = T::lit(2.0);
        for _ in 0..BOUNDARY_BISECTIONS {
            let mid = (good + bad) / two;
            if mid >= good || mid <= bad {
                break;
            }
            let (outcome, point) = evaluate(mid)?;
            if point.feasible {
                good = mid;
                consider(point, outcome);
            } else {
                bad = mid;
            }
        }
    }

    let (point, outcome) = best.expect("upper-bound price always yields a feasible candidate");
    Ok(UniformPricing {
        price: point.price,
        revenue: point.revenue,
        outcome,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{solve_ne, solve_ne_default};
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

    fn uniform_ne(inst: &NetworkInstance<f64>, price: f64) -> Vec<f64> {
        solve_ne_default(inst, &vec![price; inst.n()])
            .unwrap()
            .powers
            .0
    }

    #[test]
    fn bound_examples() {
        let one = single(20.0);
        assert_eq!(price_upper_bound(&one), 1.0);
        assert_relative_eq!(price_lower_bound(&one), 1.0 / 11.0);

        let two = two_user();
        assert_eq!(price_upper_bound(&two), 1.0);
        assert_relative_eq!(price_lower_bound(&two), 1.0 / 24.0, epsilon = 1e-15);

        let doubled = NetworkInstance::new(
            two.h_matrix().to_vec(),
            two.g().to_vec(),
            1.0,
            vec![2.0, 2.0],
            vec![10.0, 10.0],
            20.0,
        )
        .unwrap();
        assert_eq!(price_upper_bound(&doubled), 2.0 * price_upper_bound(&two));
    }

    #[test]
    fn lower_bound_below_upper_bound() {
        for seed in 0..200 {
            let inst: NetworkInstance<f64> = sample_network(&TopologyConfig::new(
                1 + (seed % 6) as usize,
                10.0,
                0.05,
                seed,
            ))
            .unwrap();
            assert!(price_lower_bound(&inst) < price_upper_bound(&inst));
        }
    }

    #[test]
    fn single_user_loose_threshold() {
        let res = solve_uniform(&single(20.0), None).unwrap();
        assert_relative_eq!(res.price, 1.0 / 11.0, epsilon = 1e-12);
        assert_relative_eq!(res.revenue, 10.0 / 11.0, epsilon = 1e-9);
    }

    #[test]
    fn single_user_tight_threshold() {
        // p(pi) = 1/pi - 1 = 5 at pi = 1/6.
        let res = solve_uniform(&single(5.0), None).unwrap();
        assert_relative_eq!(res.price, 1.0 / 6.0, epsilon = 1e-9);
        assert_relative_eq!(res.revenue, 5.0 / 6.0, epsilon = 1e-9);
        assert!(res.outcome.total_interference <= 5.0);
    }

    #[test]
    fn rejects_nonpositive_step() {
        assert!(solve_uniform(&single(5.0), Some(0.0)).is_err());
        assert!(solve_uniform(&single(5.0), Some(f64::NAN)).is_err());
    }

    #[test]
    fn returned_outcome_is_feasible_and_trace_descends() {
        for seed in 0..30 {
            let i_th = [0.001, 0.01, 0.05, 1.0][seed as usize % 4];
            let inst: NetworkInstance<f64> =
                sample_network(&TopologyConfig::new(4, 10.0, i_th, seed)).unwrap();
            let res = solve_uniform(&inst, None).unwrap();
            assert!(res.outcome.total_interference <= inst.i_th());
            assert!(res.price >= price_lower_bound(&inst) && res.price <= price_upper_bound(&inst));
            let sweep: Vec<_> = res.trace.iter().take_while(|p| p.feasible).collect();
            assert!(sweep.windows(2).all(|w| w[1].price < w[0].price));
            let max_feasible = res
                .trace
                .iter()
                .filter(|p| p.feasible)
                .map(|p| p.revenue)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(res.revenue, max_feasible);
        }
    }

    /// Revenue-curve properties of the uniform price.
    #[test]
    fn revenue_curve_properties() {
        for seed in 0..40 {
            let inst: NetworkInstance<f64> =
                sample_network(&TopologyConfig::new(4, 10.0, 0.05, seed)).unwrap();
            let (lo, hi) = (price_lower_bound(&inst), price_upper_bound(&inst));
            let peak_itf: f64 = inst.p_max().iter().zip(inst.g()).map(|(p, g)| p * g).sum();
            let revenue = |price: f64| price * inst.interference_of(&uniform_ne(&inst, price));

            assert_eq!(revenue(0.0), 0.0);
            for k in 0..5 {
                let r = revenue(hi * (1.0 + 0.1 * k as f64));
                assert!(r.abs() < 1e-12, "revenue {r} above the upper bound");
            }
            for k in 1..=20 {
                let price = lo * k as f64 / 20.0;
                let r = revenue(price);
                assert!(r.is_finite() && r >= 0.0);
                assert_relative_eq!(r, price * peak_itf, max_relative = 1e-9);
            }
            let mut prev = f64::INFINITY;
            for k in 0..=40 {
                let price = lo + (hi - lo) * k as f64 / 40.0;
                let itf = inst.interference_of(&uniform_ne(&inst, price));
                assert!(revenue(price) >= 0.0);
                assert!(itf <= prev + 1e-9, "interference rose at price {price}");
                prev = itf;
            }
        }
    }

    /// Above the lower bound the peak profile is never an equilibrium, but an
    /// individual user can remain at peak power when its own threshold is
    /// larger than the binding one.
    #[test]
    fn peak_profile_breaks_above_lower_bound() {
        let two = two_user();
        let p = uniform_ne(&two, 0.05);
        assert_eq!(p[0], 10.0);
        assert!(p[1] < 10.0);

        for seed in 0..40 {
            let inst: NetworkInstance<f64> =
                sample_network(&TopologyConfig::new(4, 10.0, 0.05, seed)).unwrap();
            let (lo, hi) = (price_lower_bound(&inst), price_upper_bound(&inst));
            for k in 1..=20 {
                let price = lo + (hi - lo) * k as f64 / 20.0;
                let ne = solve_ne(&inst, &[price; 4], &[0.0; 4], 1e-10, 10_000).unwrap();
                assert!(ne
                    .powers
                    .iter()
                    .zip(inst.p_max())
                    .any(|(p, cap)| *p < cap - 1e-9));
            }
        }
    }
}
