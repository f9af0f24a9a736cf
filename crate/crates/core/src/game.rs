//! User-level power-control subgame: closed-form best responses and the
//! Jacobi fixed-point iteration that reaches the Nash equilibrium.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{NetworkInstance, PowerVector, PriceVector};
use crate::scalar::{clamp, max_abs_diff, Scalar};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Outcome of the best-response iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeResult<T> {
    pub powers: PowerVector<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the last update.
    pub residual: T,
}

/// Power maximizing user `i`'s payoff against the other users' powers in `p`.
///
/// A zero price makes the payoff strictly increasing, so the user transmits
/// at peak power.
pub fn best_response<T: Scalar>(
    inst: &NetworkInstance<T>,
    p: &[T],
    prices: &[T],
    i: usize,
) -> Result<T> {
    if i >= inst.n() {
        return Err(Error::IndexOutOfRange {
            index: i,
            n: inst.n(),
        });
    }
    check_dims(inst, p, prices)?;
    Ok(best_response_at(inst, p, prices, i))
}

pub(crate) fn best_response_at<T: Scalar>(
    inst: &NetworkInstance<T>,
    p: &[T],
    prices: &[T],
    i: usize,
) -> T {
    let cap = inst.p_max()[i];
    let price = prices[i];
    if price <= T::zero() {
        return cap;
    }
    let target = inst.w()[i] / (inst.g()[i] * price) - inst.ipn_at(p, i) / inst.h(i, i);
    clamp(target, T::zero(), cap)
}

fn check_dims<T: Scalar>(inst: &NetworkInstance<T>, p: &[T], prices: &[T]) -> Result<()> {
    if p.len() != inst.n() || prices.len() != inst.n() {
        return Err(Error::Dimension(format!(
            "expected {} users, got {} powers and {} prices",
            inst.n(),
            p.len(),
            prices.len()
        )));
    }
    if let Some(k) = prices.iter().position(|&x| !x.is_finite() || x < T::zero()) {
        return Err(Error::InvalidInstance(format!(
            "price {k} = {} must be finite and nonnegative",
            prices[k]
        )));
    }
    Ok(())
}

/// Simultaneous best response of every user against the same input profile.
pub fn best_response_map<T: Scalar>(
    inst: &NetworkInstance<T>,
    p: &[T],
    prices: &[T],
) -> Result<PowerVector<T>> {
    check_dims(inst, p, prices)?;
    let mut out = vec![T::zero(); inst.n()];
    jacobi_sweep(inst, p, prices, &mut out);
    Ok(PowerVector(out))
}

fn jacobi_sweep<T: Scalar>(inst: &NetworkInstance<T>, p: &[T], prices: &[T], out: &mut [T]) {
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = best_response_at(inst, p, prices, i);
    }
}

/// Iteration controls for [`solve_ne`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeOptions<T> {
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for NeOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(DEFAULT_TOL),
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Runs `p <- B(p)` from `p0` until the update is within `tol` in the
/// infinity norm or `max_iter` sweeps have been made.
pub fn solve_ne<T: Scalar>(
    inst: &NetworkInstance<T>,
    prices: &[T],
    p0: &[T],
    tol: T,
    max_iter: usize,
) -> Result<NeResult<T>> {
    solve_ne_observed(inst, prices, p0, NeOptions { tol, max_iter }, |_, _| {})
}

/// [`solve_ne`] from the zero vector with default options.
pub fn solve_ne_default<T: Scalar>(inst: &NetworkInstance<T>, prices: &[T]) -> Result<NeResult<T>> {
    let zero = vec![T::zero(); inst.n()];
    solve_ne_observed(inst, prices, &zero, NeOptions::default(), |_, _| {})
}

/// [`solve_ne`] calling `observe(iteration, powers)` on the initial vector
/// and after every sweep.
pub fn solve_ne_observed<T: Scalar, F>(
    inst: &NetworkInstance<T>,
    prices: &[T],
    p0: &[T],
    opts: NeOptions<T>,
    mut observe: F,
) -> Result<NeResult<T>>
where
    F: FnMut(usize, &[T]),
{
    check_dims(inst, p0, prices)?;
    if !inst.is_box_feasible(p0, T::zero()) {
        return Err(Error::InvalidInstance(
            "initial power vector outside [0, p_max]".into(),
        ));
    }
    let mut cur = p0.to_vec();
    let mut next = vec![T::zero(); inst.n()];
    observe(0, &cur);
    let mut residual = T::infinity();
    let mut iterations = 0;
    while iterations < opts.max_iter {
        jacobi_sweep(inst, &cur, prices, &mut next);
        iterations += 1;
        residual = max_abs_diff(&cur, &next);
        std::mem::swap(&mut cur, &mut next);
        observe(iterations, &cur);
        if residual <= opts.tol {
            return Ok(NeResult {
                powers: PowerVector(cur),
                iterations,
                converged: true,
                residual,
            });
        }
    }
    Ok(NeResult {
        powers: PowerVector(cur),
        iterations,
        converged: false,
        residual,
    })
}

/// Equilibrium powers together with the metrics derived from them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameOutcome<T> {
    pub powers: PowerVector<T>,
    pub prices: PriceVector<T>,
    pub rates: Vec<T>,
    pub payoffs: Vec<T>,
    pub revenue: T,
    pub total_interference: T,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> GameOutcome<T> {
    pub fn from_ne(inst: &NetworkInstance<T>, prices: PriceVector<T>, ne: NeResult<T>) -> Self {
        let p = &ne.powers;
        let rates = (0..inst.n())
            .map(|i| (p[i] * inst.h(i, i) / inst.ipn_at(p, i)).ln_1p())
            .collect();
        let payoffs = (0..inst.n())
            .map(|i| inst.payoff_at(p, &prices, i))
            .collect();
        let revenue = p
            .iter()
            .zip(inst.g())
            .zip(prices.iter())
            .fold(T::zero(), |acc, ((&x, &g), &c)| acc + x * g * c);
        let total_interference = inst.interference_of(p);
        Self {
            powers: ne.powers,
            prices,
            rates,
            payoffs,
            revenue,
            total_interference,
            iterations: ne.iterations,
            converged: ne.converged,
        }
    }

    pub fn sum_rate(&self) -> T {
        self.rates.iter().fold(T::zero(), |a, &r| a + r)
    }
}

/// Solves the subgame at `prices` from the zero vector and collects metrics.
pub fn play<T: Scalar>(
    inst: &NetworkInstance<T>,
    prices: PriceVector<T>,
) -> Result<GameOutcome<T>> {
    let ne = solve_ne_default(inst, &prices)?;
    Ok(GameOutcome::from_ne(inst, prices, ne))
}
