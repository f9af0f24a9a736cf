//! Stackelberg interference pricing for D2D pairs underlaying a cellular
//! uplink.
//!
//! The base station prices the interference each D2D transmitter causes at
//! the base station, subject to an interference-temperature cap; users answer
//! with a noncooperative power-control game. The crate provides the network
//! model, the best-response equilibrium solver, uniform and differentiated
//! pricing, a small dense simplex solver, and brute-force oracles.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common double-precision case.

pub mod error;
pub mod game;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod pricing;
pub mod scalar;

pub use error::{Error, Result};
pub use game::{
    best_response, best_response_map, play, solve_ne, GameOutcome, NeOptions, NeResult,
};
pub use lp::{solve_lp, LpProblem, LpSolution, LpStatus};
pub use model::{sample_network, NetworkInstance, PowerVector, PriceVector, TopologyConfig};
pub use pricing::differentiated::{
    build_lp, prices_from_powers, revenue_of_powers, solve_optimal, solve_optimal_with,
    solve_suboptimal, DiffPricingResult, LpMode, SuboptimalPricing, VerificationReport,
};
pub use pricing::uniform::{
    price_lower_bound, price_upper_bound, solve_uniform, SweepPoint, UniformPricing,
};
pub use scalar::Scalar;

pub type Network = NetworkInstance<f64>;
pub type Network32 = NetworkInstance<f32>;
pub type Powers = PowerVector<f64>;
pub type Prices = PriceVector<f64>;
pub type Outcome = GameOutcome<f64>;
pub type Lp = LpProblem<f64>;
pub type DiffPricing = DiffPricingResult<f64>;
pub type UniformResult = UniformPricing<f64>;
