//! Economics of deploying a new network architecture across ISPs.
//!
//! The crate models an ISP network carrying weighted traffic flows, the
//! revenue changes caused by a partial deployment of a new architecture,
//! and the strategic game that deployment decisions induce. On top of the
//! model it provides:
//!
//! * [`shapley`] — revenue-distribution computation (exact subset-sum
//!   Shapley, a per-flow closed form, and an inclusion-exclusion form for
//!   games with alternative routing paths),
//! * [`game`] — utilities, potential functions, equilibrium enumeration,
//!   extremal equilibria via monotone best response, and robust-equilibrium
//!   selection by potential maximization,
//! * [`dynamics`] — logit response dynamics with exact stationary
//!   distributions, and iterated elimination of dominated strategies for
//!   noisy-payoff games,
//! * [`metrics`] — deployability analytics (coordination ratio, deployment
//!   price, traffic-share thresholds, path flattening, device-level
//!   partial deployment),
//! * [`mechanism`] — a coordination mechanism with quote collection,
//!   truthful ISP selection, and multi-round tipping-set subsidies.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the CLI
//! live in the companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod game;
pub mod mechanism;
pub mod metrics;
pub mod model;
pub mod shapley;

mod fmath;

/// Absolute tolerance for monetary comparisons.
pub const MONEY_EPS: f64 = 1e-9;
