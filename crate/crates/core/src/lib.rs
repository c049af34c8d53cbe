//! Experimental toolkit for divisors in intervals over integers built from a
//! restricted set of primes.
//!
//! The crate is organized around the objects it computes:
//!
//! * [`prime_sets`]: density-`δ` sets of primes, their empirical audit, and
//!   the greedy `Λ_j` block decomposition.
//! * [`divisors`]: factorization, `S_Q` enumeration, and the divisor-spacing
//!   functionals `L(a)` and `W(a)`.
//! * [`counting`]: exact counts `H_Q(x,y,z)`, `A_Q(N)`, rough numbers and
//!   `L(a)/a`-weighted sums.
//! * [`poisson`]: the truncated Poisson-type sum, its five asymptotic
//!   regimes, and the predictors `G(δ)` and `E(y;δ)`.
//! * [`order_stats`]: uniform order statistics under barrier conditions,
//!   exactly (rational recursion) and by Monte Carlo.
//! * [`experiments`] and [`acceptance`]: the reproducible harness behind the
//!   `divlab` command line tool.

pub mod acceptance;
pub mod config;
pub mod counting;
pub mod divisors;
pub mod error;
pub mod experiments;
pub mod numeric;
pub mod order_stats;
pub mod poisson;
pub mod prime_sets;
pub mod report;
pub mod rng;

pub use error::{LabError, Result};
