//! Limited-round adaptive policies for stochastic submodular cover.
//!
//! The crate covers the full pipeline at desk scale:
//!
//! - [`submodular`]: set functions, marginals and exhaustive structure checks;
//! - [`instance`] and [`expectation`]: stochastic items with exact rational
//!   probabilities, generators, and `F(A) = E[f(X_A)]`;
//! - [`greedy`]: the non-adaptive greedy maximizer of expected coverage;
//! - [`select`] and [`rround`]: the `Select` and `Reduce` subroutines and the
//!   r-round adaptive driver;
//! - [`policies`]: exact oracles (expectimax, best non-adaptive ordering) and
//!   baseline policies;
//! - [`lp`]: the covering LP whose optimum lower-bounds the optimal adaptive
//!   cost, with an exact rational simplex;
//! - [`edifice`]: near-laminar set systems and the hard instances built on them;
//! - [`sim`]: the seeded trial harness and gap experiments.

pub mod bitset;
pub mod edifice;
pub mod error;
pub mod expectation;
pub mod gate;
pub mod greedy;
pub mod instance;
pub mod lp;
pub mod par;
pub mod policies;
pub mod rational;
pub mod rng;
pub mod rround;
pub mod select;
pub mod sim;
pub mod simplex;
pub mod submodular;

pub use error::{Error, Result};
