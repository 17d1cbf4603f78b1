//! Stochastic block dual averaging (SBDA) for convex nonsmooth and
//! stochastic optimization.
//!
//! The crate provides:
//!
//! - [`blocks`]: block partitions of `R^N` and block-addressable dense vectors;
//! - [`geometry`]: quadratic distance functions, Bregman divergences, and the
//!   closed-form per-block dual-averaging subproblems;
//! - [`oracles`]: stochastic subgradient oracles with synthetic generators
//!   (robust `l1` regression, transformed least squares, budgeted online lasso)
//!   and block-parameter estimation;
//! - [`schedules`]: block-adaptive stepsize rules and block sampling
//!   distributions, including the nonuniform law `p_i ∝ M_i^{2/3} D_i^{1/3}`;
//! - [`solvers`]: the SBDA-u / SBDA-r loops and full-subgradient baselines
//!   (dual averaging, mirror descent, stochastic block mirror descent).
//!
//! All randomness flows through explicitly seeded `ChaCha8Rng` streams, so
//! every run is reproducible from its seed.

pub mod blocks;
pub mod error;
pub mod geometry;
pub mod oracles;
pub mod schedules;
pub mod solvers;

pub use error::{Error, Result};
