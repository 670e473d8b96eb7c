//! Geodesically convex M-estimation on metric spaces, with a Monte-Carlo
//! harness verifying consistency and the asymptotic normality of the
//! rescaled estimation errors.
//!
//! The crate provides:
//! - geodesic primitives (distance, exp/log, transport, geodesics) for
//!   Euclidean spaces, spheres, hyperbolic spaces, SPD matrices under two
//!   metrics, and weighted metric trees ([`geometry`]);
//! - comparison-triangle CAT(kappa) certification and the associated
//!   strong-convexity modulus ([`cat`]);
//! - convex loss profiles and their Riemannian subgradients ([`loss`]);
//! - deterministic solvers for the empirical risk ([`estimator`]);
//! - sandwich-covariance estimation and replicated CLT experiments
//!   ([`asymptotics`]);
//! - samplers with designed population minimizers, experiment
//!   configuration, persistence, and property suites ([`harness`]).
//!
//! Everything randomized is keyed by `(seed, stream)` ChaCha streams and
//! every parallel reduction collects in index order, so outputs are
//! byte-identical across runs and thread counts. The `parallel` feature
//! (on by default) runs replications and grids on a rayon pool; without it
//! the same code runs sequentially.

pub mod asymptotics;
pub mod cat;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod loss;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use geometry::{Point, SpaceSpec, Tangent};
pub use loss::LossSpec;
