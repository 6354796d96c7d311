//! Numerical toolkit for the Parisi variational formula of Potts-type vector
//! spin glasses with mixed covariance functions.
//!
//! The crate is organised bottom-up:
//!
//! * [`covariance`]: mixtures `ξ = Σ α² ξ_θ` and their derivatives on κ×κ matrices.
//! * [`paths`]: magnetizations, constraint matrices, discrete monotone paths and
//!   the symmetric family `Φ⋆(q)`, plus PSD-order utilities.
//! * [`parisi`]: the nested Gaussian recursion, its correction term and the
//!   Lagrange dual over the magnetization multiplier.
//! * [`optimize`]: minimization over symmetric paths, general κ=2 paths and
//!   low-temperature ground-state extrapolation.
//! * [`rpc`]: truncated Ruelle probability cascades used as an independent
//!   Monte Carlo oracle.
//! * [`finite`]: exact-enumeration free energies at small volume.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise. Reductions
//! are always performed in index order, so results do not depend on the
//! number of worker threads.

pub mod covariance;
pub mod error;
pub mod exec;
pub mod finite;
pub mod nelder_mead;
pub mod optimize;
pub mod parisi;
pub mod paths;
pub mod quadrature;
pub mod rng;
pub mod rpc;
pub mod stats;

pub use covariance::{CovarianceSpec, InteractionTerm};
pub use error::{Error, Result};
pub use parisi::{EvalSettings, Method, ParisiValue};
pub use paths::{ConstraintMatrix, DiscretePath, Magnetization, SymmetricPath};

/// Dense real matrix type used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
