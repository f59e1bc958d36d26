//! Wright-Fisher construction of the two-parameter Poisson-Dirichlet
//! diffusion.
//!
//! The crate simulates the K-allele Wright-Fisher chain with state-dependent
//! migration and uniform mutation, integrates its K-dimensional diffusion
//! limit, evaluates the finite-K and limiting generators on the algebra
//! generated by the power sums `phi_m(z) = sum_i z_i^m`, and provides the
//! ground truth (stick-breaking sampler, stationary moments) and statistics
//! needed to compare them.

pub mod analysis;
pub mod chain;
pub mod cli;
pub mod diffusion;
pub mod error;
pub mod export;
pub mod generators;
pub mod kernel;
pub mod oracle;
pub mod params;
pub mod rng;
pub mod sampler;
pub mod simplex;

pub use error::{Error, Result};
pub use params::{validate_params, Params, Regime};
pub use simplex::{rho_k, DiscreteSimplexState, RankedState, SimplexState};
