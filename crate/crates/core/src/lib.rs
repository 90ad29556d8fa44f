//! Complete power reallocation (CPR) beamformers for multi-user MIMO downlink
//! under a per-antenna power constraint.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: complex matrix kernels (pseudo-inverse, Hermitian square
//!   root), the zeroth-order Bessel function and seeded complex Gaussian draws.
//! - [`channel`]: exponentially correlated Rayleigh channels that age between
//!   fading blocks through a first-order Gauss-Markov recursion with Jakes'
//!   temporal correlation.
//! - [`beamform`]: the MISO optimum, CPR, fast-convergence CPR, water-filling
//!   weights, CPR with candidate channels and the normalized ZF baseline.
//! - [`metrics`]: SINR based rates and power-constraint diagnostics.
//! - [`sim`]: the seeded Monte Carlo harness and its CSV/JSON output.
//! - [`check`]: randomized invariant suite shared by the CLI and the tests.

pub mod beamform;
pub mod channel;
pub mod check;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod sim;

pub use error::{Error, Result};
pub use numerics::CMatrix;
