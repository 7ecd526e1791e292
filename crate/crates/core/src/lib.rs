//! SVD-entropy market indicator computed through a simulated quantum pipeline.
//!
//! Monthly prices are turned into normalized log-return coefficients, the
//! coefficients are amplitude-encoded into a stock ⊗ time register state, a
//! genetic algorithm synthesizes a low-depth circuit preparing that state to a
//! chosen fidelity, and a variational SVD rotates the state into its Schmidt
//! basis so the singular values (and therefore the entropy) can be read out.
//! An exact classical route (Jacobi diagonalization of the correlation
//! matrix) is kept alongside for verification.
//!
//! Module map:
//! - [`simcore`]: dense statevector simulator.
//! - [`marketdata`]: prices, returns, correlation matrix, classical oracle.
//! - [`gasp`]: genetic-algorithm state preparation.
//! - [`vqsvd`]: layered ansatz, Hamming cost, SPSA, Schmidt extraction.
//! - [`aae`]: approximate amplitude encoding baseline trained with MMD.
//! - [`harness`]: sliding-window sweeps, summaries and result files.

// Dense linear algebra reads clearer with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod aae;
pub mod error;
pub mod gasp;
pub mod harness;
pub mod linalg;
pub mod marketdata;
pub mod rng;
pub mod simcore;
pub mod vqsvd;

pub use error::{Error, Result};
