//! Exact simulator of an expanding-tree model of a quantum measurement
//! apparatus.
//!
//! A system qubit is entangled with one apparatus qubit, which a fixed
//! two-qubit isometry copies into a binary tree. Because the dynamics is a
//! product over leaves, Heisenberg-picture quantities reduce to recursions of
//! 2×2 matrices; [`oracle`] checks every such reduction against a full
//! statevector at small depth.

pub mod algebra;
pub mod error;
mod fourier;
pub mod histories;
pub mod leggett_garg;
pub mod moments;
pub mod montecarlo;
pub mod oracle;
pub mod pointer;
pub mod stats;

pub use algebra::{Isometry, Mat2, ModelParams};
pub use error::{Error, Result};
