//! Target operators for general GKP qubit states in a truncated Fock space,
//! their ground states, and the validation statistics around them.

pub mod bloch;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod homodyne;
pub mod operators;
pub mod optimize;
pub mod sweep;
pub mod wigner;

pub use bloch::{Atlas, BlochVector, QubitAngles};
pub use error::{GkpError, Result};
pub use fock::{FockVector, HermitianMatrix, QuadratureSpec};
pub use gaussian::GaussianPureParams;
pub use homodyne::{QuadratureSamples, WitnessEstimate};
pub use num_complex::Complex64;
pub use operators::{GkpOperatorSet, Stabilizer};
pub use sweep::{ExtrapolationResult, RegressionStats, SweepRecord};
pub use wigner::WignerGrid;
