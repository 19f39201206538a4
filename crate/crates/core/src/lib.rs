//! Bounded positive solutions of `x = Tx` for an infinite Toeplitz matrix `T`
//! with nonnegative entries and finitely many superdiagonals.
//!
//! The crate classifies a kernel into its boundedness regime, solves the
//! forward recurrence exactly or in floating point, checks the solution's
//! asymptotics against generating-function closed forms, and validates the
//! whole chain against random-walk supremum probabilities.

pub mod asymptotics;
pub mod classifier;
pub mod cli;
pub mod coefficients;
pub mod error;
pub mod genfun;
pub mod number;
pub mod recurrence;
pub mod stochastic;

pub use coefficients::{ConvexityReport, ConvexityStatus, ToeplitzKernel};
pub use error::{Error, Result};
pub use number::{Number, ValueKind, Values};
pub use recurrence::{Prefix, SolutionTrace};
