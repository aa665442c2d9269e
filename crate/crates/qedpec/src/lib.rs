//! Error detection with the `[[n, n-2, 2]]` code, partial Pauli twirling and
//! probabilistic error cancellation, on top of a dense density-matrix simulator.
//!
//! Conventions used throughout:
//! - qubit 0 is the leftmost Pauli letter and the most significant basis bit;
//! - Pauli labels are base-4 digits I=0, X=1, Y=2, Z=3;
//! - `exp(−iθP/2)` is the rotation convention for every rotation gate.

pub mod analysis;
pub mod bench;
pub mod channel;
pub mod codes;
pub mod error;
pub mod linalg;
pub mod mitigate;
pub mod pauli;
pub mod propagate;
pub mod seeding;
pub mod sim;
pub mod twirl;

pub use error::{Error, Result};
pub use pauli::PauliString;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
