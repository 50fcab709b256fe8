//! Lyapunov certificates, simulation and decay analysis for linear
//! dissipative systems closed by nonlinear collocated damping
//! `z' = Az - sqrt(k) B sigma(sqrt(k) B* z)`.

pub mod analysis;
pub mod cli;
pub mod damping;
pub mod error;
pub mod linalg;
pub mod lyapunov;
pub mod models;
pub mod quad;
pub mod sim;

pub use error::{Error, Result};
