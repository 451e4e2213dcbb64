//! Non-Markovian quantum state diffusion for a qutrit and a qubit sharing a
//! zero-temperature bath with Ornstein-Uhlenbeck correlations.

pub mod coefficients;
pub mod ensemble;
pub mod entanglement;
pub mod error;
pub mod linalg;
pub mod markov;
pub mod model;
pub mod noise;
pub mod propagator;
#[cfg(test)]
mod pseudomode_oracle;

pub use error::{Error, Result};
pub use model::{InitialStateSpec, Model, StateVector, SystemParams, Truncation};
