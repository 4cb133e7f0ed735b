//! Metropolis Adjusted Langevin Trajectories and related Hamiltonian samplers,
//! together with the closed-form, scaling and coupling machinery used to check
//! them.

pub mod analytics;
pub mod cli;
pub mod couplings;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod rng;
pub mod samplers;
pub mod scaling;
pub mod targets;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use targets::TargetModel;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
