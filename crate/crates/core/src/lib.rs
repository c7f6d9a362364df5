//! Simulation and estimation tools for the extremal front of
//! multidimensional branching Brownian motion.

pub mod bbm;
pub mod cluster;
pub mod error;
pub mod front;
pub mod paths;
pub mod rho;
pub mod rng;
pub mod run;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use rng::{derive_stream, RngStream};
