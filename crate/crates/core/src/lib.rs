//! Simulation and analysis of the SiN slow-fast bursting neuron model.

pub mod equilibria;
pub mod error;
pub mod integrator;
pub mod io;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod returnmap;
pub mod sweeps;
pub mod symbolic;

pub use error::{Error, Result};
pub use model::{FastState, ModelParams, State5};
