//! Stochastic splitting integrators for passive tracers, coloured-noise
//! tracers and inertial particles in periodic flows, with Monte Carlo
//! estimators of the effective diffusivity.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod estimators;
pub mod fields;
pub mod integrators;
pub mod matrix;
pub mod noise;
pub mod oracles;
pub mod runner;
pub mod validation;

pub use config::{parse_config, ExperimentConfig, InitialCondition, Integrator, Model, Snapshots};
pub use ensemble::Ensemble;
pub use error::{Error, Result};
pub use runner::{run_convergence, run_coupling, run_simulation, run_sweep, SweepSpec};
