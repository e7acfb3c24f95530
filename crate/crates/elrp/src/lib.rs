//! Electric location-routing under ambient temperature.
//!
//! Joint placement of DC fast-charging stations and electric-vehicle
//! routing, where the charge gained per stop depends on charging time and
//! ambient temperature. The crate provides:
//!
//! * a seeded synthetic instance generator and an instance file format,
//! * an affine recharge model `soc_after = mu1 * soc + mu2` derived from a
//!   linear charging ODE,
//! * MILP builders for the base and linearized recharge formulations, with
//!   LP-file export for external exact solvers,
//! * an independent feasibility checker and an exhaustive tiny-instance
//!   optimizer used as ground truth,
//! * two metaheuristics (tabu search over station subsets with savings
//!   routing, and sweep + iterated greedy + ALNS),
//! * a benchmark harness for replication runs and temperature sweeps.

pub mod bench;
pub mod cli;
pub mod error;
pub mod feasibility;
pub mod instance;
pub mod milp;
pub mod repair;
pub mod sigalns;
pub mod soc;
pub mod tsmcws;

pub use error::{Error, Result};
pub use feasibility::{Solution, ViolationReport};
pub use instance::Instance;
pub use soc::ChargingModel;
