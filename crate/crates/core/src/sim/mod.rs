//! Testbed description, trajectory generation and the flight runner.

pub mod config;
pub mod flight;
pub mod testbed;
pub mod trajectory;

pub use config::{FlightSpec, SimConfig};
pub use flight::{default_batch, run_batch, run_flight, SensorModels};
pub use testbed::{BeaconSettings, Testbed};
pub use trajectory::{generate_trajectory, AngularProfile, FlightKind, FlightPlan, TrajectoryPoint};
