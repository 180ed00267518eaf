//! Visible-light 3D positioning for small drones.
//!
//! The crate is organised the way a fix is produced:
//!
//! - [`channel`]: Lambertian LED emission and the optical link budget.
//! - [`beacon`]: FDMA square-wave beacons and FFT-based RSS extraction.
//! - [`sensors`]: simulated IMU and barometer, plus the sensor-log CSV format.
//! - [`fusion`]: complementary-filter height with VLP-anchored barometer drift correction.
//! - [`localization`]: RSS distance inversion, 2D trilateration, and the three solvers
//!   (two-pass tilt-aware, height-sweep, 3D particle swarm).
//! - [`sim`]: testbed description, trajectory generation and the flight runner.
//! - [`eval`]: error statistics and method comparison.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beacon;
pub mod channel;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod localization;
pub mod sensors;
pub mod sim;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Standard gravity, m/s². Accelerations in logs are expressed in multiples of this.
pub const STANDARD_GRAVITY: f64 = 9.80665;
