//! Position solvers.
//!
//! All three solvers consume the same per-frame RSS vector and the same testbed
//! description. They differ in where height comes from:
//!
//! - [`firefly`]: height from the fused barometer/IMU estimate, then two passes of
//!   2D trilateration (parallel, then tilt-corrected incidence angles).
//! - [`indirect_h`]: height swept over candidates, best RSS consistency wins.
//! - [`pso`]: joint `(x, y, z)` particle swarm fit of the parallel channel model.

pub mod distance;
pub mod firefly;
pub mod indirect_h;
pub mod pso;
pub mod trilateration;

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::channel::Luminaire;
use crate::sensors::SensorFrame;
use crate::sim::Testbed;
use crate::{Error, Result};

pub use distance::{distance_parallel, distance_tilted, incidence_angle};
pub use firefly::{solve_firefly, FireflyFix};
pub use indirect_h::{solve_indirect_h, IndirectHConfig};
pub use pso::{solve_pso_3d, PsoConfig};
pub use trilateration::{trilaterate_2d, Trilateration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Firefly,
    IndirectH,
    Pso3d,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Firefly, Method::IndirectH, Method::Pso3d];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Firefly => "firefly",
            Method::IndirectH => "indirect_h",
            Method::Pso3d => "pso_3d",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "firefly" => Ok(Method::Firefly),
            "indirect_h" | "indirecth" => Ok(Method::IndirectH),
            "pso_3d" | "pso3d" | "pso" => Ok(Method::Pso3d),
            other => Err(Error::invalid(format!(
                "unknown method `{other}` (expected firefly, indirect_h or pso_3d)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEstimate {
    pub timestamp: f64,
    pub position: Vector3<f64>,
    pub method: Method,
    /// Final value of the solver's own cost.
    pub residual: f64,
    /// Channel-model / cost evaluations spent on this fix.
    pub evaluations: usize,
}

/// An anchor with a usable RSS reading.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Observation<'a> {
    pub luminaire: &'a Luminaire,
    pub rss: f64,
}

/// Anchors whose RSS clears the testbed's detection floor.
pub(crate) fn observations<'a>(frame: &SensorFrame, testbed: &'a Testbed) -> Result<Vec<Observation<'a>>> {
    if frame.rss.len() != testbed.luminaires.len() {
        return Err(Error::invalid(format!(
            "frame has {} RSS values but the testbed has {} luminaires",
            frame.rss.len(),
            testbed.luminaires.len()
        )));
    }
    let obs: Vec<_> = testbed
        .luminaires
        .iter()
        .zip(&frame.rss)
        .filter(|(_, &p)| p > testbed.rss_floor && p.is_finite())
        .map(|(luminaire, &rss)| Observation { luminaire, rss })
        .collect();
    if obs.len() < 3 {
        return Err(Error::TooFewAnchors { needed: 3, got: obs.len() });
    }
    Ok(obs)
}
