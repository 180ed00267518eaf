//! Joint `(x, y, z)` baseline: global-best particle swarm fitting the
//! parallel-orientation channel model to the measured RSS.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{observations, Method, Observation, PositionEstimate};
use crate::channel::Photodiode;
use crate::sensors::SensorFrame;
use crate::sim::Testbed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    /// Search box `(min, max)`; `None` uses the testbed volume.
    pub search_bounds: Option<(Vector3<f64>, Vector3<f64>)>,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self { swarm_size: 200, iterations: 20, search_bounds: None, inertia: 0.72, cognitive: 1.49, social: 1.49 }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::invalid("swarm size must be >= 2"));
        }
        if self.iterations < 1 {
            return Err(Error::invalid("PSO needs at least one iteration"));
        }
        if let Some((lo, hi)) = self.search_bounds {
            if !(0..3).all(|i| lo[i].is_finite() && hi[i].is_finite() && hi[i] > lo[i]) {
                return Err(Error::invalid("PSO search bounds are degenerate"));
            }
        }
        if ![self.inertia, self.cognitive, self.social].iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(Error::invalid("PSO weights must be finite and >= 0"));
        }
        Ok(())
    }

    fn bounds(&self, testbed: &Testbed) -> (Vector3<f64>, Vector3<f64>) {
        self.search_bounds.unwrap_or((Vector3::zeros(), testbed.extent))
    }
}

/// Received power for a receiver parallel to the emitter: `cos(psi) = cos(theta) = h / d`.
pub(crate) fn parallel_model_power(obs: &Observation<'_>, pd: &Photodiode, p: &Vector3<f64>) -> f64 {
    let l = obs.luminaire;
    let ray = p - l.position;
    let h = ray.z;
    let d2 = ray.norm_squared();
    if !(h > 0.0) || d2 == 0.0 {
        return 0.0;
    }
    let d = d2.sqrt();
    let cos = h / d;
    let theta = cos.clamp(-1.0, 1.0).acos();
    if theta > pd.fov_half_angle {
        return 0.0;
    }
    let m = l.lambertian_order;
    l.transmit_power * ((m + 1.0) / (2.0 * PI) * cos.powf(m + 1.0) * pd.area / d2) * pd.gain_profile.gain(theta)
}

fn cost(obs: &[Observation<'_>], pd: &Photodiode, p: &Vector3<f64>) -> f64 {
    obs.iter().map(|o| (parallel_model_power(o, pd, p) - o.rss).powi(2)).sum()
}

/// Deterministic for a given `seed`. Always spends `swarm_size * iterations`
/// evaluations; the first iteration scores the random initial swarm.
pub fn solve_pso_3d(frame: &SensorFrame, cfg: &PsoConfig, testbed: &Testbed, seed: u64) -> Result<PositionEstimate> {
    cfg.validate()?;
    let obs = observations(frame, testbed)?;
    let pd = &testbed.photodiode;
    let (lo, hi) = cfg.bounds(testbed);
    let span = hi - lo;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pos: Vec<Vector3<f64>> = (0..cfg.swarm_size)
        .map(|_| lo + Vector3::from_fn(|i, _| rng.random::<f64>() * span[i]))
        .collect();
    let mut vel: Vec<Vector3<f64>> = (0..cfg.swarm_size)
        .map(|_| Vector3::from_fn(|i, _| (rng.random::<f64>() * 2.0 - 1.0) * span[i] * 0.1))
        .collect();
    let mut personal = pos.clone();
    let mut personal_cost = vec![f64::INFINITY; cfg.swarm_size];
    let (mut global, mut global_cost) = (pos[0], f64::INFINITY);
    let mut evaluations = 0;

    for iter in 0..cfg.iterations {
        if iter > 0 {
            for i in 0..cfg.swarm_size {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                vel[i] = cfg.inertia * vel[i]
                    + cfg.cognitive * r1 * (personal[i] - pos[i])
                    + cfg.social * r2 * (global - pos[i]);
                pos[i] += vel[i];
                for a in 0..3 {
                    if pos[i][a] < lo[a] || pos[i][a] > hi[a] {
                        pos[i][a] = pos[i][a].clamp(lo[a], hi[a]);
                        vel[i][a] = 0.0;
                    }
                }
            }
        }
        for i in 0..cfg.swarm_size {
            let c = cost(&obs, pd, &pos[i]);
            evaluations += 1;
            if c < personal_cost[i] {
                personal_cost[i] = c;
                personal[i] = pos[i];
            }
            if c < global_cost {
                global_cost = c;
                global = pos[i];
            }
        }
    }

    Ok(PositionEstimate {
        timestamp: frame.timestamp,
        position: global,
        method: Method::Pso3d,
        residual: global_cost,
        evaluations,
    })
}
