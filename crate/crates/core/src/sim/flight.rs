//! Turns a flight plan into the sensor log the drone would have recorded.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trajectory::{generate_trajectory, AngularProfile, FlightPlan};
use super::Testbed;
use crate::beacon::{extract_rss, synthesize_composite};
use crate::channel::line_of_sight_power;
use crate::sensors::{sample_baro, sample_imu, BaroModel, ImuModel, SensorFrame};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModels {
    pub baro: BaroModel,
    pub imu: ImuModel,
}

impl SensorModels {
    /// Ideal sensors.
    pub const NONE: SensorModels = SensorModels {
        baro: BaroModel { noise_sigma: 0.0, drift_rate: 0.0, initial_offset: 0.0 },
        imu: ImuModel {
            accel_noise_sigma: 0.0,
            accel_bias: nalgebra::Vector3::new(0.0, 0.0, 0.0),
            angle_noise_sigma: 0.0,
        },
    };

    pub fn validate(&self) -> Result<()> {
        self.baro.validate()?;
        self.imu.validate()
    }
}

impl Default for SensorModels {
    /// Consumer-grade MEMS figures: decimetre barometer noise, a few milli-g of
    /// accelerometer bias, sub-degree attitude noise.
    fn default() -> Self {
        Self {
            baro: BaroModel { noise_sigma: 0.1, drift_rate: 0.0, initial_offset: 0.0 },
            imu: ImuModel {
                accel_noise_sigma: 0.02,
                accel_bias: nalgebra::Vector3::new(0.0, 0.0, 0.002),
                angle_noise_sigma: 0.2f64.to_radians(),
            },
        }
    }
}

/// Simulates one flight. Every random draw comes from one generator seeded with
/// `seed`, consumed in a fixed order per frame (beacon noise, IMU, barometer), so a
/// seed reproduces the log bit for bit.
pub fn run_flight(testbed: &Testbed, plan: &FlightPlan, models: &SensorModels, seed: u64) -> Result<Vec<SensorFrame>> {
    testbed.validate()?;
    models.validate()?;
    let trajectory = generate_trajectory(plan, testbed)?;
    let beacon_plan = testbed.beacon_plan()?;
    let opts = testbed.synthesis_options()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut frames = Vec::with_capacity(trajectory.len());
    for point in &trajectory {
        let pose = point.pose;
        let powers = testbed
            .luminaires
            .iter()
            .map(|l| line_of_sight_power(l, &pose, &testbed.photodiode))
            .collect::<Result<Vec<_>>>()?;
        let wave = synthesize_composite(&powers, &beacon_plan, &opts, &testbed.noise, &mut rng)?;
        let rss = extract_rss(&wave, &beacon_plan)?;
        let (accel, [roll, pitch, yaw]) = sample_imu(&pose, &point.acceleration, &models.imu, &mut rng);
        let baro_altitude = sample_baro(pose.position.z, pose.timestamp, &models.baro, &mut rng);
        frames.push(SensorFrame {
            timestamp: pose.timestamp,
            rss,
            accel,
            roll,
            pitch,
            yaw,
            baro_altitude,
            ground_truth: pose,
        });
    }
    Ok(frames)
}

/// Eight circular routes of radius 0.5 m around the room centre, differing in
/// cruise height, start angle, angular rate and direction. Each takes off from and
/// lands at 0.2 m.
pub fn default_batch() -> Vec<FlightPlan> {
    const CRUISE: [f64; 8] = [1.0, 1.1, 1.2, 1.3, 1.4, 1.15, 1.25, 1.35];
    (0..8)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            FlightPlan {
                cruise_height: CRUISE[i],
                start_angle: i as f64 * std::f64::consts::FRAC_PI_4,
                angular: AngularProfile::Oscillating { omega_max: sign * (1.2 + 0.05 * i as f64) },
                ..FlightPlan::default()
            }
        })
        .collect()
}

/// Runs `plans` in parallel; flight `i` uses seed `seed + i`.
pub fn run_batch(
    testbed: &Testbed,
    plans: &[FlightPlan],
    models: &SensorModels,
    seed: u64,
) -> Result<Vec<Vec<SensorFrame>>> {
    plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| run_flight(testbed, plan, models, seed.wrapping_add(i as u64)))
        .collect()
}
