//! Declarative simulation config (TOML). Angles are written in degrees in the
//! file and converted to radians on load; everything else is SI.

use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::flight::{default_batch, SensorModels};
use super::trajectory::{AngularProfile, FlightKind, FlightPlan};
use super::{BeaconSettings, Testbed};
use crate::beacon::Quantizer;
use crate::channel::{GainProfile, Luminaire, NoiseModel, Photodiode};
use crate::fusion::{ComplementaryFilterConfig, DriftCorrectionConfig};
use crate::localization::{IndirectHConfig, PsoConfig};
use crate::sensors::{BaroModel, ImuModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LuminaireSpec {
    pub id: u32,
    pub position: [f64; 3],
    pub transmit_power: f64,
    pub lambertian_order: f64,
    pub beacon_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestbedSpec {
    pub extent: [f64; 3],
    pub luminaires: Vec<LuminaireSpec>,
    pub pd_area: f64,
    /// Full field of view, degrees.
    pub fov_deg: f64,
    /// `[incidence angle in degrees, gain]` pairs; empty means unity gain.
    pub pd_gain_table: Vec<[f64; 2]>,
    pub noise_sigma: f64,
    pub ambient_dc: f64,
    pub rss_floor: f64,
    pub base_frequency: f64,
    pub sample_rate: f64,
    pub random_phase: bool,
    /// ADC resolution; 0 disables quantization.
    pub adc_bits: u32,
    pub adc_full_scale: f64,
}

impl Default for TestbedSpec {
    fn default() -> Self {
        let tb = Testbed::reference();
        Self {
            extent: tb.extent.into(),
            luminaires: tb
                .luminaires
                .iter()
                .map(|l| LuminaireSpec {
                    id: l.id,
                    position: l.position.into(),
                    transmit_power: l.transmit_power,
                    lambertian_order: l.lambertian_order,
                    beacon_frequency: l.beacon_frequency,
                })
                .collect(),
            pd_area: tb.photodiode.area,
            fov_deg: 2.0 * tb.photodiode.fov_half_angle.to_degrees(),
            pd_gain_table: Vec::new(),
            noise_sigma: tb.noise.gaussian_sigma,
            ambient_dc: tb.noise.ambient_dc,
            rss_floor: tb.rss_floor,
            base_frequency: tb.beacon.base_frequency,
            sample_rate: tb.beacon.sample_rate,
            random_phase: tb.beacon.random_phase,
            adc_bits: 0,
            adc_full_scale: 1e-4,
        }
    }
}

impl TestbedSpec {
    pub fn build(&self) -> Result<Testbed> {
        let luminaires = self
            .luminaires
            .iter()
            .map(|l| {
                Luminaire::new(l.id, l.position.into(), l.transmit_power, l.lambertian_order, l.beacon_frequency)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut photodiode = Photodiode::new(self.pd_area, (self.fov_deg / 2.0).to_radians())?;
        if !self.pd_gain_table.is_empty() {
            photodiode.gain_profile =
                GainProfile::table(self.pd_gain_table.iter().map(|[a, g]| (a.to_radians(), *g)).collect())?;
        }
        let quantizer = match self.adc_bits {
            0 => None,
            bits if bits <= 32 && self.adc_full_scale > 0.0 => {
                Some(Quantizer { bits, full_scale: self.adc_full_scale })
            }
            _ => return Err(Error::Config("adc_bits must be <= 32 with a positive full scale".into())),
        };
        let tb = Testbed {
            extent: self.extent.into(),
            luminaires,
            photodiode,
            noise: NoiseModel { gaussian_sigma: self.noise_sigma, ambient_dc: self.ambient_dc },
            rss_floor: self.rss_floor,
            beacon: BeaconSettings {
                base_frequency: self.base_frequency,
                sample_rate: self.sample_rate,
                random_phase: self.random_phase,
                quantizer,
            },
        };
        tb.validate()?;
        Ok(tb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    pub baro_noise_sigma: f64,
    /// Barometer zero drift, m/s.
    pub baro_drift_rate: f64,
    pub baro_offset: f64,
    /// Gs.
    pub accel_noise_sigma: f64,
    /// Gs, world frame.
    pub accel_bias: [f64; 3],
    pub angle_noise_deg: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        let m = SensorModels::default();
        Self {
            baro_noise_sigma: m.baro.noise_sigma,
            baro_drift_rate: m.baro.drift_rate,
            baro_offset: m.baro.initial_offset,
            accel_noise_sigma: m.imu.accel_noise_sigma,
            accel_bias: m.imu.accel_bias.into(),
            angle_noise_deg: m.imu.angle_noise_sigma.to_degrees(),
        }
    }
}

impl SensorSpec {
    pub fn build(&self) -> Result<SensorModels> {
        let m = SensorModels {
            baro: BaroModel {
                noise_sigma: self.baro_noise_sigma,
                drift_rate: self.baro_drift_rate,
                initial_offset: self.baro_offset,
            },
            imu: ImuModel {
                accel_noise_sigma: self.accel_noise_sigma,
                accel_bias: self.accel_bias.into(),
                angle_noise_sigma: self.angle_noise_deg.to_radians(),
            },
        };
        m.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSpec {
    pub filter_gain: f64,
    pub drift_correction: bool,
    pub epsilon: f64,
    pub tilt_threshold_deg: f64,
    pub stride_k: usize,
}

impl Default for FusionSpec {
    fn default() -> Self {
        let d = DriftCorrectionConfig::default();
        Self {
            filter_gain: ComplementaryFilterConfig::default().gain,
            drift_correction: true,
            epsilon: d.epsilon,
            tilt_threshold_deg: d.tilt_threshold.to_degrees(),
            stride_k: d.stride_k,
        }
    }
}

impl FusionSpec {
    pub fn filter(&self, frame_rate: f64) -> Result<ComplementaryFilterConfig> {
        let cfg = ComplementaryFilterConfig { gain: self.filter_gain, dt: 1.0 / frame_rate };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn drift(&self) -> Result<Option<DriftCorrectionConfig>> {
        if !self.drift_correction {
            return Ok(None);
        }
        let cfg = DriftCorrectionConfig {
            epsilon: self.epsilon,
            tilt_threshold: self.tilt_threshold_deg.to_radians(),
            stride_k: self.stride_k,
        };
        cfg.validate()?;
        Ok(Some(cfg))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlightSpec {
    pub name: String,
    /// `circle`, `hover`, `lift_land` or `waypoints`.
    pub kind: String,
    pub waypoints: Vec<[f64; 3]>,
    pub radius: f64,
    pub center: [f64; 2],
    pub height_range: [f64; 2],
    pub cruise_height: f64,
    pub height_amplitude: f64,
    pub duration: f64,
    pub ramp_time: f64,
    pub period: f64,
    /// `oscillating` (peak rate) or `constant`.
    pub angular_profile: String,
    pub angular_rate_deg_s: f64,
    /// Ramp length for the constant profile, s.
    pub rate_ramp: f64,
    pub start_angle_deg: f64,
    pub max_tilt_deg: f64,
    pub frame_rate: f64,
    pub yaw_deg: f64,
}

impl Default for FlightSpec {
    fn default() -> Self {
        Self::from_plan("flight", &FlightPlan::default())
    }
}

impl FlightSpec {
    pub fn from_plan(name: &str, plan: &FlightPlan) -> Self {
        let (kind, waypoints) = match &plan.kind {
            FlightKind::Hover => ("hover", vec![]),
            FlightKind::Circle => ("circle", vec![]),
            FlightKind::LiftLand => ("lift_land", vec![]),
            FlightKind::Waypoints { points } => ("waypoints", points.iter().map(|p| (*p).into()).collect()),
        };
        let (profile, rate, ramp) = match plan.angular {
            AngularProfile::Oscillating { omega_max } => ("oscillating", omega_max, 2.0),
            AngularProfile::Constant { omega, ramp } => ("constant", omega, ramp),
        };
        Self {
            name: name.to_string(),
            kind: kind.to_string(),
            waypoints,
            radius: plan.radius,
            center: plan.center.into(),
            height_range: [plan.height_range.0, plan.height_range.1],
            cruise_height: plan.cruise_height,
            height_amplitude: plan.height_amplitude,
            duration: plan.duration,
            ramp_time: plan.ramp_time,
            period: plan.period,
            angular_profile: profile.to_string(),
            angular_rate_deg_s: rate.to_degrees(),
            rate_ramp: ramp,
            start_angle_deg: plan.start_angle.to_degrees(),
            max_tilt_deg: plan.max_tilt.to_degrees(),
            frame_rate: plan.frame_rate,
            yaw_deg: plan.yaw.to_degrees(),
        }
    }

    pub fn build(&self) -> Result<FlightPlan> {
        let kind = match self.kind.as_str() {
            "circle" => FlightKind::Circle,
            "hover" => FlightKind::Hover,
            "lift_land" => FlightKind::LiftLand,
            "waypoints" => FlightKind::Waypoints { points: self.waypoints.iter().map(|&p| p.into()).collect() },
            other => return Err(Error::Config(format!("flight `{}`: unknown kind `{other}`", self.name))),
        };
        let rate = self.angular_rate_deg_s.to_radians();
        let angular = match self.angular_profile.as_str() {
            "oscillating" => AngularProfile::Oscillating { omega_max: rate },
            "constant" => AngularProfile::Constant { omega: rate, ramp: self.rate_ramp },
            other => {
                return Err(Error::Config(format!("flight `{}`: unknown angular profile `{other}`", self.name)))
            }
        };
        let plan = FlightPlan {
            kind,
            radius: self.radius,
            center: Vector2::from(self.center),
            height_range: (self.height_range[0], self.height_range[1]),
            cruise_height: self.cruise_height,
            height_amplitude: self.height_amplitude,
            duration: self.duration,
            ramp_time: self.ramp_time,
            period: self.period,
            angular,
            start_angle: self.start_angle_deg.to_radians(),
            max_tilt: self.max_tilt_deg.to_radians(),
            frame_rate: self.frame_rate,
            yaw: self.yaw_deg.to_radians(),
        };
        plan.validate().map_err(|e| Error::Config(format!("flight `{}`: {e}", self.name)))?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoSpec {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// `[[x, y, z], [x, y, z]]`; empty means the testbed volume.
    pub search_bounds: Vec<[f64; 3]>,
}

impl Default for PsoSpec {
    fn default() -> Self {
        let p = PsoConfig::default();
        Self {
            swarm_size: p.swarm_size,
            iterations: p.iterations,
            inertia: p.inertia,
            cognitive: p.cognitive,
            social: p.social,
            search_bounds: Vec::new(),
        }
    }
}

impl PsoSpec {
    pub fn build(&self) -> Result<PsoConfig> {
        let search_bounds = match self.search_bounds.as_slice() {
            [] => None,
            [lo, hi] => Some((Vector3::from(*lo), Vector3::from(*hi))),
            _ => return Err(Error::Config("pso.search_bounds needs exactly two corners".into())),
        };
        let cfg = PsoConfig {
            swarm_size: self.swarm_size,
            iterations: self.iterations,
            search_bounds,
            inertia: self.inertia,
            cognitive: self.cognitive,
            social: self.social,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndirectHSpec {
    pub height_range: [f64; 2],
    pub resolution: f64,
    pub fast_search: bool,
    pub coarse_step: f64,
}

impl Default for IndirectHSpec {
    fn default() -> Self {
        let c = IndirectHConfig::default();
        Self {
            height_range: [c.height_range.0, c.height_range.1],
            resolution: c.resolution,
            fast_search: c.fast_search,
            coarse_step: c.coarse_step,
        }
    }
}

impl IndirectHSpec {
    pub fn build(&self) -> Result<IndirectHConfig> {
        let cfg = IndirectHConfig {
            height_range: (self.height_range[0], self.height_range[1]),
            resolution: self.resolution,
            fast_search: self.fast_search,
            coarse_step: self.coarse_step,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Everything needed to reproduce a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub testbed: TestbedSpec,
    pub sensors: SensorSpec,
    pub fusion: FusionSpec,
    pub indirect_h: IndirectHSpec,
    pub pso: PsoSpec,
    pub flights: Vec<FlightSpec>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            testbed: TestbedSpec::default(),
            sensors: SensorSpec::default(),
            fusion: FusionSpec::default(),
            indirect_h: IndirectHSpec::default(),
            pso: PsoSpec::default(),
            flights: default_batch()
                .iter()
                .enumerate()
                .map(|(i, p)| FlightSpec::from_plan(&format!("flight{}", i + 1), p))
                .collect(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Builds every section once so errors surface before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.testbed()?;
        self.sensor_models()?;
        self.fusion.drift()?;
        self.indirect_h.build()?;
        self.pso.build()?;
        let plans = self.plans()?;
        for p in &plans {
            self.fusion.filter(p.frame_rate)?;
        }
        let mut names: Vec<_> = self.flights.iter().map(|f| f.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("flight names must be unique".into()));
        }
        Ok(())
    }

    pub fn testbed(&self) -> Result<Testbed> {
        self.testbed.build().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(format!("testbed: {other}")),
        })
    }

    pub fn sensor_models(&self) -> Result<SensorModels> {
        self.sensors.build()
    }

    pub fn plans(&self) -> Result<Vec<FlightPlan>> {
        self.flights.iter().map(FlightSpec::build).collect()
    }
}
