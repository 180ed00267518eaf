//! Line-of-sight optical channel between an LED luminaire and a photodiode.
//!
//! Emission follows a generalised Lambertian pattern of order `m`; the link gain
//! falls off with the square of the distance and the cosine of the incidence
//! angle, and is cut to zero outside the receiver's field of view.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::sensors::Pose;
use crate::{Error, Result};

/// One fixed LED anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Luminaire {
    pub id: u32,
    pub position: Vector3<f64>,
    /// Optical transmit power, W.
    pub transmit_power: f64,
    pub lambertian_order: f64,
    /// Beacon blink frequency, Hz.
    pub beacon_frequency: f64,
    /// Unit surface normal. Ground-mounted lamps face straight up.
    pub normal: Vector3<f64>,
}

impl Luminaire {
    pub fn new(
        id: u32,
        position: Vector3<f64>,
        transmit_power: f64,
        lambertian_order: f64,
        beacon_frequency: f64,
    ) -> Result<Self> {
        let lum = Self {
            id,
            position,
            transmit_power,
            lambertian_order,
            beacon_frequency,
            normal: Vector3::z(),
        };
        lum.validate()?;
        Ok(lum)
    }

    pub fn with_normal(mut self, normal: Vector3<f64>) -> Result<Self> {
        let n = normal.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid("luminaire normal must be a non-zero finite vector"));
        }
        self.normal = normal / n;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.transmit_power > 0.0 && self.transmit_power.is_finite()) {
            return Err(Error::invalid(format!(
                "luminaire {}: transmit power must be > 0",
                self.id
            )));
        }
        if !(self.lambertian_order >= 1.0 && self.lambertian_order.is_finite()) {
            return Err(Error::invalid(format!(
                "luminaire {}: Lambertian order must be >= 1",
                self.id
            )));
        }
        if !(self.beacon_frequency > 0.0 && self.beacon_frequency.is_finite()) {
            return Err(Error::invalid(format!(
                "luminaire {}: beacon frequency must be > 0",
                self.id
            )));
        }
        if !self.position.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid(format!("luminaire {}: non-finite position", self.id)));
        }
        Ok(())
    }
}

/// Optical gain of the receiver as a function of incidence angle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainProfile {
    #[default]
    Unity,
    /// Piecewise-linear lookup over `(angle_rad, gain)` points sorted by angle.
    /// Angles outside the table take the nearest end value.
    Table { points: Vec<(f64, f64)> },
}

impl GainProfile {
    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("gain table needs at least one point"));
        }
        if points.iter().any(|&(a, g)| !a.is_finite() || !(g >= 0.0 && g.is_finite())) {
            return Err(Error::invalid("gain table entries must be finite with gain >= 0"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(GainProfile::Table { points })
    }

    pub fn gain(&self, theta: f64) -> f64 {
        match self {
            GainProfile::Unity => 1.0,
            GainProfile::Table { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if theta <= first.0 {
                    return first.1;
                }
                if theta >= last.0 {
                    return last.1;
                }
                let i = points.partition_point(|p| p.0 <= theta);
                let (a0, g0) = points[i - 1];
                let (a1, g1) = points[i];
                if a1 == a0 {
                    return g1;
                }
                g0 + (g1 - g0) * (theta - a0) / (a1 - a0)
            }
        }
    }
}

/// Receiver optics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Photodiode {
    /// Effective sensing area, m².
    pub area: f64,
    /// Half-angle of the field of view, rad.
    pub fov_half_angle: f64,
    pub gain_profile: GainProfile,
}

impl Photodiode {
    pub fn new(area: f64, fov_half_angle: f64) -> Result<Self> {
        let pd = Self { area, fov_half_angle, gain_profile: GainProfile::Unity };
        pd.validate()?;
        Ok(pd)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area > 0.0 && self.area.is_finite()) {
            return Err(Error::invalid("photodiode area must be > 0"));
        }
        if !(self.fov_half_angle > 0.0 && self.fov_half_angle <= PI) {
            return Err(Error::invalid("photodiode FoV half-angle must be in (0, pi]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGeometry {
    pub distance: f64,
    /// Irradiance angle at the transmitter, rad.
    pub irradiance_angle: f64,
    /// Incidence angle at the receiver, rad.
    pub incidence_angle: f64,
}

impl ChannelGeometry {
    /// Link geometry for a luminaire and a receiver pose. The photodiode looks
    /// along the negative body z axis of the pose.
    pub fn between(tx: &Luminaire, rx: &Pose) -> Result<Self> {
        let ray = rx.position - tx.position;
        let distance = ray.norm();
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::invalid("transmitter and receiver are co-located"));
        }
        let cos_psi = (tx.normal.dot(&ray) / distance).clamp(-1.0, 1.0);
        let cos_theta = (rx.body_up_axis().dot(&ray) / distance).clamp(-1.0, 1.0);
        Ok(Self {
            distance,
            irradiance_angle: cos_psi.acos(),
            incidence_angle: cos_theta.acos(),
        })
    }
}

/// Additive receiver noise: zero-mean Gaussian plus a constant ambient term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of the shot + thermal noise, W.
    pub gaussian_sigma: f64,
    /// Constant ambient light, W.
    pub ambient_dc: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { gaussian_sigma: 0.0, ambient_dc: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma >= 0.0 && self.gaussian_sigma.is_finite()) {
            return Err(Error::invalid("noise sigma must be >= 0"));
        }
        if !(self.ambient_dc >= 0.0 && self.ambient_dc.is_finite()) {
            return Err(Error::invalid("ambient DC must be >= 0"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.gaussian_sigma > 0.0 {
            let normal = Normal::new(0.0, self.gaussian_sigma).expect("sigma validated");
            self.ambient_dc + normal.sample(rng)
        } else {
            self.ambient_dc
        }
    }
}

/// Radiant intensity per steradian of a unit-power Lambertian emitter of order `m`
/// at angle `psi` off its normal. Zero for the back hemisphere.
pub fn lambertian_radiant_intensity(psi: f64, m: f64) -> Result<f64> {
    if !(m >= 1.0 && m.is_finite()) {
        return Err(Error::invalid(format!("Lambertian order must be >= 1, got {m}")));
    }
    if !psi.is_finite() {
        return Err(Error::invalid("irradiance angle must be finite"));
    }
    let psi = psi.abs();
    if psi >= FRAC_PI_2 {
        return Ok(0.0);
    }
    Ok((m + 1.0) / (2.0 * PI) * psi.cos().powf(m))
}

/// DC gain of the line-of-sight link (without the receiver's optical gain).
pub fn channel_gain(geometry: &ChannelGeometry, pd: &Photodiode, m: f64) -> Result<f64> {
    let d = geometry.distance;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid(format!("distance must be > 0, got {d}")));
    }
    let theta = geometry.incidence_angle;
    // Light arriving from behind the photodiode plane is not detected either.
    if theta > pd.fov_half_angle || theta >= FRAC_PI_2 {
        return Ok(0.0);
    }
    let intensity = lambertian_radiant_intensity(geometry.irradiance_angle, m)?;
    Ok(intensity * pd.area * theta.cos() / (d * d))
}

/// Noise-free received optical power, W.
pub fn line_of_sight_power(tx: &Luminaire, rx: &Pose, pd: &Photodiode) -> Result<f64> {
    let geometry = ChannelGeometry::between(tx, rx)?;
    let h = channel_gain(&geometry, pd, tx.lambertian_order)?;
    Ok(tx.transmit_power * h * pd.gain_profile.gain(geometry.incidence_angle))
}

/// Received optical power including one draw of receiver noise.
pub fn received_power<R: Rng + ?Sized>(
    tx: &Luminaire,
    rx: &Pose,
    pd: &Photodiode,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<f64> {
    Ok(line_of_sight_power(tx, rx, pd)? + noise.sample(rng))
}

/// Fractional distance overestimate caused by inverting the channel at a wrong angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltSensitivity {
    pub total: f64,
    /// Part due to the `cos^m(psi)` emission term.
    pub transmitter: f64,
    /// Part due to the `cos(theta)` receiver term.
    pub receiver: f64,
}

/// Distance error when the true irradiance and incidence angles are `true_angle`
/// but the square-root range inversion assumes `assumed_angle` for both.
pub fn tilt_sensitivity(m: f64, true_angle: f64, assumed_angle: f64) -> Result<TiltSensitivity> {
    let tx_ratio = lambertian_radiant_intensity(assumed_angle, m)?
        / lambertian_radiant_intensity(true_angle, m)?;
    let rx_ratio = assumed_angle.cos() / true_angle.cos();
    if !(tx_ratio.is_finite() && rx_ratio.is_finite() && rx_ratio > 0.0) {
        return Err(Error::invalid("angles must lie in the emitter's front hemisphere"));
    }
    Ok(TiltSensitivity {
        total: (tx_ratio * rx_ratio).sqrt() - 1.0,
        transmitter: tx_ratio.sqrt() - 1.0,
        receiver: rx_ratio.sqrt() - 1.0,
    })
}
