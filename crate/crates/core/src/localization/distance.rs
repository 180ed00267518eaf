//! Closed-form range inversions of the line-of-sight channel.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::channel::Luminaire;
use crate::sensors::Pose;
use crate::{Error, Result};

/// Range to a luminaire assuming transmitter and receiver are parallel, so that
/// `cos(psi) = cos(theta) = h / d`. Solves the channel for `d` given the vertical
/// separation `h`: `d = [P_t A_r (m + 1) h^(m+1) / (2 pi P_r)]^(1 / (m + 3))`.
pub fn distance_parallel(p_r: f64, p_t: f64, a_r: f64, m: f64, h: f64) -> Result<f64> {
    if !(p_r > 0.0 && p_r.is_finite()) {
        return Err(Error::NonPositiveRss(p_r));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("vertical separation must be > 0, got {h}")));
    }
    // Evaluated in log space; h^(m+1) underflows nothing here but the ratio can span
    // many decades for weak anchors.
    let ln = (p_t * a_r * (m + 1.0) / (2.0 * PI * p_r)).ln() + (m + 1.0) * h.ln();
    Ok((ln / (m + 3.0)).exp())
}

/// Incidence angle at a tilted receiver. The receiver axis is parameterised by roll
/// `gamma` and pitch `beta` as `(cos(gamma) sin(beta), sin(gamma) sin(beta), cos(beta))`,
/// projected onto the transmitter-to-receiver ray and normalised by `d_parallel`.
///
/// The vertical term uses `|z_r - z_i|` so ground transmitters below the receiver give
/// angles in `[0, pi/2]` for small tilts. The cosine is clamped to `[-1, 1]`.
pub fn incidence_angle(rx: &Pose, tx_position: &Vector3<f64>, d_parallel: f64) -> Result<f64> {
    if !(d_parallel > 0.0 && d_parallel.is_finite()) {
        return Err(Error::invalid(format!("distance must be > 0, got {d_parallel}")));
    }
    let (gamma, beta) = (rx.roll, rx.pitch);
    let delta = rx.position - tx_position;
    let tx_term = delta.x * gamma.cos() * beta.sin();
    let ty_term = delta.y * gamma.sin() * beta.sin();
    let tz_term = delta.z.abs() * beta.cos();
    Ok(((tx_term + ty_term + tz_term) / d_parallel).clamp(-1.0, 1.0).acos())
}

/// Range from RSS when both the irradiance and incidence angles are known:
/// `d = sqrt(P_t A_r (m + 1) cos^m(psi) cos(theta) / (2 pi P_r))`.
pub fn distance_tilted(p_r: f64, tx: &Luminaire, psi: f64, theta: f64, a_r: f64) -> Result<f64> {
    if !(p_r > 0.0 && p_r.is_finite()) {
        return Err(Error::NonPositiveRss(p_r));
    }
    let (cos_psi, cos_theta) = (psi.cos(), theta.cos());
    let cos_product = if cos_psi > 0.0 { cos_psi.powf(tx.lambertian_order) * cos_theta } else { cos_psi };
    if !(cos_product > 0.0) {
        return Err(Error::NonPositiveCosine(cos_product));
    }
    let m = tx.lambertian_order;
    Ok((tx.transmit_power * a_r * (m + 1.0) * cos_product / (2.0 * PI * p_r)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{line_of_sight_power, Photodiode};
    use approx::assert_relative_eq;

    fn lamp(m: f64) -> Luminaire {
        Luminaire::new(1, Vector3::zeros(), 1.0, m, 60.0).unwrap()
    }

    #[test]
    fn parallel_round_trip_on_axis() {
        let pd = Photodiode::new(1e-4, 1.4).unwrap();
        let p = line_of_sight_power(&lamp(1.0), &Pose::level(Vector3::new(0.0, 0.0, 1.0)), &pd).unwrap();
        assert_relative_eq!(p, 3.1831e-5, max_relative = 1e-4);
        let d = distance_parallel(p, 1.0, 1e-4, 1.0, 1.0).unwrap();
        assert_relative_eq!(d, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn parallel_offset_geometry_gives_sqrt5() {
        let p_r = 1e-4 * 0.8 / (5.0 * PI);
        assert_relative_eq!(p_r, 5.0930e-6, max_relative = 1e-4);
        let inner = 1.0 * 1e-4 * 2.0 * 2f64.powi(2) / (2.0 * PI * p_r);
        assert_relative_eq!(inner, 25.0, epsilon = 1e-9);
        let d = distance_parallel(p_r, 1.0, 1e-4, 1.0, 2.0).unwrap();
        assert_relative_eq!(d, 5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn parallel_is_monotone_in_power() {
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let d = distance_parallel(1e-9 * 2f64.powi(k), 4.7, 5.2e-6, 14.0, 1.0).unwrap();
            assert!(d < last);
            last = d;
        }
        assert!(last < 0.5);
    }

    #[test]
    fn parallel_rejects_bad_inputs() {
        assert!(matches!(distance_parallel(0.0, 1.0, 1e-4, 1.0, 1.0), Err(Error::NonPositiveRss(_))));
        assert!(matches!(distance_parallel(-1e-9, 1.0, 1e-4, 1.0, 1.0), Err(Error::NonPositiveRss(_))));
        assert!(distance_parallel(1e-6, 1.0, 1e-4, 1.0, 0.0).is_err());
    }

    #[test]
    fn incidence_zero_tilt_matches_irradiance() {
        let rx = Pose::level(Vector3::new(0.7, -0.4, 1.3));
        let d = rx.position.norm();
        let theta = incidence_angle(&rx, &Vector3::zeros(), d).unwrap();
        assert_relative_eq!(theta, (1.3 / d).acos(), epsilon = 1e-12);
    }

    #[test]
    fn incidence_tilt_alone_sets_angle_overhead() {
        let rx = Pose::new(0.0, Vector3::new(0.0, 0.0, 1.5), 0.0, 5f64.to_radians(), 0.0);
        let theta = incidence_angle(&rx, &Vector3::zeros(), 1.5).unwrap();
        assert_relative_eq!(theta, 5f64.to_radians(), epsilon = 1e-12);
    }

    #[test]
    fn incidence_clamps() {
        let rx = Pose::level(Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(incidence_angle(&rx, &Vector3::zeros(), 1.0 - 1e-15).unwrap(), 0.0);
        assert!(incidence_angle(&rx, &Vector3::zeros(), 0.0).is_err());
    }

    #[test]
    fn incidence_matches_true_geometry_for_pitch_only() {
        let tx = lamp(1.0);
        let rx = Pose::new(0.0, Vector3::new(0.6, 0.3, 1.2), 0.0, -0.12, 0.0);
        let truth = crate::channel::ChannelGeometry::between(&tx, &rx).unwrap();
        let theta = incidence_angle(&rx, &tx.position, truth.distance).unwrap();
        assert_relative_eq!(theta, truth.incidence_angle, epsilon = 1e-12);
    }

    #[test]
    fn tilted_consistent_with_parallel_at_zero_tilt() {
        let d = distance_tilted(3.1831e-5, &lamp(1.0), 0.0, 0.0, 1e-4).unwrap();
        assert_relative_eq!(d, 1.0, max_relative = 1e-4);
        let d_half = distance_tilted(3.1831e-5 / 2.0, &lamp(1.0), 0.0, 0.0, 1e-4).unwrap();
        assert_relative_eq!(d_half / d, 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn tilted_overestimates_when_angle_misread() {
        let tx = lamp(6.0);
        let (t20, t15) = (20f64.to_radians(), 15f64.to_radians());
        let p = tx.transmit_power * 7.0 / (2.0 * PI) * t20.cos().powi(6) * 1e-4 * t20.cos();
        let truth = distance_tilted(p, &tx, t20, t20, 1e-4).unwrap();
        let misread = distance_tilted(p, &tx, t15, t15, 1e-4).unwrap();
        assert_relative_eq!(truth, 1.0, epsilon = 1e-12);
        assert!(misread / truth - 1.0 > 0.10);
    }

    #[test]
    fn tilted_rejects_behind_emitter() {
        let tx = lamp(2.0);
        assert!(matches!(distance_tilted(1e-6, &tx, 2.0, 0.0, 1e-4), Err(Error::NonPositiveCosine(_))));
        assert!(matches!(distance_tilted(1e-6, &tx, 0.1, 1.7, 1e-4), Err(Error::NonPositiveCosine(_))));
        assert!(matches!(distance_tilted(0.0, &tx, 0.1, 0.1, 1e-4), Err(Error::NonPositiveRss(_))));
    }
}
