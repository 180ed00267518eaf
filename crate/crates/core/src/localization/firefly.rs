//! Tilt-aware 2D+H solver: fused height, parallel trilateration, then a second
//! trilateration with incidence angles from the provisional position and the IMU.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;

use super::distance::{distance_parallel, distance_tilted, incidence_angle};
use super::trilateration::trilaterate_2d;
use super::{observations, Method, PositionEstimate};
use crate::sensors::{Pose, SensorFrame};
use crate::sim::Testbed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FireflyFix {
    pub estimate: PositionEstimate,
    /// Result of the first (parallel-assumption) pass at the same height.
    pub pass_one: Vector3<f64>,
}

/// Locates the receiver at the supplied height (normally the fused barometer/IMU
/// estimate). The second pass takes the incidence angle from the first-pass
/// position and the IMU attitude, and the irradiance angle from the range that is
/// consistent with that incidence angle. Anchors at or above `height`, and anchors whose tilt-corrected angles
/// leave the emitter's front hemisphere or the photodiode's view, are dropped.
pub fn solve_firefly(frame: &SensorFrame, height: f64, testbed: &Testbed) -> Result<FireflyFix> {
    if !height.is_finite() {
        return Err(Error::invalid("height estimate must be finite"));
    }
    let pd = &testbed.photodiode;
    let obs: Vec<_> = observations(frame, testbed)?
        .into_iter()
        .filter(|o| height - o.luminaire.position.z > 0.0)
        .collect();
    if obs.len() < 3 {
        return Err(Error::TooFewAnchors { needed: 3, got: obs.len() });
    }
    let mut evaluations = 0;

    let mut parallel = Vec::with_capacity(obs.len());
    for o in &obs {
        let l = o.luminaire;
        let h = height - l.position.z;
        parallel.push(distance_parallel(o.rss, l.transmit_power, pd.area, l.lambertian_order, h)?);
        evaluations += 1;
    }
    let anchors: Vec<_> = obs.iter().map(|o| o.luminaire.position).collect();
    let first = trilaterate_2d(&anchors, &parallel, height)?;
    evaluations += 1;
    let provisional = Vector3::new(first.position.x, first.position.y, height);

    let rx = Pose::new(frame.timestamp, provisional, frame.roll, frame.pitch, frame.yaw);
    let mut kept_anchors = Vec::with_capacity(obs.len());
    let mut tilted = Vec::with_capacity(obs.len());
    for ((o, &d_par), anchor) in obs.iter().zip(&parallel).zip(&anchors) {
        let l = o.luminaire;
        let h = height - anchor.z;
        let theta = incidence_angle(&rx, anchor, d_par)?;
        evaluations += 1;
        if theta > pd.fov_half_angle || theta >= FRAC_PI_2 {
            continue;
        }
        // Irradiance angle consistent with the corrected incidence angle: with
        // cos(psi) = h / d the square-root law closes to
        // d^(m+2) = P_t A_r (m+1) h^m cos(theta) / (2 pi P_r).
        let m = l.lambertian_order;
        let ln_d = ((l.transmit_power * pd.area * (m + 1.0) * theta.cos() / (2.0 * PI * o.rss)).ln()
            + m * h.ln())
            / (m + 2.0);
        let psi = (h / ln_d.exp()).clamp(-1.0, 1.0).acos();
        match distance_tilted(o.rss, l, psi, theta, pd.area) {
            Ok(d) => {
                kept_anchors.push(*anchor);
                tilted.push(d);
            }
            Err(Error::NonPositiveCosine(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if kept_anchors.len() < 3 {
        return Err(Error::TooFewAnchors { needed: 3, got: kept_anchors.len() });
    }
    let second = trilaterate_2d(&kept_anchors, &tilted, height)?;
    evaluations += 1;
    let position = Vector3::new(second.position.x, second.position.y, height);
    let residual = kept_anchors
        .iter()
        .zip(&tilted)
        .map(|(a, d)| ((position - a).norm() - d).powi(2))
        .sum();

    Ok(FireflyFix {
        estimate: PositionEstimate {
            timestamp: frame.timestamp,
            position,
            method: Method::Firefly,
            residual,
            evaluations,
        },
        pass_one: provisional,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::line_of_sight_power;

    fn frame_at(tb: &Testbed, pose: Pose) -> SensorFrame {
        let rss = tb.luminaires.iter().map(|l| line_of_sight_power(l, &pose, &tb.photodiode).unwrap()).collect();
        SensorFrame {
            timestamp: pose.timestamp,
            rss,
            accel: Vector3::zeros(),
            roll: pose.roll,
            pitch: pose.pitch,
            yaw: pose.yaw,
            baro_altitude: pose.position.z,
            ground_truth: pose,
        }
    }

    #[test]
    fn level_noiseless_is_centimetre_accurate() {
        let tb = Testbed::reference().noiseless();
        let truth = Vector3::new(0.8, 1.3, 1.4);
        let fix = solve_firefly(&frame_at(&tb, Pose::level(truth)), truth.z, &tb).unwrap();
        assert!((fix.estimate.position - truth).norm() < 1e-6);
        assert_eq!(fix.estimate.evaluations, 10);
    }

    #[test]
    fn zero_tilt_passes_agree() {
        let tb = Testbed::reference().noiseless();
        let truth = Vector3::new(1.2, 0.7, 1.1);
        // Height deliberately off so the ranges are inconsistent.
        let fix = solve_firefly(&frame_at(&tb, Pose::level(truth)), 1.25, &tb).unwrap();
        assert!((fix.estimate.position - fix.pass_one).norm() < 1e-9);
    }

    #[test]
    fn second_pass_helps_under_pitch() {
        let tb = Testbed::reference().noiseless();
        let pose = Pose::new(0.0, Vector3::new(0.9, 1.2, 1.3), 0.0, 5f64.to_radians(), 0.0);
        let fix = solve_firefly(&frame_at(&tb, pose), pose.position.z, &tb).unwrap();
        let e1 = (fix.pass_one - pose.position).norm();
        let e2 = (fix.estimate.position - pose.position).norm();
        assert!(e2 < e1, "pass 2 {e2} vs pass 1 {e1}");
    }

    #[test]
    fn height_below_anchors_fails() {
        let tb = Testbed::reference().noiseless();
        let f = frame_at(&tb, Pose::level(Vector3::new(1.0, 1.0, 1.0)));
        assert!(matches!(solve_firefly(&f, -0.1, &tb), Err(Error::TooFewAnchors { .. })));
    }
}
