//! Smooth 6-DoF reference flights.
//!
//! Positions are analytic and twice continuously differentiable; velocity and
//! acceleration come from central differences of the position function. Attitude
//! follows the quadrotor kinematic relation: the thrust axis leans along the
//! horizontal acceleration, `tan(tilt) = |a_h| / g`, capped at `max_tilt`.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::Testbed;
use crate::sensors::Pose;
use crate::{Error, Result, STANDARD_GRAVITY};

/// Angular rate along a circular route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AngularProfile {
    /// `omega(t) = omega_max sin^3(2 pi t / period)`: the drone speeds up, stops and
    /// reverses direction every half period.
    Oscillating { omega_max: f64 },
    /// Constant rate after a smooth ramp of `ramp` seconds at either end.
    Constant { omega: f64, ramp: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FlightKind {
    Hover,
    Circle,
    /// Straight up from the low to the high end of the height range and back down.
    LiftLand,
    /// Rest-to-rest quintic segments through the listed points.
    Waypoints { points: Vec<Vector3<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlightPlan {
    pub kind: FlightKind,
    pub radius: f64,
    pub center: Vector2<f64>,
    /// Take-off/landing height and the highest allowed height, m.
    pub height_range: (f64, f64),
    /// Mean height of the route phase, m.
    pub cruise_height: f64,
    /// Amplitude of the `sin^3` height wave during the route, m.
    pub height_amplitude: f64,
    /// Route phase length, s. Circle routes are rounded to whole half periods.
    pub duration: f64,
    /// Length of the lift and landing ramps of a circle route, s.
    pub ramp_time: f64,
    /// Period of the circle's rate and height oscillations, s.
    pub period: f64,
    pub angular: AngularProfile,
    /// Starting angle on the circle, rad.
    pub start_angle: f64,
    pub max_tilt: f64,
    pub frame_rate: f64,
    /// Heading, held constant, rad.
    pub yaw: f64,
}

impl Default for FlightPlan {
    fn default() -> Self {
        Self {
            kind: FlightKind::Circle,
            radius: 0.5,
            center: Vector2::new(1.0, 1.0),
            height_range: (0.2, 1.8),
            cruise_height: 1.2,
            height_amplitude: 0.3,
            duration: 48.0,
            ramp_time: 3.0,
            period: 12.0,
            angular: AngularProfile::Oscillating { omega_max: 1.4 },
            start_angle: 0.0,
            max_tilt: 7f64.to_radians(),
            frame_rate: 50.0,
            yaw: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub pose: Pose,
    pub velocity: Vector3<f64>,
    /// World-frame acceleration without gravity, m/s².
    pub acceleration: Vector3<f64>,
}

impl FlightPlan {
    pub fn hover(at: Vector3<f64>, duration: f64) -> Self {
        Self {
            kind: FlightKind::Hover,
            center: at.xy(),
            cruise_height: at.z,
            height_amplitude: 0.0,
            duration,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.max_tilt >= 0.0 && self.max_tilt < PI / 2.0) {
            return bad("max_tilt must lie in [0, 90) degrees");
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad("frame_rate must be > 0");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be > 0");
        }
        let (lo, hi) = self.height_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad("height_range must be ordered");
        }
        match &self.kind {
            FlightKind::Circle => {
                if !(self.radius > 0.0 && self.period > 0.0 && self.ramp_time > 0.0) {
                    return bad("circle needs positive radius, period and ramp_time");
                }
                if let AngularProfile::Constant { ramp, .. } = self.angular {
                    if !(ramp > 0.0 && 2.0 * ramp <= self.route_time()) {
                        return bad("constant-rate ramp must be positive and fit twice in the route");
                    }
                }
            }
            FlightKind::Waypoints { points } if points.len() < 2 => return bad("need at least two waypoints"),
            _ => {}
        }
        Ok(())
    }

    fn route_time(&self) -> f64 {
        match self.kind {
            FlightKind::Circle => {
                let half = self.period / 2.0;
                (self.duration / half).round().max(1.0) * half
            }
            _ => self.duration,
        }
    }

    /// Total flight time including ramps, s.
    pub fn total_time(&self) -> f64 {
        match self.kind {
            FlightKind::Circle => self.route_time() + 2.0 * self.ramp_time,
            _ => self.duration,
        }
    }

    fn circle_angle(&self, tau: f64) -> f64 {
        match self.angular {
            AngularProfile::Oscillating { omega_max } => {
                let x = 2.0 * PI * tau / self.period;
                let c = x.cos();
                omega_max * self.period / (2.0 * PI) * (2.0 / 3.0 - c + c * c * c / 3.0)
            }
            AngularProfile::Constant { omega, ramp } => {
                let total = self.route_time();
                // Integral of the smootherstep rate ramp.
                let ramp_int = |u: f64| {
                    let x = (u / ramp).clamp(0.0, 1.0);
                    ramp * (x.powi(6) - 3.0 * x.powi(5) + 2.5 * x.powi(4))
                };
                if tau < ramp {
                    omega * ramp_int(tau)
                } else if tau <= total - ramp {
                    omega * (tau - ramp / 2.0)
                } else {
                    omega * (total - ramp - ramp_int(total - tau))
                }
            }
        }
    }

    fn circle_point(&self, tau: f64) -> Vector3<f64> {
        let phi = self.start_angle + self.circle_angle(tau);
        let s = (2.0 * PI * tau / self.period).sin();
        Vector3::new(
            self.center.x + self.radius * phi.cos(),
            self.center.y + self.radius * phi.sin(),
            self.cruise_height + self.height_amplitude * s * s * s,
        )
    }

    /// Position at time `t`, clamped to the flight's time span.
    pub fn position(&self, t: f64) -> Vector3<f64> {
        let t = t.clamp(0.0, self.total_time());
        let low = self.height_range.0;
        match &self.kind {
            FlightKind::Hover => Vector3::new(self.center.x, self.center.y, self.cruise_height),
            FlightKind::LiftLand => {
                let half = self.duration / 2.0;
                let (lo, hi) = self.height_range;
                let s = if t <= half { quintic(t / half) } else { quintic((self.duration - t) / half) };
                Vector3::new(self.center.x, self.center.y, lo + (hi - lo) * s)
            }
            FlightKind::Waypoints { points } => {
                let seg = self.duration / (points.len() - 1) as f64;
                let i = ((t / seg).floor() as usize).min(points.len() - 2);
                let u = (t - i as f64 * seg) / seg;
                points[i] + (points[i + 1] - points[i]) * quintic(u)
            }
            FlightKind::Circle => {
                let route = self.route_time();
                let start = self.circle_point(0.0);
                let end = self.circle_point(route);
                if t < self.ramp_time {
                    let s = quintic(t / self.ramp_time);
                    Vector3::new(start.x, start.y, low + (start.z - low) * s)
                } else if t <= self.ramp_time + route {
                    self.circle_point(t - self.ramp_time)
                } else {
                    let s = quintic((t - self.ramp_time - route) / self.ramp_time);
                    Vector3::new(end.x, end.y, end.z + (low - end.z) * s)
                }
            }
        }
    }

    /// Roll and pitch for a horizontal acceleration under this plan's tilt cap.
    pub fn attitude(&self, acceleration: &Vector3<f64>) -> (f64, f64) {
        let mut a_h = Vector2::new(acceleration.x, acceleration.y);
        let cap = STANDARD_GRAVITY * self.max_tilt.tan();
        if a_h.norm() > cap {
            a_h *= cap / a_h.norm();
        }
        if a_h.x == 0.0 && a_h.y == 0.0 {
            return (0.0, 0.0);
        }
        let thrust = Vector3::new(a_h.x, a_h.y, STANDARD_GRAVITY).normalize();
        let body = Rotation3::from_axis_angle(&Vector3::z_axis(), -self.yaw) * thrust;
        (-body.y.clamp(-1.0, 1.0).asin(), body.x.atan2(body.z))
    }
}

/// `10u^3 - 15u^4 + 6u^5`: rest-to-rest blend with zero first and second
/// derivatives at both ends.
fn quintic(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Samples the plan at its frame rate and checks the path stays inside the testbed.
pub fn generate_trajectory(plan: &FlightPlan, testbed: &Testbed) -> Result<Vec<TrajectoryPoint>> {
    plan.validate()?;
    const H: f64 = 1e-3;
    let total = plan.total_time();
    let n = (total * plan.frame_rate + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / plan.frame_rate;
        let p = plan.position(t);
        if !testbed.contains(&p) || !p.iter().all(|v| v.is_finite()) {
            return Err(Error::OutOfBounds { t, x: p.x, y: p.y, z: p.z });
        }
        let (before, after) = (plan.position(t - H), plan.position(t + H));
        // One-sided at the ends, where the plan is at rest anyway.
        let velocity = (after - before) / (2.0 * H);
        let acceleration = (after - 2.0 * p + before) / (H * H);
        let (roll, pitch) = plan.attitude(&acceleration);
        out.push(TrajectoryPoint { pose: Pose::new(t, p, roll, pitch, plan.yaw), velocity, acceleration });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hover_is_constant_and_level() {
        let plan = FlightPlan::hover(Vector3::new(1.0, 0.8, 1.1), 2.0);
        let traj = generate_trajectory(&plan, &Testbed::reference()).unwrap();
        assert_eq!(traj.len(), 101);
        for p in &traj {
            assert_eq!(p.pose.position, Vector3::new(1.0, 0.8, 1.1));
            assert_eq!((p.pose.roll, p.pose.pitch), (0.0, 0.0));
        }
    }

    #[test]
    fn constant_speed_circle_tilt_is_centripetal() {
        let (r, omega) = (0.5, 1.0);
        let plan = FlightPlan {
            angular: AngularProfile::Constant { omega, ramp: 2.0 },
            height_amplitude: 0.0,
            duration: 24.0,
            ..FlightPlan::default()
        };
        let traj = generate_trajectory(&plan, &Testbed::reference()).unwrap();
        let v = omega * r;
        let expected = (v * v / (r * STANDARD_GRAVITY)).atan();
        let mid: Vec<_> = traj.iter().filter(|p| p.pose.timestamp > 8.0 && p.pose.timestamp < 20.0).collect();
        assert!(!mid.is_empty());
        for p in mid {
            assert!((p.pose.tilt() - expected).abs() < 1e-4, "{} vs {expected}", p.pose.tilt());
        }
    }

    #[test]
    fn default_plan_respects_tilt_cap_and_room() {
        let plan = FlightPlan::default();
        let traj = generate_trajectory(&plan, &Testbed::reference()).unwrap();
        let max = traj.iter().map(|p| p.pose.roll.abs().max(p.pose.pitch.abs())).fold(0.0, f64::max);
        assert!(max <= plan.max_tilt + 1e-12);
        assert!(max > 3f64.to_radians());
        assert_eq!(traj.first().unwrap().pose.position.z, 0.2);
        assert!((traj.last().unwrap().pose.position.z - 0.2).abs() < 1e-12);
    }

    #[test]
    fn leaving_the_room_is_rejected() {
        let plan = FlightPlan { radius: 1.5, ..FlightPlan::default() };
        assert!(matches!(generate_trajectory(&plan, &Testbed::reference()), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn attitude_tracks_acceleration_direction() {
        let plan = FlightPlan::default();
        let (roll, pitch) = plan.attitude(&Vector3::new(0.5, 0.0, 0.0));
        assert!(roll.abs() < 1e-15 && pitch > 0.0);
        let (roll, pitch) = plan.attitude(&Vector3::new(0.0, 0.5, 0.0));
        assert!(roll < 0.0 && pitch.abs() < 1e-15);
        let pose = Pose::new(0.0, Vector3::zeros(), roll, pitch, 0.0);
        assert!(pose.body_up_axis().y > 0.0);
    }
}
