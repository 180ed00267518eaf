//! Simulated onboard sensors and the sensor-log CSV format.

use std::io::{Read, Write};

use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, STANDARD_GRAVITY};

/// 6-DoF receiver state. Angles use the Z-Y-X (yaw, pitch, roll) convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub timestamp: f64,
    pub position: Vector3<f64>,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn new(timestamp: f64, position: Vector3<f64>, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { timestamp, position, roll, pitch, yaw }
    }

    /// Level pose at `t = 0`.
    pub fn level(position: Vector3<f64>) -> Self {
        Self::new(0.0, position, 0.0, 0.0, 0.0)
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.roll, self.pitch, self.yaw)
    }

    /// Body z axis in world coordinates. The photodiode looks along its negative.
    pub fn body_up_axis(&self) -> Vector3<f64> {
        self.rotation() * Vector3::z()
    }

    /// Angle between the body z axis and world up.
    pub fn tilt(&self) -> f64 {
        self.body_up_axis().z.clamp(-1.0, 1.0).acos()
    }
}

/// One timestamped log record as transmitted by the drone.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub timestamp: f64,
    /// Received power per luminaire, W, in testbed order.
    pub rss: Vec<f64>,
    /// Linear acceleration in Gs; `z` is world vertical without gravity.
    pub accel: Vector3<f64>,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// Raw barometric altitude, m.
    pub baro_altitude: f64,
    pub ground_truth: Pose,
}

impl SensorFrame {
    /// Vertical acceleration in m/s².
    pub fn vertical_accel(&self) -> f64 {
        self.accel.z * STANDARD_GRAVITY
    }

    /// Largest of |roll| and |pitch| as reported by the IMU.
    pub fn max_tilt_component(&self) -> f64 {
        self.roll.abs().max(self.pitch.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BaroModel {
    pub noise_sigma: f64,
    /// Linear zero-drift rate, m/s.
    pub drift_rate: f64,
    pub initial_offset: f64,
}

impl BaroModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("barometer noise sigma must be >= 0"));
        }
        if !(self.drift_rate.is_finite() && self.initial_offset.is_finite()) {
            return Err(Error::invalid("barometer drift and offset must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImuModel {
    pub accel_noise_sigma: f64,
    /// Constant accelerometer bias, Gs.
    pub accel_bias: Vector3<f64>,
    pub angle_noise_sigma: f64,
}

impl ImuModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.accel_noise_sigma >= 0.0 && self.angle_noise_sigma >= 0.0) {
            return Err(Error::invalid("IMU noise sigmas must be >= 0"));
        }
        if !self.accel_bias.iter().all(|b| b.is_finite()) {
            return Err(Error::invalid("IMU bias must be finite"));
        }
        Ok(())
    }
}

fn gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("sigma validated").sample(rng)
    } else {
        0.0
    }
}

pub fn sample_baro<R: Rng + ?Sized>(true_altitude: f64, t: f64, model: &BaroModel, rng: &mut R) -> f64 {
    true_altitude + model.initial_offset + model.drift_rate * t + gaussian(model.noise_sigma, rng)
}

/// Noisy accelerometer (Gs) and Euler angles for a true pose and true
/// world-frame acceleration in m/s² (gravity excluded).
pub fn sample_imu<R: Rng + ?Sized>(
    true_pose: &Pose,
    true_accel: &Vector3<f64>,
    model: &ImuModel,
    rng: &mut R,
) -> (Vector3<f64>, [f64; 3]) {
    let accel = true_accel / STANDARD_GRAVITY
        + model.accel_bias
        + Vector3::from_fn(|_, _| gaussian(model.accel_noise_sigma, rng));
    let orientation = [
        true_pose.roll + gaussian(model.angle_noise_sigma, rng),
        true_pose.pitch + gaussian(model.angle_noise_sigma, rng),
        true_pose.yaw + gaussian(model.angle_noise_sigma, rng),
    ];
    (accel, orientation)
}

/// Header of the sensor-log CSV for `n` luminaires.
pub fn log_header(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("pr{i}")));
    cols.extend(
        [
            "ax", "ay", "az", "roll", "pitch", "yaw", "h_bar0", "gt_x", "gt_y", "gt_z", "gt_roll",
            "gt_pitch", "gt_yaw",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    cols
}

/// Writes a sensor log. Angles are serialized in degrees.
pub fn write_log<W: Write>(writer: W, frames: &[SensorFrame]) -> Result<()> {
    let n = frames.first().map_or(4, |f| f.rss.len());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(log_header(n))?;
    for f in frames {
        if f.rss.len() != n {
            return Err(Error::invalid("all frames in a log must carry the same number of RSS values"));
        }
        let gt = &f.ground_truth;
        let mut row = Vec::with_capacity(14 + n);
        row.push(f.timestamp);
        row.extend_from_slice(&f.rss);
        row.extend_from_slice(&[
            f.accel.x,
            f.accel.y,
            f.accel.z,
            f.roll.to_degrees(),
            f.pitch.to_degrees(),
            f.yaw.to_degrees(),
            f.baro_altitude,
            gt.position.x,
            gt.position.y,
            gt.position.z,
            gt.roll.to_degrees(),
            gt.pitch.to_degrees(),
            gt.yaw.to_degrees(),
        ]);
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sensor log, checking the header, per-row field counts, strictly
/// increasing timestamps and non-negative RSS. Errors carry the 1-based file line.
pub fn read_log<R: Read>(reader: R) -> Result<Vec<SensorFrame>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = r
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let n_pr = headers.iter().filter(|h| h.starts_with("pr")).count();
    let expected = log_header(n_pr);
    if headers.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header; expected `{}`", expected.join(",")),
        });
    }

    let mut frames: Vec<SensorFrame> = Vec::new();
    for (i, record) in r.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if record.len() != expected.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", expected.len(), record.len()),
            });
        }
        let mut vals = Vec::with_capacity(record.len());
        for (field, name) in record.iter().zip(&expected) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("column `{name}`: `{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: format!("column `{name}` is not finite") });
            }
            vals.push(v);
        }
        let t = vals[0];
        let rss = vals[1..=n_pr].to_vec();
        if let Some(bad) = rss.iter().find(|p| **p < 0.0) {
            return Err(Error::Parse { line, message: format!("negative RSS {bad}") });
        }
        if let Some(prev) = frames.last() {
            if t <= prev.timestamp {
                return Err(Error::Parse {
                    line,
                    message: format!("timestamp {t} does not increase (previous {})", prev.timestamp),
                });
            }
        }
        let v = &vals[1 + n_pr..];
        frames.push(SensorFrame {
            timestamp: t,
            rss,
            accel: Vector3::new(v[0], v[1], v[2]),
            roll: v[3].to_radians(),
            pitch: v[4].to_radians(),
            yaw: v[5].to_radians(),
            baro_altitude: v[6],
            ground_truth: Pose::new(
                t,
                Vector3::new(v[7], v[8], v[9]),
                v[10].to_radians(),
                v[11].to_radians(),
                v[12].to_radians(),
            ),
        });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn baro_identity_and_ramp() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_baro(1.0, 0.0, &BaroModel::default(), &mut rng), 1.0);
        let drift = BaroModel { drift_rate: 0.001, ..Default::default() };
        assert!((sample_baro(1.0, 60.0, &drift, &mut rng) - 1.06).abs() < 1e-12);
    }

    #[test]
    fn baro_sample_mean_within_three_sigma() {
        let model = BaroModel { noise_sigma: 0.05, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let mean = (0..n).map(|_| sample_baro(1.0, 0.0, &model, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 3.0 * 0.05 / (n as f64).sqrt());
    }

    #[test]
    fn imu_noiseless_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pose = Pose::new(0.0, Vector3::new(1.0, 1.0, 1.0), 0.0, 0.0, 0.0);
        let (a, o) = sample_imu(&pose, &Vector3::zeros(), &ImuModel::default(), &mut rng);
        assert_eq!(a, Vector3::zeros());
        assert_eq!(o, [0.0, 0.0, 0.0]);

        let biased = ImuModel { accel_bias: Vector3::new(0.0, 0.0, 0.01), ..Default::default() };
        let (a, _) = sample_imu(&pose, &Vector3::zeros(), &biased, &mut rng);
        assert!((a.z - 0.01).abs() < 1e-15);

        let tilted = Pose { roll: 0.03, pitch: -0.02, yaw: 0.5, ..pose };
        let (_, o) = sample_imu(&tilted, &Vector3::zeros(), &ImuModel::default(), &mut rng);
        assert_eq!(o, [0.03, -0.02, 0.5]);
    }

    #[test]
    fn imu_streams_repeat_per_seed() {
        let model = ImuModel {
            accel_noise_sigma: 0.02,
            accel_bias: Vector3::zeros(),
            angle_noise_sigma: 0.01,
        };
        let pose = Pose::level(Vector3::new(1.0, 1.0, 1.0));
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| sample_imu(&pose, &Vector3::zeros(), &model, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn body_axis_follows_pitch_and_roll() {
        let p = Pose::new(0.0, Vector3::zeros(), 0.0, 0.1, 0.0);
        let n = p.body_up_axis();
        assert!((n.x - 0.1f64.sin()).abs() < 1e-12 && n.y.abs() < 1e-12);
        let r = Pose::new(0.0, Vector3::zeros(), 0.1, 0.0, 0.0);
        let n = r.body_up_axis();
        assert!((n.y + 0.1f64.sin()).abs() < 1e-12 && n.x.abs() < 1e-12);
        assert!((r.tilt() - 0.1).abs() < 1e-12);
    }

    fn frame(t: f64) -> SensorFrame {
        SensorFrame {
            timestamp: t,
            rss: vec![1e-6, 2e-6, 3e-7, 0.0],
            accel: Vector3::new(0.01, -0.02, 0.003),
            roll: 0.01,
            pitch: -0.02,
            yaw: 0.0,
            baro_altitude: 1.234,
            ground_truth: Pose::new(t, Vector3::new(1.0, 1.1, 1.2), 0.01, -0.02, 0.0),
        }
    }

    #[test]
    fn log_header_matches_documented_layout() {
        assert_eq!(
            log_header(4).join(","),
            "t,pr1,pr2,pr3,pr4,ax,ay,az,roll,pitch,yaw,h_bar0,gt_x,gt_y,gt_z,gt_roll,gt_pitch,gt_yaw"
        );
    }

    #[test]
    fn log_round_trip() {
        let frames = vec![frame(0.0), frame(0.02)];
        let mut buf = Vec::new();
        write_log(&mut buf, &frames).unwrap();
        let back = read_log(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].rss, frames[1].rss);
        assert!((back[1].pitch - frames[1].pitch).abs() < 1e-15);
    }

    #[test]
    fn malformed_row_reports_line() {
        let mut buf = Vec::new();
        write_log(&mut buf, &[frame(0.0), frame(0.02)]).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("0.04,abc,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0\n");
        match read_log(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_increasing_timestamps_rejected() {
        let mut buf = Vec::new();
        write_log(&mut buf, &[frame(0.02), frame(0.02)]).unwrap();
        assert!(matches!(read_log(buf.as_slice()), Err(Error::Parse { line: 3, .. })));
    }
}
