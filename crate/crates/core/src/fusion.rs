//! Height estimation: a second-order complementary filter over barometer and
//! vertical acceleration, fed by a barometer track whose slow drift is pulled
//! toward VLP height fixes while the receiver is nearly level.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::sensors::SensorFrame;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComplementaryFilterConfig {
    /// Crossover rate `k_f`, 1/s. The loop gains are `2 k_f` and `k_f^2`
    /// (critically damped).
    pub gain: f64,
    /// Update period, s.
    pub dt: f64,
}

impl Default for ComplementaryFilterConfig {
    fn default() -> Self {
        Self { gain: 1.0, dt: 0.02 }
    }
}

impl ComplementaryFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::invalid("filter gain must be > 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("filter dt must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilterState {
    pub height: f64,
    pub vertical_velocity: f64,
}

impl FilterState {
    pub fn at_rest(height: f64) -> Self {
        Self { height, vertical_velocity: 0.0 }
    }
}

/// One filter step. The barometer error drives both states; acceleration enters
/// by double integration, so it dominates the high-frequency part of the estimate.
pub fn complementary_update(
    state: FilterState,
    baro_height: f64,
    vertical_accel: f64,
    cfg: &ComplementaryFilterConfig,
) -> FilterState {
    let (t, k1, k2) = (cfg.dt, 2.0 * cfg.gain, cfg.gain * cfg.gain);
    let err = baro_height - state.height;
    FilterState {
        height: state.height
            + t * state.vertical_velocity
            + (k1 * t + k2 * t * t / 2.0) * err
            + t * t / 2.0 * vertical_accel,
        vertical_velocity: state.vertical_velocity + k2 * t * err + t * vertical_accel,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftCorrectionConfig {
    pub epsilon: f64,
    /// Larger roll or pitch than this disables the correction, rad.
    pub tilt_threshold: f64,
    /// Apply the correction on every `stride_k`-th update only.
    pub stride_k: usize,
}

impl Default for DriftCorrectionConfig {
    fn default() -> Self {
        Self { epsilon: 0.05, tilt_threshold: 3f64.to_radians(), stride_k: 1 }
    }
}

impl DriftCorrectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon must lie in [0, 1]"));
        }
        if !(self.tilt_threshold > 0.0 && self.tilt_threshold.is_finite()) {
            return Err(Error::invalid("tilt threshold must be > 0"));
        }
        if self.stride_k == 0 {
            return Err(Error::invalid("stride k must be >= 1"));
        }
        Ok(())
    }

    /// Whether update number `index` at this attitude may use a VLP height.
    pub fn accepts(&self, roll: f64, pitch: f64, index: usize) -> bool {
        roll.abs().max(pitch.abs()) < self.tilt_threshold && index.is_multiple_of(self.stride_k)
    }
}

/// Advances the drift-corrected barometer track by one raw barometer delta,
/// blending in `h_vlp` when the gate and stride allow.
pub fn drift_correct(
    h_vlp: Option<f64>,
    delta_baro: f64,
    prev_h_bar: f64,
    tilt: (f64, f64),
    index: usize,
    cfg: &DriftCorrectionConfig,
) -> f64 {
    let propagated = prev_h_bar + delta_baro;
    match h_vlp {
        Some(h) if cfg.accepts(tilt.0, tilt.1, index) => cfg.epsilon * h + (1.0 - cfg.epsilon) * propagated,
        _ => propagated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightEstimate {
    pub timestamp: f64,
    pub h_fused: f64,
    pub h_vlp: Option<f64>,
    pub h_bar_corrected: f64,
    pub delta_baro: f64,
}

/// Per-flight height estimator. Not shareable; clone one per stream.
#[derive(Debug, Clone)]
pub struct HeightEstimator {
    filter: ComplementaryFilterConfig,
    drift: Option<DriftCorrectionConfig>,
    ceiling: f64,
    state: Option<(FilterState, f64, f64, f64)>,
    index: usize,
}

impl HeightEstimator {
    /// `drift = None` disables the VLP correction entirely. Output heights are
    /// clamped to `[0, ceiling]`.
    pub fn new(filter: ComplementaryFilterConfig, drift: Option<DriftCorrectionConfig>, ceiling: f64) -> Result<Self> {
        filter.validate()?;
        if let Some(d) = &drift {
            d.validate()?;
        }
        if !(ceiling > 0.0 && ceiling.is_finite()) {
            return Err(Error::invalid("height ceiling must be > 0"));
        }
        Ok(Self { filter, drift, ceiling, state: None, index: 0 })
    }

    /// Whether the next update would consume a VLP height for this frame.
    pub fn wants_vlp(&self, frame: &SensorFrame) -> bool {
        self.state.is_some() && self.drift.is_some_and(|d| d.accepts(frame.roll, frame.pitch, self.index))
    }

    /// Consumes one frame. `h_vlp` is only called when [`wants_vlp`](Self::wants_vlp)
    /// holds; returning `None` skips the correction for this update.
    pub fn update(&mut self, frame: &SensorFrame, h_vlp: impl FnOnce(&SensorFrame) -> Option<f64>) -> HeightEstimate {
        let baro = frame.baro_altitude;
        let Some((state, prev_baro, prev_h_bar, prev_t)) = self.state else {
            let h = baro.clamp(0.0, self.ceiling);
            self.state = Some((FilterState::at_rest(h), baro, baro, frame.timestamp));
            self.index = 1;
            return HeightEstimate {
                timestamp: frame.timestamp,
                h_fused: h,
                h_vlp: None,
                h_bar_corrected: baro,
                delta_baro: 0.0,
            };
        };
        let vlp = if self.wants_vlp(frame) { h_vlp(frame) } else { None };
        let delta = baro - prev_baro;
        let h_bar = match &self.drift {
            Some(cfg) => drift_correct(vlp, delta, prev_h_bar, (frame.roll, frame.pitch), self.index, cfg),
            None => prev_h_bar + delta,
        };
        let dt = frame.timestamp - prev_t;
        let cfg = if dt > 0.0 && dt.is_finite() { ComplementaryFilterConfig { dt, ..self.filter } } else { self.filter };
        let mut next = complementary_update(state, h_bar, frame.vertical_accel(), &cfg);
        if next.height < 0.0 || next.height > self.ceiling {
            next.height = next.height.clamp(0.0, self.ceiling);
            next.vertical_velocity = 0.0;
        }
        self.state = Some((next, baro, h_bar, frame.timestamp));
        self.index += 1;
        HeightEstimate {
            timestamp: frame.timestamp,
            h_fused: next.height,
            h_vlp: vlp,
            h_bar_corrected: h_bar,
            delta_baro: delta,
        }
    }
}

/// Runs a fresh estimator over a whole stream. `solver` supplies VLP heights on
/// demand; its failures simply skip the correction for that frame.
pub fn estimate_height<F>(
    frames: &[SensorFrame],
    mut solver: F,
    filter: ComplementaryFilterConfig,
    drift: Option<DriftCorrectionConfig>,
    ceiling: f64,
) -> Result<Vec<HeightEstimate>>
where
    F: FnMut(&SensorFrame) -> Option<f64>,
{
    let mut est = HeightEstimator::new(filter, drift, ceiling)?;
    Ok(frames.iter().map(|f| est.update(f, &mut solver)).collect())
}

/// Writes `t,h_true,h_fused,h_vlp,h_bar`; absent VLP heights are left empty.
pub fn write_height_trace<W: Write>(writer: W, frames: &[SensorFrame], heights: &[HeightEstimate]) -> Result<()> {
    if frames.len() != heights.len() {
        return Err(Error::invalid("frame and height streams differ in length"));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "h_true", "h_fused", "h_vlp", "h_bar"])?;
    for (f, h) in frames.iter().zip(heights) {
        w.write_record([
            format!("{:.4}", h.timestamp),
            format!("{:.6}", f.ground_truth.position.z),
            format!("{:.6}", h.h_fused),
            h.h_vlp.map(|v| format!("{v:.6}")).unwrap_or_default(),
            format!("{:.6}", h.h_bar_corrected),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::Pose;
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn run(gain: f64, seconds: f64, baro: impl Fn(f64) -> f64, accel: impl Fn(f64) -> f64, h0: f64) -> Vec<f64> {
        let cfg = ComplementaryFilterConfig { gain, dt: 0.02 };
        let mut s = FilterState::at_rest(h0);
        let n = (seconds / cfg.dt).round() as usize;
        (1..=n)
            .map(|i| {
                let t = i as f64 * cfg.dt;
                s = complementary_update(s, baro(t), accel(t), &cfg);
                s.height
            })
            .collect()
    }

    #[test]
    fn constant_baro_is_a_fixed_point() {
        for gain in [0.5, 1.0, 3.0] {
            let h = run(gain, 10.0 / gain, |_| 1.0, |_| 0.0, 0.0);
            assert!((h.last().unwrap() - 1.0).abs() < 1e-3, "gain {gain}");
        }
    }

    #[test]
    fn step_overshoot_matches_critical_damping() {
        // Continuous step response 1 - e^{-kt} + k t e^{-kt} peaks at 1 + e^{-2}.
        let h = run(1.0, 20.0, |_| 1.0, |_| 0.0, 0.0);
        let peak = h.iter().cloned().fold(f64::MIN, f64::max);
        assert!(peak > 1.0 && peak <= 1.0 + (-2f64).exp() + 5e-3, "peak {peak}");
    }

    #[test]
    fn fusion_beats_noisy_baro() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.2).unwrap();
        let w = 1.5;
        let truth = |t: f64| 1.0 + 0.3 * (w * t).sin();
        let cfg = ComplementaryFilterConfig { gain: 1.0, dt: 0.02 };
        let mut s = FilterState { height: 1.0, vertical_velocity: 0.3 * w };
        let (mut se_f, mut se_b) = (0.0, 0.0);
        let n = 5000;
        for i in 1..=n {
            let t = i as f64 * cfg.dt;
            let b = truth(t) + noise.sample(&mut rng);
            s = complementary_update(s, b, -0.3 * w * w * (w * t).sin(), &cfg);
            se_f += (s.height - truth(t)).powi(2);
            se_b += (b - truth(t)).powi(2);
        }
        assert!(se_f < se_b / 4.0);
    }

    #[test]
    fn degenerate_blends() {
        let zero = DriftCorrectionConfig { epsilon: 0.0, ..Default::default() };
        assert_eq!(drift_correct(Some(9.0), 0.1, 1.0, (0.0, 0.0), 0, &zero), 1.1);
        let one = DriftCorrectionConfig { epsilon: 1.0, ..Default::default() };
        assert_eq!(drift_correct(Some(9.0), 0.1, 1.0, (0.0, 0.0), 0, &one), 9.0);
    }

    #[test]
    fn gate_and_stride_block_vlp() {
        let cfg = DriftCorrectionConfig { epsilon: 0.5, stride_k: 4, ..Default::default() };
        assert_eq!(drift_correct(Some(9.0), 0.0, 1.0, (0.0, 4f64.to_radians()), 0, &cfg), 1.0);
        assert_eq!(drift_correct(Some(9.0), 0.0, 1.0, (0.0, 0.0), 3, &cfg), 1.0);
        assert_eq!(drift_correct(Some(9.0), 0.0, 1.0, (0.0, 0.0), 8, &cfg), 5.0);
    }

    #[test]
    fn drift_ramp_settles_at_closed_form_offset() {
        // e_n = (1 - eps)(e_{n-1} + delta) has fixed point (1 - eps) delta / eps.
        let cfg = DriftCorrectionConfig::default();
        let delta = 0.001 * 0.02;
        let (mut h_bar, truth) = (1.0, 1.0);
        for i in 1..20_000 {
            h_bar = drift_correct(Some(truth), delta, h_bar, (0.0, 0.0), i, &cfg);
        }
        let expected = (1.0 - cfg.epsilon) * delta / cfg.epsilon;
        assert!((h_bar - truth - expected).abs() < 1e-12);
    }

    fn hover_frames(n: usize, h: f64, drift_rate: f64) -> Vec<SensorFrame> {
        (0..n)
            .map(|i| {
                let t = i as f64 * 0.02;
                let pose = Pose::new(t, Vector3::new(1.0, 1.0, h), 0.0, 0.0, 0.0);
                SensorFrame {
                    timestamp: t,
                    rss: vec![],
                    accel: Vector3::zeros(),
                    roll: 0.0,
                    pitch: 0.0,
                    yaw: 0.0,
                    baro_altitude: h + drift_rate * t,
                    ground_truth: pose,
                }
            })
            .collect()
    }

    #[test]
    fn noiseless_hover_holds_height() {
        let frames = hover_frames(500, 1.2, 0.0);
        let hs = estimate_height(&frames, |_| Some(1.2), Default::default(), Some(Default::default()), 2.0).unwrap();
        assert!(hs.iter().all(|h| (h.h_fused - 1.2).abs() < 1e-3));
    }

    #[test]
    fn correction_bounds_drift_and_its_absence_does_not() {
        let frames = hover_frames(9001, 1.0, 0.001);
        let on = estimate_height(&frames, |_| Some(1.0), Default::default(), Some(Default::default()), 2.0).unwrap();
        let off = estimate_height(&frames, |_| Some(1.0), Default::default(), None, 2.0).unwrap();
        assert!((on.last().unwrap().h_fused - 1.0).abs() < 0.15);
        assert!((off.last().unwrap().h_fused - 1.0).abs() >= 0.18 - 1e-3);
    }

    #[test]
    fn solver_not_called_when_correction_off() {
        let frames = hover_frames(50, 1.0, 0.0);
        let mut calls = 0;
        estimate_height(&frames, |_| {
            calls += 1;
            None
        }, Default::default(), None, 2.0).unwrap();
        assert_eq!(calls, 0);
    }
}
