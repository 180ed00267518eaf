//! Error statistics and the method-comparison harness.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::fusion::{ComplementaryFilterConfig, DriftCorrectionConfig, HeightEstimate, HeightEstimator};
use crate::localization::{
    solve_firefly, solve_indirect_h, solve_pso_3d, IndirectHConfig, Method, PositionEstimate, PsoConfig,
};
use crate::sensors::{Pose, SensorFrame};
use crate::sim::Testbed;
use crate::{Error, Result};

const TIMESTAMP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    pub n: usize,
}

impl ErrorStats {
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::invalid("no errors to summarise"));
        }
        if errors.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::invalid("errors must be finite and non-negative"));
        }
        let n = errors.len();
        let mut sorted = errors.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
        let var = sorted.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
        Ok(Self { mean, median, max: sorted[n - 1], std_dev: var.sqrt(), n })
    }
}

/// Percentage by which `candidate` improves on `baseline`.
pub fn improvement(candidate: f64, baseline: f64) -> f64 {
    100.0 * (1.0 - candidate / baseline)
}

/// Per-frame 3D error of each estimate against the truth pose with the same timestamp.
pub fn position_errors(estimates: &[PositionEstimate], truth: &[Pose]) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(Error::invalid(format!("{} estimates but {} truth poses", estimates.len(), truth.len())));
    }
    estimates
        .iter()
        .zip(truth)
        .enumerate()
        .map(|(index, (e, t))| {
            if (e.timestamp - t.timestamp).abs() > TIMESTAMP_TOL {
                return Err(Error::TimestampMismatch { index, estimate: e.timestamp, truth: t.timestamp });
            }
            Ok((e.position - t.position).norm())
        })
        .collect()
}

/// Solver and estimator settings shared by every run in a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub testbed: Testbed,
    pub filter: ComplementaryFilterConfig,
    /// `None` disables barometer drift correction.
    pub drift: Option<DriftCorrectionConfig>,
    pub indirect_h: IndirectHConfig,
    pub pso: PsoConfig,
    /// Anchors above the RSS floor needed before an Indirect-H height may correct
    /// the barometer. Three anchors determine `(x, y, z)` exactly, leaving no
    /// residual to catch a bad height.
    pub vlp_min_anchors: usize,
    pub seed: u64,
}

impl EvalConfig {
    pub const DEFAULT_VLP_MIN_ANCHORS: usize = 4;

    pub fn new(testbed: Testbed) -> Self {
        Self {
            testbed,
            filter: ComplementaryFilterConfig::default(),
            drift: Some(DriftCorrectionConfig::default()),
            indirect_h: IndirectHConfig::default(),
            pso: PsoConfig::default(),
            vlp_min_anchors: Self::DEFAULT_VLP_MIN_ANCHORS,
            seed: 0,
        }
    }

    fn pso_seed(&self, flight: usize, frame: usize) -> u64 {
        self.seed ^ ((flight as u64) << 32) ^ frame as u64
    }
}

/// One solver over one log. `estimates[i]` is `None` where frame `i` failed.
#[derive(Debug, Clone)]
pub struct FlightRun {
    pub method: Method,
    pub estimates: Vec<Option<PositionEstimate>>,
    /// Filled for the Firefly pipeline only.
    pub heights: Option<Vec<HeightEstimate>>,
}

impl FlightRun {
    /// Errors of the successful frames.
    pub fn errors(&self, frames: &[SensorFrame]) -> Result<Vec<f64>> {
        let (est, truth): (Vec<_>, Vec<_>) = self
            .estimates
            .iter()
            .zip(frames)
            .filter_map(|(e, f)| e.map(|e| (e, f.ground_truth)))
            .unzip();
        position_errors(&est, &truth)
    }

    pub fn failures(&self) -> usize {
        self.estimates.iter().filter(|e| e.is_none()).count()
    }
}

/// Runs the fused-height estimator over a log, with Indirect-H supplying the VLP
/// height on frames that pass the tilt gate and stride.
pub fn fused_heights(frames: &[SensorFrame], cfg: &EvalConfig) -> Result<Vec<HeightEstimate>> {
    let mut est = HeightEstimator::new(cfg.filter, cfg.drift, cfg.testbed.extent.z)?;
    Ok(frames
        .iter()
        .map(|f| {
            est.update(f, |f| {
                let heard = f.rss.iter().filter(|&&p| p > cfg.testbed.rss_floor && p.is_finite()).count();
                if heard < cfg.vlp_min_anchors {
                    return None;
                }
                solve_indirect_h(f, &cfg.indirect_h, &cfg.testbed).ok().map(|e| e.position.z)
            })
        })
        .collect())
}

/// Runs `method` over every frame of one flight. `flight` only perturbs the PSO seeds.
pub fn run_method(frames: &[SensorFrame], method: Method, cfg: &EvalConfig, flight: usize) -> Result<FlightRun> {
    let tb = &cfg.testbed;
    let (estimates, heights) = match method {
        Method::Firefly => {
            let heights = fused_heights(frames, cfg)?;
            let est = frames
                .iter()
                .zip(&heights)
                .map(|(f, h)| solve_firefly(f, h.h_fused, tb).ok().map(|fix| fix.estimate))
                .collect();
            (est, Some(heights))
        }
        Method::IndirectH => (frames.iter().map(|f| solve_indirect_h(f, &cfg.indirect_h, tb).ok()).collect(), None),
        Method::Pso3d => (
            frames
                .iter()
                .enumerate()
                .map(|(i, f)| solve_pso_3d(f, &cfg.pso, tb, cfg.pso_seed(flight, i)).ok())
                .collect(),
            None,
        ),
    };
    Ok(FlightRun { method, estimates, heights })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    /// `None` if every frame failed.
    pub stats: Option<ErrorStats>,
    pub frames: usize,
    pub failures: usize,
    pub evaluations: usize,
}

impl MethodSummary {
    pub fn failure_rate(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.failures as f64 / self.frames as f64
        }
    }

    /// Mean evaluations per successful fix.
    pub fn evaluations_per_fix(&self) -> f64 {
        let ok = self.frames - self.failures;
        if ok == 0 {
            0.0
        } else {
            self.evaluations as f64 / ok as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub summaries: Vec<MethodSummary>,
    /// Raw runs, indexed `[flight][method]` in the order methods were given.
    pub runs: Vec<Vec<FlightRun>>,
}

impl Comparison {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn mean(&self, method: Method) -> Option<f64> {
        self.summary(method)?.stats.map(|s| s.mean)
    }

    /// `(candidate, baseline, improvement %)` for every ordered pair with stats.
    pub fn improvements(&self) -> Vec<(Method, Method, f64)> {
        let mut out = Vec::new();
        for a in &self.summaries {
            for b in &self.summaries {
                if let (Some(sa), Some(sb)) = (a.stats, b.stats) {
                    if a.method != b.method {
                        out.push((a.method, b.method, improvement(sa.mean, sb.mean)));
                    }
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<11} {:>6} {:>8} {:>10} {:>10} {:>10} {:>10} {:>12}",
            "method", "fixes", "failed", "mean_cm", "median_cm", "max_cm", "std_cm", "evals/fix"
        );
        for m in &self.summaries {
            let (mean, median, max, std, n) = match m.stats {
                Some(st) => (
                    format!("{:.2}", st.mean * 100.0),
                    format!("{:.2}", st.median * 100.0),
                    format!("{:.2}", st.max * 100.0),
                    format!("{:.2}", st.std_dev * 100.0),
                    st.n,
                ),
                None => ("-".into(), "-".into(), "-".into(), "-".into(), 0),
            };
            let _ = writeln!(
                s,
                "{:<11} {:>6} {:>7.1}% {:>10} {:>10} {:>10} {:>10} {:>12.1}",
                m.method.tag(),
                n,
                100.0 * m.failure_rate(),
                mean,
                median,
                max,
                std,
                m.evaluations_per_fix()
            );
        }
        let imps = self.improvements();
        if !imps.is_empty() {
            let _ = writeln!(s);
            for (a, b, pct) in imps {
                if a == Method::Firefly || (a == Method::IndirectH && b == Method::Pso3d) {
                    let _ = writeln!(s, "improvement {} vs {}: {:.2}%", a, b, pct);
                }
            }
        }
        s
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "n", "failures", "mean", "median", "max", "std_dev", "evaluations"])?;
        for m in &self.summaries {
            let f = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
            w.write_record([
                m.method.tag().to_string(),
                m.stats.map_or(0, |s| s.n).to_string(),
                m.failures.to_string(),
                f(m.stats.map(|s| s.mean)),
                f(m.stats.map(|s| s.median)),
                f(m.stats.map(|s| s.max)),
                f(m.stats.map(|s| s.std_dev)),
                m.evaluations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every method over every log in parallel and aggregates per method.
pub fn compare_methods(logs: &[Vec<SensorFrame>], methods: &[Method], cfg: &EvalConfig) -> Result<Comparison> {
    if logs.is_empty() {
        return Err(Error::invalid("need at least one log"));
    }
    let jobs: Vec<(usize, Method)> =
        (0..logs.len()).flat_map(|i| methods.iter().map(move |&m| (i, m))).collect();
    let results: Vec<FlightRun> =
        jobs.par_iter().map(|&(i, m)| run_method(&logs[i], m, cfg, i)).collect::<Result<_>>()?;
    let runs: Vec<Vec<FlightRun>> = results.chunks(methods.len()).map(|c| c.to_vec()).collect();

    let mut summaries = Vec::with_capacity(methods.len());
    for (j, &method) in methods.iter().enumerate() {
        let (mut errors, mut frames, mut failures, mut evaluations) = (Vec::new(), 0, 0, 0);
        for (log, flight_runs) in logs.iter().zip(&runs) {
            let run = &flight_runs[j];
            errors.extend(run.errors(log)?);
            frames += log.len();
            failures += run.failures();
            evaluations += run.estimates.iter().flatten().map(|e| e.evaluations).sum::<usize>();
        }
        let stats = if errors.is_empty() { None } else { Some(ErrorStats::from_errors(&errors)?) };
        summaries.push(MethodSummary { method, stats, frames, failures, evaluations });
    }
    Ok(Comparison { summaries, runs })
}

/// Writes `t,method,x,y,z,err,evals`; failed frames keep their timestamp and leave
/// the other fields empty.
pub fn write_estimate_trace<W: Write>(writer: W, run: &FlightRun, frames: &[SensorFrame]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "method", "x", "y", "z", "err", "evals"])?;
    for (e, f) in run.estimates.iter().zip(frames) {
        match e {
            Some(e) => {
                let err = position_errors(std::slice::from_ref(e), std::slice::from_ref(&f.ground_truth))?[0];
                w.write_record([
                    format!("{:.4}", e.timestamp),
                    e.method.tag().to_string(),
                    format!("{:.6}", e.position.x),
                    format!("{:.6}", e.position.y),
                    format!("{:.6}", e.position.z),
                    format!("{err:.6}"),
                    e.evaluations.to_string(),
                ])?;
            }
            None => {
                w.write_record([format!("{:.4}", f.timestamp), run.method.tag().to_string(), String::new(), String::new(), String::new(), String::new(), String::new()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn est(t: f64, p: Vector3<f64>) -> PositionEstimate {
        PositionEstimate { timestamp: t, position: p, method: Method::Firefly, residual: 0.0, evaluations: 1 }
    }

    #[test]
    fn three_four_five() {
        let truth = Pose::new(1.0, Vector3::new(1.0, 1.0, 1.0), 0.0, 0.0, 0.0);
        let e = position_errors(&[est(1.0, Vector3::new(1.3, 1.0, 1.4))], &[truth]).unwrap();
        assert!((e[0] - 0.5).abs() < 1e-12);
        let zero = position_errors(&[est(1.0, truth.position)], &[truth]).unwrap();
        assert_eq!(zero[0], 0.0);
    }

    #[test]
    fn misaligned_timestamps_rejected() {
        let truth = Pose::new(1.0, Vector3::zeros(), 0.0, 0.0, 0.0);
        assert!(matches!(
            position_errors(&[est(1.02, Vector3::zeros())], &[truth]),
            Err(Error::TimestampMismatch { index: 0, .. })
        ));
    }

    #[test]
    fn stats_of_small_sample() {
        let s = ErrorStats::from_errors(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.median, s.max, s.n), (2.5, 2.5, 4.0, 4));
        assert!((s.std_dev - 1.25f64.sqrt()).abs() < 1e-15);
        assert!(ErrorStats::from_errors(&[]).is_err());
    }

    #[test]
    fn improvement_formula() {
        assert!((improvement(23.19, 40.01) - 42.04).abs() < 0.01);
        assert_eq!(improvement(1.0, 1.0), 0.0);
    }
}
