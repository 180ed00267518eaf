//! FDMA beacons: every luminaire blinks a 50 % duty on-off square wave at its own
//! frequency, and the receiver recovers per-luminaire power from one FFT.
//!
//! Frequencies are power-of-two multiples of a base frequency. A square wave only
//! has odd harmonics, so no beacon's harmonics land on another beacon's bin.

use std::io::Write;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::{Luminaire, NoiseModel};
use crate::{Error, Result};

const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BeaconPlan {
    pub base_frequency: f64,
    /// `(luminaire id, frequency in Hz)`, in the order RSS vectors are reported.
    pub assignments: Vec<(u32, f64)>,
}

impl BeaconPlan {
    pub fn new(base_frequency: f64, assignments: Vec<(u32, f64)>) -> Result<Self> {
        let plan = Self { base_frequency, assignments };
        plan.validate()?;
        Ok(plan)
    }

    /// Plan using each luminaire's configured beacon frequency.
    pub fn from_luminaires(base_frequency: f64, luminaires: &[Luminaire]) -> Result<Self> {
        Self::new(base_frequency, luminaires.iter().map(|l| (l.id, l.beacon_frequency)).collect())
    }

    /// Plan assigning `f0 * 2^i` to the i-th luminaire.
    pub fn power_of_two(base_frequency: f64, ids: &[u32]) -> Result<Self> {
        Self::new(
            base_frequency,
            ids.iter().enumerate().map(|(i, &id)| (id, base_frequency * (1u64 << i) as f64)).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_frequency > 0.0 && self.base_frequency.is_finite()) {
            return Err(Error::invalid("base frequency must be > 0"));
        }
        for (i, &(id, f)) in self.assignments.iter().enumerate() {
            let ratio = f / self.base_frequency;
            let n = ratio.log2().round();
            if !(ratio >= 1.0 && (ratio - 2f64.powf(n)).abs() <= ALIGN_TOL * ratio) {
                return Err(Error::invalid(format!(
                    "beacon {id}: {f} Hz is not a power-of-two multiple of {} Hz",
                    self.base_frequency
                )));
            }
            for &(other_id, other_f) in &self.assignments[..i] {
                if other_id == id {
                    return Err(Error::invalid(format!("luminaire {id} assigned twice")));
                }
                if (other_f - f).abs() <= ALIGN_TOL * f {
                    return Err(Error::invalid(format!("frequency {f} Hz assigned twice")));
                }
            }
        }
        Ok(())
    }

    pub fn max_frequency(&self) -> f64 {
        self.assignments.iter().map(|a| a.1).fold(0.0, f64::max)
    }

    /// Samples in one base-frequency period, if that is an integer.
    fn window_len(&self, sample_rate: f64) -> Result<usize> {
        let n = sample_rate / self.base_frequency;
        if (n - n.round()).abs() > ALIGN_TOL * n || n.round() < 1.0 {
            return Err(Error::MisalignedWindow { frequency: self.base_frequency, window: n as usize });
        }
        Ok(n.round() as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

impl SampledWaveform {
    /// Debug dump as `time,value` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "value"])?;
        for (i, v) in self.samples.iter().enumerate() {
            w.write_record([(i as f64 / self.sample_rate).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform ADC model: `levels` codes spanning `[0, full_scale]` watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub bits: u32,
    pub full_scale: f64,
}

impl Quantizer {
    pub fn apply(&self, x: f64) -> f64 {
        let top = ((1u64 << self.bits) - 1) as f64;
        let code = (x / self.full_scale * top).round().clamp(0.0, top);
        code * self.full_scale / top
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub sample_rate: f64,
    pub num_samples: usize,
    /// Start every beacon at a random whole-sample phase instead of in phase.
    pub random_phase: bool,
    pub quantizer: Option<Quantizer>,
}

impl SynthesisOptions {
    /// One base-frequency period at `sample_rate`, all beacons in phase, no ADC model.
    pub fn one_period(plan: &BeaconPlan, sample_rate: f64) -> Result<Self> {
        Ok(Self {
            sample_rate,
            num_samples: plan.window_len(sample_rate)?,
            random_phase: false,
            quantizer: None,
        })
    }
}

fn square(n: usize, cycles_per_sample: f64, phase: f64) -> f64 {
    if (n as f64 * cycles_per_sample + phase).fract() < 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Composite photodiode signal: the sum of each luminaire's on-off wave with peak
/// equal to its received power, plus ambient light and Gaussian noise.
pub fn synthesize_composite<R: Rng + ?Sized>(
    powers: &[f64],
    plan: &BeaconPlan,
    opts: &SynthesisOptions,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<SampledWaveform> {
    plan.validate()?;
    noise.validate()?;
    let fs = opts.sample_rate;
    if !(fs > 2.0 * plan.max_frequency()) {
        return Err(Error::Nyquist { sample_rate: fs, max_frequency: plan.max_frequency() });
    }
    if powers.len() > plan.assignments.len() {
        return Err(Error::invalid(format!(
            "{} powers for {} beacons",
            powers.len(),
            plan.assignments.len()
        )));
    }
    let period = fs / plan.base_frequency;
    if (opts.num_samples as f64) < period.floor() {
        return Err(Error::ShortWaveform { needed: period.ceil() as usize, got: opts.num_samples });
    }

    let phases: Vec<f64> = plan
        .assignments
        .iter()
        .map(|&(_, f)| {
            if opts.random_phase {
                let per_period = fs / f;
                if (per_period - per_period.round()).abs() <= ALIGN_TOL * per_period {
                    let m = per_period.round() as u64;
                    rng.random_range(0..m) as f64 / m as f64
                } else {
                    rng.random::<f64>()
                }
            } else {
                0.0
            }
        })
        .collect();

    let mut samples = vec![0.0; opts.num_samples];
    for ((&p, &(_, f)), &phase) in powers.iter().zip(&plan.assignments).zip(&phases) {
        if p == 0.0 {
            continue;
        }
        let cps = f / fs;
        for (n, s) in samples.iter_mut().enumerate() {
            *s += p * square(n, cps, phase);
        }
    }
    for s in samples.iter_mut() {
        *s += noise.sample(rng);
        if let Some(q) = opts.quantizer {
            *s = q.apply(*s);
        }
    }
    Ok(SampledWaveform { sample_rate: fs, samples })
}

/// Fundamental amplitude of a sampled 0 -> 1 square wave, used to turn a bin
/// magnitude into the wave's peak value. Tends to 2/pi for fine sampling.
fn square_fundamental(len: usize, bin: usize, cycles_per_sample: f64) -> f64 {
    let w = -2.0 * std::f64::consts::PI * bin as f64 / len as f64;
    let mut acc = Complex::new(0.0, 0.0);
    for n in 0..len {
        if square(n, cycles_per_sample, 0.0) > 0.0 {
            acc += Complex::from_polar(1.0, w * n as f64);
        }
    }
    2.0 * acc.norm() / len as f64
}

/// Per-beacon received power read off the FFT of the longest prefix that spans a
/// whole number of base-frequency periods (rectangular window). DC is ignored.
pub fn extract_rss(waveform: &SampledWaveform, plan: &BeaconPlan) -> Result<Vec<f64>> {
    plan.validate()?;
    let fs = waveform.sample_rate;
    let period = plan.window_len(fs)?;
    let len = waveform.samples.len() / period * period;
    if len == 0 {
        return Err(Error::ShortWaveform { needed: period, got: waveform.samples.len() });
    }

    let mut bins = Vec::with_capacity(plan.assignments.len());
    for &(_, f) in &plan.assignments {
        let k = f * len as f64 / fs;
        if (k - k.round()).abs() > ALIGN_TOL * k.max(1.0) || k.round() as usize > len / 2 {
            return Err(Error::MisalignedWindow { frequency: f, window: len });
        }
        bins.push(k.round() as usize);
    }

    let mut buf: Vec<Complex<f64>> =
        waveform.samples[..len].iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);

    Ok(plan
        .assignments
        .iter()
        .zip(&bins)
        .map(|(&(_, f), &k)| {
            let amplitude = 2.0 * buf[k].norm() / len as f64;
            amplitude / square_fundamental(len, k, f / fs)
        })
        .collect())
}
