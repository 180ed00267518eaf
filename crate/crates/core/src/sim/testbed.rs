use nalgebra::Vector3;

use crate::beacon::{BeaconPlan, Quantizer, SynthesisOptions};
use crate::channel::{Luminaire, NoiseModel, Photodiode};
use crate::{Error, Result};

/// Receiver-side sampling of the composite beacon signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeaconSettings {
    pub base_frequency: f64,
    /// ADC rate, Hz. 7680 Hz gives 128 samples per 60 Hz period and an even number
    /// of samples per half period for every beacon up to 480 Hz.
    pub sample_rate: f64,
    pub random_phase: bool,
    pub quantizer: Option<Quantizer>,
}

impl Default for BeaconSettings {
    fn default() -> Self {
        Self { base_frequency: 60.0, sample_rate: 7680.0, random_phase: false, quantizer: None }
    }
}

/// Room, anchors and receiver optics.
#[derive(Debug, Clone, PartialEq)]
pub struct Testbed {
    /// Room size; the room spans `[0, extent]` on every axis.
    pub extent: Vector3<f64>,
    pub luminaires: Vec<Luminaire>,
    pub photodiode: Photodiode,
    /// Per-sample photodiode noise.
    pub noise: NoiseModel,
    /// Extracted RSS at or below this level is treated as "anchor not heard", W.
    pub rss_floor: f64,
    pub beacon: BeaconSettings,
}

impl Testbed {
    pub const DEFAULT_TRANSMIT_POWER: f64 = 4.7;
    pub const DEFAULT_LAMBERTIAN_ORDER: f64 = 14.0;
    pub const DEFAULT_PD_AREA: f64 = 5.2e-6;
    /// Full field of view of the photodiode; the half-angle is half of this.
    pub const DEFAULT_FOV_DEG: f64 = 160.0;
    pub const DEFAULT_NOISE_SIGMA: f64 = 5.0e-8;
    pub const DEFAULT_AMBIENT_DC: f64 = 5.0e-7;
    pub const DEFAULT_RSS_FLOOR: f64 = 3.0e-8;

    /// The 2 m cube with four floor lamps facing up.
    pub fn reference() -> Self {
        let lamps = [
            (1, Vector3::new(0.25, 1.0, 0.0), 60.0),
            (2, Vector3::new(1.0, 1.75, 0.0), 120.0),
            (3, Vector3::new(1.75, 1.0, 0.0), 240.0),
            (4, Vector3::new(1.0, 0.25, 0.0), 480.0),
        ];
        let luminaires = lamps
            .iter()
            .map(|&(id, pos, f)| {
                Luminaire::new(id, pos, Self::DEFAULT_TRANSMIT_POWER, Self::DEFAULT_LAMBERTIAN_ORDER, f)
                    .expect("reference luminaire is valid")
            })
            .collect();
        Self {
            extent: Vector3::new(2.0, 2.0, 2.0),
            luminaires,
            photodiode: Photodiode::new(Self::DEFAULT_PD_AREA, (Self::DEFAULT_FOV_DEG / 2.0).to_radians())
                .expect("reference photodiode is valid"),
            noise: NoiseModel {
                gaussian_sigma: Self::DEFAULT_NOISE_SIGMA,
                ambient_dc: Self::DEFAULT_AMBIENT_DC,
            },
            rss_floor: Self::DEFAULT_RSS_FLOOR,
            beacon: BeaconSettings::default(),
        }
    }

    /// Same testbed with receiver noise switched off.
    pub fn noiseless(mut self) -> Self {
        self.noise = NoiseModel::NONE;
        self.rss_floor = 0.0;
        self
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        const SLACK: f64 = 1e-9;
        (0..3).all(|i| p[i] >= -SLACK && p[i] <= self.extent[i] + SLACK)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.extent.iter().all(|&e| e > 0.0 && e.is_finite()) {
            return Err(Error::Config("testbed extent must be positive".into()));
        }
        if self.luminaires.is_empty() {
            return Err(Error::Config("testbed needs at least one luminaire".into()));
        }
        for l in &self.luminaires {
            l.validate()?;
            if !self.contains(&l.position) {
                return Err(Error::Config(format!("luminaire {} lies outside the testbed", l.id)));
            }
        }
        self.photodiode.validate()?;
        self.noise.validate()?;
        if !(self.rss_floor >= 0.0 && self.rss_floor.is_finite()) {
            return Err(Error::Config("rss_floor must be >= 0".into()));
        }
        self.beacon_plan()?;
        Ok(())
    }

    pub fn beacon_plan(&self) -> Result<BeaconPlan> {
        BeaconPlan::from_luminaires(self.beacon.base_frequency, &self.luminaires)
    }

    pub fn synthesis_options(&self) -> Result<SynthesisOptions> {
        let plan = self.beacon_plan()?;
        Ok(SynthesisOptions {
            random_phase: self.beacon.random_phase,
            quantizer: self.beacon.quantizer,
            ..SynthesisOptions::one_period(&plan, self.beacon.sample_rate)?
        })
    }

    pub fn anchor_positions(&self) -> Vec<Vector3<f64>> {
        self.luminaires.iter().map(|l| l.position).collect()
    }

    /// Return a copy with every transmit power multiplied by `factor`.
    pub fn scaled_power(&self, factor: f64) -> Self {
        let mut tb = self.clone();
        for l in &mut tb.luminaires {
            l.transmit_power *= factor;
        }
        tb
    }
}

impl Default for Testbed {
    fn default() -> Self {
        Self::reference()
    }
}
