//! Height-sweep baseline: assume a height, range every anchor under the parallel
//! model, trilaterate, and score how well the implied 3D distances agree.

use std::collections::HashMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::distance::distance_parallel;
use super::trilateration::trilaterate_2d;
use super::{observations, Method, Observation, PositionEstimate};
use crate::sensors::SensorFrame;
use crate::sim::Testbed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndirectHConfig {
    /// Candidate heights lie in `(lo, hi]`, m.
    pub height_range: (f64, f64),
    pub resolution: f64,
    /// Coarse grid plus golden-section refinement instead of the full sweep.
    pub fast_search: bool,
    /// Spacing of the coarse grid used by the fast search, m.
    pub coarse_step: f64,
}

impl Default for IndirectHConfig {
    fn default() -> Self {
        Self { height_range: (0.0, 2.0), resolution: 1e-3, fast_search: true, coarse_step: 0.1 }
    }
}

impl IndirectHConfig {
    pub fn full_sweep() -> Self {
        Self { fast_search: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.height_range;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid("height range must be non-empty"));
        }
        if !(self.resolution > 0.0 && self.resolution <= (hi - lo) * (1.0 + 1e-9)) {
            return Err(Error::invalid("resolution must be > 0 and no wider than the range"));
        }
        if !(self.coarse_step >= self.resolution && self.coarse_step.is_finite()) {
            return Err(Error::invalid("coarse step must be at least the resolution"));
        }
        Ok(())
    }

    /// Number of candidate heights on the sweep grid.
    pub fn candidates(&self) -> usize {
        let (lo, hi) = self.height_range;
        (((hi - lo) / self.resolution).round() as usize).max(1)
    }

    fn height(&self, k: usize) -> f64 {
        self.height_range.0 + k as f64 * self.resolution
    }
}

/// Coarse-grid local minima refined by the fast search.
const REFINED_MINIMA: usize = 3;

/// Golden-section search for the minimum of `f` over grid indices in `[lo, hi]`,
/// stopping once the bracket is one grid step wide.
fn golden_section(lo: usize, hi: usize, f: &mut impl FnMut(usize) -> f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo as f64, hi as f64);
    let snap = |x: f64| (x.round() as usize).clamp(lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(snap(c)), f(snap(d)));
    while b - a > 1.0 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(snap(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(snap(d));
        }
    }
    f(snap(a));
    f(snap(b));
}

struct Candidate {
    cost: f64,
    xy: (f64, f64),
}

fn evaluate(obs: &[Observation<'_>], anchors: &[Vector3<f64>], a_r: f64, z: f64) -> Candidate {
    const INFEASIBLE: Candidate = Candidate { cost: f64::INFINITY, xy: (f64::NAN, f64::NAN) };
    let mut ranges = Vec::with_capacity(obs.len());
    for o in obs {
        let l = o.luminaire;
        let h = z - l.position.z;
        match distance_parallel(o.rss, l.transmit_power, a_r, l.lambertian_order, h) {
            Ok(d) => ranges.push(d),
            Err(_) => return INFEASIBLE,
        }
    }
    let Ok(sol) = trilaterate_2d(anchors, &ranges, z) else {
        return INFEASIBLE;
    };
    let p = Vector3::new(sol.position.x, sol.position.y, z);
    let cost = anchors.iter().zip(&ranges).map(|(a, d)| ((p - a).norm() - d).powi(2)).sum();
    Candidate { cost, xy: (p.x, p.y) }
}

/// Sweeps (or searches) candidate heights and returns the most self-consistent
/// `(x, y, z)`. `evaluations` counts distinct candidate heights tried, each of which
/// costs one round of ranging plus one trilateration.
pub fn solve_indirect_h(frame: &SensorFrame, cfg: &IndirectHConfig, testbed: &Testbed) -> Result<PositionEstimate> {
    cfg.validate()?;
    let obs = observations(frame, testbed)?;
    let anchors: Vec<_> = obs.iter().map(|o| o.luminaire.position).collect();
    let a_r = testbed.photodiode.area;
    let n = cfg.candidates();

    let mut cache: HashMap<usize, Candidate> = HashMap::new();
    let mut cost_at = |k: usize| -> f64 {
        cache.entry(k).or_insert_with(|| evaluate(&obs, &anchors, a_r, cfg.height(k))).cost
    };

    if cfg.fast_search {
        let stride = ((cfg.coarse_step / cfg.resolution).round() as usize).max(1);
        let mut coarse: Vec<usize> = (stride..=n).step_by(stride).collect();
        if coarse.last() != Some(&n) {
            coarse.push(n);
        }
        // The cost can have a second, shallow valley near the top of the range, so
        // refine the best few coarse local minima rather than only the lowest one.
        let costs: Vec<f64> = coarse.iter().map(|&k| cost_at(k)).collect();
        let mut minima: Vec<usize> = (0..coarse.len())
            .filter(|&i| {
                costs[i].is_finite()
                    && (i == 0 || costs[i] <= costs[i - 1])
                    && (i + 1 == costs.len() || costs[i] <= costs[i + 1])
            })
            .collect();
        minima.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
        for &i in minima.iter().take(REFINED_MINIMA) {
            let k = coarse[i];
            golden_section(k.saturating_sub(stride).max(1), (k + stride).min(n), &mut cost_at);
        }
    } else {
        for k in 1..=n {
            cost_at(k);
        }
    }

    let evaluations = cache.len();
    let (k, best) = cache
        .iter()
        .filter(|(_, c)| c.cost.is_finite())
        .min_by(|(ka, a), (kb, b)| a.cost.total_cmp(&b.cost).then(ka.cmp(kb)))
        .ok_or(Error::DegenerateGeometry)?;
    Ok(PositionEstimate {
        timestamp: frame.timestamp,
        position: Vector3::new(best.xy.0, best.xy.1, cfg.height(*k)),
        method: Method::IndirectH,
        residual: best.cost,
        evaluations,
    })
}
