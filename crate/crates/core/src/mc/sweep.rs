use serde::{Deserialize, Serialize};

use super::barrier::ThicknessDistribution;
use super::ensemble::{simulate_ensemble, EnsembleConfig, EnsembleMetrics, Geometry};
use crate::error::{Error, Result};
use crate::fitting::DistributionKind;
use crate::rng::KeyedRng;

/// Barrier heights with dedicated sweep presets, V.
pub const BARRIER_HEIGHT_PRESETS: [f64; 4] = [0.8, 1.0, 1.22, 1.5];

/// `start, start + step, ...` up to and including `end` (within 1e-9 step).
pub fn steps_inclusive(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(end >= start) {
        return Err(Error::InvalidInput(format!("bad range {start}..={end} step {step}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    // Rounded to 12 decimals so grid values print as typed.
    Ok((0..=n)
        .map(|i| ((start + step * i as f64) * 1e12).round() / 1e12)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: DistributionKind,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub ensemble: EnsembleConfig,
    pub geometry: Geometry,
    pub seed: u64,
}

impl SweepSpec {
    /// Mean 0.7..=1.4 nm and sd 0..=0.4 nm at 0.025 nm steps, phi = 1.22 V.
    pub fn default_grid(kind: DistributionKind, seed: u64) -> Self {
        Self {
            kind,
            means: steps_inclusive(0.7, 1.4, 0.025).unwrap(),
            sds: steps_inclusive(0.0, 0.4, 0.025).unwrap(),
            ensemble: EnsembleConfig::default(),
            geometry: Geometry::default(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub mean_index: usize,
    pub sd_index: usize,
    pub mean: f64,
    pub sd: f64,
    pub seed: u64,
    pub metrics: EnsembleMetrics,
}

/// Simulates one ensemble per `(mean, sd)` cell, mean-major order. Cell
/// seeds are derived from the master seed and the cell indices.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    if spec.means.is_empty() || spec.sds.is_empty() {
        return Err(Error::InvalidInput("sweep ranges must be non-empty".into()));
    }
    spec.ensemble.targets.validate()?;
    let master = KeyedRng::new(spec.seed);
    let mut cells = Vec::with_capacity(spec.means.len() * spec.sds.len());
    for (i, &mean) in spec.means.iter().enumerate() {
        for (j, &sd) in spec.sds.iter().enumerate() {
            let dist = ThicknessDistribution::new(spec.kind, mean, sd)?;
            let seed = master.derive_seed(i as u32, j as u32);
            let metrics = simulate_ensemble(&dist, &spec.ensemble, &spec.geometry, seed)?;
            cells.push(SweepCell {
                mean_index: i,
                sd_index: j,
                mean,
                sd,
                seed,
                metrics,
            });
        }
    }
    Ok(cells)
}
