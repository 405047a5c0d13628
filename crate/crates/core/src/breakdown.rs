//! Thinnest-point statistics and breakdown analysis.
//!
//! Breakdown is modelled as `V_bd = t_min * E_ds` with a single dielectric
//! strength, so the breakdown histogram is a rescaled histogram of per-junction
//! minimum thickness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{BarrierField, ThicknessDistribution};
use crate::rng::{KeyedRng, Stream};
use crate::simmons::{IvCurve, Simmons, SimmonsParams};
use crate::stats;

/// Mesh positions are keyed on a lattice of this pitch (nm), so a refined
/// mesh revisits every coordinate of a coarser one.
pub const MESH_QUANTUM_NM: f64 = 1e-3;

pub const DEFAULT_MESH_NM: f64 = 0.2;
pub const DEFAULT_JUMP_FACTOR: f64 = 5.0;
pub const DEFAULT_GROUP_THRESHOLD: f64 = 1.3;

const MIN_DETECT_SAMPLES: usize = 10;
const MIN_PRIOR_INCREMENTS: usize = 3;

fn mesh_layout(extent_nm: f64, mesh: f64, axis: &str) -> Result<(u32, u32)> {
    if !(extent_nm > 0.0) || !extent_nm.is_finite() {
        return Err(Error::InvalidInput(format!("{axis} must be positive, got {extent_nm}")));
    }
    let ratio = mesh / MESH_QUANTUM_NM;
    let step = ratio.round();
    if step < 1.0 || (ratio - step).abs() > 1e-6 * step {
        return Err(Error::InvalidInput(format!(
            "mesh {mesh} nm must be a positive multiple of {MESH_QUANTUM_NM} nm"
        )));
    }
    let n = (extent_nm / mesh + 1e-9).floor();
    if n < 1.0 {
        return Err(Error::InvalidInput(format!(
            "{axis} {extent_nm} nm is smaller than the mesh"
        )));
    }
    let last = (n - 1.0) * step;
    if last > u32::MAX as f64 {
        return Err(Error::InvalidInput(format!(
            "{axis} {extent_nm} nm is too large for the key lattice"
        )));
    }
    Ok((n as u32, step as u32))
}

/// Minimum barrier thickness of each of `n_junctions` junctions, sampled on a
/// square mesh. The draw at mesh node `(i, j)` of junction `k` is keyed by
/// `(seed, k, i * step, j * step)` with `step = mesh / MESH_QUANTUM_NM`.
///
/// Normal draws may give minima `<= 0`; these are returned unchanged.
pub fn min_thickness_samples(
    dist: &ThicknessDistribution,
    width_nm: f64,
    height_nm: f64,
    mesh: f64,
    n_junctions: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    dist.validate()?;
    if !(mesh > 0.0) || !mesh.is_finite() {
        return Err(Error::InvalidInput(format!("mesh must be positive, got {mesh}")));
    }
    let (nx, step) = mesh_layout(width_nm, mesh, "width")?;
    let (ny, _) = mesh_layout(height_nm, mesh, "height")?;
    let rng = KeyedRng::new(seed);
    // The thickness transform is monotone in the uniform, so the minimum
    // thickness is the transform of the minimum uniform.
    let minima: Vec<f64> = (0..n_junctions as u32)
        .into_par_iter()
        .map(|k| {
            let mut u_min = 1.0f64;
            for j in 0..ny {
                for i in 0..nx {
                    u_min = u_min.min(rng.uniform(Stream::ThinPoint, k, i * step, j * step));
                }
            }
            dist.quantile(u_min)
        })
        .collect();
    let shorts = minima.iter().filter(|&&t| t <= 0.0).count();
    if shorts > 0 {
        log::info!("{shorts} of {n_junctions} junctions have a non-positive thinnest point");
    }
    Ok(minima)
}

/// Drops non-positive minima (shorted barriers), warning when any are removed.
pub fn positive_minima(minima: &[f64]) -> (Vec<f64>, usize) {
    let kept: Vec<f64> = minima.iter().copied().filter(|&t| t > 0.0).collect();
    let removed = minima.len() - kept.len();
    if removed > 0 {
        log::warn!("discarding {removed} of {} non-positive thinnest points", minima.len());
    }
    (kept, removed)
}

/// Single dielectric strength mapping thinnest points onto breakdown voltages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DielectricCalibration {
    /// GV/m, numerically equal to V/nm.
    pub e_ds: f64,
    /// nm.
    pub mean_min_thickness: f64,
    /// V.
    pub target_mean_vbd: f64,
}

impl DielectricCalibration {
    pub fn breakdown_voltages(&self, minima: &[f64]) -> Vec<f64> {
        minima.iter().map(|t| t * self.e_ds).collect()
    }
}

/// Chooses `E_ds` so that the rescaled minima have mean `target_mean_vbd`.
pub fn calibrate_dielectric_strength(minima: &[f64], target_mean_vbd: f64) -> Result<DielectricCalibration> {
    if minima.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, found: 0 });
    }
    if let Some(t) = minima.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "thinnest points must be positive and finite, found {t}; filter shorted junctions first"
        )));
    }
    if !(target_mean_vbd > 0.0) || !target_mean_vbd.is_finite() {
        return Err(Error::InvalidInput(format!(
            "target mean breakdown voltage must be positive, got {target_mean_vbd}"
        )));
    }
    let mean = stats::mean(minima).unwrap();
    Ok(DielectricCalibration {
        e_ds: target_mean_vbd / mean,
        mean_min_thickness: mean,
        target_mean_vbd,
    })
}

/// Finds the ohmic transition on the positive branch of an IV: the start of
/// the first segment whose incremental conductance exceeds `jump_factor`
/// times the median of all earlier increments. `None` if no jump is found.
pub fn detect_breakdown(iv: &IvCurve<f64>, jump_factor: f64) -> Result<Option<f64>> {
    if !(jump_factor > 1.0) {
        return Err(Error::InvalidInput(format!(
            "jump factor must exceed 1, got {jump_factor}"
        )));
    }
    let pts: Vec<(f64, f64)> = iv.points().iter().copied().filter(|p| p.0 >= 0.0).collect();
    if pts.len() < MIN_DETECT_SAMPLES {
        return Err(Error::InsufficientPoints {
            needed: MIN_DETECT_SAMPLES,
            found: pts.len(),
        });
    }
    if pts.iter().all(|p| p.1 == 0.0) {
        return Err(Error::InvalidCurve("current is identically zero".into()));
    }
    let g: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    for i in MIN_PRIOR_INCREMENTS..g.len() {
        let reference = stats::median(&g[..i]).unwrap();
        if reference > 0.0 && g[i] > jump_factor * reference {
            return Ok(Some(pts[i].0));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRecord {
    pub junction_id: String,
    /// V.
    pub breakdown_voltage: f64,
    /// Ω.
    pub resistance: f64,
}

impl BreakdownRecord {
    pub fn new(junction_id: impl Into<String>, breakdown_voltage: f64, resistance: f64) -> Result<Self> {
        if !(breakdown_voltage > 0.0)
            || !(resistance > 0.0)
            || !breakdown_voltage.is_finite()
            || !resistance.is_finite()
        {
            return Err(Error::InvalidInput(format!(
                "breakdown record needs positive voltage and resistance, got {breakdown_voltage} V, {resistance} Ω"
            )));
        }
        Ok(Self {
            junction_id: junction_id.into(),
            breakdown_voltage,
            resistance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub count: usize,
    pub fraction: f64,
    /// Ω; `None` for an empty group.
    pub median_resistance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownGrouping {
    /// V.
    pub threshold: f64,
    /// `V_bd < threshold`.
    pub low: GroupStats,
    /// `V_bd >= threshold`.
    pub high: GroupStats,
    /// `median_R(high) - median_R(low)`, Ω.
    pub delta_r: Option<f64>,
    /// `delta_r / median_R(low)`.
    pub relative_delta: Option<f64>,
    pub warnings: Vec<String>,
}

fn group_stats(rs: &[f64], total: usize) -> GroupStats {
    GroupStats {
        count: rs.len(),
        fraction: rs.len() as f64 / total as f64,
        median_resistance: stats::median(rs),
    }
}

/// Splits records at `threshold` and compares the median resistances.
pub fn group_by_breakdown(records: &[BreakdownRecord], threshold: f64) -> Result<BreakdownGrouping> {
    if records.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, found: 0 });
    }
    let (low, high): (Vec<&BreakdownRecord>, Vec<&BreakdownRecord>) =
        records.iter().partition(|r| r.breakdown_voltage < threshold);
    let low_r: Vec<f64> = low.iter().map(|r| r.resistance).collect();
    let high_r: Vec<f64> = high.iter().map(|r| r.resistance).collect();
    let low = group_stats(&low_r, records.len());
    let high = group_stats(&high_r, records.len());
    let mut warnings = Vec::new();
    for (name, g) in [("low", &low), ("high", &high)] {
        if g.count == 0 {
            let msg = format!("{name} breakdown group (threshold {threshold} V) is empty");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let delta_r = match (low.median_resistance, high.median_resistance) {
        (Some(l), Some(h)) => Some(h - l),
        _ => None,
    };
    Ok(BreakdownGrouping {
        threshold,
        relative_delta: delta_r.zip(low.median_resistance).map(|(d, l)| d / l),
        low,
        high,
        delta_r,
        warnings,
    })
}

/// Cumulative share of zero-bias conductance carried by the most conductive
/// pixels: points `(area fraction, conductance fraction)` from `(0, 0)` to
/// `(1, 1)`.
pub fn cumulative_conductance(field: &BarrierField, barrier_height: f64) -> Result<Vec<(f64, f64)>> {
    if let Some((x, y)) = field.first_short() {
        return Err(Error::Shorted { x, y });
    }
    let model = Simmons::<f64>::default();
    let pixel = field.pixel_area();
    let mut g = field
        .thickness
        .iter()
        .map(|&t| model.zero_bias_conductance(&SimmonsParams::new(pixel, t, barrier_height)?))
        .collect::<Result<Vec<f64>>>()?;
    if let Some(bad) = g.iter().find(|c| !(**c > 0.0)) {
        return Err(Error::Degenerate(format!(
            "pixel conductance {bad} is not positive; barrier too thin for the low-bias limit"
        )));
    }
    g.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = g.iter().sum();
    let n = g.len() as f64;
    let mut curve = Vec::with_capacity(g.len() + 1);
    curve.push((0.0, 0.0));
    let mut acc = 0.0;
    for (i, c) in g.iter().enumerate() {
        acc += c;
        curve.push(((i + 1) as f64 / n, acc / total));
    }
    if let Some(last) = curve.last_mut() {
        *last = (1.0, 1.0);
    }
    Ok(curve)
}

/// Area fraction at which the curve reaches conductance fraction `level`,
/// by linear interpolation between curve points.
pub fn area_fraction_at(curve: &[(f64, f64)], level: f64) -> Option<f64> {
    curve.windows(2).find(|w| w[1].1 >= level).map(|w| {
        let (a0, c0) = w[0];
        let (a1, c1) = w[1];
        if c1 == c0 {
            a1
        } else {
            a0 + (a1 - a0) * (level - c0) / (c1 - c0)
        }
    })
}
