use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::barrier::{junction_iv, sample_barrier, JunctionIv, ThicknessDistribution};
use crate::error::{Error, Result};
use crate::fitting::{fit_simmons, AreaMode, FitResult};
use crate::simmons::{linspace, low_voltage_resistance, SimmonsParams, DEFAULT_LINEAR_VMAX};
use crate::stats;

/// Junction footprint and pixelization, nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub width_nm: f64,
    pub height_nm: f64,
    pub pixel_nm: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            width_nm: 240.0,
            height_nm: 240.0,
            pixel_nm: 1.0,
        }
    }
}

impl Geometry {
    pub fn pixels(&self) -> (usize, usize) {
        (
            ((self.width_nm / self.pixel_nm) + 1e-9).floor() as usize,
            ((self.height_nm / self.pixel_nm) + 1e-9).floor() as usize,
        )
    }

    /// Area covered by whole pixels, nm².
    pub fn area(&self) -> f64 {
        let (w, h) = self.pixels();
        (w * h) as f64 * self.pixel_nm * self.pixel_nm
    }
}

/// Evenly spaced bias grid, volts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageGrid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl VoltageGrid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.end, self.points)
    }
}

/// Acceptance windows for comparing a simulated ensemble to measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchTargets {
    /// Ω.
    pub target_r: f64,
    /// Fractional window on the median resistance.
    pub r_tol: f64,
    /// Largest acceptable resistance spread, %.
    pub spread_max: f64,
    /// nm.
    pub t_center: f64,
    pub t_tol: f64,
    /// V.
    pub phi_center: f64,
    pub phi_tol: f64,
}

impl Default for MatchTargets {
    /// Median fits of the measured wafer: 7122 Ω within 10%, spread at most
    /// 2.4%, t = 0.78 nm ± 3%, phi = 1.48 V ± 6%.
    fn default() -> Self {
        Self {
            target_r: 7122.0,
            r_tol: 0.10,
            spread_max: 2.4,
            t_center: 0.78,
            t_tol: 0.03,
            phi_center: 1.48,
            phi_tol: 0.06,
        }
    }
}

impl MatchTargets {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.r_tol,
            self.spread_max,
            self.t_tol,
            self.phi_tol,
            self.target_r,
            self.t_center,
            self.phi_center,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParams(
                "match targets and tolerances must be positive".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchFlags {
    pub resistance: bool,
    pub spread: bool,
    pub thickness: bool,
    pub barrier_height: bool,
}

impl MatchFlags {
    pub fn count(&self) -> u8 {
        [self.resistance, self.spread, self.thickness, self.barrier_height]
            .iter()
            .filter(|&&b| b)
            .count() as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_junctions: usize,
    /// V.
    pub barrier_height: f64,
    /// Bias grid for the Simmons refit.
    pub fit_grid: VoltageGrid,
    /// Bias grid for the low-voltage resistance.
    pub linear_grid: VoltageGrid,
    pub v_linear_max: f64,
    pub targets: MatchTargets,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_junctions: 20,
            barrier_height: 1.22,
            fit_grid: VoltageGrid {
                start: 0.0,
                end: 1.2,
                points: 50,
            },
            linear_grid: VoltageGrid {
                start: 0.0,
                end: DEFAULT_LINEAR_VMAX,
                points: 5,
            },
            v_linear_max: DEFAULT_LINEAR_VMAX,
            targets: MatchTargets::default(),
        }
    }
}

/// Result of simulating one junction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionOutcome {
    pub index: u32,
    pub shorted: bool,
    pub mean_thickness: f64,
    pub min_thickness: f64,
    pub resistance: Option<f64>,
    pub fit: Option<FitResult<f64>>,
    pub error: Option<String>,
}

/// Aggregate of one simulated ensemble. Statistic fields are NaN when
/// `valid` is false (every junction shorted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMetrics {
    pub n_junctions: usize,
    pub n_shorted: usize,
    pub n_fit_failed: usize,
    pub valid: bool,
    /// Ω, over non-shorted junctions.
    pub median_resistance: f64,
    /// Sample sd over median, %.
    pub resistance_spread: f64,
    /// Median refit thickness, nm.
    pub refit_thickness: f64,
    /// Median refit barrier height, V.
    pub refit_barrier_height: f64,
    pub matches: MatchFlags,
    pub match_count: u8,
}

fn simulate_one(
    dist: &ThicknessDistribution,
    config: &EnsembleConfig,
    geometry: &Geometry,
    seed: u64,
    index: u32,
) -> Result<JunctionOutcome> {
    let field = sample_barrier(
        dist,
        geometry.width_nm,
        geometry.height_nm,
        geometry.pixel_nm,
        seed,
        index,
    )?;
    let mut out = JunctionOutcome {
        index,
        shorted: false,
        mean_thickness: field.mean_thickness(),
        min_thickness: field.min_thickness(),
        resistance: None,
        fit: None,
        error: None,
    };
    let linear = match junction_iv(&field, config.barrier_height, &config.linear_grid.values())? {
        JunctionIv::Shorted { .. } => {
            out.shorted = true;
            return Ok(out);
        }
        JunctionIv::Curve(iv) => iv,
    };
    match low_voltage_resistance(&linear, config.v_linear_max) {
        Ok(r) => out.resistance = Some(r),
        Err(e) => out.error = Some(e.to_string()),
    }
    let JunctionIv::Curve(iv) = junction_iv(&field, config.barrier_height, &config.fit_grid.values())? else {
        unreachable!("short already handled")
    };
    let half_vmax = config.fit_grid.values().iter().fold(0.0f64, |m, v| m.max(v.abs())) / 2.0;
    let init = SimmonsParams {
        area: field.area(),
        thickness: dist.mean,
        barrier_height: config.barrier_height.max(half_vmax * 1.05),
    };
    match fit_simmons(&iv, AreaMode::Fixed(geometry.area()), init) {
        Ok(fit) => out.fit = Some(fit),
        Err(e) => out.error = Some(e.to_string()),
    }
    Ok(out)
}

/// Simulates every junction of an ensemble, in index order.
pub fn simulate_junctions(
    dist: &ThicknessDistribution,
    config: &EnsembleConfig,
    geometry: &Geometry,
    seed: u64,
) -> Result<Vec<JunctionOutcome>> {
    if config.n_junctions < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 junctions, got {}",
            config.n_junctions
        )));
    }
    (0..config.n_junctions as u32)
        .into_par_iter()
        .map(|j| simulate_one(dist, config, geometry, seed, j))
        .collect()
}

/// Runs [`simulate_junctions`] and scores the ensemble against `config.targets`.
pub fn simulate_ensemble(
    dist: &ThicknessDistribution,
    config: &EnsembleConfig,
    geometry: &Geometry,
    seed: u64,
) -> Result<EnsembleMetrics> {
    config.targets.validate()?;
    let outcomes = simulate_junctions(dist, config, geometry, seed)?;
    Ok(aggregate(&outcomes, &config.targets))
}

pub(crate) fn aggregate(outcomes: &[JunctionOutcome], targets: &MatchTargets) -> EnsembleMetrics {
    let n_shorted = outcomes.iter().filter(|o| o.shorted).count();
    let resistances: Vec<f64> = outcomes.iter().filter_map(|o| o.resistance).collect();
    let fits: Vec<&FitResult<f64>> = outcomes.iter().filter_map(|o| o.fit.as_ref()).collect();
    let n_fit_failed = outcomes.iter().filter(|o| !o.shorted && o.fit.is_none()).count();
    let thicknesses: Vec<f64> = fits.iter().map(|f| f.simmons().thickness).collect();
    let heights: Vec<f64> = fits.iter().map(|f| f.simmons().barrier_height).collect();

    let median_resistance = stats::median(&resistances).unwrap_or(f64::NAN);
    let resistance_spread = match stats::sample_sd(&resistances) {
        Some(sd) => 100.0 * sd / median_resistance,
        None if resistances.len() == 1 => 0.0,
        None => f64::NAN,
    };
    let refit_thickness = stats::median(&thicknesses).unwrap_or(f64::NAN);
    let refit_barrier_height = stats::median(&heights).unwrap_or(f64::NAN);
    let valid = !resistances.is_empty();

    let within = |value: f64, center: f64, tol: f64| (value / center - 1.0).abs() <= tol;
    let matches = if valid {
        MatchFlags {
            resistance: within(median_resistance, targets.target_r, targets.r_tol),
            spread: resistance_spread <= targets.spread_max,
            thickness: within(refit_thickness, targets.t_center, targets.t_tol),
            barrier_height: within(refit_barrier_height, targets.phi_center, targets.phi_tol),
        }
    } else {
        MatchFlags::default()
    };
    EnsembleMetrics {
        n_junctions: outcomes.len(),
        n_shorted,
        n_fit_failed,
        valid,
        median_resistance,
        resistance_spread,
        refit_thickness,
        refit_barrier_height,
        match_count: matches.count(),
        matches,
    }
}
