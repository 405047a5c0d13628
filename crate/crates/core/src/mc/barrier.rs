use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{lognormal_log_params, DistributionKind};
use crate::rng::{standard_normal_quantile, KeyedRng, Stream};
use crate::simmons::{IvCurve, Simmons};

/// Pixels below this size are smaller than the oxide's ionic radii.
pub const MIN_PHYSICAL_PIXEL_NM: f64 = 0.2;

/// Per-pixel thickness law, given by its arithmetic mean and sd (nm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThicknessDistribution {
    pub kind: DistributionKind,
    pub mean: f64,
    pub sd: f64,
}

impl ThicknessDistribution {
    pub fn new(kind: DistributionKind, mean: f64, sd: f64) -> Result<Self> {
        let d = Self { kind, mean, sd };
        d.validate()?;
        Ok(d)
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(DistributionKind::Normal, mean, sd)
    }

    pub fn lognormal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(DistributionKind::Lognormal, mean, sd)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean > 0.0) || !self.mean.is_finite() || !(self.sd >= 0.0) || !self.sd.is_finite() {
            return Err(Error::InvalidParams(format!(
                "thickness distribution needs mean > 0 and sd >= 0 (got {}, {})",
                self.mean, self.sd
            )));
        }
        Ok(())
    }

    /// Maps a standard-normal deviate to a thickness. Monotone increasing in `z`.
    pub fn transform(&self) -> impl Fn(f64) -> f64 + Copy + Send + Sync {
        let (kind, mean, sd) = (self.kind, self.mean, self.sd);
        let (mu, sigma) = if kind == DistributionKind::Lognormal && sd > 0.0 {
            lognormal_log_params(mean, sd)
        } else {
            (0.0, 0.0)
        };
        move |z: f64| {
            if sd == 0.0 {
                mean
            } else {
                match kind {
                    DistributionKind::Normal => mean + sd * z,
                    DistributionKind::Lognormal => (mu + sigma * z).exp(),
                }
            }
        }
    }

    /// Thickness for a uniform variate in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        (self.transform())(standard_normal_quantile(u))
    }
}

/// Thickness map of one junction, one value per square pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierField {
    /// nm.
    pub pixel_size: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major, nm. May contain values `<= 0` (shorts).
    pub thickness: Vec<f64>,
}

impl BarrierField {
    pub fn new(pixel_size: f64, width: usize, height: usize, thickness: Vec<f64>) -> Result<Self> {
        if !(pixel_size > 0.0) || width == 0 || height == 0 || thickness.len() != width * height {
            return Err(Error::InvalidInput(
                "barrier field needs positive pixel size and matching dimensions".into(),
            ));
        }
        if thickness.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("barrier thickness"));
        }
        Ok(Self {
            pixel_size,
            width,
            height,
            thickness,
        })
    }

    pub fn uniform(pixel_size: f64, width: usize, height: usize, t: f64) -> Result<Self> {
        Self::new(pixel_size, width, height, vec![t; width * height])
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.thickness[y * self.width + x]
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel_size * self.pixel_size
    }

    /// nm².
    pub fn area(&self) -> f64 {
        self.pixel_area() * (self.width * self.height) as f64
    }

    pub fn min_thickness(&self) -> f64 {
        self.thickness.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean_thickness(&self) -> f64 {
        self.thickness.iter().sum::<f64>() / self.thickness.len() as f64
    }

    /// First pixel in row-major order with thickness `<= 0`.
    pub fn first_short(&self) -> Option<(usize, usize)> {
        self.thickness
            .iter()
            .position(|&t| t <= 0.0)
            .map(|i| (i % self.width, i / self.width))
    }
}

fn pixel_count(extent_nm: f64, pixel_size: f64, axis: &str) -> Result<usize> {
    if !(extent_nm > 0.0) || !extent_nm.is_finite() {
        return Err(Error::InvalidInput(format!("{axis} must be positive, got {extent_nm}")));
    }
    let exact = extent_nm / pixel_size;
    let n = (exact + 1e-9).floor();
    if (exact - n).abs() > 1e-9 {
        log::warn!("{axis} {extent_nm} nm is not a whole number of {pixel_size} nm pixels; rounding down to {n}");
    }
    if n < 1.0 {
        return Err(Error::InvalidInput(format!(
            "{axis} {extent_nm} nm is smaller than one pixel"
        )));
    }
    Ok(n as usize)
}

/// Draws a barrier with thickness at pixel `(x, y)` keyed by
/// `(seed, junction, x, y)`.
pub fn sample_barrier(
    dist: &ThicknessDistribution,
    width_nm: f64,
    height_nm: f64,
    pixel_size: f64,
    seed: u64,
    junction: u32,
) -> Result<BarrierField> {
    dist.validate()?;
    if !(pixel_size > 0.0) || !pixel_size.is_finite() {
        return Err(Error::InvalidInput(format!(
            "pixel size must be positive, got {pixel_size}"
        )));
    }
    if pixel_size < MIN_PHYSICAL_PIXEL_NM {
        log::warn!("pixel size {pixel_size} nm is below the ~{MIN_PHYSICAL_PIXEL_NM} nm physical floor");
    }
    let width = pixel_count(width_nm, pixel_size, "width")?;
    let height = pixel_count(height_nm, pixel_size, "height")?;
    let rng = KeyedRng::new(seed);
    let f = dist.transform();
    let mut thickness = vec![0.0; width * height];
    thickness.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        for (x, t) in row.iter_mut().enumerate() {
            *t = f(rng.standard_normal(Stream::Thickness, junction, x as u32, y as u32));
        }
    });
    BarrierField::new(pixel_size, width, height, thickness)
}

/// Simulated IV of a whole junction, or the first shorted pixel.
#[derive(Debug, Clone, PartialEq)]
pub enum JunctionIv {
    Curve(IvCurve<f64>),
    Shorted { x: usize, y: usize },
}

pub fn junction_iv(field: &BarrierField, barrier_height: f64, grid: &[f64]) -> Result<JunctionIv> {
    junction_iv_with(&Simmons::default(), field, barrier_height, grid)
}

/// Sums the Simmons current of every pixel (area = pixel²) at each bias.
pub fn junction_iv_with(
    model: &Simmons<f64>,
    field: &BarrierField,
    barrier_height: f64,
    grid: &[f64],
) -> Result<JunctionIv> {
    if let Some((x, y)) = field.first_short() {
        return Ok(JunctionIv::Shorted { x, y });
    }
    if !(barrier_height > 0.0) || !barrier_height.is_finite() {
        return Err(Error::InvalidParams(format!(
            "barrier height must be positive, got {barrier_height}"
        )));
    }
    if let Some(&v) = grid.iter().find(|v| !(barrier_height - v.abs() / 2.0 > 0.0)) {
        let (x, y) = thinnest_pixel(field);
        log::debug!("domain violation for thinnest pixel ({x}, {y})");
        return Err(Error::Domain {
            voltage: v,
            barrier_height,
        });
    }
    let decay = model.decay_per_nm();
    let unit = model.prefactor() * field.pixel_area();
    let (kt, scale): (Vec<f64>, Vec<f64>) = field.thickness.iter().map(|&t| (decay * t, unit / (t * t))).unzip();

    let points: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&v| {
            let half = v.abs() / 2.0;
            let (lo, hi) = (barrier_height - half, barrier_height + half);
            let (slo, shi) = (lo.sqrt(), hi.sqrt());
            let mut sum = 0.0f64;
            let mut comp = 0.0f64;
            for (&k, &s) in kt.iter().zip(&scale) {
                let term = s * (lo * (-k * slo).exp() - hi * (-k * shi).exp());
                let t = sum + term;
                if sum.abs() >= term.abs() {
                    comp += (sum - t) + term;
                } else {
                    comp += (term - t) + sum;
                }
                sum = t;
            }
            let i = sum + comp;
            (v, if v < 0.0 { -i } else { i })
        })
        .collect();
    Ok(JunctionIv::Curve(IvCurve::new(points)?))
}

fn thinnest_pixel(field: &BarrierField) -> (usize, usize) {
    let i = field
        .thickness
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    (i % field.width, i / field.width)
}
