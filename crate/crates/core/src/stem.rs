//! Forward model of a STEM-EDS oxygen map of a barrier cross section.
//!
//! Pipeline: topography -> optional tip dilation -> voxel lamella with a
//! conformal barrier band -> projection through the lamella depth ->
//! detector noise and blur.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EdsImage, Grid, TopographyMap};
use crate::rng::{KeyedRng, Stream};

pub const DEFAULT_TIP_RADIUS_NM: f64 = 2.0;
pub const DEFAULT_BARRIER_NM: f64 = 2.0;
pub const DEFAULT_VOXEL_NM: f64 = 0.1;
pub const DEFAULT_LAMELLA_LENGTH_NM: f64 = 100.0;
pub const DEFAULT_LAMELLA_DEPTH_NM: f64 = 30.0;
pub const DEFAULT_BLUR_RADIUS_NM: f64 = 0.1;
/// Empty space kept below the lowest and above the highest barrier face.
pub const DEFAULT_Z_MARGIN_NM: f64 = 2.0;

fn count(extent: f64, step: f64, what: &str) -> Result<usize> {
    if !(extent > 0.0) || !extent.is_finite() || !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidInput(format!(
            "{what}: extent {extent} and step {step} must be positive"
        )));
    }
    let n = (extent / step + 1e-9).floor() as usize;
    if n == 0 {
        return Err(Error::InvalidInput(format!(
            "{what}: {extent} nm is smaller than one {step} nm cell"
        )));
    }
    Ok(n)
}

fn fft_2d(data: &mut [Complex<f64>], nx: usize, ny: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny))
    } else {
        (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny))
    };
    for r in data.chunks_mut(nx) {
        row.process(r);
    }
    let mut column = vec![Complex::new(0.0, 0.0); ny];
    for x in 0..nx {
        for y in 0..ny {
            column[y] = data[y * nx + x];
        }
        col.process(&mut column);
        for y in 0..ny {
            data[y * nx + x] = column[y];
        }
    }
}

fn angular_frequency(i: usize, n: usize, step: f64) -> f64 {
    let signed = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
    2.0 * std::f64::consts::PI * signed / (n as f64 * step)
}

/// Periodic Gaussian random surface with autocorrelation `exp(-r²/ℓ²)`,
/// zero mean and RMS exactly `rms`.
pub fn synth_topography(
    width_nm: f64,
    height_nm: f64,
    pixel_size: f64,
    rms: f64,
    correlation_length: f64,
    seed: u64,
) -> Result<TopographyMap> {
    if !(rms >= 0.0) || !rms.is_finite() {
        return Err(Error::InvalidInput(format!("rms must be non-negative, got {rms}")));
    }
    if !(correlation_length > 0.0) || !correlation_length.is_finite() {
        return Err(Error::InvalidInput(format!(
            "correlation length must be positive, got {correlation_length}"
        )));
    }
    let nx = count(width_nm, pixel_size, "topography width")?;
    let ny = count(height_nm, pixel_size, "topography height")?;
    if rms == 0.0 {
        return TopographyMap::new(pixel_size, Grid::filled(nx, ny, 0.0));
    }
    let rng = KeyedRng::new(seed);
    let mut field: Vec<Complex<f64>> = (0..nx * ny)
        .map(|i| {
            Complex::new(
                rng.standard_normal(Stream::Topography, 0, (i % nx) as u32, (i / nx) as u32),
                0.0,
            )
        })
        .collect();
    fft_2d(&mut field, nx, ny, false);
    let l2 = correlation_length * correlation_length;
    for y in 0..ny {
        let ky = angular_frequency(y, ny, pixel_size);
        for x in 0..nx {
            let kx = angular_frequency(x, nx, pixel_size);
            field[y * nx + x] *= (-(kx * kx + ky * ky) * l2 / 8.0).exp();
        }
    }
    fft_2d(&mut field, nx, ny, true);
    let mut h: Vec<f64> = field.iter().map(|c| c.re).collect();
    let mean = h.iter().sum::<f64>() / h.len() as f64;
    h.iter_mut().for_each(|v| *v -= mean);
    let current = (h.iter().map(|v| v * v).sum::<f64>() / h.len() as f64).sqrt();
    if current > 0.0 {
        let s = rms / current;
        h.iter_mut().for_each(|v| *v *= s);
    }
    TopographyMap::new(pixel_size, Grid::from_vec(nx, ny, h)?)
}

/// Grey-scale dilation by a spherical tip of radius `tip_radius` (nm): the
/// surface an AFM tip of that radius would trace.
pub fn tip_convolve(topo: &TopographyMap, tip_radius: f64) -> Result<TopographyMap> {
    if !(tip_radius >= 0.0) || !tip_radius.is_finite() {
        return Err(Error::InvalidInput(format!(
            "tip radius must be non-negative, got {tip_radius}"
        )));
    }
    let px = topo.pixel_size;
    let reach = (tip_radius / px + 1e-9).floor() as isize;
    if reach == 0 {
        return Ok(topo.clone());
    }
    let mut offsets = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let d2 = ((dx * dx + dy * dy) as f64) * px * px;
            if d2 <= tip_radius * tip_radius {
                offsets.push((dx, dy, (tip_radius * tip_radius - d2).sqrt() - tip_radius));
            }
        }
    }
    let g = &topo.heights;
    let (w, h) = (g.width() as isize, g.height() as isize);
    let mut out = vec![0.0; g.data().len()];
    out.par_chunks_mut(w as usize).enumerate().for_each(|(y, row)| {
        let y = y as isize;
        for (x, v) in row.iter_mut().enumerate() {
            let x = x as isize;
            let mut best = f64::NEG_INFINITY;
            for &(dx, dy, s) in &offsets {
                let (xx, yy) = (x + dx, y + dy);
                if xx >= 0 && xx < w && yy >= 0 && yy < h {
                    best = best.max(g.get(xx as usize, yy as usize) + s);
                }
            }
            *v = best;
        }
    });
    TopographyMap::new(px, Grid::from_vec(g.width(), g.height(), out)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Occupancy {
    Empty = 0,
    Edge = 1,
    Full = 2,
}

impl Occupancy {
    pub fn value(self) -> f64 {
        match self {
            Occupancy::Empty => 0.0,
            Occupancy::Edge => 0.5,
            Occupancy::Full => 1.0,
        }
    }
}

/// Rectangle of the topography cut into a lamella, nm. `x` runs along the
/// lamella length, `y` through its depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LamellaRegion {
    pub x0: f64,
    pub y0: f64,
    pub length: f64,
    pub depth: f64,
}

impl LamellaRegion {
    pub fn at(x0: f64, y0: f64) -> Self {
        Self {
            x0,
            y0,
            length: DEFAULT_LAMELLA_LENGTH_NM,
            depth: DEFAULT_LAMELLA_DEPTH_NM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LamellaConfig {
    pub barrier_thickness: f64,
    pub voxel: f64,
    pub z_margin: f64,
}

impl Default for LamellaConfig {
    fn default() -> Self {
        Self {
            barrier_thickness: DEFAULT_BARRIER_NM,
            voxel: DEFAULT_VOXEL_NM,
            z_margin: DEFAULT_Z_MARGIN_NM,
        }
    }
}

/// Voxelized cross section. Voxel `(x, y, z)` spans
/// `[(z_start + z) * voxel, (z_start + z + 1) * voxel]` vertically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lamella {
    pub voxel: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Lowest voxel layer in units of `voxel`.
    pub z_start: i64,
    /// `[(y * nx + x) * nz + z]`.
    pub occupancy: Vec<Occupancy>,
}

impl Lamella {
    pub fn new(voxel: f64, nx: usize, ny: usize, nz: usize, z_start: i64, occupancy: Vec<Occupancy>) -> Result<Self> {
        if !(voxel > 0.0) || nx == 0 || ny == 0 || nz == 0 || occupancy.len() != nx * ny * nz {
            return Err(Error::InvalidInput("lamella dimensions do not match occupancy".into()));
        }
        Ok(Self {
            voxel,
            nx,
            ny,
            nz,
            z_start,
            occupancy,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> Occupancy {
        self.occupancy[(y * self.nx + x) * self.nz + z]
    }

    pub fn total(&self) -> f64 {
        self.occupancy.iter().map(|o| o.value()).sum()
    }
}

/// Classifies one voxel against the band `[h, h + t]`, all in voxel units.
#[inline]
pub fn classify_voxel(layer: i64, band_lo: f64, band_hi: f64) -> Occupancy {
    let lo = layer as f64;
    let centre = lo + 0.5;
    if centre >= band_lo && centre <= band_hi {
        Occupancy::Full
    } else if lo <= band_hi && lo + 1.0 >= band_lo {
        Occupancy::Edge
    } else {
        Occupancy::Empty
    }
}

/// Builds a lamella with a barrier of constant vertical thickness on top of
/// the (bilinearly interpolated) topography. Voxels with centre inside the
/// band are full; voxels touching the band otherwise are edge voxels.
pub fn build_lamella(topo: &TopographyMap, region: &LamellaRegion, config: &LamellaConfig) -> Result<Lamella> {
    let v = config.voxel;
    if !(config.barrier_thickness > 0.0) || !(config.z_margin >= 0.0) {
        return Err(Error::InvalidInput(
            "barrier thickness must be positive and margin non-negative".into(),
        ));
    }
    let eps = 1e-9;
    if region.x0 < 0.0
        || region.y0 < 0.0
        || region.x0 + region.length > topo.width_nm() + eps
        || region.y0 + region.depth > topo.height_nm() + eps
    {
        return Err(Error::OutOfBounds(format!(
            "region [{}, {}] x [{}, {}] nm exceeds topography {} x {} nm",
            region.x0,
            region.x0 + region.length,
            region.y0,
            region.y0 + region.depth,
            topo.width_nm(),
            topo.height_nm()
        )));
    }
    let nx = count(region.length, v, "lamella length")?;
    let ny = count(region.depth, v, "lamella depth")?;
    let mut lo_band = vec![0.0; nx * ny];
    for y in 0..ny {
        for x in 0..nx {
            let h = topo.height_at(region.x0 + (x as f64 + 0.5) * v, region.y0 + (y as f64 + 0.5) * v);
            lo_band[y * nx + x] = h / v;
        }
    }
    let t = config.barrier_thickness / v;
    let (hmin, hmax) = lo_band
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &h| (a.min(h), b.max(h)));
    let margin = config.z_margin / v;
    let z_start = (hmin - margin).floor() as i64 - 1;
    let z_end = (hmax + t + margin).ceil() as i64 + 1;
    let nz = (z_end - z_start) as usize;
    let mut occupancy = vec![Occupancy::Empty; nx * ny * nz];
    occupancy
        .par_chunks_mut(nz)
        .zip(lo_band.par_iter())
        .for_each(|(column, &h)| {
            for (z, o) in column.iter_mut().enumerate() {
                *o = classify_voxel(z_start + z as i64, h, h + t);
            }
        });
    Lamella::new(v, nx, ny, nz, z_start, occupancy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionAxis {
    /// Through the lamella thickness, as in transmission imaging.
    #[default]
    Depth,
    /// Along the lamella length; a side view for diagnostics.
    Length,
}

/// Column means of voxel values. Image rows are vertical layers with row 0
/// the lowest; columns run along the remaining horizontal axis.
pub fn project(lamella: &Lamella, axis: ProjectionAxis) -> Result<EdsImage> {
    let (nx, ny, nz) = (lamella.nx, lamella.ny, lamella.nz);
    let img = match axis {
        ProjectionAxis::Depth => Grid::from_fn(nx, nz, |x, z| {
            (0..ny).map(|y| lamella.get(x, y, z).value()).sum::<f64>() / ny as f64
        }),
        ProjectionAxis::Length => Grid::from_fn(ny, nz, |y, z| {
            (0..nx).map(|x| lamella.get(x, y, z).value()).sum::<f64>() / nx as f64
        }),
    };
    EdsImage::new(lamella.voxel, img)
}

/// Additive Gaussian detector noise, in image intensity units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mean: f64,
    pub sd: f64,
}

impl Default for NoiseModel {
    /// Contrast-to-noise of about 5 for a full band of intensity 1.
    fn default() -> Self {
        Self { mean: 0.0, sd: 0.2 }
    }
}

pub fn add_noise(image: &EdsImage, noise: &NoiseModel, seed: u64) -> Result<EdsImage> {
    if !(noise.sd >= 0.0) || !noise.sd.is_finite() || !noise.mean.is_finite() {
        return Err(Error::InvalidInput(format!(
            "noise sd must be non-negative, got {}",
            noise.sd
        )));
    }
    if noise.sd == 0.0 && noise.mean == 0.0 {
        return Ok(image.clone());
    }
    let rng = KeyedRng::new(seed);
    let g = &image.values;
    let out = Grid::from_fn(g.width(), g.height(), |x, y| {
        g.get(x, y) + noise.mean + noise.sd * rng.standard_normal(Stream::DetectorNoise, 0, x as u32, y as u32)
    });
    EdsImage::new(image.pixel_size, out)
}

fn gaussian_taps(sigma_px: f64) -> Vec<f64> {
    let reach = (3.0 * sigma_px).ceil() as isize;
    let mut w: Vec<f64> = (-reach..=reach)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma_px * sigma_px)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn convolve_rows(g: &Grid, taps: &[f64]) -> Grid {
    let reach = (taps.len() / 2) as isize;
    let w = g.width() as isize;
    Grid::from_fn(g.width(), g.height(), |x, y| {
        let (mut acc, mut norm) = (0.0, 0.0);
        for (i, &k) in taps.iter().enumerate() {
            let xx = x as isize + i as isize - reach;
            if xx >= 0 && xx < w {
                acc += k * g.get(xx as usize, y);
                norm += k;
            }
        }
        acc / norm
    })
}

/// Separable Gaussian blur with standard deviation `radius` (nm), truncated
/// at three standard deviations and renormalized at the image border.
pub fn gaussian_blur(image: &EdsImage, radius: f64) -> Result<EdsImage> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidInput(format!(
            "blur radius must be non-negative, got {radius}"
        )));
    }
    if radius == 0.0 {
        return Ok(image.clone());
    }
    let taps = gaussian_taps(radius / image.pixel_size);
    let rows = convolve_rows(&image.values, &taps);
    let both = convolve_rows(&rows.transpose(), &taps).transpose();
    EdsImage::new(image.pixel_size, both)
}

/// Noise, then blur.
pub fn degrade(image: &EdsImage, noise: &NoiseModel, blur_radius: f64, seed: u64) -> Result<EdsImage> {
    gaussian_blur(&add_noise(image, noise, seed)?, blur_radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(w: f64, h: f64, px: f64) -> TopographyMap {
        synth_topography(w, h, px, 0.0, 10.0, 0).unwrap()
    }

    #[test]
    fn rms_and_mean_enforced() {
        let t = synth_topography(60.0, 40.0, 0.5, 0.7, 10.0, 4).unwrap();
        assert_eq!((t.heights.width(), t.heights.height()), (120, 80));
        assert!((t.rms() - 0.7).abs() < 1e-12);
        let mean = t.heights.sum() / t.heights.data().len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn surface_is_smooth_at_correlation_length() {
        let t = synth_topography(200.0, 200.0, 0.5, 1.0, 10.0, 8).unwrap();
        let g = &t.heights;
        let corr = |lag: usize| {
            let mut s = 0.0;
            let mut n = 0.0;
            for y in 0..g.height() {
                for x in 0..g.width() {
                    s += g.get(x, y) * g.get((x + lag) % g.width(), y);
                    n += 1.0;
                }
            }
            s / n
        };
        // exp(-r²/ℓ²) at r = ℓ/2 and r = ℓ, loose finite-sample bounds.
        assert!((corr(10) - (-0.25f64).exp()).abs() < 0.15, "{}", corr(10));
        assert!((corr(20) - (-1.0f64).exp()).abs() < 0.15, "{}", corr(20));
    }

    #[test]
    fn flat_stays_flat_under_tip() {
        let t = flat(10.0, 10.0, 0.5);
        assert_eq!(tip_convolve(&t, 2.0).unwrap(), t);
        let r = synth_topography(10.0, 10.0, 0.5, 0.5, 3.0, 1).unwrap();
        assert_eq!(tip_convolve(&r, 0.0).unwrap(), r);
    }

    #[test]
    fn spike_becomes_cap() {
        let mut g = Grid::filled(21, 21, 0.0);
        g.set(10, 10, 5.0);
        let t = TopographyMap::new(0.5, g).unwrap();
        let d = tip_convolve(&t, 2.0).unwrap();
        assert_eq!(d.heights.get(10, 10), 5.0);
        let expect = |r: f64| 5.0 + (4.0 - r * r).sqrt() - 2.0;
        assert!((d.heights.get(12, 10) - expect(1.0)).abs() < 1e-12);
        assert_eq!(d.heights.get(14, 10), 3.0);
        assert_eq!(d.heights.get(15, 10), 0.0);
        assert_eq!(d.heights.get(13, 13), 0.0);
    }

    #[test]
    fn flat_band_layers() {
        let t = flat(10.0, 5.0, 0.5);
        let l = build_lamella(
            &t,
            &LamellaRegion {
                x0: 0.0,
                y0: 0.0,
                length: 2.0,
                depth: 1.0,
            },
            &LamellaConfig::default(),
        )
        .unwrap();
        let column: Vec<Occupancy> = (0..l.nz).map(|z| l.get(0, 0, z)).collect();
        let full = column.iter().filter(|&&o| o == Occupancy::Full).count();
        let edge = column.iter().filter(|&&o| o == Occupancy::Edge).count();
        assert_eq!(full, 20);
        assert_eq!(edge, 2);
        let first = column.iter().position(|&o| o != Occupancy::Empty).unwrap();
        assert_eq!(column[first], Occupancy::Edge);
        assert_eq!(column[first + 21], Occupancy::Edge);
        assert_eq!(l.z_start + first as i64, -1);
    }

    #[test]
    fn band_follows_step() {
        let g = Grid::from_fn(20, 4, |x, _| if x < 10 { 0.0 } else { 1.0 });
        let t = TopographyMap::new(1.0, g).unwrap();
        let region = LamellaRegion {
            x0: 0.0,
            y0: 0.0,
            length: 20.0,
            depth: 4.0,
        };
        let l = build_lamella(&t, &region, &LamellaConfig::default()).unwrap();
        let lowest_full = |x: usize| (0..l.nz).find(|&z| l.get(x, 0, z) == Occupancy::Full).unwrap();
        assert_eq!(lowest_full(180) - lowest_full(20), 10);
    }

    #[test]
    fn region_must_fit() {
        let t = flat(50.0, 50.0, 1.0);
        let r = LamellaRegion::at(0.0, 0.0);
        assert!(matches!(
            build_lamella(&t, &r, &LamellaConfig::default()),
            Err(Error::OutOfBounds(_))
        ));
    }

    #[test]
    fn projection_of_flat_band() {
        let t = flat(10.0, 5.0, 0.5);
        let l = build_lamella(
            &t,
            &LamellaRegion {
                x0: 0.0,
                y0: 0.0,
                length: 3.0,
                depth: 2.0,
            },
            &LamellaConfig::default(),
        )
        .unwrap();
        let img = project(&l, ProjectionAxis::Depth).unwrap();
        assert_eq!(img.width(), 30);
        for x in 0..img.width() {
            let col: Vec<f64> = (0..img.height()).map(|z| img.values.get(x, z)).collect();
            assert_eq!(col.iter().filter(|&&v| v == 1.0).count(), 20);
        }
        assert!((img.values.sum() * l.ny as f64 - l.total()).abs() < 1e-9);
    }

    #[test]
    fn in_depth_step_broadens_band() {
        // Three depth columns, the last one raised by two voxels.
        let mut occ = Vec::new();
        let nz = 8;
        for y in 0..3 {
            let lo = if y == 2 { 3 } else { 1 };
            for z in 0..nz {
                occ.push(if (lo..lo + 3).contains(&z) {
                    Occupancy::Full
                } else {
                    Occupancy::Empty
                });
            }
        }
        let l = Lamella::new(0.1, 1, 3, nz, 0, occ).unwrap();
        let img = project(&l, ProjectionAxis::Depth).unwrap();
        let col: Vec<f64> = (0..nz).map(|z| img.values.get(0, z)).collect();
        let third = 1.0 / 3.0;
        let expect = [0.0, 2.0 * third, 2.0 * third, 1.0, third, third, 0.0, 0.0];
        for (a, b) in col.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_lamella_projects_to_zero() {
        let l = Lamella::new(0.1, 4, 3, 5, 0, vec![Occupancy::Empty; 60]).unwrap();
        assert!(project(&l, ProjectionAxis::Length)
            .unwrap()
            .values
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn degrade_identity() {
        let img = EdsImage::new(0.1, Grid::from_fn(7, 5, |x, y| (x * y) as f64)).unwrap();
        assert_eq!(degrade(&img, &NoiseModel { mean: 0.0, sd: 0.0 }, 0.0, 3).unwrap(), img);
    }

    #[test]
    fn noise_statistics() {
        let img = EdsImage::new(0.1, Grid::filled(400, 250, 0.3)).unwrap();
        let noise = NoiseModel { mean: 0.5, sd: 0.2 };
        let out = add_noise(&img, &noise, 12).unwrap();
        let d: Vec<f64> = out.values.data().iter().map(|v| v - 0.3).collect();
        let m = crate::stats::mean(&d).unwrap();
        let s = crate::stats::population_sd(&d).unwrap();
        assert!((m / 0.5 - 1.0).abs() < 0.02);
        assert!((s / 0.2 - 1.0).abs() < 0.02);
    }

    #[test]
    fn blur_conserves_spot() {
        let mut g = Grid::filled(31, 31, 0.0);
        g.set(15, 15, 3.0);
        let img = EdsImage::new(0.1, g).unwrap();
        // sigma = 2 px, truncated at 6 px: the spot stays clear of the border.
        let b = gaussian_blur(&img, 0.2).unwrap();
        assert!((b.values.sum() - 3.0).abs() < 1e-12, "{}", b.values.sum());
        assert!(b.values.get(15, 15) < 3.0);
        assert!((b.values.get(14, 15) - b.values.get(16, 15)).abs() < 1e-15);
        assert!((b.values.get(15, 14) - b.values.get(14, 15)).abs() < 1e-15);
    }
}
