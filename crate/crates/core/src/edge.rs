//! Kernel-integration edge detection on EDS images.
//!
//! A barrier appears as a bright band. Two asymmetric step kernels are
//! cross-correlated with the image along the thin axis of the band; for each
//! transverse position the argmax of each response marks one face.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{fit_thickness_distribution, ThicknessFits};
use crate::grid::{EdsImage, Grid};
use crate::stats::{self, Histogram};

pub const DEFAULT_GAUSSIAN_LENGTH_NM: f64 = 0.5;
pub const DEFAULT_KERNEL_HALF_LENGTH_NM: f64 = 0.5;
pub const DEFAULT_DELTAS: [f64; 3] = [0.0, 0.2, 0.4];

/// Kernel half-length in pixels for a physical length of about 0.5 nm.
pub fn default_k(pixel_size: f64) -> usize {
    ((DEFAULT_KERNEL_HALF_LENGTH_NM / pixel_size).round() as usize).max(1)
}

/// Kernel pair with rows along the thin axis and columns along the band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelPair {
    pub k: usize,
    pub delta: f64,
    /// nm.
    pub gaussian_length: f64,
    /// `[(1+δ) × k, 0, (δ−1) × k]`.
    pub profile: Vec<f64>,
    /// Transverse half-width in pixels.
    pub half_width: usize,
    /// Responds to the far face (bright before, dark after).
    pub kernel_a: Grid,
    /// `kernel_a` reversed along the thin axis; responds to the near face.
    pub kernel_b: Grid,
}

pub fn build_kernels(k: usize, delta: f64, pixel_size: f64, gaussian_length: f64) -> Result<KernelPair> {
    if k == 0 {
        return Err(Error::InvalidInput("kernel half-length k must be at least 1".into()));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "asymmetry δ must be non-negative, got {delta}"
        )));
    }
    if !(pixel_size > 0.0) || !(gaussian_length > 0.0) {
        return Err(Error::InvalidInput(
            "pixel size and Gaussian length must be positive".into(),
        ));
    }
    let mut profile = vec![delta + 1.0; k];
    profile.push(0.0);
    profile.extend(std::iter::repeat_n(delta - 1.0, k));
    let half_width = (3.0 * gaussian_length / pixel_size + 1e-9).floor() as usize;
    let weight = |d: isize| {
        let r = d as f64 * pixel_size;
        (-r * r / (2.0 * gaussian_length * gaussian_length)).exp()
    };
    let cols = 2 * half_width + 1;
    let rows = profile.len();
    let kernel_a = Grid::from_fn(cols, rows, |c, r| profile[r] * weight(c as isize - half_width as isize));
    let kernel_b = Grid::from_fn(cols, rows, |c, r| kernel_a.get(c, rows - 1 - r));
    Ok(KernelPair {
        k,
        delta,
        gaussian_length,
        profile,
        half_width,
        kernel_a,
        kernel_b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Band runs along image rows; edges are searched down each column.
    #[default]
    Horizontal,
    /// Band runs along image columns; edges are searched along each row.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectOptions {
    pub orientation: Orientation,
    /// Parabolic refinement of the argmax.
    pub subpixel: bool,
}

/// Edge position per transverse index, in pixels along the thin axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTrace {
    pub positions: Vec<f64>,
    /// The maximum was shared by several indices (lowest taken).
    pub tied: Vec<bool>,
    /// Flat response, or a tie between non-adjacent indices.
    pub low_confidence: Vec<bool>,
}

impl EdgeTrace {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Response of `kernel` centred at every (column, row) with the kernel fully
/// inside the image along the thin axis. Transverse taps outside the image
/// are skipped. Returns `response[col][row - k]`.
fn responses(image: &Grid, kernel: &Grid) -> Vec<Vec<f64>> {
    let (w, h) = (image.width() as isize, image.height());
    let k = kernel.height() / 2;
    let m = (kernel.width() / 2) as isize;
    let valid = h - 2 * k;
    (0..w)
        .into_par_iter()
        .map(|x| {
            (k..k + valid)
                .map(|y| {
                    let mut acc = 0.0;
                    for r in 0..kernel.height() {
                        let yy = y + r - k;
                        for c in 0..kernel.width() {
                            let xx = x + c as isize - m;
                            if xx >= 0 && xx < w {
                                acc += kernel.get(c, r) * image.get(xx as usize, yy);
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn trace_from(resp: &[Vec<f64>], offset: usize, scale: f64, subpixel: bool) -> EdgeTrace {
    let tol = 1e-12 * scale;
    let mut trace = EdgeTrace {
        positions: Vec::with_capacity(resp.len()),
        tied: Vec::with_capacity(resp.len()),
        low_confidence: Vec::with_capacity(resp.len()),
    };
    for r in resp {
        let (mut best, mut best_i) = (f64::NEG_INFINITY, 0);
        let mut lowest = f64::INFINITY;
        for (i, &v) in r.iter().enumerate() {
            if v > best + tol {
                best = v;
                best_i = i;
            }
            lowest = lowest.min(v);
        }
        let ties: Vec<usize> = r
            .iter()
            .enumerate()
            .filter(|(_, &v)| (v - best).abs() <= tol)
            .map(|(i, _)| i)
            .collect();
        let contiguous = ties.windows(2).all(|w| w[1] == w[0] + 1);
        let flat = best - lowest <= tol;
        let mut pos = best_i as f64;
        if subpixel && ties.len() == 1 && best_i > 0 && best_i + 1 < r.len() {
            let (a, b, c) = (r[best_i - 1], r[best_i], r[best_i + 1]);
            let denom = a - 2.0 * b + c;
            if denom < 0.0 {
                pos += (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            }
        }
        trace.positions.push(pos + offset as f64);
        trace.tied.push(ties.len() > 1);
        trace.low_confidence.push(flat || !contiguous);
    }
    trace
}

/// Returns `(leading, trailing)`: the near face (from `kernel_b`) and the far
/// face (from `kernel_a`) along the thin axis.
pub fn detect_edges(image: &EdsImage, kernels: &KernelPair, options: &DetectOptions) -> Result<(EdgeTrace, EdgeTrace)> {
    let grid = match options.orientation {
        Orientation::Horizontal => image.values.clone(),
        Orientation::Vertical => image.values.transpose(),
    };
    let kh = kernels.kernel_a.height();
    if grid.height() <= kh || grid.width() < 1 {
        return Err(Error::InvalidInput(format!(
            "image of {} pixels along the thin axis is not larger than the {kh}-pixel kernel",
            grid.height()
        )));
    }
    let peak = grid.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let norm = |g: &Grid| g.data().iter().map(|v| v.abs()).sum::<f64>();
    let scale_a = (norm(&kernels.kernel_a) * peak).max(f64::MIN_POSITIVE);
    let ra = responses(&grid, &kernels.kernel_a);
    let rb = responses(&grid, &kernels.kernel_b);
    let trailing = trace_from(&ra, kernels.k, scale_a, options.subpixel);
    let leading = trace_from(&rb, kernels.k, scale_a, options.subpixel);
    Ok((leading, trailing))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessProfile {
    /// Transverse indices that contributed.
    pub columns: Vec<usize>,
    /// nm, one per contributing column.
    pub thickness: Vec<f64>,
    /// Columns where the traces crossed or touched.
    pub excluded: usize,
    pub mean: f64,
    /// Population sd, nm.
    pub sd: f64,
    pub histogram: Histogram,
    /// Normal and lognormal fits when enough columns contribute.
    pub fits: Option<ThicknessFits<f64>>,
}

pub fn thickness_profile(leading: &EdgeTrace, trailing: &EdgeTrace, pixel_size: f64) -> Result<ThicknessProfile> {
    if leading.len() != trailing.len() {
        return Err(Error::InvalidInput(format!(
            "edge traces differ in length ({} vs {})",
            leading.len(),
            trailing.len()
        )));
    }
    let mut columns = Vec::new();
    let mut thickness = Vec::new();
    for (i, (a, b)) in leading.positions.iter().zip(&trailing.positions).enumerate() {
        let t = (b - a) * pixel_size;
        if t > 0.0 {
            columns.push(i);
            thickness.push(t);
        }
    }
    let excluded = leading.len() - thickness.len();
    if thickness.is_empty() {
        return Err(Error::Degenerate(format!("all {excluded} columns have crossing edges")));
    }
    if excluded > 0 {
        log::warn!("{excluded} of {} columns excluded: edges crossed", leading.len());
    }
    let bins = stats::freedman_diaconis_bins(&thickness).unwrap_or(1);
    let histogram = Histogram::auto(&thickness, bins, pixel_size)?;
    let fits = if thickness.len() >= 10 {
        fit_thickness_distribution(&thickness).ok()
    } else {
        None
    };
    Ok(ThicknessProfile {
        mean: stats::mean(&thickness).unwrap(),
        sd: stats::population_sd(&thickness).unwrap(),
        columns,
        thickness,
        excluded,
        histogram,
        fits,
    })
}

/// Detects edges with the default transverse length and returns the profile.
pub fn analyze(image: &EdsImage, k: usize, delta: f64, options: &DetectOptions) -> Result<ThicknessProfile> {
    let kernels = build_kernels(k, delta, image.pixel_size, DEFAULT_GAUSSIAN_LENGTH_NM)?;
    let (lead, trail) = detect_edges(image, &kernels, options)?;
    thickness_profile(&lead, &trail, image.pixel_size)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaResult {
    pub delta: f64,
    pub profile: ThicknessProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiDeltaSummary {
    pub k: usize,
    pub results: Vec<DeltaResult>,
    /// Smallest and largest mean thickness over δ, nm.
    pub range: (f64, f64),
}

/// Runs the detector once per δ; the spread of the means is the error bar.
pub fn multi_delta_summary(
    image: &EdsImage,
    deltas: &[f64],
    k: usize,
    options: &DetectOptions,
) -> Result<MultiDeltaSummary> {
    if deltas.is_empty() {
        return Err(Error::InvalidInput("need at least one δ".into()));
    }
    let results = deltas
        .iter()
        .map(|&delta| {
            Ok(DeltaResult {
                delta,
                profile: analyze(image, k, delta, options)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let range = results.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.profile.mean), hi.max(r.profile.mean))
    });
    Ok(MultiDeltaSummary { k, results, range })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(width: usize, height: usize, start: usize, w: usize) -> EdsImage {
        EdsImage::new(
            0.1,
            Grid::from_fn(
                width,
                height,
                |_, y| if (start..start + w).contains(&y) { 1.0 } else { 0.0 },
            ),
        )
        .unwrap()
    }

    #[test]
    fn profiles() {
        assert_eq!(
            build_kernels(2, 0.0, 0.1, 0.5).unwrap().profile,
            vec![1.0, 1.0, 0.0, -1.0, -1.0]
        );
        let p = build_kernels(2, 0.4, 0.1, 0.5).unwrap().profile;
        let expect = [1.4, 1.4, 0.0, -0.6, -0.6];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(build_kernels(0, 0.0, 0.1, 0.5).is_err());
        assert!(build_kernels(1, -0.1, 0.1, 0.5).is_err());
    }

    #[test]
    fn reflection_and_truncation() {
        let kp = build_kernels(3, 0.2, 0.1, 0.5).unwrap();
        assert_eq!(kp.half_width, 15);
        assert_eq!(kp.kernel_a.width(), 31);
        let h = kp.kernel_a.height();
        for r in 0..h {
            for c in 0..kp.kernel_a.width() {
                assert_eq!(kp.kernel_b.get(c, r), kp.kernel_a.get(c, h - 1 - r));
            }
        }
        assert_eq!(kp.kernel_a.get(15, 3), 0.0);
        assert_eq!(kp.kernel_a.get(15, 0), 1.2);
    }

    #[test]
    fn sharp_band_width() {
        let img = band(12, 60, 20, 20);
        for k in [1, 2, 5] {
            let kp = build_kernels(k, 0.0, 0.1, 0.5).unwrap();
            let (lead, trail) = detect_edges(&img, &kp, &DetectOptions::default()).unwrap();
            let prof = thickness_profile(&lead, &trail, 0.1).unwrap();
            for t in &prof.thickness {
                assert!((t - 2.0).abs() <= 0.1 + 1e-12, "{t}");
            }
            assert_eq!(prof.excluded, 0);
        }
    }

    #[test]
    fn offset_invariant_at_zero_delta() {
        let img = band(8, 50, 15, 12);
        let shifted = EdsImage::new(0.1, img.values.map(|v| v + 3.7)).unwrap();
        let kp = build_kernels(3, 0.0, 0.1, 0.5).unwrap();
        let o = DetectOptions::default();
        assert_eq!(
            detect_edges(&img, &kp, &o).unwrap(),
            detect_edges(&shifted, &kp, &o).unwrap()
        );
    }

    #[test]
    fn uniform_image_flags_ties() {
        let img = EdsImage::new(0.1, Grid::filled(4, 30, 0.6)).unwrap();
        let kp = build_kernels(2, 0.2, 0.1, 0.5).unwrap();
        let (lead, trail) = detect_edges(&img, &kp, &DetectOptions::default()).unwrap();
        assert!(lead.low_confidence.iter().all(|&f| f));
        assert!(trail.tied.iter().all(|&f| f));
        assert!(lead.positions.iter().all(|&p| p == 2.0));
    }

    #[test]
    fn vertical_orientation_matches_transpose() {
        let img = band(10, 40, 12, 9);
        let t = EdsImage::new(0.1, img.values.transpose()).unwrap();
        let kp = build_kernels(2, 0.0, 0.1, 0.5).unwrap();
        let a = detect_edges(&img, &kp, &DetectOptions::default()).unwrap();
        let b = detect_edges(
            &t,
            &kp,
            &DetectOptions {
                orientation: Orientation::Vertical,
                subpixel: false,
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn crossing_traces_excluded() {
        let lead = EdgeTrace {
            positions: vec![5.0, 6.0, 9.0],
            tied: vec![false; 3],
            low_confidence: vec![false; 3],
        };
        let trail = EdgeTrace {
            positions: vec![25.0, 6.0, 7.0],
            tied: vec![false; 3],
            low_confidence: vec![false; 3],
        };
        let prof = thickness_profile(&lead, &trail, 0.1).unwrap();
        assert_eq!(prof.excluded, 2);
        assert_eq!(prof.columns, vec![0]);
        let none = thickness_profile(&trail, &lead, 0.1);
        assert!(none.is_ok());
        let crossed = EdgeTrace {
            positions: vec![1.0, 1.0, 1.0],
            ..lead.clone()
        };
        assert!(thickness_profile(&crossed, &crossed, 0.1).is_err());
    }

    #[test]
    fn parallel_traces() {
        let lead = EdgeTrace {
            positions: vec![10.0; 50],
            tied: vec![false; 50],
            low_confidence: vec![false; 50],
        };
        let trail = EdgeTrace {
            positions: vec![30.0; 50],
            ..lead.clone()
        };
        let prof = thickness_profile(&lead, &trail, 0.1).unwrap();
        assert!(prof.thickness.iter().all(|&t| (t - 2.0).abs() < 1e-12));
        assert!(prof.sd < 1e-12);
    }

    #[test]
    fn subpixel_moves_towards_heavier_neighbour() {
        // Ramp edges put the true face between pixels.
        let img = EdsImage::new(
            0.1,
            Grid::from_fn(3, 40, |_, y| {
                let y = y as f64;
                ((y - 9.3) / 3.0)
                    .clamp(0.0, 1.0)
                    .min(((29.6 - y) / 3.0).clamp(0.0, 1.0))
            }),
        )
        .unwrap();
        let kp = build_kernels(2, 0.0, 0.1, 0.5).unwrap();
        let (l0, _) = detect_edges(&img, &kp, &DetectOptions::default()).unwrap();
        let (l1, _) = detect_edges(
            &img,
            &kp,
            &DetectOptions {
                subpixel: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((l1.positions[0] - l0.positions[0]).abs() <= 0.5);
        assert!(l1.positions[0].fract() != 0.0);
    }
}
