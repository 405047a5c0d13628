//! Summary statistics and histograms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn mean<T: Real>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().copied().sum::<T>() / T::from_usize(xs.len()).unwrap())
}

/// Population standard deviation (divides by `n`).
pub fn population_sd<T: Real>(xs: &[T]) -> Option<T> {
    let m = mean(xs)?;
    let n = T::from_usize(xs.len()).unwrap();
    Some((xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / n).sqrt())
}

/// Sample standard deviation (divides by `n - 1`).
pub fn sample_sd<T: Real>(xs: &[T]) -> Option<T> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let n1 = T::from_usize(xs.len() - 1).unwrap();
    Some((xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / n1).sqrt())
}

fn sorted<T: Real>(xs: &[T]) -> Vec<T> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v
}

pub fn median<T: Real>(xs: &[T]) -> Option<T> {
    quantile(xs, T::lit(0.5))
}

/// Linear-interpolation quantile (type 7).
pub fn quantile<T: Real>(xs: &[T], q: T) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let v = sorted(xs);
    Some(quantile_sorted(&v, q))
}

pub fn quantile_sorted<T: Real>(v: &[T], q: T) -> T {
    let h = q * T::from_usize(v.len() - 1).unwrap();
    let lo = h.floor().to_usize().unwrap_or(0).min(v.len() - 1);
    let hi = (lo + 1).min(v.len() - 1);
    let frac = h - T::from_usize(lo).unwrap();
    v[lo] + (v[hi] - v[lo]) * frac
}

/// Fixed-width histogram over `[lo, hi]`; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn with_bins(samples: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput(format!(
                "bad histogram range [{lo}, {hi}] with {bins} bins"
            )));
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect();
        let mut counts = vec![0u64; bins];
        for &x in samples {
            if !(x >= lo && x <= hi) {
                continue;
            }
            let idx = (((x - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Ok(Self { edges, counts })
    }

    /// Bins spanning the sample range. A constant sample gets one bin of
    /// width `fallback_width` centred on the value.
    pub fn auto(samples: &[f64], bins: usize, fallback_width: f64) -> Result<Self> {
        let (lo, hi) = min_max(samples).ok_or_else(|| Error::InvalidInput("empty sample".into()))?;
        if hi > lo {
            Self::with_bins(samples, bins, lo, hi)
        } else {
            Self::with_bins(samples, 1, lo - fallback_width / 2.0, lo + fallback_width / 2.0)
        }
    }

    /// Bins of (approximately) the given width aligned to multiples of it.
    pub fn with_width(samples: &[f64], width: f64) -> Result<Self> {
        let (lo, hi) = min_max(samples).ok_or_else(|| Error::InvalidInput("empty sample".into()))?;
        if !(width > 0.0) {
            return Err(Error::InvalidInput("bin width must be positive".into()));
        }
        let start = (lo / width - 0.5).floor() * width + width / 2.0;
        let bins = (((hi - start) / width).floor() as usize + 1).max(1);
        Self::with_bins(samples, bins, start, start + width * bins as f64)
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn populated_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

pub fn min_max(xs: &[f64]) -> Option<(f64, f64)> {
    let mut it = xs.iter().copied().filter(|x| x.is_finite());
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), x| (lo.min(x), hi.max(x))))
}

/// Freedman-Diaconis bin count, clamped to `[1, 1000]`. `None` when the
/// interquartile range is zero.
pub fn freedman_diaconis_bins(samples: &[f64]) -> Option<usize> {
    if samples.len() < 2 {
        return None;
    }
    let v = sorted(samples);
    let iqr = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
    let range = v[v.len() - 1] - v[0];
    if !(iqr > 0.0) || !(range > 0.0) {
        return None;
    }
    let width = 2.0 * iqr / (samples.len() as f64).cbrt();
    Some(((range / width).ceil() as usize).clamp(1, 1000))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median::<f64>(&[]), None);
    }

    #[test]
    fn sds() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_eq!(population_sd(&xs), Some(2.0));
        assert!((sample_sd(&xs).unwrap() - (32.0f64 / 7.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn histogram_counts_everything_in_range() {
        let xs = [0.0, 0.5, 1.0, 1.5, 2.0];
        let h = Histogram::with_bins(&xs, 2, 0.0, 2.0).unwrap();
        assert_eq!(h.counts, vec![2, 3]);
        assert_eq!(h.total(), 5);
    }

    #[test]
    fn width_histogram_is_aligned() {
        let xs = [2.0, 2.0, 2.1, 1.9];
        let h = Histogram::with_width(&xs, 0.1).unwrap();
        assert_eq!(h.total(), 4);
        assert_eq!(h.counts.iter().max(), Some(&2));
    }

    #[test]
    fn fd_degenerate() {
        assert_eq!(freedman_diaconis_bins(&[1.0; 30]), None);
        assert!(freedman_diaconis_bins(&[1.0, 2.0, 3.0, 4.0, 5.0]).is_some());
    }
}
