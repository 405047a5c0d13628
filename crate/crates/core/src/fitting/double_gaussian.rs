//! Two-component Gaussian fit to a histogram of breakdown voltages.

use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LeastSquaresProblem, LmConfig};
use crate::error::{Error, Result};
use crate::stats::{self, Histogram};

/// Amplitudes in counts per bin, means and sds in volts. `mean1 <= mean2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleGaussianParams {
    pub amp1: f64,
    pub mean1: f64,
    pub sd1: f64,
    pub amp2: f64,
    pub mean2: f64,
    pub sd2: f64,
}

impl DoubleGaussianParams {
    pub fn eval(&self, x: f64) -> f64 {
        gauss(x, self.amp1, self.mean1, self.sd1) + gauss(x, self.amp2, self.mean2, self.sd2)
    }

    fn from_slice(p: &[f64]) -> Self {
        let (a, b) = ((p[0], p[1], p[2].abs()), (p[3], p[4], p[5].abs()));
        let (first, second) = if a.1 <= b.1 { (a, b) } else { (b, a) };
        Self {
            amp1: first.0,
            mean1: first.1,
            sd1: first.2,
            amp2: second.0,
            mean2: second.1,
            sd2: second.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleGaussianFit {
    pub params: DoubleGaussianParams,
    /// Average of the two fitted means, V.
    pub midpoint: f64,
    /// Means closer than a quarter of their pooled sd, or a constant sample.
    pub unimodal: bool,
    pub converged: bool,
    pub histogram: Histogram,
}

fn gauss(x: f64, amp: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    amp * (-0.5 * z * z).exp()
}

struct Problem {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl LeastSquaresProblem<f64> for Problem {
    fn n_params(&self) -> usize {
        6
    }
    fn n_residuals(&self) -> usize {
        self.x.len()
    }
    fn feasible(&self, p: &[f64]) -> bool {
        p[0] > 0.0 && p[3] > 0.0 && p[2] > 0.0 && p[5] > 0.0
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, (&x, &y)) in out.iter_mut().zip(self.x.iter().zip(&self.y)) {
            *o = gauss(x, p[0], p[1], p[2]) + gauss(x, p[3], p[4], p[5]) - y;
        }
        Ok(())
    }
    fn jacobian(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        for (row, &x) in self.x.iter().enumerate() {
            for c in 0..2 {
                let (amp, mean, sd) = (p[3 * c], p[3 * c + 1], p[3 * c + 2]);
                let z = (x - mean) / sd;
                let e = (-0.5 * z * z).exp();
                out[row * 6 + 3 * c] = e;
                out[row * 6 + 3 * c + 1] = amp * e * z / sd;
                out[row * 6 + 3 * c + 2] = amp * e * z * z / sd;
            }
        }
        Ok(())
    }
}

/// Split of sorted data into two contiguous clusters minimizing the pooled
/// within-cluster sum of squares. Returns the size of the lower cluster.
fn best_split(sorted: &[f64]) -> usize {
    let n = sorted.len();
    let mut prefix = vec![0.0; n + 1];
    let mut prefix2 = vec![0.0; n + 1];
    for (i, &x) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + x;
        prefix2[i + 1] = prefix2[i] + x * x;
    }
    let ss = |a: usize, b: usize| {
        let k = (b - a) as f64;
        let s = prefix[b] - prefix[a];
        (prefix2[b] - prefix2[a]) - s * s / k
    };
    (2..=n - 2)
        .min_by(|&i, &j| (ss(0, i) + ss(i, n)).partial_cmp(&(ss(0, j) + ss(j, n))).unwrap())
        .unwrap_or(n / 2)
}

/// Histograms `samples` and fits a sum of two Gaussians to the bin counts.
///
/// `bins = None` uses the Freedman-Diaconis rule.
pub fn fit_double_gaussian(samples: &[f64], bins: Option<usize>) -> Result<DoubleGaussianFit> {
    if samples.len() < 20 {
        return Err(Error::InsufficientPoints {
            needed: 20,
            found: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("breakdown samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);

    if !(hi > lo) {
        let histogram = Histogram::auto(samples, 1, 1e-3)?;
        let amp = samples.len() as f64;
        return Ok(DoubleGaussianFit {
            params: DoubleGaussianParams {
                amp1: amp,
                mean1: lo,
                sd1: 0.0,
                amp2: amp,
                mean2: lo,
                sd2: 0.0,
            },
            midpoint: lo,
            unimodal: true,
            converged: false,
            histogram,
        });
    }

    let nbins = bins
        .or_else(|| stats::freedman_diaconis_bins(samples))
        .unwrap_or_else(|| (samples.len() as f64).sqrt().ceil() as usize)
        .max(1);
    let histogram = Histogram::with_bins(samples, nbins, lo, hi)?;
    if histogram.populated_bins() < 2 {
        return Err(Error::Degenerate("fewer than two populated histogram bins".into()));
    }
    let width = histogram.bin_width();

    let split = best_split(&sorted);
    let init_component = |part: &[f64]| {
        let m = stats::mean(part).unwrap();
        let sd = stats::population_sd(part).unwrap().max(width / 2.0);
        let amp = part.len() as f64 * width / (sd * (2.0 * std::f64::consts::PI).sqrt());
        [amp, m, sd]
    };
    let (c1, c2) = (init_component(&sorted[..split]), init_component(&sorted[split..]));
    let init = [c1[0], c1[1], c1[2], c2[0], c2[1], c2[2]];

    let problem = Problem {
        x: histogram.centers(),
        y: histogram.counts.iter().map(|&c| c as f64).collect(),
    };
    let (raw, converged) = match levenberg_marquardt(&problem, &init, &LmConfig::default()) {
        Ok(out) => (out.params, out.converged),
        Err(Error::NotConverged { best, .. }) => (best, false),
        Err(Error::NoFeasibleStep) => (init.to_vec(), false),
        Err(e) => return Err(e),
    };
    let params = DoubleGaussianParams::from_slice(&raw);
    let pooled = (0.5 * (params.sd1 * params.sd1 + params.sd2 * params.sd2)).sqrt();
    let unimodal = (params.mean2 - params.mean1) < pooled / 4.0;
    Ok(DoubleGaussianFit {
        midpoint: 0.5 * (params.mean1 + params.mean2),
        params,
        unimodal,
        converged,
        histogram,
    })
}
