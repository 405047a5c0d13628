//! Maximum-likelihood normal and lognormal fits to thickness samples.
//!
//! Both laws are reported through their arithmetic mean and standard
//! deviation. For the lognormal the log-space parameters follow from
//! `sigma_log² = ln(1 + (sd/mean)²)` and `mu_log = ln(mean) - sigma_log²/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Normal,
    Lognormal,
}

impl std::fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DistributionKind::Normal => "normal",
            DistributionKind::Lognormal => "lognormal",
        })
    }
}

impl std::str::FromStr for DistributionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(Self::Normal),
            "lognormal" | "log-normal" | "log_normal" => Ok(Self::Lognormal),
            other => Err(Error::InvalidInput(format!("unknown distribution kind '{other}'"))),
        }
    }
}

/// `(mu_log, sigma_log)` of the lognormal with the given arithmetic moments.
pub fn lognormal_log_params<T: Real>(mean: T, sd: T) -> (T, T) {
    let cv = sd / mean;
    let s2 = (T::one() + cv * cv).ln();
    (mean.ln() - s2 / T::lit(2.0), s2.sqrt())
}

/// Arithmetic `(mean, sd)` of the lognormal with log-space parameters.
pub fn lognormal_moments<T: Real>(mu_log: T, sigma_log: T) -> (T, T) {
    let s2 = sigma_log * sigma_log;
    let mean = (mu_log + s2 / T::lit(2.0)).exp();
    (mean, mean * s2.exp_m1().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionFit<T = f64> {
    pub kind: DistributionKind,
    /// Arithmetic mean, nm.
    pub mean: T,
    /// Arithmetic standard deviation, nm.
    pub sd: T,
    pub log_likelihood: T,
    /// Zero spread; the likelihood is unbounded and reported as `+inf`.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessFits<T = f64> {
    pub normal: DistributionFit<T>,
    /// Absent when any sample is non-positive.
    pub lognormal: Option<DistributionFit<T>>,
    pub preferred: DistributionKind,
    pub warnings: Vec<String>,
}

fn gaussian_fit<T: Real>(xs: impl Iterator<Item = T> + Clone, n: T) -> (T, T, T) {
    let mean = xs.clone().sum::<T>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<T>() / n;
    let two_pi = T::lit(std::f64::consts::TAU);
    let ll = if var > T::zero() {
        -n / T::lit(2.0) * ((two_pi * var).ln() + T::one())
    } else {
        T::infinity()
    };
    (mean, var.sqrt(), ll)
}

pub fn fit_normal<T: Real>(samples: &[T]) -> DistributionFit<T> {
    let n = T::from_usize(samples.len()).unwrap();
    let (mean, sd, ll) = gaussian_fit(samples.iter().copied(), n);
    DistributionFit {
        kind: DistributionKind::Normal,
        mean,
        sd,
        log_likelihood: ll,
        degenerate: !(sd > T::zero()),
    }
}

/// `None` if any sample is non-positive.
pub fn fit_lognormal<T: Real>(samples: &[T]) -> Option<DistributionFit<T>> {
    if samples.iter().any(|&x| !(x > T::zero())) {
        return None;
    }
    let n = T::from_usize(samples.len()).unwrap();
    let logs = samples.iter().map(|x| x.ln());
    let (mu, sigma, ll_log) = gaussian_fit(logs.clone(), n);
    let jacobian: T = logs.sum();
    let (mean, sd) = lognormal_moments(mu, sigma);
    Some(DistributionFit {
        kind: DistributionKind::Lognormal,
        mean,
        sd,
        log_likelihood: ll_log - jacobian,
        degenerate: !(sigma > T::zero()),
    })
}

/// Fits both laws and prefers the one with the higher log-likelihood.
pub fn fit_thickness_distribution<T: Real>(samples: &[T]) -> Result<ThicknessFits<T>> {
    if samples.len() < 10 {
        return Err(Error::InsufficientPoints {
            needed: 10,
            found: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("thickness samples"));
    }
    let mut warnings = Vec::new();
    let normal = fit_normal(samples);
    let lognormal = fit_lognormal(samples);
    if lognormal.is_none() {
        let msg = "non-positive samples present; lognormal fit skipped".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    if normal.degenerate {
        let msg = "samples have zero spread; fits are degenerate".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let preferred = match &lognormal {
        Some(l) if !normal.degenerate && l.log_likelihood > normal.log_likelihood => DistributionKind::Lognormal,
        _ => DistributionKind::Normal,
    };
    Ok(ThicknessFits {
        normal,
        lognormal,
        preferred,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_conversion_round_trips() {
        let (mu, s) = lognormal_log_params(1.0f64, 0.155);
        let (m, sd) = lognormal_moments(mu, s);
        assert!((m - 1.0).abs() < 1e-14);
        assert!((sd - 0.155).abs() < 1e-14);
    }

    #[test]
    fn constant_samples_are_degenerate() {
        let fits = fit_thickness_distribution(&[2.0f64; 12]).unwrap();
        assert!(fits.normal.degenerate);
        assert_eq!(fits.normal.sd, 0.0);
        assert!(!fits.warnings.is_empty());
        assert_eq!(fits.preferred, DistributionKind::Normal);
    }

    #[test]
    fn non_positive_samples_skip_lognormal() {
        let mut xs = vec![1.0f64; 11];
        xs.push(-0.1);
        xs[0] = 1.5;
        let fits = fit_thickness_distribution(&xs).unwrap();
        assert!(fits.lognormal.is_none());
        assert_eq!(fits.preferred, DistributionKind::Normal);
    }

    #[test]
    fn too_few_samples() {
        assert!(fit_thickness_distribution(&[1.0f64; 9]).is_err());
    }

    #[test]
    fn normal_loglik_matches_closed_form() {
        let xs = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let f = fit_normal(&xs);
        let var: f64 = 8.25;
        let direct: f64 = xs
            .iter()
            .map(|x| -0.5 * (std::f64::consts::TAU * var).ln() - (x - 5.5) * (x - 5.5) / (2.0 * var))
            .sum();
        assert!((f.log_likelihood - direct).abs() < 1e-12);
    }
}
