//! Simmons tunneling current through a rectangular barrier.
//!
//! Units: area in nm², thickness in nm, barrier height and bias in volts,
//! current in amperes. With these units `A / t²` is dimensionless and the
//! prefactor `e² / (2 pi h)` carries siemens, so the bracket (in volts)
//! turns directly into amperes.
//!
//! ```text
//! I = A e² / (2 pi h t²) [ (phi - V/2) exp(-K sqrt(phi - V/2))
//!                        - (phi + V/2) exp(-K sqrt(phi + V/2)) ]
//! K = 4 pi t sqrt(2 m_e e) / h
//! ```

use serde::{Deserialize, Serialize};

use crate::constants::{PhysicalConstants, CODATA_2018};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Area, thickness and barrier height of one rectangular tunnel barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimmonsParams<T = f64> {
    /// Junction area, nm².
    pub area: T,
    /// Barrier thickness, nm.
    pub thickness: T,
    /// Barrier height, V.
    pub barrier_height: T,
}

impl<T: Real> SimmonsParams<T> {
    pub fn new(area: T, thickness: T, barrier_height: T) -> Result<Self> {
        let p = Self {
            area,
            thickness,
            barrier_height,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area.is_finite() && self.thickness.is_finite() && self.barrier_height.is_finite()) {
            return Err(Error::NonFinite("Simmons parameters"));
        }
        if self.area <= T::zero() || self.thickness <= T::zero() || self.barrier_height <= T::zero() {
            return Err(Error::InvalidParams(format!(
                "area, thickness and barrier height must be positive (got {}, {}, {})",
                self.area, self.thickness, self.barrier_height
            )));
        }
        Ok(())
    }

    /// Largest bias magnitude the model accepts for these parameters.
    pub fn max_voltage(&self) -> T {
        self.barrier_height * T::lit(2.0)
    }
}

/// Ordered `(voltage, current)` samples of one junction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvCurve<T = f64> {
    points: Vec<(T, T)>,
}

impl<T: Real> IvCurve<T> {
    /// Validates finiteness and strictly increasing voltages.
    pub fn new(points: Vec<(T, T)>) -> Result<Self> {
        for (i, &(v, c)) in points.iter().enumerate() {
            if !(v.is_finite() && c.is_finite()) {
                return Err(Error::InvalidCurve(format!("non-finite sample at index {i}")));
            }
            if i > 0 && v <= points[i - 1].0 {
                return Err(Error::InvalidCurve(format!(
                    "voltages not strictly increasing at index {i} ({} after {})",
                    v,
                    points[i - 1].0
                )));
            }
        }
        Ok(Self { points })
    }

    /// Sorts by voltage first, then validates.
    pub fn from_unsorted(mut points: Vec<(T, T)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        Self::new(points)
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn voltages(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn currents(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|p| p.1)
    }

    /// Samples with `lo <= V < hi`.
    pub fn window(&self, lo: T, hi: T) -> Self {
        Self {
            points: self
                .points
                .iter()
                .copied()
                .filter(|&(v, _)| v >= lo && v < hi)
                .collect(),
        }
    }

    pub fn into_points(self) -> Vec<(T, T)> {
        self.points
    }
}

/// Simmons evaluator with its two derived constants cached in the scalar type.
#[derive(Debug, Clone, Copy)]
pub struct Simmons<T = f64> {
    prefactor: T,
    decay_per_nm: T,
}

impl<T: Real> Default for Simmons<T> {
    fn default() -> Self {
        Self::new(&CODATA_2018)
    }
}

impl<T: Real> Simmons<T> {
    pub fn new(constants: &PhysicalConstants) -> Self {
        Self {
            prefactor: T::lit(constants.current_prefactor()),
            decay_per_nm: T::lit(constants.decay_per_nm()),
        }
    }

    /// `e² / (2 pi h)` in siemens.
    pub fn prefactor(&self) -> T {
        self.prefactor
    }

    /// `K / (t sqrt(V))` for `t` in nm.
    pub fn decay_per_nm(&self) -> T {
        self.decay_per_nm
    }

    fn check(&self, params: &SimmonsParams<T>, v: T) -> Result<()> {
        params.validate()?;
        if !v.is_finite() {
            return Err(Error::NonFinite("bias voltage"));
        }
        if params.barrier_height - v.abs() / T::lit(2.0) <= T::zero() {
            return Err(Error::Domain {
                voltage: v.to_f64_lossy(),
                barrier_height: params.barrier_height.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// Current in amperes. Evaluated on `|v|` and sign-restored, so the
    /// result is exactly odd in `v`.
    pub fn current(&self, params: &SimmonsParams<T>, v: T) -> Result<T> {
        self.check(params, v)?;
        Ok(self.current_unchecked(params, v))
    }

    pub(crate) fn current_unchecked(&self, params: &SimmonsParams<T>, v: T) -> T {
        let half = v.abs() / T::lit(2.0);
        let kt = self.decay_per_nm * params.thickness;
        let lo = params.barrier_height - half;
        let hi = params.barrier_height + half;
        let bracket = lo * (-kt * lo.sqrt()).exp() - hi * (-kt * hi.sqrt()).exp();
        let scale = params.area * self.prefactor / (params.thickness * params.thickness);
        let i = scale * bracket;
        if v < T::zero() {
            -i
        } else {
            i
        }
    }

    /// Partial derivatives `(dI/dA, dI/dt, dI/dphi)` at bias `v`.
    pub fn gradient(&self, params: &SimmonsParams<T>, v: T) -> Result<[T; 3]> {
        self.check(params, v)?;
        let two = T::lit(2.0);
        let half = v.abs() / two;
        let t = params.thickness;
        let kt = self.decay_per_nm * t;
        let lo = params.barrier_height - half;
        let hi = params.barrier_height + half;
        let (slo, shi) = (lo.sqrt(), hi.sqrt());
        let (elo, ehi) = ((-kt * slo).exp(), (-kt * shi).exp());
        let bracket = lo * elo - hi * ehi;
        let unit = self.prefactor / (t * t);
        let scale = params.area * unit;

        let d_area = unit * bracket;
        let d_bracket_dt = self.decay_per_nm * (hi * shi * ehi - lo * slo * elo);
        let d_thickness = -two * scale * bracket / t + scale * d_bracket_dt;
        let d_phi = scale * (elo * (T::one() - kt * slo / two) - ehi * (T::one() - kt * shi / two));

        let sign = if v < T::zero() { -T::one() } else { T::one() };
        Ok([sign * d_area, sign * d_thickness, sign * d_phi])
    }

    /// `dI/dV` at zero bias, in siemens.
    pub fn zero_bias_conductance(&self, params: &SimmonsParams<T>) -> Result<T> {
        params.validate()?;
        let kphi = self.decay_per_nm * params.thickness * params.barrier_height.sqrt();
        let scale = params.area * self.prefactor / (params.thickness * params.thickness);
        Ok(scale * (-kphi).exp() * (kphi / T::lit(2.0) - T::one()))
    }

    pub fn iv(&self, params: &SimmonsParams<T>, grid: &[T]) -> Result<IvCurve<T>> {
        let mut points = Vec::with_capacity(grid.len());
        for &v in grid {
            points.push((v, self.current(params, v)?));
        }
        IvCurve::new(points)
    }
}

/// Current through the barrier at bias `v`, with CODATA-2018 constants.
pub fn simmons_current<T: Real>(params: &SimmonsParams<T>, v: T) -> Result<T> {
    Simmons::default().current(params, v)
}

/// Pointwise [`simmons_current`] over a strictly increasing grid.
pub fn simmons_iv<T: Real>(params: &SimmonsParams<T>, grid: &[T]) -> Result<IvCurve<T>> {
    Simmons::default().iv(params, grid)
}

/// Evenly spaced grid of `n` voltages from `start` to `end` inclusive.
pub fn linspace<T: Real>(start: T, end: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / T::from_usize(n - 1).unwrap();
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        end
                    } else {
                        start + step * T::from_usize(i).unwrap()
                    }
                })
                .collect()
        }
    }
}

/// Whether the linear fit is constrained through the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intercept {
    #[default]
    Zero,
    Free,
}

pub const DEFAULT_LINEAR_VMAX: f64 = 0.02;

/// Resistance from a zero-intercept linear fit of samples with `|V| <= v_max`.
pub fn low_voltage_resistance<T: Real>(iv: &IvCurve<T>, v_max: T) -> Result<T> {
    low_voltage_resistance_with(iv, v_max, Intercept::Zero)
}

pub fn low_voltage_resistance_with<T: Real>(iv: &IvCurve<T>, v_max: T, intercept: Intercept) -> Result<T> {
    let window: Vec<(T, T)> = iv.points().iter().copied().filter(|p| p.0.abs() <= v_max).collect();
    if window.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            found: window.len(),
        });
    }
    let slope = match intercept {
        Intercept::Zero => {
            let sxy: T = window.iter().map(|&(v, i)| v * i).sum();
            let sxx: T = window.iter().map(|&(v, _)| v * v).sum();
            sxy / sxx
        }
        Intercept::Free => {
            let n = T::from_usize(window.len()).unwrap();
            let mv = window.iter().map(|p| p.0).sum::<T>() / n;
            let mi = window.iter().map(|p| p.1).sum::<T>() / n;
            let sxy: T = window.iter().map(|&(v, i)| (v - mv) * (i - mi)).sum();
            let sxx: T = window.iter().map(|&(v, _)| (v - mv) * (v - mv)).sum();
            sxy / sxx
        }
    };
    if !(slope > T::zero()) || !slope.is_finite() {
        return Err(Error::NonPositiveSlope(slope.to_f64_lossy()));
    }
    Ok(T::one() / slope)
}
