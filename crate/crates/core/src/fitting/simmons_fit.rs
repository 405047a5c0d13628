use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LeastSquaresProblem, LmConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::simmons::{IvCurve, Simmons, SimmonsParams};

/// Whether the junction area is held at a measured value or fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaMode<T = f64> {
    /// Area pinned to this value, nm².
    Fixed(T),
    Free,
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T = f64> {
    pub names: Vec<String>,
    pub values: Vec<T>,
    /// Sum of squared residuals in the data's units.
    pub residual_norm: T,
    pub converged: bool,
    pub iterations: usize,
    /// Parameter variances; zero for parameters held fixed.
    pub covariance_diag: Vec<T>,
    /// Largest cosine between the residual vector and any Jacobian column.
    pub gradient_cosine: T,
}

impl<T: Real> FitResult<T> {
    pub fn get(&self, name: &str) -> Option<T> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// Valid only for results produced by [`fit_simmons`].
    pub fn simmons(&self) -> SimmonsParams<T> {
        SimmonsParams {
            area: self.get("area").unwrap_or(T::nan()),
            thickness: self.get("thickness").unwrap_or(T::nan()),
            barrier_height: self.get("barrier_height").unwrap_or(T::nan()),
        }
    }
}

struct SimmonsProblem<T> {
    voltages: Vec<T>,
    currents: Vec<T>,
    scale: T,
    fixed_area: Option<T>,
    half_vmax: T,
    model: Simmons<T>,
}

impl<T: Real> SimmonsProblem<T> {
    fn params(&self, p: &[T]) -> SimmonsParams<T> {
        match self.fixed_area {
            Some(area) => SimmonsParams {
                area,
                thickness: p[0],
                barrier_height: p[1],
            },
            None => SimmonsParams {
                area: p[0],
                thickness: p[1],
                barrier_height: p[2],
            },
        }
    }
}

impl<T: Real> LeastSquaresProblem<T> for SimmonsProblem<T> {
    fn n_params(&self) -> usize {
        if self.fixed_area.is_some() {
            2
        } else {
            3
        }
    }

    fn n_residuals(&self) -> usize {
        self.voltages.len()
    }

    fn feasible(&self, p: &[T]) -> bool {
        let sp = self.params(p);
        sp.area > T::zero()
            && sp.thickness > T::zero()
            && sp.barrier_height > self.half_vmax
            && p.iter().all(|v| v.is_finite())
    }

    fn residuals(&self, p: &[T], out: &mut [T]) -> Result<()> {
        let sp = self.params(p);
        for ((o, &v), &i) in out.iter_mut().zip(&self.voltages).zip(&self.currents) {
            *o = (self.model.current(&sp, v)? - i) / self.scale;
        }
        Ok(())
    }

    fn jacobian(&self, p: &[T], out: &mut [T]) -> Result<()> {
        let sp = self.params(p);
        let n = self.n_params();
        for (row, &v) in self.voltages.iter().enumerate() {
            let g = self.model.gradient(&sp, v)?;
            let cols: &[T] = if self.fixed_area.is_some() { &g[1..] } else { &g };
            for (k, &c) in cols.iter().enumerate() {
                out[row * n + k] = c / self.scale;
            }
        }
        Ok(())
    }
}

/// Fits the Simmons model to an IV curve by damped least squares on
/// `sum (I_model - I_data)^2`.
///
/// Residuals are divided internally by `max |I_data|`; this does not move the
/// minimizer and `residual_norm` is reported in A².
pub fn fit_simmons<T: Real>(iv: &IvCurve<T>, area_mode: AreaMode<T>, init: SimmonsParams<T>) -> Result<FitResult<T>> {
    fit_simmons_with(iv, area_mode, init, &LmConfig::default())
}

pub fn fit_simmons_with<T: Real>(
    iv: &IvCurve<T>,
    area_mode: AreaMode<T>,
    init: SimmonsParams<T>,
    config: &LmConfig<T>,
) -> Result<FitResult<T>> {
    let voltages: Vec<T> = iv.voltages().collect();
    let currents: Vec<T> = iv.currents().collect();
    let scale = currents.iter().fold(T::zero(), |m, c| m.max(c.abs()));
    if !(scale > T::zero()) {
        return Err(Error::InvalidCurve("all currents are zero".into()));
    }
    let half_vmax = voltages.iter().fold(T::zero(), |m, v| m.max(v.abs())) / T::lit(2.0);
    let fixed_area = match area_mode {
        AreaMode::Fixed(a) if a > T::zero() => Some(a),
        AreaMode::Fixed(a) => return Err(Error::InvalidParams(format!("fixed area must be positive, got {a}"))),
        AreaMode::Free => None,
    };
    let problem = SimmonsProblem {
        voltages,
        currents,
        scale,
        fixed_area,
        half_vmax,
        model: Simmons::default(),
    };
    let start: Vec<T> = match fixed_area {
        Some(_) => vec![init.thickness, init.barrier_height],
        None => vec![init.area, init.thickness, init.barrier_height],
    };
    if !problem.feasible(&start) {
        return Err(Error::Domain {
            voltage: (half_vmax * T::lit(2.0)).to_f64_lossy(),
            barrier_height: init.barrier_height.to_f64_lossy(),
        });
    }
    let out = match levenberg_marquardt(&problem, &start, config) {
        Ok(o) => o,
        Err(Error::NotConverged {
            iterations,
            best,
            residual_norm,
        }) => {
            return Err(Error::NotConverged {
                iterations,
                best,
                residual_norm: residual_norm * (scale * scale).to_f64_lossy(),
            })
        }
        Err(e) => return Err(e),
    };

    let m = problem.n_residuals();
    let n = problem.n_params();
    let dof = if m > n { T::from_usize(m - n).unwrap() } else { T::one() };
    let sigma2 = out.cost / dof;
    let var: Vec<T> = match &out.jtj_inverse_diag {
        Some(d) => d.iter().map(|&x| x * sigma2).collect(),
        None => vec![T::nan(); n],
    };
    let sp = problem.params(&out.params);
    let covariance_diag = match fixed_area {
        Some(_) => vec![T::zero(), var[0], var[1]],
        None => var,
    };
    Ok(FitResult {
        names: vec!["area".into(), "thickness".into(), "barrier_height".into()],
        values: vec![sp.area, sp.thickness, sp.barrier_height],
        residual_norm: out.cost * scale * scale,
        converged: out.converged,
        iterations: out.iterations,
        covariance_diag,
        gradient_cosine: out.gradient_cosine,
    })
}

/// Sum of squared current residuals of `params` against `iv`.
pub fn simmons_residual_norm<T: Real>(iv: &IvCurve<T>, params: &SimmonsParams<T>) -> Result<T> {
    let model = Simmons::default();
    let mut s = T::zero();
    for &(v, i) in iv.points() {
        let r = model.current(params, v)? - i;
        s += r * r;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simmons::{linspace, simmons_iv};

    fn truth() -> SimmonsParams {
        SimmonsParams::new(5.76e4, 0.78, 1.48).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn area_fixed_round_trip() {
        let iv = simmons_iv(&truth(), &linspace(0.0, 1.2, 50)).unwrap();
        let init = SimmonsParams::new(5.76e4, 1.0, 1.2).unwrap();
        let fit = fit_simmons(&iv, AreaMode::Fixed(5.76e4), init).unwrap();
        assert!(fit.converged);
        let p = fit.simmons();
        assert!(rel(p.thickness, 0.78) < 1e-6, "{p:?}");
        assert!(rel(p.barrier_height, 1.48) < 1e-6, "{p:?}");
        assert_eq!(fit.covariance_diag[0], 0.0);
    }

    #[test]
    fn area_free_round_trip() {
        let iv = simmons_iv(&truth(), &linspace(0.0, 1.2, 50)).unwrap();
        let init = SimmonsParams::new(5.76e4 * 1.2, 0.78 * 0.8, 1.48 * 1.2).unwrap();
        let fit = fit_simmons(&iv, AreaMode::Free, init).unwrap();
        let p = fit.simmons();
        assert!(rel(p.area, 5.76e4) < 1e-4, "{p:?}");
        assert!(rel(p.thickness, 0.78) < 1e-4, "{p:?}");
        assert!(rel(p.barrier_height, 1.48) < 1e-4, "{p:?}");
    }

    #[test]
    fn f32_round_trip_is_close() {
        let t = SimmonsParams::<f32>::new(5.76e4, 0.78, 1.48).unwrap();
        let iv = simmons_iv(&t, &linspace(0.0f32, 1.2, 50)).unwrap();
        let init = SimmonsParams::<f32>::new(5.76e4, 0.9, 1.3).unwrap();
        let fit = fit_simmons(&iv, AreaMode::Fixed(5.76e4f32), init).unwrap();
        let p = fit.simmons();
        assert!(((p.thickness - 0.78) / 0.78).abs() < 1e-3, "{p:?}");
        assert!(((p.barrier_height - 1.48) / 1.48).abs() < 1e-3, "{p:?}");
    }

    #[test]
    fn rejects_init_outside_domain() {
        let iv = simmons_iv(&truth(), &linspace(0.0, 1.2, 20)).unwrap();
        let init = SimmonsParams::new(5.76e4, 1.0, 0.5).unwrap();
        assert!(matches!(
            fit_simmons(&iv, AreaMode::Fixed(5.76e4), init),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn zero_curve_rejected() {
        let iv = IvCurve::new(vec![(0.0, 0.0), (0.1, 0.0), (0.2, 0.0)]).unwrap();
        assert!(fit_simmons(&iv, AreaMode::Free, truth()).is_err());
    }

    #[test]
    fn residual_never_exceeds_initial() {
        let noisy: Vec<(f64, f64)> = simmons_iv(&truth(), &linspace(0.0, 1.0, 30))
            .unwrap()
            .points()
            .iter()
            .enumerate()
            .map(|(k, &(v, i))| (v, i * (1.0 + 0.01 * ((k * 7 % 5) as f64 - 2.0))))
            .collect();
        let iv = IvCurve::new(noisy).unwrap();
        let init = SimmonsParams::new(5.76e4, 0.9, 1.3).unwrap();
        let before = simmons_residual_norm(&iv, &init).unwrap();
        let fit = fit_simmons(&iv, AreaMode::Fixed(5.76e4), init).unwrap();
        assert!(fit.residual_norm <= before);
    }
}
