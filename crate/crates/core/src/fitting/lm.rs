//! Damped Gauss-Newton (Levenberg-Marquardt) least squares.
//!
//! Damping starts at `1e-3`, is multiplied by 10 on a rejected step and
//! divided by 10 on an accepted one. A step is accepted only if it strictly
//! lowers the sum of squares, so the cost sequence is monotone.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// A residual vector `r(p)` with its Jacobian.
pub trait LeastSquaresProblem<T: Real> {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;

    /// Parameters outside the model domain are never evaluated.
    fn feasible(&self, _params: &[T]) -> bool {
        true
    }

    fn residuals(&self, params: &[T], out: &mut [T]) -> Result<()>;

    /// Row-major `n_residuals x n_params`.
    fn jacobian(&self, params: &[T], out: &mut [T]) -> Result<()>;
}

#[derive(Debug, Clone, Copy)]
pub struct LmConfig<T> {
    pub max_iterations: usize,
    pub initial_damping: T,
    /// Converged when `max_j |step_j / p_j|` falls below this.
    pub step_tolerance: T,
    /// Converged when the largest cosine between the residual vector and a
    /// Jacobian column falls below this.
    pub gradient_tolerance: T,
}

impl<T: Real> Default for LmConfig<T> {
    fn default() -> Self {
        let eps = T::epsilon() * T::lit(10.0);
        Self {
            max_iterations: 500,
            initial_damping: T::lit(1e-3),
            step_tolerance: T::lit(1e-10).max(eps),
            gradient_tolerance: T::lit(1e-12).max(eps),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome<T> {
    pub params: Vec<T>,
    /// Sum of squared residuals at `params`.
    pub cost: T,
    pub initial_cost: T,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_cosine: T,
    /// Diagonal of `(J^T J)^-1` at `params`, if invertible.
    pub jtj_inverse_diag: Option<Vec<T>>,
}

struct Linearization<T> {
    jtj: Vec<T>,
    gradient: Vec<T>,
    cosine: T,
}

fn sum_squares<T: Real>(r: &[T]) -> T {
    r.iter().map(|&x| x * x).sum()
}

fn linearize<T: Real>(
    problem: &dyn LeastSquaresProblem<T>,
    p: &[T],
    r: &[T],
    jac: &mut [T],
) -> Result<Linearization<T>> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    problem.jacobian(p, jac)?;
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Jacobian"));
    }
    let mut jtj = vec![T::zero(); n * n];
    let mut gradient = vec![T::zero(); n];
    for i in 0..m {
        let row = &jac[i * n..(i + 1) * n];
        for a in 0..n {
            gradient[a] += row[a] * r[i];
            for b in a..n {
                jtj[a * n + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            jtj[a * n + b] = jtj[b * n + a];
        }
    }
    let rnorm = sum_squares(r).sqrt();
    let mut cosine = T::zero();
    if rnorm > T::zero() {
        for a in 0..n {
            let cnorm = jtj[a * n + a].sqrt();
            if cnorm > T::zero() {
                cosine = cosine.max(gradient[a].abs() / (cnorm * rnorm));
            }
        }
    }
    Ok(Linearization { jtj, gradient, cosine })
}

/// Minimizes `sum r_i(p)^2` from `init`.
///
/// Returns `Err(NotConverged)` with the best parameters seen when the
/// iteration budget runs out, and `Err(NoFeasibleStep)` when no trial point
/// around a feasible start is itself feasible.
pub fn levenberg_marquardt<T: Real>(
    problem: &dyn LeastSquaresProblem<T>,
    init: &[T],
    config: &LmConfig<T>,
) -> Result<LmOutcome<T>> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    if init.len() != n {
        return Err(Error::InvalidParams(format!(
            "expected {n} initial parameters, got {}",
            init.len()
        )));
    }
    if m < n {
        return Err(Error::InsufficientPoints { needed: n, found: m });
    }
    if !problem.feasible(init) {
        return Err(Error::InvalidParams(
            "initial parameters outside the model domain".into(),
        ));
    }

    let mut p = init.to_vec();
    let mut r = vec![T::zero(); m];
    problem.residuals(&p, &mut r)?;
    let mut cost = sum_squares(&r);
    if !cost.is_finite() {
        return Err(Error::NonFinite("initial residuals"));
    }
    let initial_cost = cost;
    let mut jac = vec![T::zero(); m * n];
    let mut lin = linearize(problem, &p, &r, &mut jac)?;
    let mut damping = config.initial_damping;
    let mut trial = vec![T::zero(); n];
    let mut trial_r = vec![T::zero(); m];
    let mut accepted_any = false;
    let max_damping = T::lit(1e30).min(T::max_value() / T::lit(1e8));

    let finish = |p: Vec<T>, cost: T, iterations: usize, converged: bool, lin: &Linearization<T>| LmOutcome {
        jtj_inverse_diag: linalg::inverse_diagonal(&lin.jtj, n),
        params: p,
        cost,
        initial_cost,
        iterations,
        converged,
        gradient_cosine: lin.cosine,
    };

    if cost == T::zero() || lin.cosine < config.gradient_tolerance {
        return Ok(finish(p, cost, 0, true, &lin));
    }

    for iteration in 1..=config.max_iterations {
        let mut system = lin.jtj.clone();
        for a in 0..n {
            let d = lin.jtj[a * n + a];
            system[a * n + a] += damping * if d > T::zero() { d } else { T::one() };
        }
        let rhs: Vec<T> = lin.gradient.iter().map(|&g| -g).collect();
        let Some(step) = linalg::solve(&system, &rhs) else {
            damping *= T::lit(10.0);
            if damping > max_damping {
                break;
            }
            continue;
        };
        let rel_step = step
            .iter()
            .zip(&p)
            .map(|(&s, &v)| s.abs() / v.abs().max(T::min_positive_value()))
            .fold(T::zero(), T::max);
        for a in 0..n {
            trial[a] = p[a] + step[a];
        }

        let trial_cost = if problem.feasible(&trial) && problem.residuals(&trial, &mut trial_r).is_ok() {
            let c = sum_squares(&trial_r);
            if c.is_finite() {
                Some(c)
            } else {
                None
            }
        } else {
            None
        };

        match trial_cost {
            Some(c) if c < cost => {
                accepted_any = true;
                std::mem::swap(&mut p, &mut trial);
                std::mem::swap(&mut r, &mut trial_r);
                cost = c;
                damping = (damping / T::lit(10.0)).max(T::lit(1e-12).max(T::epsilon()));
                lin = linearize(problem, &p, &r, &mut jac)?;
                if rel_step < config.step_tolerance || lin.cosine < config.gradient_tolerance || cost == T::zero() {
                    return Ok(finish(p, cost, iteration, true, &lin));
                }
            }
            Some(_) => {
                if rel_step < config.step_tolerance {
                    return Ok(finish(p, cost, iteration, true, &lin));
                }
                damping *= T::lit(10.0);
            }
            None => {
                damping *= T::lit(10.0);
                if damping > max_damping {
                    if !accepted_any {
                        return Err(Error::NoFeasibleStep);
                    }
                    break;
                }
            }
        }
        if damping > max_damping {
            break;
        }
    }

    Err(Error::NotConverged {
        iterations: config.max_iterations,
        best: p.iter().map(|v| v.to_f64_lossy()).collect(),
        residual_norm: cost.to_f64_lossy(),
    })
}
