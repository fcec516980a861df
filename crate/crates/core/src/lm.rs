//! Box-constrained Levenberg-Marquardt.
//!
//! Parameters sitting on a bound whose gradient points out of the box are
//! frozen for the iteration (active set); the rest take a damped Gauss-Newton
//! step in Jacobi-scaled coordinates that is then projected back into the box.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy)]
pub(crate) struct LmSettings {
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub residual_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Relative parameter step fell below the step tolerance.
    SmallStep,
    /// Relative decrease of the residual sum of squares fell below the
    /// residual tolerance.
    SmallResidualChange,
    /// Projected gradient vanished.
    Stationary,
    /// No damping produced a decrease; the point is stationary to machine
    /// precision.
    NoFurtherImprovement,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub rss: f64,
    pub initial_rss: f64,
    pub iterations: usize,
    pub termination: Termination,
}

/// Least-squares problem in model form: residuals are `data - model(p)`.
pub(crate) trait ModelProblem {
    fn eval(&self, p: &[f64]) -> Vec<f64>;
    fn jacobian(&self, p: &[f64]) -> DMatrix<f64>;
}

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;

fn rss_of(data: &[f64], model: &[f64]) -> f64 {
    data.iter().zip(model).map(|(y, f)| (y - f) * (y - f)).sum()
}

fn clamp_into(p: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((x, &l), &h) in p.iter_mut().zip(lo).zip(hi) {
        *x = x.clamp(l, h);
    }
}

pub(crate) fn minimize_box<P: ModelProblem>(
    problem: &P,
    data: &[f64],
    init: &[f64],
    lo: &[f64],
    hi: &[f64],
    settings: LmSettings,
) -> LmOutcome {
    let n = init.len();
    let mut p = init.to_vec();
    clamp_into(&mut p, lo, hi);
    let mut model = problem.eval(&p);
    let mut rss = rss_of(data, &model);
    let initial_rss = rss;

    let mut lambda = LAMBDA_INIT;
    let mut nu = 2.0;
    // Moré-style running maximum of the column norms
    let mut scale = vec![0.0f64; n];
    let mut iterations = 0;

    let termination = loop {
        if iterations >= settings.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let jac = problem.jacobian(&p);
        let resid = DVector::from_iterator(data.len(), data.iter().zip(&model).map(|(y, f)| y - f));
        let jtj = jac.tr_mul(&jac);
        let grad = jac.tr_mul(&resid);

        for i in 0..n {
            scale[i] = scale[i].max(jtj[(i, i)].sqrt());
        }

        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let at_lo = p[i] <= lo[i] && grad[i] <= 0.0;
                let at_hi = p[i] >= hi[i] && grad[i] >= 0.0;
                !(at_lo || at_hi)
            })
            .collect();

        let pg_max = free
            .iter()
            .map(|&i| {
                let d = if scale[i] > 0.0 { scale[i] } else { 1.0 };
                (grad[i] / d).abs()
            })
            .fold(0.0, f64::max);
        if free.is_empty() || pg_max <= 1e-12 * rss.sqrt() {
            break Termination::Stationary;
        }

        let m = free.len();
        let d: Vec<f64> = free
            .iter()
            .map(|&i| if scale[i] > 0.0 { scale[i] } else { 1.0 })
            .collect();
        let scaled_a = DMatrix::from_fn(m, m, |r, c| jtj[(free[r], free[c])] / (d[r] * d[c]));
        let scaled_g = DVector::from_fn(m, |r, _| grad[free[r]] / d[r]);

        let mut accepted = None;
        while lambda <= LAMBDA_MAX {
            let mut damped = scaled_a.clone();
            for k in 0..m {
                damped[(k, k)] += lambda;
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= nu;
                nu *= 2.0;
                continue;
            };
            let z = chol.solve(&scaled_g);

            let mut trial = p.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] += z[k] / d[k];
            }
            clamp_into(&mut trial, lo, hi);
            let step: Vec<f64> = trial.iter().zip(&p).map(|(t, x)| t - x).collect();

            let trial_model = problem.eval(&trial);
            let trial_rss = rss_of(data, &trial_model);

            if trial_rss < rss {
                let step_v = DVector::from_column_slice(&step);
                let predicted = 2.0 * step_v.dot(&grad) - step_v.dot(&(&jtj * &step_v));
                let rho = if predicted > 0.0 {
                    (rss - trial_rss) / predicted
                } else {
                    0.0
                };
                lambda *= f64::max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0).powi(3));
                nu = 2.0;
                accepted = Some((trial, trial_model, trial_rss, step));
                break;
            }
            lambda *= nu;
            nu *= 2.0;
        }

        let Some((trial, trial_model, trial_rss, step)) = accepted else {
            break Termination::NoFurtherImprovement;
        };

        let small_step = step
            .iter()
            .zip(&trial)
            .all(|(s, x)| s.abs() <= settings.step_tolerance * (x.abs() + settings.step_tolerance));
        let small_change = rss - trial_rss <= settings.residual_tolerance * rss;

        p = trial;
        model = trial_model;
        rss = trial_rss;

        if small_step {
            break Termination::SmallStep;
        }
        if small_change {
            break Termination::SmallResidualChange;
        }
    };

    LmOutcome {
        params: p,
        rss,
        initial_rss,
        iterations,
        termination,
    }
}
