//! Damped Newton ascent with Armijo backtracking.

use alloc::vec::Vec;

use super::likelihood::{Evaluation, Likelihood};
use crate::linalg::{dot, max_abs, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOptions {
    pub max_iter: usize,
    /// Relative change of the log-likelihood.
    pub value_tol: f64,
    /// Max-norm of the accepted step.
    pub step_tol: f64,
    /// Max-norm of the gradient that counts as stationary on its own.
    pub grad_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iter: 200, value_tol: 1e-9, step_tol: 1e-7, grad_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Optimum {
    pub theta: Vec<f64>,
    pub value: f64,
    pub hessian: Matrix,
    pub iterations: usize,
}

fn evaluate_or_reject(lik: &Likelihood<'_>, theta: &[f64], hessian: bool) -> Option<Evaluation> {
    match lik.evaluate(theta, hessian) {
        Ok(e) if e.value.is_finite() && e.gradient.iter().all(|g| g.is_finite()) => Some(e),
        _ => None,
    }
}

/// Ascent direction `(−H + τI)⁻¹ g`, raising `τ` until the shifted matrix is
/// positive definite.
fn newton_direction(hessian: &Matrix, gradient: &[f64]) -> Option<Vec<f64>> {
    let k = gradient.len();
    let mut neg = hessian.clone();
    neg.scale(-1.0);
    if let Some(ch) = neg.cholesky() {
        return Some(ch.solve(gradient));
    }
    let scale = neg.diag().iter().fold(1.0_f64, |m, d| m.max(d.abs()));
    let mut tau = 1e-8 * scale;
    for _ in 0..30 {
        let mut shifted = neg.clone();
        for i in 0..k {
            shifted[(i, i)] += tau;
        }
        if let Some(ch) = shifted.cholesky() {
            return Some(ch.solve(gradient));
        }
        tau *= 10.0;
    }
    None
}

pub(crate) fn maximize(lik: &Likelihood<'_>, start: Vec<f64>, opts: NewtonOptions) -> Result<Optimum> {
    let mut theta = start;
    let mut current = lik.evaluate(&theta, true)?;
    if !current.value.is_finite() {
        return Err(Error::domain("starting point has zero likelihood"));
    }
    let mut trace = alloc::vec![current.value];
    for iteration in 1..=opts.max_iter {
        let hessian = current.hessian.as_ref().expect("hessian requested");
        if !hessian.is_finite() {
            return Err(Error::Convergence { iterations: iteration, trace });
        }
        if max_abs(&current.gradient) < opts.grad_tol {
            return finish(theta, current, iteration - 1);
        }
        let direction = newton_direction(hessian, &current.gradient)
            .ok_or(Error::Convergence { iterations: iteration, trace: trace.clone() })?;
        let slope = dot(&current.gradient, &direction);
        // When the predicted gain is below the rounding level of the
        // log-likelihood, value comparisons carry no information and the
        // full Newton step is taken on the strength of the quadratic model.
        let below_resolution = slope < 1e3 * f64::EPSILON * current.value.abs().max(1.0);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&direction).map(|(t, d)| t + alpha * d).collect();
            if let Some(e) = evaluate_or_reject(lik, &trial, true) {
                if e.value >= current.value + 1e-4 * alpha * slope || (alpha == 1.0 && below_resolution) {
                    accepted = Some((trial, e));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((next_theta, next)) = accepted else {
            // No ascent possible along the Newton direction: stationary to
            // within rounding if the gradient is tiny.
            if max_abs(&current.gradient) < 1e-6 {
                return finish(theta, current, iteration);
            }
            return Err(Error::Convergence { iterations: iteration, trace });
        };
        let step = alpha * max_abs(&direction);
        let change = (next.value - current.value).abs() / current.value.abs().max(1.0);
        theta = next_theta;
        current = next;
        trace.push(current.value);
        if alpha == 1.0 && change < opts.value_tol && step < opts.step_tol {
            return finish(theta, current, iteration);
        }
    }
    Err(Error::Convergence { iterations: opts.max_iter, trace })
}

fn finish(theta: Vec<f64>, eval: Evaluation, iterations: usize) -> Result<Optimum> {
    Ok(Optimum {
        theta,
        value: eval.value,
        hessian: eval.hessian.expect("hessian requested"),
        iterations,
    })
}
