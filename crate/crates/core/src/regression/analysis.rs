use alloc::vec::Vec;

use libm::{log, sqrt};

use super::design::{full_rank, DesignMatrix, Standardizer};
use super::kernel::Kernel;
use super::likelihood::{Likelihood, ParamLayout};
use super::optimizer::{maximize, NewtonOptions};
use super::{finish_fit, AnalysisKind, FittedModel, Link, ModelFamily, ZeroModel};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Standardized logistic coefficients beyond this indicate (quasi-)separation.
const SEPARATION_BOUND: f64 = 30.0;

/// Fits the response model: OLS for `Linear`, Newton / IRLS maximum
/// likelihood for `Logistic` and `Poisson`.
pub fn fit_analysis_model(kind: AnalysisKind, design: &DesignMatrix, y: &[f64]) -> Result<FittedModel> {
    if design.nrows() != y.len() {
        return Err(Error::Dimension { expected: design.nrows(), found: y.len() });
    }
    if y.len() <= design.ncols() {
        return Err(Error::Rank);
    }
    match kind {
        AnalysisKind::Linear => fit_linear(design, y),
        AnalysisKind::Logistic => {
            let counts = to_counts(y, true)?;
            fit_glm(kind, Kernel::Logistic, Link::Logit, design, &counts)
        }
        AnalysisKind::Poisson => {
            let counts = to_counts(y, false)?;
            fit_glm(kind, Kernel::Poisson, Link::Log, design, &counts)
        }
    }
}

fn to_counts(y: &[f64], binary: bool) -> Result<Vec<u64>> {
    y.iter()
        .map(|&v| {
            let ok = v >= 0.0 && libm::trunc(v) == v && (!binary || v <= 1.0);
            if ok {
                Ok(v as u64)
            } else if binary {
                Err(Error::domain(alloc::format!("logistic response must be 0 or 1, got {v}")))
            } else {
                Err(Error::domain(alloc::format!("Poisson response must be a nonnegative integer, got {v}")))
            }
        })
        .collect()
}

fn fit_glm(
    kind: AnalysisKind,
    kernel: Kernel,
    link: Link,
    design: &DesignMatrix,
    y: &[u64],
) -> Result<FittedModel> {
    let (standardizer, std_design) = Standardizer::fit(design)?;
    let lik = Likelihood::with_kernel(kernel, ZeroModel::Constant, &std_design, y)?;
    let n = y.len() as f64;
    let mean = y.iter().sum::<u64>() as f64 / n;
    let mut start = alloc::vec![0.0; design.ncols()];
    if let Some(k) = std_design.intercept_column() {
        start[k] = match kernel {
            Kernel::Logistic if mean > 0.0 && mean < 1.0 => log(mean / (1.0 - mean)),
            Kernel::Poisson if mean > 0.0 => log(mean),
            _ => 0.0,
        };
    }
    let optimum = maximize(&lik, start, NewtonOptions::default())?;
    if kernel == Kernel::Logistic && optimum.theta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
        return Err(Error::Convergence { iterations: optimum.iterations, trace: alloc::vec![optimum.value] });
    }
    let layout = ParamLayout { mean: design.ncols(), zero: 0, nuisance: 0 };
    finish_fit(ModelFamily::Analysis(kind), link, layout, ZeroModel::Constant, &standardizer, optimum)
}

fn fit_linear(design: &DesignMatrix, y: &[f64]) -> Result<FittedModel> {
    let (standardizer, std_design) = Standardizer::fit(design)?;
    let n = y.len();
    let p = design.ncols();
    let gram = std_design.gram();
    if !full_rank(&gram) {
        return Err(Error::Rank);
    }
    let chol = gram.cholesky().ok_or(Error::Rank)?;
    let mut xty = alloc::vec![0.0; p];
    for (i, &yi) in y.iter().enumerate() {
        for (j, x) in std_design.row(i).iter().enumerate() {
            xty[j] += x * yi;
        }
    }
    let b = chol.solve(&xty);
    let rss: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| {
            let r = yi - crate::linalg::dot(std_design.row(i), &b);
            r * r
        })
        .sum();
    let sigma2 = rss / (n - p) as f64;
    let mut cov = chol.inverse();
    cov.scale(sigma2);

    let a = standardizer.back_transform();
    let beta = a.mul_vec(&b);
    let mut covariance: Matrix = a.matmul(&cov).matmul(&a.transpose());
    covariance.symmetrize();
    let mle_var = rss / n as f64;
    let loglik = -0.5 * n as f64 * (log(2.0 * core::f64::consts::PI * mle_var) + 1.0);
    Ok(FittedModel {
        family: ModelFamily::Analysis(AnalysisKind::Linear),
        link: Link::Identity,
        layout: ParamLayout { mean: p, zero: 0, nuisance: 0 },
        zero_model: ZeroModel::Constant,
        params: beta,
        covariance,
        loglik,
        iterations: 0,
        nuisance_pinned: false,
        sigma: Some(sqrt(sigma2)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_line_is_recovered_exactly() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.7).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.5 * v).collect();
        let design = DesignMatrix::intercept_and(&x).unwrap();
        let fit = fit_analysis_model(AnalysisKind::Linear, &design, &y).unwrap();
        assert!((fit.beta()[0] - 1.0).abs() < 1e-13);
        assert!((fit.beta()[1] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn intercept_only_logistic_is_logit_of_proportion() {
        let y: Vec<f64> = (0..40).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let design = DesignMatrix::intercept_only(y.len());
        let fit = fit_analysis_model(AnalysisKind::Logistic, &design, &y).unwrap();
        assert!((fit.beta()[0] - log(0.25 / 0.75)).abs() < 1e-12);
    }

    #[test]
    fn separated_logistic_fails_to_converge() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v < 10.0 { 0.0 } else { 1.0 }).collect();
        let design = DesignMatrix::intercept_and(&x).unwrap();
        let err = fit_analysis_model(AnalysisKind::Logistic, &design, &y).unwrap_err();
        assert!(matches!(err, Error::Convergence { .. }), "{err:?}");
    }

    #[test]
    fn response_type_is_checked() {
        let design = DesignMatrix::intercept_only(3);
        assert!(fit_analysis_model(AnalysisKind::Logistic, &design, &[0.0, 2.0, 1.0]).is_err());
        assert!(fit_analysis_model(AnalysisKind::Poisson, &design, &[0.5, 2.0, 1.0]).is_err());
    }
}
