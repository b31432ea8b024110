//! Maximum-likelihood count regression (the imputation models) and the
//! linear / logistic / Poisson analysis models.
//!
//! Count models use a log link on the mean (log link on `lambda` for
//! COM-Poisson) and a logit link on the structural-zero probability.
//! Nuisance parameters are estimated on unconstrained scales:
//! `ln(d − 1)` for the negative binomial, `ln am` for Hermite and `ln nu`
//! for COM-Poisson.

mod analysis;
mod design;
mod kernel;
mod likelihood;
mod optimizer;

use alloc::vec::Vec;

use libm::{exp, log, sqrt};

pub use analysis::fit_analysis_model;
pub use design::DesignMatrix;
pub use likelihood::{Evaluation, Likelihood, ParamLayout};

use crate::distributions::{
    CompoissonParams, DistributionParams, HermiteParams, NegBinParams, PoissonParams, ZeroBase,
    ZeroInflatedParams,
};
use crate::linalg::Matrix;
use crate::special::{logistic, logit, normal_quantile};
use crate::{Error, Result};
use design::Standardizer;
use kernel::Kernel;
use optimizer::{maximize, NewtonOptions, Optimum};

/// Nuisance variances above this (on the unconstrained scale) mean the
/// likelihood is flat in that direction: the estimate sits at the boundary
/// of the family and the nuisance parameter is held fixed.
const PIN_VARIANCE: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CountFamily {
    Poisson,
    NegBin,
    Hermite { order: u32 },
    ComPoisson,
    ZeroInflatedPoisson,
    ZeroInflatedNegBin,
}

impl CountFamily {
    pub const HERMITE: CountFamily = CountFamily::Hermite { order: 2 };

    pub(crate) fn kernel(self) -> Kernel {
        match self {
            CountFamily::Poisson => Kernel::Poisson,
            CountFamily::NegBin => Kernel::NegBin,
            CountFamily::Hermite { order } => Kernel::Hermite(order),
            CountFamily::ComPoisson => Kernel::ComPoisson,
            CountFamily::ZeroInflatedPoisson => Kernel::ZeroInflatedPoisson,
            CountFamily::ZeroInflatedNegBin => Kernel::ZeroInflatedNegBin,
        }
    }

    pub fn is_zero_inflated(self) -> bool {
        matches!(self, CountFamily::ZeroInflatedPoisson | CountFamily::ZeroInflatedNegBin)
    }
}

/// How the structural-zero probability of ZIP / ZINB depends on covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum ZeroModel {
    /// `logit(pi)` regressed on the same design as the mean.
    #[default]
    Regressed,
    /// Intercept-only `logit(pi)`.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnalysisKind {
    Linear,
    Logistic,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    Count(CountFamily),
    Analysis(AnalysisKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Log,
    Logit,
    Identity,
}

/// Family-specific nuisance estimate on its natural scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nuisance {
    /// Negative binomial dispersion index `d`.
    Dispersion(f64),
    /// Hermite rate `am`.
    HermiteRate(f64),
    /// COM-Poisson `nu`.
    Nu(f64),
    /// Residual standard deviation of the linear model.
    Sigma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub zero_model: ZeroModel,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { zero_model: ZeroModel::Regressed, max_iter: 200 }
    }
}

/// A fitted regression: the full unconstrained parameter vector
/// `[beta | gamma | s]`, its covariance (inverse observed information) and
/// the maximized log-likelihood.
#[derive(Debug, Clone)]
pub struct FittedModel {
    family: ModelFamily,
    link: Link,
    layout: ParamLayout,
    zero_model: ZeroModel,
    params: Vec<f64>,
    covariance: Matrix,
    loglik: f64,
    iterations: usize,
    nuisance_pinned: bool,
    sigma: Option<f64>,
}

impl FittedModel {
    /// Assembles a count model from known parameters, e.g. to impute from a
    /// fixed model. `n_predictors` is the design width.
    pub fn count_from_parts(
        family: CountFamily,
        zero_model: ZeroModel,
        n_predictors: usize,
        params: Vec<f64>,
        covariance: Matrix,
    ) -> Result<Self> {
        let layout = count_layout(family, zero_model, n_predictors);
        if params.len() != layout.len() {
            return Err(Error::Dimension { expected: layout.len(), found: params.len() });
        }
        if covariance.rows() != layout.len() || covariance.cols() != layout.len() {
            return Err(Error::Dimension { expected: layout.len(), found: covariance.rows() });
        }
        Ok(FittedModel {
            family: ModelFamily::Count(family),
            link: Link::Log,
            layout,
            zero_model,
            params,
            covariance,
            loglik: f64::NAN,
            iterations: 0,
            nuisance_pinned: false,
            sigma: None,
        })
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    pub fn zero_model(&self) -> ZeroModel {
        self.zero_model
    }

    /// Mean-model coefficients.
    pub fn beta(&self) -> &[f64] {
        &self.params[..self.layout.mean]
    }

    /// Coefficients of the logit model for the structural-zero probability.
    pub fn zero_coefficients(&self) -> &[f64] {
        &self.params[self.layout.zero_offset()..self.layout.nuisance_offset()]
    }

    /// The full unconstrained parameter vector.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Covariance of the full parameter vector.
    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.layout.mean).map(|j| sqrt(self.covariance[(j, j)].max(0.0))).collect()
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// True when the nuisance estimate hit the family boundary and was held
    /// fixed (zero variance) instead of being given a normal approximation.
    pub fn nuisance_pinned(&self) -> bool {
        self.nuisance_pinned
    }

    pub fn nuisance(&self) -> Option<Nuisance> {
        if let Some(sigma) = self.sigma {
            return Some(Nuisance::Sigma(sigma));
        }
        if self.layout.nuisance == 0 {
            return None;
        }
        let s = self.params[self.layout.nuisance_offset()];
        Some(match self.family {
            ModelFamily::Count(CountFamily::NegBin | CountFamily::ZeroInflatedNegBin) => {
                Nuisance::Dispersion(1.0 + exp(s))
            }
            ModelFamily::Count(CountFamily::Hermite { .. }) => Nuisance::HermiteRate(exp(s)),
            ModelFamily::Count(CountFamily::ComPoisson) => Nuisance::Nu(exp(s)),
            _ => return None,
        })
    }

    /// Returns a copy with the given parameter covariance.
    pub fn with_covariance(mut self, covariance: Matrix) -> Result<Self> {
        let k = self.layout.len();
        if covariance.rows() != k || covariance.cols() != k {
            return Err(Error::Dimension { expected: k, found: covariance.rows() });
        }
        self.covariance = covariance;
        Ok(self)
    }

    /// Per-observation distribution at the fitted parameters.
    pub fn predict_params(&self, design_row: &[f64]) -> Result<DistributionParams> {
        self.predict_with(&self.params, design_row)
    }

    /// Per-observation distribution at an arbitrary parameter vector with
    /// this model's layout (used with posterior draws).
    pub fn predict_with(&self, params: &[f64], design_row: &[f64]) -> Result<DistributionParams> {
        let layout = self.layout;
        if design_row.len() != layout.mean {
            return Err(Error::Dimension { expected: layout.mean, found: design_row.len() });
        }
        if params.len() != layout.len() {
            return Err(Error::Dimension { expected: layout.len(), found: params.len() });
        }
        let ModelFamily::Count(family) = self.family else {
            return Err(Error::domain("analysis models do not define a count distribution"));
        };
        let eta = crate::linalg::dot(design_row, &params[..layout.mean]);
        let s = params.get(layout.nuisance_offset()).copied().unwrap_or(0.0);
        let zero = || {
            let gamma = &params[layout.zero_offset()..layout.nuisance_offset()];
            let zeta = match self.zero_model {
                ZeroModel::Constant => gamma[0],
                ZeroModel::Regressed => crate::linalg::dot(design_row, gamma),
            };
            logistic(zeta)
        };
        Ok(match family {
            CountFamily::Poisson => DistributionParams::Poisson(PoissonParams::new(exp(eta))?),
            CountFamily::NegBin => DistributionParams::NegBin(NegBinParams::new(exp(eta), 1.0 + exp(s))?),
            CountFamily::Hermite { order } => {
                let am = exp(s);
                DistributionParams::Hermite(HermiteParams::new(exp(eta) - order as f64 * am, am, order)?)
            }
            CountFamily::ComPoisson => {
                DistributionParams::ComPoisson(CompoissonParams::new(exp(eta), exp(s))?)
            }
            CountFamily::ZeroInflatedPoisson => DistributionParams::ZeroInflated(ZeroInflatedParams::new(
                zero(),
                ZeroBase::Poisson(PoissonParams::new(exp(eta))?),
            )?),
            CountFamily::ZeroInflatedNegBin => DistributionParams::ZeroInflated(ZeroInflatedParams::new(
                zero(),
                ZeroBase::NegBin(NegBinParams::new(exp(eta), 1.0 + exp(s))?),
            )?),
        })
    }
}

fn count_layout(family: CountFamily, zero_model: ZeroModel, p: usize) -> ParamLayout {
    let kernel = family.kernel();
    ParamLayout {
        mean: p,
        zero: match (kernel.has_zero_model(), zero_model) {
            (false, _) => 0,
            (true, ZeroModel::Constant) => 1,
            (true, ZeroModel::Regressed) => p,
        },
        nuisance: usize::from(kernel.has_nuisance()),
    }
}

/// Wald intervals `beta ± z · se` for the mean coefficients.
pub fn confint(model: &FittedModel, level: f64) -> Result<Vec<Interval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(alloc::format!("confidence level must be in (0, 1), got {level}")));
    }
    let z = normal_quantile(0.5 * (1.0 + level));
    Ok(model
        .beta()
        .iter()
        .zip(model.std_errors())
        .map(|(&b, se)| Interval { lower: b - z * se, upper: b + z * se })
        .collect())
}

pub fn fit_count_model(family: CountFamily, design: &DesignMatrix, y: &[u64]) -> Result<FittedModel> {
    fit_count_model_with(family, design, y, &FitOptions::default())
}

pub fn fit_count_model_with(
    family: CountFamily,
    design: &DesignMatrix,
    y: &[u64],
    options: &FitOptions,
) -> Result<FittedModel> {
    let layout = count_layout(family, options.zero_model, design.ncols());
    if design.nrows() != y.len() {
        return Err(Error::Dimension { expected: design.nrows(), found: y.len() });
    }
    if y.len() <= layout.len() {
        return Err(Error::Rank);
    }
    let (standardizer, std_design) = Standardizer::fit(design)?;
    let newton = NewtonOptions { max_iter: options.max_iter, ..NewtonOptions::default() };

    let poisson = Likelihood::with_kernel(Kernel::Poisson, ZeroModel::Constant, &std_design, y)?;
    let poisson_fit = maximize(&poisson, poisson_start(&std_design, y)?, newton)?;

    let optimum = if family == CountFamily::Poisson {
        poisson_fit
    } else {
        let lik = Likelihood::with_kernel(family.kernel(), options.zero_model, &std_design, y)?;
        let start = family_start(family, options.zero_model, &std_design, y, &poisson_fit.theta, lik.layout());
        maximize(&lik, start, newton)?
    };
    finish_fit(
        ModelFamily::Count(family),
        Link::Log,
        layout,
        options.zero_model,
        &standardizer,
        optimum,
    )
}

fn poisson_start(design: &DesignMatrix, y: &[u64]) -> Result<Vec<f64>> {
    let mean = y.iter().sum::<u64>() as f64 / y.len() as f64;
    if mean == 0.0 {
        return Err(Error::domain("count response is identically zero"));
    }
    let mut start = alloc::vec![0.0; design.ncols()];
    if let Some(k) = design.intercept_column() {
        start[k] = log(mean);
    }
    Ok(start)
}

fn family_start(
    family: CountFamily,
    zero_model: ZeroModel,
    design: &DesignMatrix,
    y: &[u64],
    poisson_beta: &[f64],
    layout: ParamLayout,
) -> Vec<f64> {
    let n = y.len() as f64;
    let mut start = poisson_beta.to_vec();
    let fitted: Vec<f64> = (0..design.nrows()).map(|i| exp(crate::linalg::dot(design.row(i), poisson_beta))).collect();

    if layout.zero > 0 {
        let observed_zero = y.iter().filter(|&&v| v == 0).count() as f64 / n;
        let implied_zero = fitted.iter().map(|mu| exp(-mu)).sum::<f64>() / n;
        let pi0 = (observed_zero - implied_zero).clamp(1e-3, 0.9);
        let mut gamma = alloc::vec![0.0; layout.zero];
        match (zero_model, design.intercept_column()) {
            (ZeroModel::Constant, _) => gamma[0] = logit(pi0),
            (ZeroModel::Regressed, Some(k)) => gamma[k] = logit(pi0),
            (ZeroModel::Regressed, None) => {}
        }
        start.extend(gamma);
    }
    if layout.nuisance > 0 {
        let s = match family {
            CountFamily::NegBin | CountFamily::ZeroInflatedNegBin => {
                let dof = (n - design.ncols() as f64).max(1.0);
                let pearson = y.iter().zip(&fitted).map(|(&v, mu)| { let r = v as f64 - mu; r * r / mu }).sum::<f64>() / dof;
                log(pearson.max(1.05) - 1.0)
            }
            CountFamily::Hermite { order } => {
                let mean = y.iter().sum::<u64>() as f64 / n;
                let smallest = fitted.iter().copied().fold(f64::INFINITY, f64::min);
                log((0.01 * mean).min(0.5 * smallest / order as f64))
            }
            _ => 0.0,
        };
        start.push(s);
    }
    start
}

/// Inverts the observed information (pinning a boundary nuisance parameter
/// if needed) and maps everything back to the caller's design scale.
fn finish_fit(
    family: ModelFamily,
    link: Link,
    layout: ParamLayout,
    zero_model: ZeroModel,
    standardizer: &Standardizer,
    optimum: Optimum,
) -> Result<FittedModel> {
    let k = layout.len();
    let mut information = optimum.hessian.clone();
    information.scale(-1.0);
    let (cov_std, pinned) = invert_information(&information, layout)?;

    let a = standardizer.back_transform();
    let mut t = Matrix::zeros(k, k);
    for i in 0..layout.mean {
        for j in 0..layout.mean {
            t[(i, j)] = a[(i, j)];
        }
    }
    let zo = layout.zero_offset();
    for i in 0..layout.zero {
        for j in 0..layout.zero {
            t[(zo + i, zo + j)] = if zero_model == ZeroModel::Regressed { a[(i, j)] } else { 1.0 };
        }
    }
    for i in layout.nuisance_offset()..k {
        t[(i, i)] = 1.0;
    }
    let params = t.mul_vec(&optimum.theta);
    let mut covariance = t.matmul(&cov_std).matmul(&t.transpose());
    covariance.symmetrize();
    Ok(FittedModel {
        family,
        link,
        layout,
        zero_model,
        params,
        covariance,
        loglik: optimum.value,
        iterations: optimum.iterations,
        nuisance_pinned: pinned,
        sigma: None,
    })
}

fn invert_information(information: &Matrix, layout: ParamLayout) -> Result<(Matrix, bool)> {
    let k = layout.len();
    let full = information.cholesky().map(|c| c.inverse());
    if let Some(cov) = &full {
        let flat = layout.nuisance == 1 && cov[(k - 1, k - 1)] > PIN_VARIANCE;
        if !flat {
            return Ok((cov.clone(), false));
        }
    }
    if layout.nuisance == 0 {
        return Err(Error::Rank);
    }
    let r = k - 1;
    let mut reduced = Matrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            reduced[(i, j)] = information[(i, j)];
        }
    }
    let inv = reduced.cholesky().ok_or(Error::Rank)?.inverse();
    let mut cov = Matrix::zeros(k, k);
    for i in 0..r {
        for j in 0..r {
            cov[(i, j)] = inv[(i, j)];
        }
    }
    Ok((cov, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only_poisson_is_log_mean() {
        let y = [0u64, 1, 2, 3, 4, 2, 2, 5, 1, 0];
        let design = DesignMatrix::intercept_only(y.len());
        let fit = fit_count_model(CountFamily::Poisson, &design, &y).unwrap();
        assert!((fit.beta()[0] - log(2.0)).abs() < 1e-12);
    }

    #[test]
    fn predict_poisson_and_negbin() {
        let poisson = FittedModel::count_from_parts(
            CountFamily::Poisson,
            ZeroModel::Regressed,
            2,
            alloc::vec![log(2.0), 0.0],
            Matrix::zeros(2, 2),
        )
        .unwrap();
        match poisson.predict_params(&[1.0, 17.0]).unwrap() {
            DistributionParams::Poisson(p) => assert!((p.lambda() - 2.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        let nb = FittedModel::count_from_parts(
            CountFamily::NegBin,
            ZeroModel::Regressed,
            1,
            alloc::vec![0.0, 0.0],
            Matrix::zeros(2, 2),
        )
        .unwrap();
        assert_eq!(
            nb.predict_params(&[1.0]).unwrap(),
            DistributionParams::NegBin(NegBinParams::new(1.0, 2.0).unwrap())
        );
        assert!(matches!(nb.predict_params(&[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn predict_zip_inverse_links() {
        let model = FittedModel::count_from_parts(
            CountFamily::ZeroInflatedPoisson,
            ZeroModel::Constant,
            1,
            alloc::vec![log(2.0), logit(0.1)],
            Matrix::zeros(2, 2),
        )
        .unwrap();
        match model.predict_params(&[1.0]).unwrap() {
            DistributionParams::ZeroInflated(z) => {
                assert!((z.pi() - 0.1).abs() < 1e-15);
                assert!((z.base().mean() - 2.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn confint_widths() {
        let mut cov = Matrix::zeros(2, 2);
        cov[(1, 1)] = 1.0;
        let model = FittedModel::count_from_parts(
            CountFamily::Poisson,
            ZeroModel::Regressed,
            2,
            alloc::vec![0.3, 0.5],
            cov,
        )
        .unwrap();
        let ci = confint(&model, 0.95).unwrap();
        assert_eq!(ci[0].length(), 0.0);
        assert!(ci[0].contains(0.3));
        assert!((ci[1].length() / 2.0 - 1.959_964).abs() < 1e-6);
        assert!(confint(&model, 1.0).is_err());
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut data = Vec::new();
        for v in x {
            data.extend([1.0, v, 2.0 * v]);
        }
        let design = DesignMatrix::new(5, 3, data).unwrap();
        let y = [1u64, 2, 2, 3, 4];
        assert_eq!(fit_count_model(CountFamily::Poisson, &design, &y).unwrap_err(), Error::Rank);
    }
}
