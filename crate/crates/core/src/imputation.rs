//! Bayesian multiple imputation of the count covariate and Rubin pooling.
//!
//! One imputation: fit the count model `x ~ 1 + y` on the complete rows,
//! draw a parameter vector from the normal approximation to its sampling
//! distribution, and draw every missing `x` from the count distribution
//! that vector predicts.

use alloc::vec::Vec;

use libm::sqrt;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::distributions::DistributionParams;
use crate::missingness::{Dataset, ResponseKind};
use crate::regression::{
    confint, fit_analysis_model, fit_count_model_with, AnalysisKind, CountFamily, DesignMatrix, FitOptions,
    FittedModel, Interval, ZeroModel,
};
use crate::rng::substream;
use crate::special::student_t_quantile;
use crate::{Error, Result};

/// Draws above this quantile of the predicted distribution are redrawn.
const CAP_LEVEL: f64 = 1.0 - 1e-10;
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImputationConfig {
    pub family: CountFamily,
    pub m: usize,
    pub seed: u64,
    pub level: f64,
    pub zero_model: ZeroModel,
}

impl ImputationConfig {
    pub fn new(family: CountFamily, seed: u64) -> Self {
        ImputationConfig { family, m: 5, seed, level: 0.95, zero_model: ZeroModel::Regressed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(alloc::format!("level must be in (0, 1), got {}", self.level)));
        }
        Ok(())
    }
}

/// A fully observed dataset; `imputed[i]` marks cells filled in by imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedDataset {
    kind: ResponseKind,
    y: Vec<f64>,
    x: Vec<u64>,
    imputed: Vec<bool>,
}

impl CompletedDataset {
    pub fn kind(&self) -> ResponseKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[u64] {
        &self.x
    }

    pub fn imputed(&self) -> &[bool] {
        &self.imputed
    }

    /// Intercept plus the covariate, as used by the analysis model.
    pub fn design(&self) -> Result<DesignMatrix> {
        let x: Vec<f64> = self.x.iter().map(|&v| v as f64).collect();
        DesignMatrix::intercept_and(&x)
    }
}

/// Fits the imputation model `x ~ 1 + y` on the complete rows.
pub fn fit_imputation_model(data: &Dataset, family: CountFamily, zero_model: ZeroModel) -> Result<FittedModel> {
    let rows: Vec<usize> = data.observed_rows().collect();
    let y: Vec<f64> = rows.iter().map(|&i| data.y()[i]).collect();
    let x: Vec<u64> = rows.iter().map(|&i| data.observed_x(i).unwrap_or(0)).collect();
    let design = DesignMatrix::intercept_and(&y)?;
    let options = FitOptions { zero_model, ..FitOptions::default() };
    fit_count_model_with(family, &design, &x, &options)
}

/// Fits the imputation model and fills the missing cells once.
pub fn impute_once<R: Rng + ?Sized>(data: &Dataset, family: CountFamily, rng: &mut R) -> Result<CompletedDataset> {
    if data.missing_count() == 0 {
        return Ok(observed_only(data));
    }
    let model = fit_imputation_model(data, family, ZeroModel::Regressed)?;
    impute_with(data, &model, rng)
}

/// Fills the missing cells from an already fitted imputation model.
pub fn impute_with<R: Rng + ?Sized>(data: &Dataset, model: &FittedModel, rng: &mut R) -> Result<CompletedDataset> {
    let mut out = observed_only(data);
    let missing: Vec<usize> = data.missing_rows().collect();
    if missing.is_empty() {
        return Ok(out);
    }
    let factor = model.covariance().psd_factor();
    let k = model.params().len();
    let mut last_error = Error::Generation("no parameter draw attempted".into());
    for _ in 0..MAX_REDRAWS {
        let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let shift = factor.mul_vec(&z);
        let theta: Vec<f64> = model.params().iter().zip(&shift).map(|(a, b)| a + b).collect();
        match draw_missing(data, model, &theta, &missing, rng) {
            Ok(values) => {
                for (&i, v) in missing.iter().zip(values) {
                    out.x[i] = v;
                    out.imputed[i] = true;
                }
                return Ok(out);
            }
            Err(e) => last_error = e,
        }
    }
    Err(last_error)
}

fn draw_missing<R: Rng + ?Sized>(
    data: &Dataset,
    model: &FittedModel,
    theta: &[f64],
    missing: &[usize],
    rng: &mut R,
) -> Result<Vec<u64>> {
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite parameter draw"));
    }
    let params: Vec<DistributionParams> =
        missing.iter().map(|&i| model.predict_with(theta, &[1.0, data.y()[i]])).collect::<Result<_>>()?;
    params.iter().map(|p| draw_capped(p, rng)).collect()
}

/// Inverse-cdf draw, redrawing values above the `CAP_LEVEL` quantile and
/// falling back to that quantile after `MAX_REDRAWS` attempts.
pub fn draw_capped<R: Rng + ?Sized>(params: &DistributionParams, rng: &mut R) -> Result<u64> {
    let mut cap = None;
    for _ in 0..MAX_REDRAWS {
        let u: f64 = rng.random();
        let x = params.quantile(u)?;
        if u <= CAP_LEVEL {
            return Ok(x);
        }
        let limit = match cap {
            Some(c) => c,
            None => *cap.insert(params.quantile(CAP_LEVEL)?),
        };
        if x <= limit {
            return Ok(x);
        }
    }
    match cap {
        Some(c) => Ok(c),
        None => params.quantile(CAP_LEVEL),
    }
}

fn observed_only(data: &Dataset) -> CompletedDataset {
    CompletedDataset {
        kind: data.kind(),
        y: data.y().to_vec(),
        x: (0..data.len()).map(|i| data.observed_x(i).unwrap_or(0)).collect(),
        imputed: alloc::vec![false; data.len()],
    }
}

/// `m` completed datasets; imputation `j` uses sub-stream `[j]` of the seed.
/// Fails as a whole if any single imputation fails.
pub fn multiple_impute(data: &Dataset, config: &ImputationConfig) -> Result<Vec<CompletedDataset>> {
    config.validate()?;
    if data.missing_count() == 0 {
        return Ok((0..config.m).map(|_| observed_only(data)).collect());
    }
    let model = fit_imputation_model(data, config.family, config.zero_model)?;
    (0..config.m)
        .map(|j| impute_with(data, &model, &mut substream(config.seed, &[j as u64])))
        .collect()
}

/// Rubin-pooled inference for one coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledResult {
    pub q_bar: f64,
    pub w: f64,
    pub b: f64,
    pub t: f64,
    /// Infinite when the between-imputation variance vanishes.
    pub df: f64,
    pub ci: Interval,
}

/// Pools point estimates and their squared standard errors.
pub fn pool_estimates(estimates: &[f64], variances: &[f64], level: f64) -> Result<PooledResult> {
    let m = estimates.len();
    if m < 2 {
        return Err(Error::InsufficientImputations(m));
    }
    if variances.len() != m {
        return Err(Error::Dimension { expected: m, found: variances.len() });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(alloc::format!("confidence level must be in (0, 1), got {level}")));
    }
    let mf = m as f64;
    // Centering on the first estimate keeps q_bar exact when all agree.
    let anchor = estimates[0];
    let q_bar = anchor + estimates.iter().map(|q| q - anchor).sum::<f64>() / mf;
    let w = variances.iter().sum::<f64>() / mf;
    let b = estimates.iter().map(|q| (q - q_bar) * (q - q_bar)).sum::<f64>() / (mf - 1.0);
    let inflated = (1.0 + 1.0 / mf) * b;
    let t = w + inflated;
    let df = if inflated > 0.0 {
        let r = 1.0 + w / inflated;
        (mf - 1.0) * r * r
    } else {
        f64::INFINITY
    };
    let half = student_t_quantile(0.5 * (1.0 + level), df) * sqrt(t);
    Ok(PooledResult { q_bar, w, b, t, df, ci: Interval { lower: q_bar - half, upper: q_bar + half } })
}

/// Pools every mean coefficient of `fits`.
pub fn pool(fits: &[FittedModel], level: f64) -> Result<Vec<PooledResult>> {
    if fits.len() < 2 {
        return Err(Error::InsufficientImputations(fits.len()));
    }
    let p = fits[0].beta().len();
    if let Some(bad) = fits.iter().find(|f| f.beta().len() != p) {
        return Err(Error::Dimension { expected: p, found: bad.beta().len() });
    }
    let ses: Vec<Vec<f64>> = fits.iter().map(FittedModel::std_errors).collect();
    (0..p)
        .map(|j| {
            let est: Vec<f64> = fits.iter().map(|f| f.beta()[j]).collect();
            let var: Vec<f64> = ses.iter().map(|s| s[j] * s[j]).collect();
            pool_estimates(&est, &var, level)
        })
        .collect()
}

/// Analysis model fitted on the complete rows only.
pub fn listwise_fit(data: &Dataset, kind: AnalysisKind) -> Result<FittedModel> {
    let rows: Vec<usize> = data.observed_rows().collect();
    let y: Vec<f64> = rows.iter().map(|&i| data.y()[i]).collect();
    let x: Vec<f64> = rows.iter().map(|&i| data.observed_x(i).unwrap_or(0) as f64).collect();
    fit_analysis_model(kind, &DesignMatrix::intercept_and(&x)?, &y)
}

/// Listwise-deletion estimate and Wald interval for every coefficient, in
/// the same shape as a pooled result (`b = 0`, `df = ∞`).
pub fn listwise_result(data: &Dataset, kind: AnalysisKind, level: f64) -> Result<Vec<PooledResult>> {
    let fit = listwise_fit(data, kind)?;
    let cis = confint(&fit, level)?;
    Ok(fit
        .beta()
        .iter()
        .zip(fit.std_errors())
        .zip(cis)
        .map(|((&q, se), ci)| PooledResult { q_bar: q, w: se * se, b: 0.0, t: se * se, df: f64::INFINITY, ci })
        .collect())
}

/// Multiple imputation, one analysis fit per completed dataset, pooling.
pub fn analyze_with_imputation(
    data: &Dataset,
    kind: AnalysisKind,
    config: &ImputationConfig,
) -> Result<Vec<PooledResult>> {
    let completed = multiple_impute(data, config)?;
    let fits: Vec<FittedModel> = completed
        .iter()
        .map(|c| fit_analysis_model(kind, &c.design()?, c.y()))
        .collect::<Result<_>>()?;
    pool(&fits, config.level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::PoissonParams;
    use crate::linalg::Matrix;
    use crate::missingness::ampute_mcar;

    fn sample_data(n: usize, seed: u64) -> Dataset {
        let mut rng = substream(seed, &[]);
        let x = DistributionParams::Poisson(PoissonParams::new(2.0).unwrap()).sample(n, &mut rng).unwrap();
        let y = x.iter().map(|&v| 0.5 * v as f64 + rng.sample::<f64, _>(StandardNormal)).collect();
        Dataset::complete(ResponseKind::Continuous, y, x).unwrap()
    }

    #[test]
    fn hand_pooling_example() {
        let r = pool_estimates(&[1.0, 2.0, 3.0], &[0.0; 3], 0.95).unwrap();
        assert_eq!(r.q_bar, 2.0);
        assert_eq!(r.w, 0.0);
        assert_eq!(r.b, 1.0);
        assert_eq!(r.t, 4.0 / 3.0);
        assert_eq!(r.df, 2.0);
    }

    #[test]
    fn degenerate_between_variance_uses_normal_quantile() {
        let r = pool_estimates(&[0.7; 5], &[0.04; 5], 0.95).unwrap();
        assert_eq!(r.q_bar, 0.7);
        assert_eq!(r.t, r.w);
        assert!(r.df.is_infinite());
        let half = 1.959963984540054 * 0.2;
        assert!((r.ci.upper - 0.7 - half).abs() < 1e-12);
    }

    #[test]
    fn pooling_needs_two() {
        assert_eq!(pool_estimates(&[1.0], &[1.0], 0.95).unwrap_err(), Error::InsufficientImputations(1));
    }

    #[test]
    fn observed_cells_unchanged_and_deterministic() {
        let data = ampute_mcar(&sample_data(400, 1), 0.2, &mut substream(2, &[])).unwrap();
        let config = ImputationConfig::new(CountFamily::Poisson, 9);
        let a = multiple_impute(&data, &config).unwrap();
        let b = multiple_impute(&data, &config).unwrap();
        assert_eq!(a, b);
        for c in &a {
            for i in 0..data.len() {
                match data.observed_x(i) {
                    Some(v) => assert_eq!(c.x()[i], v),
                    None => assert!(c.imputed()[i]),
                }
            }
        }
        assert!(a.windows(2).any(|w| w[0].x() != w[1].x()));
    }

    #[test]
    fn single_imputation_matches_first_substream() {
        let data = ampute_mcar(&sample_data(300, 3), 0.1, &mut substream(4, &[])).unwrap();
        let config = ImputationConfig { m: 1, ..ImputationConfig::new(CountFamily::NegBin, 5) };
        let many = multiple_impute(&data, &config).unwrap();
        let once = impute_once(&data, CountFamily::NegBin, &mut substream(5, &[0])).unwrap();
        assert_eq!(many, alloc::vec![once]);
    }

    #[test]
    fn degenerate_covariance_draws_are_poisson() {
        let n = 100_000;
        let y = alloc::vec![0.0; n];
        let data = Dataset::with_missing(ResponseKind::Continuous, y, alloc::vec![None; n]).unwrap();
        let model = FittedModel::count_from_parts(
            CountFamily::Poisson,
            ZeroModel::Regressed,
            2,
            alloc::vec![libm::log(2.0), 0.0],
            Matrix::zeros(2, 2),
        )
        .unwrap();
        let out = impute_with(&data, &model, &mut substream(11, &[])).unwrap();
        let mean = out.x().iter().sum::<u64>() as f64 / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * sqrt(2.0 / n as f64), "mean {mean}");
    }

    #[test]
    fn complete_data_reproduces_full_fit() {
        let data = sample_data(200, 6);
        let pooled = analyze_with_imputation(&data, AnalysisKind::Linear, &ImputationConfig::new(CountFamily::ComPoisson, 1))
            .unwrap();
        let full = listwise_result(&data, AnalysisKind::Linear, 0.95).unwrap();
        assert_eq!(pooled[1].q_bar, full[1].q_bar);
        assert_eq!(pooled[1].b, 0.0);
        assert!((pooled[1].ci.length() - full[1].ci.length()).abs() < 1e-12);
    }

    #[test]
    fn listwise_uses_complete_rows() {
        let data = ampute_mcar(&sample_data(2000, 8), 0.3, &mut substream(9, &[])).unwrap();
        assert_eq!(data.observed_rows().count(), 1400);
        let fit = listwise_fit(&data, AnalysisKind::Linear).unwrap();
        let subset: Vec<usize> = data.observed_rows().collect();
        let direct = listwise_fit(&data.subset(&subset), AnalysisKind::Linear).unwrap();
        assert_eq!(fit.beta(), direct.beta());
    }
}
