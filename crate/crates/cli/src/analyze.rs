//! The lung-cancer style analysis: a full-data linear fit, then MCAR
//! amputation at each requested level and, per method, the slope interval
//! length and a goodness-of-fit p-value of the completed covariate against
//! the full-data covariate.

use countimpute_core::imputation::{listwise_result, multiple_impute, pool, ImputationConfig, PooledResult};
use countimpute_core::missingness::{ampute_mcar, Dataset};
use countimpute_core::regression::{confint, fit_analysis_model, DesignMatrix, FittedModel};
use countimpute_core::rng::{derive_seed, substream};
use countimpute_core::simulation::Method;
use countimpute_core::Result as CoreResult;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, DataError};
use crate::gof::chi_square_gof;
use crate::output::AnalysisRow;

/// Slope of the complete-data analysis model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullFit {
    pub beta: f64,
    pub std_error: f64,
    pub ci_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub full: FullFit,
    pub rows: Vec<AnalysisRow>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    ail: Option<f64>,
    gof_p: Option<f64>,
}

pub fn full_data_fit(data: &Dataset, config: &RunConfig) -> CoreResult<(FittedModel, FullFit)> {
    let x: Vec<f64> = (0..data.len()).map(|i| data.observed_x(i).unwrap_or(0) as f64).collect();
    let fit = fit_analysis_model(data.kind().analysis_kind(), &DesignMatrix::intercept_and(&x)?, data.y())?;
    let ci = confint(&fit, config.scenario.level)?[1];
    let full = FullFit { beta: fit.beta()[1], std_error: fit.std_errors()[1], ci_length: ci.length() };
    Ok((fit, full))
}

pub fn analyze_dataset(data: &Dataset, config: &RunConfig) -> Result<AnalysisReport, CliError> {
    if !data.is_complete() {
        return Err(DataError::Core(countimpute_core::Error::Incomplete).into());
    }
    let (_, full) = full_data_fit(data, config)?;
    let reference: Vec<u64> = (0..data.len()).map(|i| data.observed_x(i).unwrap_or(0)).collect();

    let repeats: Vec<Vec<Vec<Cell>>> = (0..config.repeats)
        .into_par_iter()
        .map(|rep| {
            config
                .missing_levels
                .iter()
                .map(|&level| run_level(data, &reference, config, level, rep))
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for (li, &level) in config.missing_levels.iter().enumerate() {
        for (mi, &method) in config.scenario.methods.iter().enumerate() {
            let cells: Vec<Cell> = repeats.iter().map(|r| r[li][mi]).collect();
            rows.push(AnalysisRow {
                missing_pct: percent(level),
                method: method.tag().to_string(),
                ail: mean(cells.iter().filter_map(|c| c.ail)),
                gof_p: mean(cells.iter().filter_map(|c| c.gof_p)),
            });
        }
    }
    Ok(AnalysisReport { full, rows })
}

fn run_level(data: &Dataset, reference: &[u64], config: &RunConfig, level: f64, rep: usize) -> Result<Vec<Cell>, CliError> {
    let seed = config.scenario.seed;
    let path = [rep as u64, level.to_bits()];
    let amputed = if level == 0.0 {
        data.clone()
    } else {
        ampute_mcar(data, level, &mut substream(seed, &[10, path[0], path[1]]))?
    };
    let kind = data.kind().analysis_kind();
    let s = &config.scenario;
    Ok(s.methods
        .iter()
        .map(|&method| match method.family(s.hermite_order) {
            None => Cell { ail: listwise_result(&amputed, kind, s.level).ok().map(|r| r[1].ci.length()), gof_p: None },
            Some(family) => {
                let imputation = ImputationConfig {
                    family,
                    m: s.m,
                    seed: derive_seed(seed, &[11, path[0], path[1], method as u64]),
                    level: s.level,
                    zero_model: s.zero_model,
                };
                let Ok(completed) = multiple_impute(&amputed, &imputation) else {
                    return Cell::default();
                };
                let fits: CoreResult<Vec<FittedModel>> = completed
                    .iter()
                    .map(|c| fit_analysis_model(kind, &c.design()?, c.y()))
                    .collect();
                let ail = fits
                    .ok()
                    .and_then(|f| if f.len() >= 2 { pool(&f, s.level).ok() } else { single(&f, s.level) })
                    .map(|r| r[1].ci.length());
                let gof_p = mean(completed.iter().filter_map(|c| chi_square_gof(c.x(), reference).ok().map(|g| g.p_value)));
                Cell { ail, gof_p }
            }
        })
        .collect())
}

/// With `m = 1` there is nothing to pool; the single fit's Wald interval is
/// reported.
fn single(fits: &[FittedModel], level: f64) -> Option<Vec<PooledResult>> {
    let fit = fits.first()?;
    let ci = confint(fit, level).ok()?;
    Some(
        fit.beta()
            .iter()
            .zip(fit.std_errors())
            .zip(ci)
            .map(|((&q, se), ci)| PooledResult {
                q_bar: q,
                w: se * se,
                b: 0.0,
                t: se * se,
                df: f64::INFINITY,
                ci,
            })
            .collect(),
    )
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// `fraction · 100`, rounded to absorb binary representation error.
pub fn percent(fraction: f64) -> f64 {
    (fraction * 100.0 * 1e9).round() / 1e9
}

/// Looks up a row of a report.
pub fn find(rows: &[AnalysisRow], missing_pct: f64, method: Method) -> Option<&AnalysisRow> {
    rows.iter().find(|r| r.missing_pct == missing_pct && r.method == method.tag())
}
