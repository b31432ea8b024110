use std::path::Path;

use countimpute_core::imputation::{multiple_impute, ImputationConfig};
use countimpute_core::simulation::{scenario_population, MetricsSummary, ReplicateOutcome};

use crate::analyze::{analyze_dataset, percent, AnalysisReport};
use crate::config::{Command, RunConfig};
use crate::dataset::load_dataset;
use crate::error::{CliError, ConfigError};
use crate::gof::{chi_square_gof, GofResult};
use crate::output::{render_results, Metadata, ResultRow, SimulationRow};
use crate::parallel::run_scenario_parallel;

pub fn metadata(config: &RunConfig) -> Metadata {
    Metadata { command: config.command.tag().into(), seed: config.scenario.seed, config_hash: config.config_hash() }
}

/// Runs the scenario at every configured missing level. The population is
/// shared across levels.
pub fn simulate_levels(config: &RunConfig) -> Result<Vec<(MetricsSummary, Vec<ReplicateOutcome>)>, CliError> {
    let population = scenario_population(&config.scenario_at(config.missing_levels[0]))?;
    config
        .missing_levels
        .iter()
        .map(|&f| Ok(run_scenario_parallel(&config.scenario_at(f), &population)?))
        .collect()
}

pub fn summary_rows(summary: &MetricsSummary) -> Vec<SimulationRow> {
    summary
        .methods
        .iter()
        .map(|m| SimulationRow {
            scenario: summary.scenario.clone(),
            method: m.method.tag().to_string(),
            missing_pct: percent(summary.missing_fraction),
            relative_bias: m.metrics.map(|x| x.relative_bias),
            ail: m.metrics.map(|x| x.ail),
            coverage: m.metrics.map(|x| x.coverage),
            failures: m.failures,
        })
        .collect()
}

pub fn simulate_command(config: &RunConfig) -> Result<Vec<SimulationRow>, CliError> {
    Ok(simulate_levels(config)?.iter().flat_map(|(s, _)| summary_rows(s)).collect())
}

fn required<'a>(path: &'a Option<std::path::PathBuf>, key: &'static str) -> Result<&'a Path, CliError> {
    path.as_deref().ok_or(CliError::Config(ConfigError::Missing(key)))
}

pub fn analyze_command(config: &RunConfig) -> Result<AnalysisReport, CliError> {
    let data = load_dataset(required(&config.dataset, "dataset")?, config.scenario.response_kind)?;
    analyze_dataset(&data, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputedRow {
    pub imputation: usize,
    pub y: f64,
    pub x: u64,
    pub imputed: bool,
}

impl ResultRow for ImputedRow {
    const HEADER: &'static [&'static str] = &["imputation", "y", "x", "imputed"];

    fn fields(&self) -> Vec<String> {
        vec![self.imputation.to_string(), self.y.to_string(), self.x.to_string(), u8::from(self.imputed).to_string()]
    }

    fn from_fields(f: &[&str]) -> Result<Self, String> {
        let bad = |s: &str| format!("cannot parse '{s}'");
        Ok(ImputedRow {
            imputation: f[0].parse().map_err(|_| bad(f[0]))?,
            y: f[1].parse().map_err(|_| bad(f[1]))?,
            x: f[2].parse().map_err(|_| bad(f[2]))?,
            imputed: f[3] == "1",
        })
    }
}

/// Completed copies of the dataset, stacked and labelled by imputation.
pub fn impute_command(config: &RunConfig) -> Result<Vec<ImputedRow>, CliError> {
    let data = load_dataset(required(&config.dataset, "dataset")?, config.scenario.response_kind)?;
    let s = &config.scenario;
    let family = s.methods[0]
        .family(s.hermite_order)
        .ok_or_else(|| ConfigError::Invalid("impute needs an imputation method, not 'lw'".into()))?;
    let imputation = ImputationConfig { family, m: s.m, seed: s.seed, level: s.level, zero_model: s.zero_model };
    let completed = multiple_impute(&data, &imputation)?;
    Ok(completed
        .iter()
        .enumerate()
        .flat_map(|(j, c)| {
            (0..c.len()).map(move |i| ImputedRow { imputation: j + 1, y: c.y()[i], x: c.x()[i], imputed: c.imputed()[i] })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofRow(pub GofResult);

impl ResultRow for GofRow {
    const HEADER: &'static [&'static str] = &["statistic", "df", "p_value", "bin_edges"];

    fn fields(&self) -> Vec<String> {
        let edges: Vec<String> = self.0.bin_edges.iter().map(u64::to_string).collect();
        vec![self.0.statistic.to_string(), self.0.df.to_string(), self.0.p_value.to_string(), edges.join(" ")]
    }

    fn from_fields(f: &[&str]) -> Result<Self, String> {
        let bad = |s: &str| format!("cannot parse '{s}'");
        Ok(GofRow(GofResult {
            statistic: f[0].parse().map_err(|_| bad(f[0]))?,
            df: f[1].parse().map_err(|_| bad(f[1]))?,
            p_value: f[2].parse().map_err(|_| bad(f[2]))?,
            bin_edges: f[3].split_whitespace().map(|e| e.parse().map_err(|_| bad(e))).collect::<Result<_, _>>()?,
        }))
    }
}

/// Chi-square comparison of the observed covariate cells of `dataset`
/// against those of `reference`.
pub fn gof_command(config: &RunConfig) -> Result<GofResult, CliError> {
    let kind = config.scenario.response_kind;
    let observed = load_dataset(required(&config.dataset, "dataset")?, kind)?;
    let reference = load_dataset(required(&config.reference, "reference")?, kind)?;
    let cells = |d: &countimpute_core::missingness::Dataset| -> Vec<u64> { d.observed_rows().filter_map(|i| d.observed_x(i)).collect() };
    Ok(chi_square_gof(&cells(&observed), &cells(&reference))?)
}

/// Runs the configured command and renders its CSV output.
pub fn execute(config: &RunConfig) -> Result<String, CliError> {
    let meta = metadata(config);
    match config.command {
        Command::Simulate => render_results(&simulate_command(config)?, &meta),
        Command::Analyze => {
            let report = analyze_command(config)?;
            let mut text = render_results(&report.rows, &meta)?;
            let full = format!(
                "# full_data beta = {} se = {} ci_length = {}\n",
                report.full.beta, report.full.std_error, report.full.ci_length
            );
            let at = text.find("missing_pct").unwrap_or(0);
            text.insert_str(at, &full);
            Ok(text)
        }
        Command::Impute => render_results(&impute_command(config)?, &meta),
        Command::Gof => render_results(&[GofRow(gof_command(config)?)], &meta),
    }
}

