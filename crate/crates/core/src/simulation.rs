//! Monte-Carlo comparison of imputation methods: population generation,
//! repeated sampling and amputation, and bias / interval-length / coverage
//! metrics for each method.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, round};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::distributions::{CdfTable, DistributionParams, NegBinParams, PoissonParams, TABLE_LEVEL};
use crate::imputation::{analyze_with_imputation, listwise_result, ImputationConfig, PooledResult};
use crate::missingness::{ampute, Dataset, Mechanism, MissingSpec, ResponseKind};
use crate::regression::{CountFamily, ZeroModel};
use crate::rng::{derive_seed, substream};
use crate::special::logistic;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dispersion {
    Equi,
    Over,
    Under,
    ZeroInflated,
}

impl Dispersion {
    pub fn tag(self) -> &'static str {
        match self {
            Dispersion::Equi => "equi",
            Dispersion::Over => "over",
            Dispersion::Under => "under",
            Dispersion::ZeroInflated => "zero_inflated",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "equi" => Dispersion::Equi,
            "over" => Dispersion::Over,
            "under" => Dispersion::Under,
            "zero_inflated" | "zi" => Dispersion::ZeroInflated,
            _ => return None,
        })
    }
}

/// A method under comparison: listwise deletion or imputation with a count
/// family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Listwise,
    Poisson,
    NegBin,
    Hermite,
    ComPoisson,
    ZeroInflatedPoisson,
    ZeroInflatedNegBin,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Listwise,
        Method::Poisson,
        Method::NegBin,
        Method::Hermite,
        Method::ComPoisson,
        Method::ZeroInflatedPoisson,
        Method::ZeroInflatedNegBin,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Listwise => "lw",
            Method::Poisson => "pois",
            Method::NegBin => "nb",
            Method::Hermite => "herm",
            Method::ComPoisson => "cmp",
            Method::ZeroInflatedPoisson => "zpois",
            Method::ZeroInflatedNegBin => "znb",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Method::ALL.into_iter().find(|m| m.tag() == tag)
    }

    /// The imputation family, or `None` for listwise deletion.
    pub fn family(self, hermite_order: u32) -> Option<CountFamily> {
        Some(match self {
            Method::Listwise => return None,
            Method::Poisson => CountFamily::Poisson,
            Method::NegBin => CountFamily::NegBin,
            Method::Hermite => CountFamily::Hermite { order: hermite_order },
            Method::ComPoisson => CountFamily::ComPoisson,
            Method::ZeroInflatedPoisson => CountFamily::ZeroInflatedPoisson,
            Method::ZeroInflatedNegBin => CountFamily::ZeroInflatedNegBin,
        })
    }

    fn code(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub response_kind: ResponseKind,
    pub dispersion: Dispersion,
    pub beta: f64,
    pub mechanism: Mechanism,
    pub missing_fraction: f64,
    pub population_size: usize,
    pub sample_size: usize,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub m: usize,
    pub level: f64,
    pub seed: u64,
    pub zero_model: ZeroModel,
    pub hermite_order: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            response_kind: ResponseKind::Continuous,
            dispersion: Dispersion::Equi,
            beta: 0.5,
            mechanism: Mechanism::Mcar,
            missing_fraction: 0.1,
            population_size: 100_000,
            sample_size: 2000,
            replicates: 1000,
            methods: Method::ALL.to_vec(),
            m: 5,
            level: 0.95,
            seed: 1,
            zero_model: ZeroModel::Regressed,
            hermite_order: 2,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.missing_fraction > 0.0 && self.missing_fraction < 1.0) {
            return fail(alloc::format!("missing_fraction must be in (0, 1), got {}", self.missing_fraction));
        }
        if self.population_size == 0 || self.sample_size == 0 || self.replicates == 0 {
            return fail("population_size, sample_size and replicates must be positive".into());
        }
        if self.sample_size > self.population_size {
            return fail("sample_size cannot exceed population_size".into());
        }
        if !self.beta.is_finite() || self.beta == 0.0 {
            return fail("beta must be finite and non-zero (relative bias divides by it)".into());
        }
        if self.m == 0 {
            return fail("m must be at least 1".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return fail(alloc::format!("level must be in (0, 1), got {}", self.level));
        }
        if self.hermite_order < 2 {
            return fail("hermite_order must be at least 2".into());
        }
        if self.methods.is_empty() {
            return fail("at least one method is required".into());
        }
        if self.dispersion == Dispersion::Under {
            let excluded = [Method::Hermite, Method::ZeroInflatedPoisson, Method::ZeroInflatedNegBin];
            if let Some(m) = self.methods.iter().find(|m| excluded.contains(m)) {
                return fail(alloc::format!(
                    "method '{}' is not available in the under-dispersion scenario",
                    m.tag()
                ));
            }
        }
        Ok(())
    }

    /// Short label such as `continuous_equi_mcar`.
    pub fn scenario_label(&self) -> String {
        let kind = match self.response_kind {
            ResponseKind::Binary => "binary",
            ResponseKind::Continuous => "continuous",
            ResponseKind::Discrete => "discrete",
        };
        let mech = match self.mechanism {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
        };
        alloc::format!("{kind}_{}_{mech}", self.dispersion.tag())
    }
}

/// Finite sampling frame with its generating coefficient.
#[derive(Debug, Clone)]
pub struct Population {
    pub data: Dataset,
    pub beta: f64,
    pub intercept: f64,
}

/// Mean of the covariate distribution in every scenario.
pub const COVARIATE_MEAN: f64 = 2.0;
const OVER_DISPERSION: f64 = 2.0;
const UNDER_DISPERSION: f64 = 0.5;
const ZERO_FRACTION: f64 = 0.1;

pub fn generate_population<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Population> {
    config.validate()?;
    let n = config.population_size;
    let x = match config.dispersion {
        Dispersion::Equi | Dispersion::ZeroInflated => {
            DistributionParams::Poisson(PoissonParams::new(COVARIATE_MEAN)?).sample(n, rng)?
        }
        Dispersion::Over => {
            DistributionParams::NegBin(NegBinParams::new(COVARIATE_MEAN, OVER_DISPERSION)?).sample(n, rng)?
        }
        Dispersion::Under => generate_underdispersed(COVARIATE_MEAN, UNDER_DISPERSION, rng, n)?,
    };
    let mut x = x;
    if config.dispersion == Dispersion::ZeroInflated {
        let k = round(ZERO_FRACTION * n as f64) as usize;
        for i in sample(rng, n, k) {
            x[i] = 0;
        }
    }

    let beta = config.beta;
    let (y, intercept) = match config.response_kind {
        ResponseKind::Continuous => {
            (x.iter().map(|&v| beta * v as f64 + rng.sample::<f64, _>(StandardNormal)).collect(), 0.0)
        }
        ResponseKind::Binary => {
            let alpha = balanced_intercept(&x, beta);
            let y = x
                .iter()
                .map(|&v| if rng.random::<f64>() < logistic(alpha + beta * v as f64) { 1.0 } else { 0.0 })
                .collect();
            (y, alpha)
        }
        ResponseKind::Discrete => {
            let mut tables: Vec<Option<CdfTable>> = Vec::new();
            let mut y = Vec::with_capacity(n);
            for &v in &x {
                let idx = v as usize;
                if tables.len() <= idx {
                    tables.resize(idx + 1, None);
                }
                if tables[idx].is_none() {
                    let p = DistributionParams::Poisson(PoissonParams::new(exp(beta * v as f64))?);
                    tables[idx] = Some(CdfTable::new(&p, TABLE_LEVEL)?);
                }
                y.push(tables[idx].as_ref().map_or(0, |t| t.draw(rng)) as f64);
            }
            (y, 0.0)
        }
    };
    Ok(Population { data: Dataset::complete(config.response_kind, y, x)?, beta, intercept })
}

/// Intercept giving an average success probability of one half.
fn balanced_intercept(x: &[u64], beta: f64) -> f64 {
    let prevalence = |alpha: f64| x.iter().map(|&v| logistic(alpha + beta * v as f64)).sum::<f64>() / x.len() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if prevalence(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Sample dispersion index `s² / x̄` (with the `n − 1` variance).
pub fn dispersion_index(values: &[u64]) -> f64 {
    let n = values.len() as f64;
    let sum: f64 = values.iter().map(|&v| v as f64).sum();
    let sum_sq: f64 = values.iter().map(|&v| (v as f64) * (v as f64)).sum();
    index_from_sums(sum, sum_sq, n)
}

fn index_from_sums(sum: f64, sum_sq: f64, n: f64) -> f64 {
    let mean = sum / n;
    let var = (sum_sq - sum * mean) / (n - 1.0);
    var / mean
}

/// Poisson(`lambda`) draws with randomly chosen values replaced by
/// `round(lambda)` until the dispersion index is at most `target_d + 0.01`.
pub fn generate_underdispersed<R: Rng + ?Sized>(lambda: f64, target_d: f64, rng: &mut R, n: usize) -> Result<Vec<u64>> {
    if !(target_d > 0.0 && target_d < 1.0) {
        return Err(Error::domain(alloc::format!("target dispersion must be in (0, 1), got {target_d}")));
    }
    if n < 2 {
        return Err(Error::domain("need at least two values"));
    }
    let mut x = DistributionParams::Poisson(PoissonParams::new(lambda)?).sample(n, rng)?;
    let fill = round(lambda) as u64;
    if fill == 0 {
        return Err(Error::Generation(alloc::format!("round(lambda) = 0 for lambda = {lambda}")));
    }
    let threshold = target_d + 0.01;
    let nf = n as f64;
    let mut sum: f64 = x.iter().map(|&v| v as f64).sum();
    let mut sum_sq: f64 = x.iter().map(|&v| (v as f64) * (v as f64)).sum();
    let order = sample(rng, n, n);
    for i in order {
        if sum > 0.0 && index_from_sums(sum, sum_sq, nf) <= threshold {
            return Ok(x);
        }
        let old = x[i] as f64;
        let new = fill as f64;
        sum += new - old;
        sum_sq += new * new - old * old;
        x[i] = fill;
    }
    if index_from_sums(sum, sum_sq, nf) <= threshold {
        Ok(x)
    } else {
        Err(Error::Generation(alloc::format!("dispersion {target_d} not reached after {n} replacements")))
    }
}

/// Results of one replicate, aligned with `config.methods`; `None` marks a
/// method that failed on this sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub results: Vec<Option<PooledResult>>,
}

/// Index of the analysis-model slope among the coefficients.
const SLOPE: usize = 1;

/// Draws sample `r`, amputes it and runs every configured method.
pub fn run_replicate(config: &ScenarioConfig, population: &Population, r: usize) -> Result<ReplicateOutcome> {
    let mut rng = substream(config.seed, &[1, r as u64]);
    let rows: Vec<usize> = sample(&mut rng, population.data.len(), config.sample_size).into_vec();
    let drawn = population.data.subset(&rows);
    let spec = MissingSpec::new(config.mechanism, config.missing_fraction)?;
    let data = ampute(&drawn, &spec, &mut rng)?;
    let kind = config.response_kind.analysis_kind();

    let results = config
        .methods
        .iter()
        .map(|&method| {
            let outcome = match method.family(config.hermite_order) {
                None => listwise_result(&data, kind, config.level),
                Some(family) => {
                    let imputation = ImputationConfig {
                        family,
                        m: config.m,
                        seed: derive_seed(config.seed, &[2, r as u64, method.code()]),
                        level: config.level,
                        zero_model: config.zero_model,
                    };
                    analyze_with_imputation(&data, kind, &imputation)
                }
            };
            outcome.ok().and_then(|v| v.get(SLOPE).copied())
        })
        .collect();
    Ok(ReplicateOutcome { replicate: r, results })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub relative_bias: f64,
    pub ail: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodMetrics {
    pub method: Method,
    /// `None` when no replicate converged.
    pub metrics: Option<Metrics>,
    pub failures: usize,
    pub converged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub scenario: String,
    pub missing_fraction: f64,
    pub methods: Vec<MethodMetrics>,
}

impl MetricsSummary {
    pub fn get(&self, method: Method) -> Option<&MethodMetrics> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Relative bias of the mean estimate, mean interval length and coverage.
/// `None` for an empty set.
pub fn compute_metrics(estimates: &[f64], cis: &[crate::regression::Interval], true_beta: f64) -> Option<Metrics> {
    if estimates.is_empty() || estimates.len() != cis.len() {
        return None;
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    Some(Metrics {
        relative_bias: (mean - true_beta) / true_beta,
        ail: cis.iter().map(|c| c.length()).sum::<f64>() / n,
        coverage: cis.iter().filter(|c| c.contains(true_beta)).count() as f64 / n,
    })
}

/// Combines replicate outcomes (in replicate order) into per-method metrics.
pub fn aggregate(config: &ScenarioConfig, true_beta: f64, outcomes: &[ReplicateOutcome]) -> MetricsSummary {
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let ok: Vec<PooledResult> = outcomes.iter().filter_map(|o| o.results[k]).collect();
            let estimates: Vec<f64> = ok.iter().map(|r| r.q_bar).collect();
            let cis: Vec<_> = ok.iter().map(|r| r.ci).collect();
            MethodMetrics {
                method,
                metrics: compute_metrics(&estimates, &cis, true_beta),
                failures: outcomes.len() - ok.len(),
                converged: ok.len(),
            }
        })
        .collect();
    MetricsSummary { scenario: config.scenario_label(), missing_fraction: config.missing_fraction, methods }
}

/// The population for `config` (sub-stream `[0]` of the seed).
pub fn scenario_population(config: &ScenarioConfig) -> Result<Population> {
    generate_population(config, &mut substream(config.seed, &[0]))
}

/// Runs every replicate sequentially and aggregates.
pub fn run_scenario(config: &ScenarioConfig) -> Result<MetricsSummary> {
    let population = scenario_population(config)?;
    let outcomes: Vec<ReplicateOutcome> =
        (0..config.replicates).map(|r| run_replicate(config, &population, r)).collect::<Result<_>>()?;
    Ok(aggregate(config, population.beta, &outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::Interval;

    #[test]
    fn metrics_hand_example() {
        let cis = [Interval { lower: 0.0, upper: 1.0 }, Interval { lower: -1.0, upper: 2.0 }];
        let m = compute_metrics(&[0.4, 0.6], &cis, 0.5).unwrap();
        assert!(m.relative_bias.abs() < 1e-15);
        assert_eq!(m.ail, 2.0);
        assert_eq!(m.coverage, 1.0);
        assert!(compute_metrics(&[], &[], 0.5).is_none());
    }

    #[test]
    fn under_dispersion_excludes_methods() {
        let config = ScenarioConfig { dispersion: Dispersion::Under, ..ScenarioConfig::default() };
        assert!(matches!(config.validate(), Err(Error::Config(_))));
        let config = ScenarioConfig {
            dispersion: Dispersion::Under,
            methods: alloc::vec![Method::Listwise, Method::Poisson, Method::NegBin, Method::ComPoisson],
            ..ScenarioConfig::default()
        };
        assert!(config.validate().is_ok());
    }

    #[test]
    fn underdispersed_hits_target() {
        let x = generate_underdispersed(2.0, 0.5, &mut substream(1, &[]), 100_000).unwrap();
        let d = dispersion_index(&x);
        assert!((0.49..=0.51).contains(&d), "d = {d}");
        let mean = x.iter().sum::<u64>() as f64 / x.len() as f64;
        assert!((mean - 2.0).abs() < 0.04);
    }

    #[test]
    fn underdispersed_near_one_is_nearly_poisson() {
        let mut rng = substream(2, &[]);
        let x = generate_underdispersed(2.0, 0.99, &mut rng, 10_000).unwrap();
        let changed = {
            let mut fresh = substream(2, &[]);
            let orig = DistributionParams::Poisson(PoissonParams::new(2.0).unwrap()).sample(10_000, &mut fresh).unwrap();
            orig.iter().zip(&x).filter(|(a, b)| a != b).count()
        };
        assert!(changed < 500, "{changed} values changed");
    }

    #[test]
    fn tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::from_tag(m.tag()), Some(m));
        }
        for d in [Dispersion::Equi, Dispersion::Over, Dispersion::Under, Dispersion::ZeroInflated] {
            assert_eq!(Dispersion::from_tag(d.tag()), Some(d));
        }
    }

    #[test]
    fn small_scenario_is_deterministic() {
        let config = ScenarioConfig {
            population_size: 3000,
            sample_size: 300,
            replicates: 3,
            methods: alloc::vec![Method::Listwise, Method::Poisson, Method::NegBin],
            ..ScenarioConfig::default()
        };
        let a = run_scenario(&config).unwrap();
        let b = run_scenario(&config).unwrap();
        assert_eq!(a, b);
        for m in &a.methods {
            assert_eq!(m.failures + m.converged, 3);
        }
    }

    #[test]
    fn balanced_binary_prevalence() {
        let config = ScenarioConfig {
            response_kind: ResponseKind::Binary,
            population_size: 50_000,
            ..ScenarioConfig::default()
        };
        let pop = scenario_population(&config).unwrap();
        let prevalence = pop.data.y().iter().sum::<f64>() / 50_000.0;
        assert!((prevalence - 0.5).abs() < 0.01, "{prevalence}");
    }
}
