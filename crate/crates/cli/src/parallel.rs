//! Replicate-level parallelism. Every replicate owns its random streams, so
//! results are collected in replicate order and do not depend on the
//! schedule.

use countimpute_core::simulation::{aggregate, run_replicate, MetricsSummary, Population, ReplicateOutcome, ScenarioConfig};
use countimpute_core::Result;
use rayon::prelude::*;

pub fn run_replicates(config: &ScenarioConfig, population: &Population) -> Result<Vec<ReplicateOutcome>> {
    (0..config.replicates).into_par_iter().map(|r| run_replicate(config, population, r)).collect()
}

pub fn run_scenario_parallel(config: &ScenarioConfig, population: &Population) -> Result<(MetricsSummary, Vec<ReplicateOutcome>)> {
    let outcomes = run_replicates(config, population)?;
    Ok((aggregate(config, population.beta, &outcomes), outcomes))
}
