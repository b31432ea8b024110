use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use countimpute::{execute, CliError, Command, ConfigMap, RunConfig};

#[derive(Parser)]
#[command(name = "countimpute", version, about = "Imputation of missing count covariates")]
struct Cli {
    /// Configuration file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Monte-Carlo comparison of imputation methods.
    Simulate(Flags),
    /// Write m completed copies of a dataset.
    Impute(Flags),
    /// Full-data fit and per-level interval lengths on a dataset.
    Analyze(Flags),
    /// Chi-square comparison of two covariate columns.
    Gof(Flags),
}

macro_rules! flags {
    ($($field:ident => $key:literal),* $(,)?) => {
        #[derive(Args, Default)]
        struct Flags {
            $(
                #[arg(long = $key, value_name = "VALUE")]
                $field: Option<String>,
            )*
        }

        impl Flags {
            fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $(if let Some(v) = &self.$field { out.push(($key, v.as_str())); })*
                out
            }
        }
    };
}

flags! {
    response_kind => "response_kind",
    dispersion => "dispersion",
    mechanism => "mechanism",
    missing_fraction => "missing_fraction",
    missing_levels => "missing_levels",
    beta => "beta",
    population_size => "population_size",
    sample_size => "sample_size",
    replicates => "replicates",
    methods => "methods",
    m => "m",
    level => "level",
    seed => "seed",
    dataset => "dataset",
    reference => "reference",
    output => "output",
    zero_model => "zero_model",
    hermite_order => "hermite_order",
    strict_paper => "strict_paper",
    repeats => "repeats",
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, flags) = match &cli.command {
        Sub::Simulate(f) => (Command::Simulate, f),
        Sub::Impute(f) => (Command::Impute, f),
        Sub::Analyze(f) => (Command::Analyze, f),
        Sub::Gof(f) => (Command::Gof, f),
    };
    let mut map = match &cli.config {
        Some(path) => ConfigMap::parse(&fs::read_to_string(path).map_err(|e| CliError::io(path, e))?)?,
        None => ConfigMap::default(),
    };
    for (key, value) in flags.pairs() {
        map.set_flag(key, value)?;
    }
    let config = RunConfig::from_map(command, &map)?;
    for warning in &config.warnings {
        eprintln!("warning: {warning}");
    }
    let text = execute(&config)?;
    match &config.output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
