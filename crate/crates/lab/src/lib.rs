//! Experiment harness.

pub mod config;
pub mod experiments;
pub mod results;

use polymer::stats::{ks_one_sample, ks_two_sample, KsResult, StatsError};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("rejected by resource guard: {0}")]
    Budget(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Env(#[from] polymer::env::EnvError),
    #[error(transparent)]
    Transfer(#[from] polymer::transfer::TransferError),
    #[error(transparent)]
    Chaos(#[from] polymer::chaos::ChaosError),
    #[error(transparent)]
    UStat(#[from] polymer::ustat::UStatError),
    #[error(transparent)]
    Crossover(#[from] polymer::crossover::CrossoverError),
}

/// Sample against sample, or sample against a CDF.
pub enum KsInput<'a> {
    Two(&'a [f64], &'a [f64]),
    Cdf(&'a [f64], &'a dyn Fn(f64) -> f64),
}

/// KS statistic together with the 99% null quantile for the sample sizes at hand.
pub fn ks_distance(input: KsInput<'_>) -> Result<KsResult, LabError> {
    Ok(match input {
        KsInput::Two(a, b) => ks_two_sample(a, b)?,
        KsInput::Cdf(xs, cdf) => ks_one_sample(xs, cdf)?,
    })
}
