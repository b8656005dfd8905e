//! Wall-clock timing of replications.

use std::time::Instant;

use thiserror::Error;

use crate::params::SimParams;
use crate::rng::derive_seed;

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("replication count must be at least 1")]
    NoReplications,
    #[error("replication {index} failed: {message}")]
    Replication { index: usize, message: String },
    #[error("no durations to summarize")]
    Empty,
    #[error("duration {0} is not positive")]
    NonPositive(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingSummary {
    pub n: usize,
    /// Mean duration in seconds.
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); `None` for n = 1.
    pub sample_std: Option<f64>,
    /// `100 * s / mean`.
    pub s_rel: Option<f64>,
    pub ratio_to_reference: Option<f64>,
}

/// Runs `n` replications, seeding replication `i` with
/// `derive_seed(base_seed, i)`, and returns each duration in seconds.
/// The runner's own time is all that is measured.
pub fn time_replications<F, E>(
    mut runner: F,
    params: &SimParams,
    n: usize,
    base_seed: u64,
) -> Result<Vec<f64>, BenchError>
where
    F: FnMut(&SimParams, u64) -> Result<(), E>,
    E: std::fmt::Display,
{
    if n == 0 {
        return Err(BenchError::NoReplications);
    }
    let mut times = Vec::with_capacity(n);
    for index in 0..n {
        let seed = derive_seed(base_seed, index as u64);
        let start = Instant::now();
        runner(params, seed).map_err(|e| BenchError::Replication {
            index,
            message: e.to_string(),
        })?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(times)
}

pub fn summarize_times(
    times: &[f64],
    reference_mean: Option<f64>,
) -> Result<TimingSummary, BenchError> {
    if times.is_empty() {
        return Err(BenchError::Empty);
    }
    if let Some(&bad) = times.iter().find(|&&t| !(t > 0.0)) {
        return Err(BenchError::NonPositive(bad));
    }
    if let Some(r) = reference_mean.filter(|&r| !(r > 0.0)) {
        return Err(BenchError::NonPositive(r));
    }
    let n = times.len();
    let mean = times.iter().sum::<f64>() / n as f64;
    let sample_std = (n >= 2).then(|| {
        let ss: f64 = times.iter().map(|t| (t - mean) * (t - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Ok(TimingSummary {
        n,
        mean,
        sample_std,
        s_rel: sample_std.map(|s| 100.0 * s / mean),
        ratio_to_reference: reference_mean.map(|r| mean / r),
    })
}
