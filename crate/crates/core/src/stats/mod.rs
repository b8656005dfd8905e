//! Model-independent comparison of two groups of simulation runs.
//!
//! Each run is turned into one feature vector (every output series scaled
//! within the run, then concatenated), the pooled runs are projected onto
//! the leading principal components, and the two groups are compared with
//! an Energy permutation test. P-values from one invocation form a single
//! Benjamini-Hochberg family.

mod bh;
mod compare;
mod energy;
mod features;
mod pca;
mod sum;

pub use bh::bh_adjust;
pub use compare::{
    compare_models, paramset_test, success_rate, CompareConfig, ComparisonResult, ParamsetTest,
    ParamsetVerdict,
};
pub use energy::{energy_statistic, energy_test, EnergyTest};
pub use features::{build_feature_matrix, standardize_series, FeatureMatrix, Group};
pub use pca::{pca_project, PcScores, Pca};
pub use sum::exact_sum;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error(
        "run length mismatch: expected {expected} rows, found {found} (run {run} of group {group})"
    )]
    LengthMismatch {
        group: Group,
        run: usize,
        expected: usize,
        found: usize,
    },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("need at least 2 rows for PCA, got {0}")]
    TooFewRows(usize),
    #[error("minimum explained variance must be in (0, 1], got {0}")]
    BadVarianceTarget(f64),
    #[error("p-value {0} outside (0, 1]")]
    BadPValue(f64),
    #[error("number of permutations must be at least 1")]
    NoPermutations,
    #[error("parameter-set count differs between groups: {0} vs {1}")]
    ParamsetCount(usize, usize),
}
