use super::{
    bh_adjust, build_feature_matrix, pca_project, EnergyTest, Group, PcScores, StatsError,
};
use crate::rng::derive_seed;
use crate::sim::SimOutput;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareConfig {
    /// Threshold on BH-adjusted p-values.
    pub alpha: f64,
    /// Cumulative explained-variance target for choosing k.
    pub min_variance: f64,
    pub n_permutations: usize,
    pub seed: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            alpha: 0.01,
            min_variance: 0.80,
            n_permutations: 1000,
            seed: 0,
        }
    }
}

/// Uncorrected outcome of comparing the two groups for one parameter set.
#[derive(Debug, Clone)]
pub struct ParamsetTest {
    pub k: usize,
    pub statistic: f64,
    pub p_raw: f64,
    pub scores: PcScores,
}

/// Runs the standardize -> PCA -> Energy test chain for one parameter set.
pub fn paramset_test(
    group_a: &[SimOutput],
    group_b: &[SimOutput],
    min_variance: f64,
    n_permutations: usize,
    seed: u64,
) -> Result<ParamsetTest, StatsError> {
    let features = build_feature_matrix(group_a, group_b)?;
    let scores = pca_project(&features, min_variance)?;
    let test = EnergyTest::new(&scores.group_rows(Group::A), &scores.group_rows(Group::B))?;
    let p_raw = test.p_value(n_permutations, seed)?;
    Ok(ParamsetTest {
        k: scores.k(),
        statistic: test.observed(),
        p_raw,
        scores,
    })
}

#[derive(Debug, Clone)]
pub struct ParamsetVerdict {
    pub test: ParamsetTest,
    pub p_adjusted: f64,
    pub significant: bool,
}

#[derive(Debug, Clone)]
pub struct ComparisonResult {
    pub paramsets: Vec<ParamsetVerdict>,
    /// 6 when no parameter set differs significantly, 5 otherwise.
    pub overall_score: u8,
}

impl ComparisonResult {
    /// Adjusts the tests as one BH family and applies the threshold.
    pub fn from_tests(tests: Vec<ParamsetTest>, alpha: f64) -> Result<Self, StatsError> {
        let raw: Vec<f64> = tests.iter().map(|t| t.p_raw).collect();
        let adjusted = bh_adjust(&raw)?;
        let paramsets: Vec<ParamsetVerdict> = tests
            .into_iter()
            .zip(adjusted)
            .map(|(test, p_adjusted)| ParamsetVerdict {
                test,
                p_adjusted,
                significant: p_adjusted < alpha,
            })
            .collect();
        let overall_score = if paramsets.iter().any(|p| p.significant) {
            5
        } else {
            6
        };
        Ok(ComparisonResult {
            paramsets,
            overall_score,
        })
    }
}

/// Compares two implementations over several parameter sets.
/// `runs_a[i]` and `runs_b[i]` hold the replications for parameter set `i`.
pub fn compare_models(
    runs_a: &[Vec<SimOutput>],
    runs_b: &[Vec<SimOutput>],
    config: &CompareConfig,
) -> Result<ComparisonResult, StatsError> {
    if runs_a.len() != runs_b.len() {
        return Err(StatsError::ParamsetCount(runs_a.len(), runs_b.len()));
    }
    if runs_a.is_empty() {
        return Err(StatsError::Empty("parameter sets"));
    }
    let tests = runs_a
        .iter()
        .zip(runs_b)
        .enumerate()
        .map(|(i, (a, b))| {
            paramset_test(
                a,
                b,
                config.min_variance,
                config.n_permutations,
                derive_seed(config.seed, i as u64),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    ComparisonResult::from_tests(tests, config.alpha)
}

/// Percentage of scores equal to 6.
pub fn success_rate(scores: &[u8]) -> Result<f64, StatsError> {
    if scores.is_empty() {
        return Err(StatsError::Empty("scores"));
    }
    let ok = scores.iter().filter(|&&s| s == 6).count();
    Ok(100.0 * ok as f64 / scores.len() as f64)
}
