use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::sum::ExactSum;
use super::StatsError;
use crate::rng::{derive_seed, rng_from_seed};

/// Two-sample Energy test over a pooled distance matrix.
///
/// Rows of `x` and `y` are points. The statistic is
///
/// ```text
/// nm/(n+m) * ( 2/(nm) sum d(x_i, y_j) - 1/n^2 sum d(x_i, x_k) - 1/m^2 sum d(y_j, y_l) )
/// ```
///
/// with Euclidean `d`. Distance sums are rounded once, so the statistic is
/// bit-for-bit symmetric in the two samples.
#[derive(Debug, Clone)]
pub struct EnergyTest {
    n: usize,
    m: usize,
    /// Pooled pairwise distances, row-major, x points first.
    dist: Vec<f64>,
}

#[derive(Default)]
struct Sums {
    cross: ExactSum,
    within_x: ExactSum,
    within_y: ExactSum,
}

impl EnergyTest {
    pub fn new(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self, StatsError> {
        if x.nrows() == 0 || y.nrows() == 0 {
            return Err(StatsError::Empty("point set"));
        }
        if x.ncols() != y.ncols() {
            return Err(StatsError::DimensionMismatch(x.ncols(), y.ncols()));
        }
        let (n, m) = (x.nrows(), y.nrows());
        let total = n + m;
        let points: Vec<Vec<f64>> = x
            .row_iter()
            .chain(y.row_iter())
            .map(|r| r.iter().copied().collect())
            .collect();
        let mut dist = vec![0.0; total * total];
        for i in 0..total {
            for j in (i + 1)..total {
                let d = euclidean(&points[i], &points[j]);
                dist[i * total + j] = d;
                dist[j * total + i] = d;
            }
        }
        Ok(EnergyTest { n, m, dist })
    }

    fn total(&self) -> usize {
        self.n + self.m
    }

    /// Statistic for the split where `in_x[i]` marks pooled point `i` as
    /// belonging to the first sample.
    fn statistic_with(&self, in_x: &[bool], sums: &mut Sums) -> f64 {
        let total = self.total();
        sums.cross.clear();
        sums.within_x.clear();
        sums.within_y.clear();
        for i in 0..total {
            let row = &self.dist[i * total..(i + 1) * total];
            for j in (i + 1)..total {
                match (in_x[i], in_x[j]) {
                    (true, true) => sums.within_x.add(row[j]),
                    (false, false) => sums.within_y.add(row[j]),
                    _ => sums.cross.add(row[j]),
                }
            }
        }
        let n = in_x.iter().filter(|&&b| b).count() as f64;
        let m = total as f64 - n;
        let cross = sums.cross.value();
        // Ordered pairs: each unordered pair appears twice.
        let wx = 2.0 * sums.within_x.value();
        let wy = 2.0 * sums.within_y.value();
        let within = wx / (n * n) + wy / (m * m);
        let e = 2.0 * cross / (n * m) - within;
        e * (n * m) / (n + m)
    }

    pub fn observed(&self) -> f64 {
        let in_x: Vec<bool> = (0..self.total()).map(|i| i < self.n).collect();
        self.statistic_with(&in_x, &mut Sums::default())
    }

    /// Add-one permutation p-value. Permutation `r` relabels the pooled
    /// points with a shuffle drawn from `derive_seed(seed, r)`, so the
    /// result does not depend on how permutations are scheduled.
    pub fn p_value(&self, n_permutations: usize, seed: u64) -> Result<f64, StatsError> {
        if n_permutations == 0 {
            return Err(StatsError::NoPermutations);
        }
        let observed = self.observed();
        let total = self.total();
        let exceed: usize = (0..n_permutations)
            .into_par_iter()
            .map_init(
                || {
                    (
                        Sums::default(),
                        (0..total).collect::<Vec<usize>>(),
                        vec![false; total],
                    )
                },
                |(sums, idx, in_x), r| {
                    idx.sort_unstable();
                    idx.shuffle(&mut rng_from_seed(derive_seed(seed, r as u64)));
                    in_x.fill(false);
                    for &i in &idx[..self.n] {
                        in_x[i] = true;
                    }
                    usize::from(self.statistic_with(in_x, sums) >= observed)
                },
            )
            .sum();
        Ok((1 + exceed) as f64 / (n_permutations + 1) as f64)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

pub fn energy_statistic(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64, StatsError> {
    Ok(EnergyTest::new(x, y)?.observed())
}

pub fn energy_test(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    n_permutations: usize,
    seed: u64,
) -> Result<f64, StatsError> {
    EnergyTest::new(x, y)?.p_value(n_permutations, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn singletons() {
        assert_eq!(energy_statistic(&col(&[0.0]), &col(&[1.0])).unwrap(), 1.0);
        assert_eq!(energy_statistic(&col(&[0.0]), &col(&[0.0])).unwrap(), 0.0);
    }

    #[test]
    fn doubled_points() {
        assert_eq!(
            energy_statistic(&col(&[0.0, 0.0]), &col(&[1.0, 1.0])).unwrap(),
            2.0
        );
    }

    #[test]
    fn input_checks() {
        let empty = DMatrix::<f64>::zeros(0, 1);
        assert_eq!(
            energy_statistic(&empty, &col(&[1.0])).unwrap_err(),
            StatsError::Empty("point set")
        );
        let wide = DMatrix::<f64>::zeros(2, 3);
        assert_eq!(
            energy_statistic(&wide, &col(&[1.0])).unwrap_err(),
            StatsError::DimensionMismatch(3, 1)
        );
        assert_eq!(
            energy_test(&col(&[0.0]), &col(&[1.0]), 0, 1).unwrap_err(),
            StatsError::NoPermutations
        );
    }

    #[test]
    fn separated_samples_reach_minimum_p() {
        let x = col(&[0.0; 50]);
        let y = col(&[100.0; 50]);
        let p = energy_test(&x, &y, 999, 5).unwrap();
        assert_eq!(p, 1.0 / 1000.0);
    }

    #[test]
    fn p_value_bounds_and_determinism() {
        let x = DMatrix::from_fn(7, 2, |r, c| ((r * 3 + c) % 5) as f64);
        let y = DMatrix::from_fn(9, 2, |r, c| ((r * 2 + c) % 4) as f64);
        let a = energy_test(&x, &y, 200, 11).unwrap();
        let b = energy_test(&x, &y, 200, 11).unwrap();
        assert_eq!(a, b);
        assert!((1.0 / 201.0..=1.0).contains(&a));
    }

    #[test]
    fn identical_samples_have_p_one() {
        let x = DMatrix::from_fn(5, 3, |r, c| (r + c) as f64);
        assert_eq!(energy_statistic(&x, &x).unwrap(), 0.0);
        // every relabeling is at least as extreme as a zero statistic
        assert_eq!(energy_test(&x, &x, 50, 3).unwrap(), 1.0);
    }
}
