use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FeatureMatrix, Group, StatsError};

/// Principal-component decomposition of a data matrix (rows are samples).
///
/// Computed through the Gram matrix of the centered data, which is cheap
/// when there are far fewer samples than features: if `X = U S V^T`, then
/// `X X^T = U S^2 U^T`, the scores are `U S` and the axes are `X^T U S^-1`.
#[derive(Debug, Clone)]
pub struct Pca {
    /// Column means removed before decomposition.
    pub mean: DVector<f64>,
    /// Orthonormal principal axes as columns (features x components).
    pub axes: DMatrix<f64>,
    /// Scores of every sample on every retained component.
    pub scores: DMatrix<f64>,
    /// Fraction of the total variance carried by each retained component,
    /// in decreasing order.
    pub explained_ratios: Vec<f64>,
}

impl Pca {
    pub fn fit(data: &DMatrix<f64>) -> Result<Pca, StatsError> {
        let (n, p) = data.shape();
        if n < 2 {
            return Err(StatsError::TooFewRows(n));
        }
        let mean = DVector::from_iterator(p, data.column_iter().map(|c| c.sum() / n as f64));
        let mut centered = data.clone();
        for (mut col, m) in centered.column_iter_mut().zip(mean.iter()) {
            col.add_scalar_mut(-m);
        }
        let gram = &centered * centered.transpose();
        let eig = SymmetricEigen::new(gram);

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let largest = eig.eigenvalues[order[0]].max(0.0);
        // Eigenvalues at round-off level belong to the null space of the
        // centered data (its rank is at most n - 1).
        let cutoff = largest * n as f64 * f64::EPSILON * 16.0;
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&i| eig.eigenvalues[i] > cutoff)
            .collect();

        if kept.is_empty() {
            // Every sample is identical: one degenerate component, all
            // variance (none) attributed to it.
            let mut axes = DMatrix::zeros(p, 1);
            if p > 0 {
                axes[(0, 0)] = 1.0;
            }
            return Ok(Pca {
                mean,
                axes,
                scores: DMatrix::zeros(n, 1),
                explained_ratios: vec![1.0],
            });
        }

        let total: f64 = kept.iter().map(|&i| eig.eigenvalues[i]).sum();
        let k = kept.len();
        let mut scores = DMatrix::zeros(n, k);
        let mut u = DMatrix::zeros(n, k);
        let mut inv_sigma = Vec::with_capacity(k);
        for (c, &i) in kept.iter().enumerate() {
            let sigma = eig.eigenvalues[i].sqrt();
            u.set_column(c, &eig.eigenvectors.column(i));
            scores.set_column(c, &(eig.eigenvectors.column(i) * sigma));
            inv_sigma.push(1.0 / sigma);
        }
        let mut axes = centered.transpose() * &u;
        for (mut col, s) in axes.column_iter_mut().zip(&inv_sigma) {
            col.scale_mut(*s);
        }
        let explained_ratios = kept.iter().map(|&i| eig.eigenvalues[i] / total).collect();
        Ok(Pca {
            mean,
            axes,
            scores,
            explained_ratios,
        })
    }

    /// Smallest number of leading components whose cumulative explained
    /// ratio reaches `min_variance`.
    pub fn components_for(&self, min_variance: f64) -> usize {
        let mut cumulative = 0.0;
        for (i, r) in self.explained_ratios.iter().enumerate() {
            cumulative += r;
            if cumulative >= min_variance {
                return i + 1;
            }
        }
        // Only reachable through round-off when min_variance is 1.
        self.explained_ratios.len()
    }

    /// Centered data rebuilt from the first `k` components.
    pub fn reconstruct_centered(&self, k: usize) -> DMatrix<f64> {
        let k = k.min(self.scores.ncols());
        self.scores.columns(0, k) * self.axes.columns(0, k).transpose()
    }
}

/// Scores on the leading components chosen by the explained-variance rule.
#[derive(Debug, Clone)]
pub struct PcScores {
    /// Rows x k.
    pub scores: DMatrix<f64>,
    /// Ratios of the k kept components.
    pub explained_ratios: Vec<f64>,
    /// Ratios of every nonzero component; these sum to 1.
    pub all_ratios: Vec<f64>,
    pub labels: Vec<Group>,
}

impl PcScores {
    pub fn k(&self) -> usize {
        self.scores.ncols()
    }

    /// Score rows belonging to one group.
    pub fn group_rows(&self, group: Group) -> DMatrix<f64> {
        let idx: Vec<usize> = (0..self.labels.len())
            .filter(|&i| self.labels[i] == group)
            .collect();
        self.scores.select_rows(idx.iter())
    }
}

pub fn pca_project(matrix: &FeatureMatrix, min_variance: f64) -> Result<PcScores, StatsError> {
    if !(min_variance > 0.0 && min_variance <= 1.0) {
        return Err(StatsError::BadVarianceTarget(min_variance));
    }
    let pca = Pca::fit(&matrix.data)?;
    let k = pca.components_for(min_variance);
    Ok(PcScores {
        scores: pca.scores.columns(0, k).into_owned(),
        explained_ratios: pca.explained_ratios[..k].to_vec(),
        all_ratios: pca.explained_ratios,
        labels: matrix.labels.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> FeatureMatrix {
        FeatureMatrix {
            data: DMatrix::from_fn(rows, cols, f),
            labels: (0..rows)
                .map(|i| if i % 2 == 0 { Group::A } else { Group::B })
                .collect(),
        }
    }

    #[test]
    fn points_on_a_line() {
        let m = fm(6, 2, |r, c| if c == 0 { r as f64 } else { 2.0 * r as f64 });
        let s = pca_project(&m, 0.8).unwrap();
        assert_eq!(s.k(), 1);
        assert!((s.explained_ratios[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_variance_square_needs_two() {
        // (±1, 0), (0, ±1): covariance is (1/2) I, so each axis carries half.
        let pts = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];
        let m = fm(4, 2, |r, c| if c == 0 { pts[r].0 } else { pts[r].1 });
        let s = pca_project(&m, 0.8).unwrap();
        assert_eq!(s.k(), 2);
        for r in &s.explained_ratios {
            assert!((r - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_is_degenerate_single_component() {
        let m = fm(2, 6, |_, _| 0.0);
        let s = pca_project(&m, 0.8).unwrap();
        assert_eq!(s.k(), 1);
        assert_eq!(s.all_ratios, vec![1.0]);
        assert!(s.scores.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn argument_checks() {
        let m = fm(1, 3, |_, c| c as f64);
        assert_eq!(pca_project(&m, 0.8).unwrap_err(), StatsError::TooFewRows(1));
        let m = fm(3, 3, |r, c| (r * c) as f64);
        assert!(matches!(
            pca_project(&m, 0.0),
            Err(StatsError::BadVarianceTarget(_))
        ));
        assert!(matches!(
            pca_project(&m, 1.5),
            Err(StatsError::BadVarianceTarget(_))
        ));
        assert!(pca_project(&m, 1.0).is_ok());
    }

    #[test]
    fn scores_are_centered_and_axes_orthonormal() {
        let m = fm(8, 20, |r, c| {
            ((r * 7 + c * 3) % 11) as f64 + (r as f64).sin()
        });
        let pca = Pca::fit(&m.data).unwrap();
        for col in pca.scores.column_iter() {
            assert!(col.sum().abs() < 1e-9);
        }
        let gram = pca.axes.transpose() * &pca.axes;
        let k = gram.nrows();
        assert!((gram - DMatrix::<f64>::identity(k, k)).amax() < 1e-9);
    }

    #[test]
    fn wide_matrix_is_fast_enough() {
        // Same shape as 60 runs of 4001 iterations.
        let m = fm(60, 24_006, |r, c| ((r * 31 + c * 17) % 97) as f64 / 97.0);
        let s = pca_project(&m, 0.8).unwrap();
        assert!(s.k() >= 1 && s.k() <= 59);
    }
}
