use std::fmt;

use nalgebra::DMatrix;

use super::StatsError;
use crate::sim::{Column, SimOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    A,
    B,
}

impl Group {
    pub fn label(self) -> &'static str {
        match self {
            Group::A => "A",
            Group::B => "B",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Scales a series to zero mean and unit population standard deviation.
/// A constant series maps to all zeros.
pub fn standardize_series(values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty("series"));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(vec![0.0; values.len()]);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(values.iter().map(|v| (v - mean) / std).collect())
}

/// One feature vector per run, group A rows first.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub data: DMatrix<f64>,
    pub labels: Vec<Group>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn group_size(&self, group: Group) -> usize {
        self.labels.iter().filter(|&&g| g == group).count()
    }
}

/// Maps every run to the concatenation of its six standardized series, in
/// canonical column order, and stacks group A above group B.
pub fn build_feature_matrix(
    group_a: &[SimOutput],
    group_b: &[SimOutput],
) -> Result<FeatureMatrix, StatsError> {
    if group_a.is_empty() {
        return Err(StatsError::Empty("group A"));
    }
    if group_b.is_empty() {
        return Err(StatsError::Empty("group B"));
    }
    let len = group_a[0].len();
    if len == 0 {
        return Err(StatsError::Empty("run"));
    }
    let runs: Vec<(Group, usize, &SimOutput)> = group_a
        .iter()
        .enumerate()
        .map(|(i, r)| (Group::A, i, r))
        .chain(group_b.iter().enumerate().map(|(i, r)| (Group::B, i, r)))
        .collect();
    for &(group, run, out) in &runs {
        if out.len() != len {
            return Err(StatsError::LengthMismatch {
                group,
                run,
                expected: len,
                found: out.len(),
            });
        }
    }
    let width = Column::ALL.len() * len;
    let mut data = DMatrix::zeros(runs.len(), width);
    for (row, &(_, _, out)) in runs.iter().enumerate() {
        for (c, &column) in Column::ALL.iter().enumerate() {
            let scaled = standardize_series(&out.column(column))?;
            for (t, v) in scaled.into_iter().enumerate() {
                data[(row, c * len + t)] = v;
            }
        }
    }
    Ok(FeatureMatrix {
        data,
        labels: runs.iter().map(|r| r.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::OutputRow;
    use proptest::prelude::*;

    #[test]
    fn three_point_series() {
        let s = standardize_series(&[1.0, 2.0, 3.0]).unwrap();
        // population std is sqrt(2/3), so the ends sit at -/+ sqrt(3/2)
        let e = (1.5f64).sqrt();
        assert!((s[0] + e).abs() < 1e-12);
        assert!(s[1].abs() < 1e-12);
        assert!((s[2] - e).abs() < 1e-12);
        assert!((e - 1.224745).abs() < 1e-6);
    }

    #[test]
    fn constant_series_is_zero() {
        assert_eq!(standardize_series(&[5.0; 4]).unwrap(), vec![0.0; 4]);
        assert_eq!(standardize_series(&[0.1; 7]).unwrap(), vec![0.0; 7]);
    }

    #[test]
    fn empty_series_rejected() {
        assert_eq!(standardize_series(&[]), Err(StatsError::Empty("series")));
    }

    fn run(len: usize, base: u64) -> SimOutput {
        SimOutput {
            rows: (0..len as u64)
                .map(|t| OutputRow {
                    total_prey: base + t,
                    total_predators: base * t % 7,
                    total_food: 10,
                    mean_energy_prey: t as f64 * 0.5,
                    mean_energy_predators: 1.0,
                    mean_c: (t % 3) as f64,
                })
                .collect(),
        }
    }

    #[test]
    fn single_row_runs_give_zero_matrix() {
        let fm = build_feature_matrix(&[run(1, 3)], &[run(1, 4)]).unwrap();
        assert_eq!(fm.data.shape(), (2, 6));
        assert!(fm.data.iter().all(|&v| v == 0.0));
        assert_eq!(fm.labels, vec![Group::A, Group::B]);
    }

    #[test]
    fn shape_and_layout() {
        let a: Vec<_> = (0..3).map(|i| run(11, i + 2)).collect();
        let b: Vec<_> = (0..2).map(|i| run(11, i + 9)).collect();
        let fm = build_feature_matrix(&a, &b).unwrap();
        assert_eq!(fm.data.shape(), (5, 66));
        assert_eq!(fm.group_size(Group::A), 3);
        assert_eq!(fm.group_size(Group::B), 2);
        let prey = standardize_series(&a[1].column(Column::TotalPrey)).unwrap();
        let mean_c = standardize_series(&a[1].column(Column::MeanC)).unwrap();
        for t in 0..11 {
            assert_eq!(fm.data[(1, t)], prey[t]);
            assert_eq!(fm.data[(1, 55 + t)], mean_c[t]);
        }
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let err = build_feature_matrix(&[run(5, 1)], &[run(5, 2), run(4, 3)]).unwrap_err();
        assert_eq!(
            err,
            StatsError::LengthMismatch {
                group: Group::B,
                run: 1,
                expected: 5,
                found: 4
            }
        );
        assert_eq!(
            build_feature_matrix(&[], &[run(5, 2)]).unwrap_err(),
            StatsError::Empty("group A")
        );
    }

    proptest! {
        #[test]
        fn standardized_moments(v in proptest::collection::vec(-1e4f64..1e4, 2..300)) {
            prop_assume!(v.iter().any(|&x| x != v[0]));
            let s = standardize_series(&v).unwrap();
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let std = (s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-12);
            prop_assert!((std - 1.0).abs() < 1e-12);
        }
    }
}
