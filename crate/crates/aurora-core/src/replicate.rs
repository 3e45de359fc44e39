//! Replicated observations and the split-and-order transformation.
//!
//! A [`ReplicateMatrix`] holds `n` units (rows) with `B` replicates each
//! (columns). [`split_and_order`] holds one column out as the regression
//! response and sorts the remaining values of each row ascending; the sorted
//! values are a lossless feature set because the noise is exchangeable
//! across replicates.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Validated `n x B` matrix of replicated observations.
///
/// Invariants: `n >= 1`, `B >= 3` (or `B >= 2` when constructed with
/// `allow_b2`), and every entry finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateMatrix {
    values: Matrix,
}

impl ReplicateMatrix {
    /// Validate a rectangular array of reals.
    ///
    /// `allow_b2` lowers the minimum replicate count from 3 to 2. Two
    /// replicates leave a single feature column after the holdout, which is
    /// statistically valid but degenerate for the weight diagnostics, so the
    /// command-line tools require an explicit opt-in.
    pub fn new(rows: &[Vec<f64>], allow_b2: bool) -> Result<Self> {
        Self::from_matrix(Matrix::from_rows(rows), allow_b2)
    }

    pub fn from_matrix(values: Matrix, allow_b2: bool) -> Result<Self> {
        if values.rows() == 0 {
            return Err(Error::Empty);
        }
        let min_b = if allow_b2 { 2 } else { 3 };
        if values.cols() < min_b {
            return Err(Error::TooFewReplicates {
                got: values.cols(),
                min: min_b,
            });
        }
        for i in 0..values.rows() {
            for (j, v) in values.row(i).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(ReplicateMatrix { values })
    }

    /// Number of units `n`.
    #[inline]
    pub fn n_units(&self) -> usize {
        self.values.rows()
    }

    /// Number of replicates `B`.
    #[inline]
    pub fn n_replicates(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }
}

/// One held-out split: the response column and the per-row sorted remainder.
#[derive(Debug, Clone)]
pub struct SplitView {
    /// Held-out column index (0-based).
    pub held_out_col: usize,
    /// Response vector, `response[i]` is the held-out replicate of unit `i`.
    pub response: Vec<f64>,
    /// `n x (B-1)` matrix whose row `i` is the remaining replicates of unit
    /// `i` sorted ascending.
    pub features: Matrix,
}

/// Hold out column `col` and sort each row's remaining values ascending.
///
/// Sorting is stable; ties keep source order, which is unobservable in the
/// values but fixes determinism.
pub fn split_and_order(data: &ReplicateMatrix, col: usize) -> Result<SplitView> {
    let (n, b) = (data.n_units(), data.n_replicates());
    if col >= b {
        return Err(Error::IndexOutOfRange { col, cols: b });
    }
    let mut response = Vec::with_capacity(n);
    let mut features = Matrix::zeros(n, b - 1);
    let mut scratch: Vec<f64> = Vec::with_capacity(b - 1);
    for i in 0..n {
        let row = data.row(i);
        response.push(row[col]);
        scratch.clear();
        scratch.extend(row.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, v)| *v));
        scratch.sort_by(f64::total_cmp);
        features.row_mut(i).copy_from_slice(&scratch);
    }
    Ok(SplitView {
        held_out_col: col,
        response,
        features,
    })
}

/// Per-unit mean estimates, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateVector {
    values: Vec<f64>,
}

impl EstimateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: 0 });
            }
        }
        Ok(EstimateVector { values })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validates_well_formed_input() {
        let m = ReplicateMatrix::new(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], false).unwrap();
        assert_eq!(m.n_units(), 2);
        assert_eq!(m.n_replicates(), 3);
    }

    #[test]
    fn rejects_b2_without_override() {
        let err = ReplicateMatrix::new(&[vec![1.0, 2.0]], false).unwrap_err();
        assert!(matches!(err, Error::TooFewReplicates { got: 2, min: 3 }));
        assert!(ReplicateMatrix::new(&[vec![1.0, 2.0]], true).is_ok());
        let err = ReplicateMatrix::new(&[vec![1.0]], true).unwrap_err();
        assert!(matches!(err, Error::TooFewReplicates { got: 1, min: 2 }));
    }

    #[test]
    fn rejects_nan_and_empty() {
        let err = ReplicateMatrix::new(&[vec![1.0, f64::NAN, 3.0]], false).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
        let err = ReplicateMatrix::new(&[], false).unwrap_err();
        assert!(matches!(err, Error::Empty));
    }

    #[test]
    fn split_hand_sorted() {
        let m = ReplicateMatrix::new(&[vec![3.0, 1.0, 2.0]], false).unwrap();
        let view = split_and_order(&m, 1).unwrap();
        assert_eq!(view.response, vec![1.0]);
        assert_eq!(view.features.row(0), &[2.0, 3.0]);
    }

    #[test]
    fn split_preserves_ties() {
        let m = ReplicateMatrix::new(&[vec![5.0, 5.0, 5.0]], false).unwrap();
        let view = split_and_order(&m, 0).unwrap();
        assert_eq!(view.response, vec![5.0]);
        assert_eq!(view.features.row(0), &[5.0, 5.0]);
    }

    #[test]
    fn split_four_replicates() {
        let m = ReplicateMatrix::new(&[vec![0.5, -1.0, 2.0, 0.0]], false).unwrap();
        let view = split_and_order(&m, 3).unwrap();
        assert_eq!(view.response, vec![0.0]);
        assert_eq!(view.features.row(0), &[-1.0, 0.5, 2.0]);
    }

    #[test]
    fn split_rejects_bad_column() {
        let m = ReplicateMatrix::new(&[vec![1.0, 2.0, 3.0]], false).unwrap();
        assert!(matches!(
            split_and_order(&m, 3),
            Err(Error::IndexOutOfRange { col: 3, cols: 3 })
        ));
    }

    #[test]
    fn estimate_vector_rejects_non_finite() {
        assert!(EstimateVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    fn sorted(v: &[f64]) -> Vec<f64> {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s
    }

    proptest! {
        // Round trip: response plus features is the source row as a multiset,
        // and the feature row is non-decreasing.
        #[test]
        fn split_round_trip(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 4), 1..8),
            col in 0usize..4,
        ) {
            let m = ReplicateMatrix::new(&rows, false).unwrap();
            let view = split_and_order(&m, col).unwrap();
            for i in 0..m.n_units() {
                let feats = view.features.row(i);
                prop_assert!(feats.windows(2).all(|w| w[0] <= w[1]));
                let mut recombined = feats.to_vec();
                recombined.push(view.response[i]);
                prop_assert_eq!(sorted(&recombined), sorted(m.row(i)));
            }
        }
    }
}
