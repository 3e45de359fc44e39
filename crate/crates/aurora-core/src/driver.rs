//! The generic leave-one-replicate-out estimation loop.
//!
//! For every column `j`, the driver holds column `j` out as the response,
//! sorts each row's remaining replicates, trains a regressor on the full
//! split, predicts in-sample, and averages the per-split predictions:
//!
//! ```text
//! mu_hat[i] = (1/B) * sum_j  m_hat_j(sorted row i without column j)
//! ```
//!
//! The regressor is a black box; see [`crate::regressors`] for the two
//! instantiations shipped here.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::replicate::{split_and_order, EstimateVector, ReplicateMatrix};

/// A regression procedure usable inside the driver loop: fit on a training
/// set and return the in-sample prediction for every training row.
pub trait SplitRegressor: Sync {
    fn fit_predict(&self, features: &Matrix, response: &[f64]) -> Result<Vec<f64>>;
}

impl<F> SplitRegressor for F
where
    F: Fn(&Matrix, &[f64]) -> Result<Vec<f64>> + Sync,
{
    fn fit_predict(&self, features: &Matrix, response: &[f64]) -> Result<Vec<f64>> {
        self(features, response)
    }
}

/// Estimate every unit mean with the given regressor.
///
/// Regressor failures are annotated with the held-out column. The column
/// loop accumulates in index order, so the output does not depend on
/// execution order.
pub fn aurora_estimate<R: SplitRegressor + ?Sized>(
    data: &ReplicateMatrix,
    regressor: &R,
) -> Result<EstimateVector> {
    let (n, b) = (data.n_units(), data.n_replicates());
    let mut acc = vec![0.0; n];
    for col in 0..b {
        let view = split_and_order(data, col)?;
        let preds = regressor
            .fit_predict(&view.features, &view.response)
            .map_err(|e| Error::Regressor {
                col,
                source: Box::new(e),
            })?;
        if preds.len() != n {
            return Err(Error::LengthMismatch {
                left: preds.len(),
                right: n,
            });
        }
        for (a, p) in acc.iter_mut().zip(&preds) {
            *a += p;
        }
    }
    let scale = b as f64;
    EstimateVector::new(acc.into_iter().map(|s| s / scale).collect())
}

/// Full enumeration of held-out subsets is refused beyond this many.
pub const SUBSET_CAP: u64 = 256;

/// A symmetric kernel applied to `arity` held-out replicates to form the
/// regression response. With `arity = 1` and the identity kernel this
/// reduces to plain mean estimation; with `arity = 2` and
/// `h(z1, z2) = (z1 - z2)^2 / 2` it estimates the per-unit noise variance.
pub struct TargetKernel {
    arity: usize,
    kernel: Box<dyn Fn(&[f64]) -> f64 + Sync + Send>,
}

impl TargetKernel {
    pub fn new(arity: usize, kernel: impl Fn(&[f64]) -> f64 + Sync + Send + 'static) -> Self {
        assert!(arity >= 1, "kernel arity must be at least 1");
        TargetKernel {
            arity,
            kernel: Box::new(kernel),
        }
    }

    /// The identity target on a single held-out replicate.
    pub fn identity() -> Self {
        TargetKernel::new(1, |z: &[f64]| z[0])
    }

    /// Half squared difference of two held-out replicates; its conditional
    /// expectation is the per-unit noise variance.
    pub fn variance() -> Self {
        TargetKernel::new(2, |z: &[f64]| {
            let d = z[0] - z[1];
            d * d / 2.0
        })
    }

    #[inline]
    pub fn arity(&self) -> usize {
        self.arity
    }

    #[inline]
    pub fn apply(&self, held_out: &[f64]) -> f64 {
        debug_assert_eq!(held_out.len(), self.arity);
        (self.kernel)(held_out)
    }

    /// Check permutation invariance by evaluating the kernel on cyclic
    /// shifts and the reversal of each sample point.
    pub fn is_symmetric_on(&self, samples: &[Vec<f64>]) -> bool {
        samples.iter().all(|point| {
            if point.len() != self.arity {
                return false;
            }
            let base = self.apply(point);
            let mut rotated = point.clone();
            for _ in 0..self.arity {
                rotated.rotate_left(1);
                if self.apply(&rotated) != base {
                    return false;
                }
            }
            let mut reversed = point.clone();
            reversed.reverse();
            self.apply(&reversed) == base
        })
    }
}

/// Number of `r`-subsets of `b` columns, refusing early past `cap`.
fn count_subsets(b: usize, r: usize, cap: u64) -> Result<u64> {
    let mut count: u128 = 1;
    for t in 0..r {
        count = count * (b - t) as u128 / (t as u128 + 1);
        if count > cap as u128 {
            return Err(Error::SubsetExplosion {
                subsets: count,
                cap,
            });
        }
    }
    Ok(count as u64)
}

/// Advance `subset` to the next r-combination of `0..b` in lexicographic
/// order; returns false when exhausted.
fn next_subset(subset: &mut [usize], b: usize) -> bool {
    let r = subset.len();
    let mut t = r;
    while t > 0 {
        t -= 1;
        if subset[t] < b - r + t {
            subset[t] += 1;
            for u in t + 1..r {
                subset[u] = subset[u - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Estimate `E[h(Z_{i,S}) | unit i]` by holding out every `r`-subset `S` of
/// columns, regressing the kernel value on the sorted remaining replicates,
/// and averaging the in-sample predictions over all subsets.
pub fn aurora_general_target<R: SplitRegressor + ?Sized>(
    data: &ReplicateMatrix,
    target: &TargetKernel,
    regressor: &R,
) -> Result<EstimateVector> {
    let (n, b) = (data.n_units(), data.n_replicates());
    let r = target.arity();
    if r > b - 1 {
        return Err(Error::ArityTooLarge { arity: r, max: b - 1 });
    }
    let count = count_subsets(b, r, SUBSET_CAP)?;

    let mut acc = vec![0.0; n];
    let mut subset: Vec<usize> = (0..r).collect();
    let mut held = vec![0.0; r];
    let mut response = vec![0.0; n];
    let mut features = Matrix::zeros(n, b - r);
    let mut scratch = Vec::with_capacity(b - r);
    loop {
        for i in 0..n {
            let row = data.row(i);
            for (t, &col) in subset.iter().enumerate() {
                held[t] = row[col];
            }
            response[i] = target.apply(&held);
            scratch.clear();
            scratch.extend(
                row.iter()
                    .enumerate()
                    .filter(|(j, _)| !subset.contains(j))
                    .map(|(_, v)| *v),
            );
            scratch.sort_by(f64::total_cmp);
            features.row_mut(i).copy_from_slice(&scratch);
        }
        let preds = regressor
            .fit_predict(&features, &response)
            .map_err(|e| Error::Regressor {
                col: subset[0],
                source: Box::new(e),
            })?;
        if preds.len() != n {
            return Err(Error::LengthMismatch {
                left: preds.len(),
                right: n,
            });
        }
        for (a, p) in acc.iter_mut().zip(&preds) {
            *a += p;
        }
        if !next_subset(&mut subset, b) {
            break;
        }
    }
    let scale = count as f64;
    EstimateVector::new(acc.into_iter().map(|s| s / scale).collect())
}
