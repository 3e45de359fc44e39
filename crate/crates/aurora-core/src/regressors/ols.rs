//! Ordinary least squares with an intercept.
//!
//! Sorted order statistics are nearly collinear for low-noise data, so the
//! solver must tolerate rank deficiency. We center the columns (the
//! intercept is always fitted, via the means) and run a Householder QR with
//! column pivoting on the centered design. Columns whose residual norm falls
//! below `RANK_TOL` times the largest column norm get a zero coefficient;
//! the fitted values are still the orthogonal projection of the response
//! onto the span of the intercept and the feature columns, which is what
//! the driver loop consumes.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Relative rank tolerance against the largest centered column norm.
const RANK_TOL: f64 = 1e-10;

/// A fitted affine predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    /// Fitted directions including the intercept: `1 + rank(centered X)`.
    pub rank: usize,
}

/// Least-squares fit of `y` on the columns of `x` plus an intercept.
///
/// Under rank deficiency the pivoted-out directions get zero slope, so the
/// reported coefficients are one minimizer among many; the fitted values
/// are unique.
pub fn ols_fit(x: &Matrix, y: &[f64]) -> Result<LinearFit> {
    let n = x.rows();
    let p = x.cols();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    if n == 0 || p == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }

    // Column means and centered design, column-major for the factorization.
    let mut col_mean = vec![0.0; p];
    for i in 0..n {
        for (j, v) in x.row(i).iter().enumerate() {
            col_mean[j] += v;
        }
    }
    for m in col_mean.iter_mut() {
        *m /= n as f64;
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;

    let mut a = vec![0.0; n * p]; // column j at a[j*n .. (j+1)*n]
    for i in 0..n {
        let row = x.row(i);
        for j in 0..p {
            a[j * n + i] = row[j] - col_mean[j];
        }
    }
    let mut b: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    let col_norm_sq = |a: &[f64], j: usize, from: usize| -> f64 {
        a[j * n + from..(j + 1) * n].iter().map(|v| v * v).sum()
    };

    let mut norms_sq: Vec<f64> = (0..p).map(|j| col_norm_sq(&a, j, 0)).collect();
    let orig_norms_sq = norms_sq.clone();
    let max_norm = norms_sq.iter().cloned().fold(0.0_f64, f64::max).sqrt();
    let tol = RANK_TOL * max_norm;

    let mut perm: Vec<usize> = (0..p).collect();
    let steps = n.min(p);
    let mut rank = 0;

    for k in 0..steps {
        // Pivot: remaining column with the largest residual norm, first wins
        // ties so the factorization is deterministic.
        let mut jmax = k;
        for j in k + 1..p {
            if norms_sq[j] > norms_sq[jmax] {
                jmax = j;
            }
        }
        if jmax != k {
            perm.swap(k, jmax);
            norms_sq.swap(k, jmax);
            // orig norms track the physical columns, swap alongside
            for idx in 0..n {
                a.swap(k * n + idx, jmax * n + idx);
            }
        }
        let nu_sq = col_norm_sq(&a, k, k);
        let nu = nu_sq.sqrt();
        if nu <= tol {
            break;
        }
        rank += 1;

        // Householder reflector for column k, rows k..n.
        let akk = a[k * n + k];
        let alpha = if akk >= 0.0 { -nu } else { nu };
        let v0 = akk - alpha;
        // beta = 2 / ||v||^2 with v = (akk - alpha, a[k+1..n])
        let vnorm_sq = v0 * v0 + nu_sq - akk * akk;
        let beta = if vnorm_sq > 0.0 { 2.0 / vnorm_sq } else { 0.0 };

        // Store the reflector in place below the diagonal; R(k,k) = alpha.
        a[k * n + k] = v0;
        for j in k + 1..p {
            let mut dot = 0.0;
            for i in k..n {
                dot += a[k * n + i] * a[j * n + i];
            }
            let c = beta * dot;
            for i in k..n {
                a[j * n + i] -= c * a[k * n + i];
            }
        }
        let mut dot = 0.0;
        for i in k..n {
            dot += a[k * n + i] * b[i];
        }
        let c = beta * dot;
        for i in k..n {
            b[i] -= c * a[k * n + i];
        }
        a[k * n + k] = alpha;

        // Downdate residual norms; recompute when cancellation bites.
        for j in k + 1..p {
            let r = a[j * n + k];
            let updated = norms_sq[j] - r * r;
            norms_sq[j] = if updated > 1e-12 * orig_norms_sq[perm[j]] {
                updated
            } else {
                col_norm_sq(&a, j, k + 1)
            };
        }
    }

    // Back-substitute R[0..rank, 0..rank] beta = Qt b[0..rank].
    let mut coef_pivoted = vec![0.0; rank];
    for k in (0..rank).rev() {
        let mut s = b[k];
        for j in k + 1..rank {
            s -= a[j * n + k] * coef_pivoted[j];
        }
        coef_pivoted[k] = s / a[k * n + k];
    }

    let mut slopes = vec![0.0; p];
    for k in 0..rank {
        slopes[perm[k]] = coef_pivoted[k];
    }
    let intercept = y_mean
        - slopes
            .iter()
            .zip(&col_mean)
            .map(|(s, m)| s * m)
            .sum::<f64>();

    Ok(LinearFit {
        intercept,
        slopes,
        rank: rank + 1,
    })
}

/// Evaluate the affine predictor on every row of `x`.
pub fn ols_predict(fit: &LinearFit, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != fit.slopes.len() {
        return Err(Error::DimensionMismatch {
            expected: fit.slopes.len(),
            got: x.cols(),
        });
    }
    Ok((0..x.rows())
        .map(|i| {
            fit.intercept
                + x.row(i)
                    .iter()
                    .zip(&fit.slopes)
                    .map(|(v, s)| v * s)
                    .sum::<f64>()
        })
        .collect())
}

/// [`crate::driver::SplitRegressor`] backed by [`ols_fit`].
pub struct OlsRegressor;

impl crate::driver::SplitRegressor for OlsRegressor {
    fn fit_predict(&self, features: &Matrix, response: &[f64]) -> Result<Vec<f64>> {
        let fit = ols_fit(features, response)?;
        ols_predict(&fit, features)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Deterministic pseudo-random doubles for test fixtures.
    fn lcg_values(seed: u64, count: usize) -> Vec<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        (0..count)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect()
    }

    /// Normal-equations solve with compensated accumulation, used as an
    /// independent oracle for full-rank instances.
    fn normal_equations(x: &Matrix, y: &[f64]) -> Vec<f64> {
        let n = x.rows();
        let p = x.cols() + 1; // intercept first
        let design = |i: usize, j: usize| if j == 0 { 1.0 } else { x.get(i, j - 1) };
        let kahan_sum = |terms: &mut dyn Iterator<Item = f64>| {
            let (mut s, mut c) = (0.0, 0.0);
            for t in terms {
                let yv = t - c;
                let tv = s + yv;
                c = (tv - s) - yv;
                s = tv;
            }
            s
        };
        let mut g = vec![vec![0.0; p + 1]; p];
        for r in 0..p {
            for cidx in 0..p {
                g[r][cidx] = kahan_sum(&mut (0..n).map(|i| design(i, r) * design(i, cidx)));
            }
            g[r][p] = kahan_sum(&mut (0..n).map(|i| design(i, r) * y[i]));
        }
        // Gaussian elimination with partial pivoting.
        for k in 0..p {
            let piv = (k..p)
                .max_by(|&a, &b| g[a][k].abs().partial_cmp(&g[b][k].abs()).unwrap())
                .unwrap();
            g.swap(k, piv);
            for r in k + 1..p {
                let f = g[r][k] / g[k][k];
                for cidx in k..=p {
                    g[r][cidx] -= f * g[k][cidx];
                }
            }
        }
        let mut beta = vec![0.0; p];
        for k in (0..p).rev() {
            let mut s = g[k][p];
            for j in k + 1..p {
                s -= g[k][j] * beta[j];
            }
            beta[k] = s / g[k][k];
        }
        beta
    }

    #[test]
    fn exact_affine_data() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        let fit = ols_fit(&x, &[3.0, 5.0, 7.0]).unwrap();
        assert_abs_diff_eq!(fit.intercept, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.slopes[0], 2.0, epsilon = 1e-12);
        assert_eq!(fit.rank, 2);
    }

    #[test]
    fn constant_response_gives_zero_slopes() {
        let vals = lcg_values(7, 12);
        let x = Matrix::from_flat(vals, 6, 2);
        let fit = ols_fit(&x, &[4.5; 6]).unwrap();
        assert_eq!(fit.slopes, vec![0.0, 0.0]);
        assert_eq!(fit.intercept, 4.5);
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let x = Matrix::from_flat(lcg_values(42, 24), 8, 3);
        let y = lcg_values(43, 8);
        let fit = ols_fit(&x, &y).unwrap();
        let oracle = normal_equations(&x, &y);
        assert_abs_diff_eq!(fit.intercept, oracle[0], epsilon = 1e-8);
        for j in 0..3 {
            assert_abs_diff_eq!(fit.slopes[j], oracle[j + 1], epsilon = 1e-8);
        }
        assert_eq!(fit.rank, 4);
    }

    #[test]
    fn predict_examples() {
        let fit = LinearFit {
            intercept: 1.0,
            slopes: vec![2.0],
            rank: 2,
        };
        let out = ols_predict(&fit, &Matrix::from_rows(&[vec![0.0]])).unwrap();
        assert_eq!(out, vec![1.0]);
        let fit = LinearFit {
            intercept: 0.0,
            slopes: vec![1.0, 1.0],
            rank: 3,
        };
        let out = ols_predict(&fit, &Matrix::from_rows(&[vec![2.0, 3.0]])).unwrap();
        assert_eq!(out, vec![5.0]);
        assert!(ols_predict(&fit, &Matrix::from_rows(&[vec![1.0]])).is_err());
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let x = Matrix::from_flat(lcg_values(11, 60), 20, 3);
        let y = lcg_values(12, 20);
        let fit = ols_fit(&x, &y).unwrap();
        let preds = ols_predict(&fit, &x).unwrap();
        let resid: Vec<f64> = y.iter().zip(&preds).map(|(a, b)| a - b).collect();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        // intercept column
        let s: f64 = resid.iter().sum();
        assert!(s.abs() <= 1e-8 * (20f64).sqrt() * y_norm);
        for j in 0..3 {
            let dot: f64 = (0..20).map(|i| x.get(i, j) * resid[i]).sum();
            let x_norm = (0..20).map(|i| x.get(i, j).powi(2)).sum::<f64>().sqrt();
            assert!(dot.abs() <= 1e-8 * x_norm * y_norm, "column {j}: {dot}");
        }
    }

    #[test]
    fn rank_deficient_duplicate_column_projects_correctly() {
        // Second column duplicates the first; fitted values must match the
        // one-column projection and the duplicate direction gets slope zero.
        let base = lcg_values(3, 10);
        let rows: Vec<Vec<f64>> = base.iter().map(|&v| vec![v, v]).collect();
        let x = Matrix::from_rows(&rows);
        let y = lcg_values(4, 10);
        let fit = ols_fit(&x, &y).unwrap();
        assert_eq!(fit.rank, 2);
        assert_eq!(fit.slopes.iter().filter(|s| **s != 0.0).count(), 1);

        let x1 = Matrix::from_rows(&base.iter().map(|&v| vec![v]).collect::<Vec<_>>());
        let fit1 = ols_fit(&x1, &y).unwrap();
        let p2 = ols_predict(&fit, &x).unwrap();
        let p1 = ols_predict(&fit1, &x1).unwrap();
        for (a, b) in p2.iter().zip(&p1) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn fitted_values_invariant_under_affine_reparameterization() {
        // Replacing columns by an invertible affine recombination leaves the
        // projection unchanged.
        let x = Matrix::from_flat(lcg_values(21, 45), 15, 3);
        let y = lcg_values(22, 15);
        let rows: Vec<Vec<f64>> = (0..15)
            .map(|i| {
                let r = x.row(i);
                vec![
                    2.0 * r[0] - r[1] + 0.5,
                    r[1] + 3.0,
                    0.25 * r[2] + r[0] - 1.0,
                ]
            })
            .collect();
        let x2 = Matrix::from_rows(&rows);
        let p1 = ols_predict(&ols_fit(&x, &y).unwrap(), &x).unwrap();
        let p2 = ols_predict(&ols_fit(&x2, &y).unwrap(), &x2).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn single_row_interpolates() {
        let x = Matrix::from_rows(&[vec![2.0, 5.0]]);
        let fit = ols_fit(&x, &[7.0]).unwrap();
        assert_eq!(fit.intercept, 7.0);
        assert_eq!(fit.slopes, vec![0.0, 0.0]);
    }
}
