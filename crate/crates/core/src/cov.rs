//! Cholesky factor of a covariance matrix, used to whiten mean differences.

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `L L' = Sigma`.
///
/// Whitening a vector means solving `L y = v`; all uses downstream go
/// through `||y||_2 = ||Sigma^{-1/2} v||_2`, which is the same for every
/// square root of Sigma.
#[derive(Debug, Clone)]
pub struct CovFactor {
    q: usize,
    /// Row-major dense storage of the lower triangle (upper part zero).
    l: Vec<f64>,
}

impl CovFactor {
    /// Factors a symmetric positive definite matrix given as rows.
    #[allow(clippy::needless_range_loop)]
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.len();
        if q == 0 {
            return Err(Error::NotPositiveDefinite("empty matrix".into()));
        }
        let mut scale: f64 = 0.0;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != q {
                return Err(Error::NotPositiveDefinite(format!(
                    "matrix is not square: row {i} has {} entries, expected {q}",
                    row.len()
                )));
            }
            for v in row {
                if !v.is_finite() {
                    return Err(Error::NotPositiveDefinite("non-finite entry".into()));
                }
                scale = scale.max(v.abs());
            }
        }
        let tol = 1e-9 * scale.max(1.0);
        for i in 0..q {
            for j in (i + 1)..q {
                if (rows[i][j] - rows[j][i]).abs() > tol {
                    return Err(Error::NotPositiveDefinite(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }

        let mut l = vec![0.0; q * q];
        for i in 0..q {
            for j in 0..=i {
                let mut s = rows[i][j];
                for k in 0..j {
                    s -= l[i * q + k] * l[j * q + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite(format!(
                            "pivot {s:.3e} at index {i}"
                        )));
                    }
                    l[i * q + i] = s.sqrt();
                } else {
                    l[i * q + j] = s / l[j * q + j];
                }
            }
        }
        Ok(CovFactor { q, l })
    }

    /// Dimension q.
    pub fn dim(&self) -> usize {
        self.q
    }

    /// Solves `L y = v` by forward substitution.
    ///
    /// # Panics
    /// If `v.len() != q`.
    #[allow(clippy::needless_range_loop)]
    pub fn whiten(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.q, "vector length must match covariance dimension");
        let mut y = vec![0.0; self.q];
        for i in 0..self.q {
            let mut s = v[i];
            for k in 0..i {
                s -= self.l[i * self.q + k] * y[k];
            }
            y[i] = s / self.l[i * self.q + i];
        }
        y
    }

    /// `||Sigma^{-1/2} v||_2`.
    pub fn whitened_norm(&self, v: &[f64]) -> f64 {
        crate::model::norm2(&self.whiten(v))
    }
}
