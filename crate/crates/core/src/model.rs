//! Data matrix, cluster sets, contrast vectors, and the perturbation map.
//!
//! The perturbation `x'(phi)` moves the two tested clusters apart (or
//! together) along the observed mean-difference direction so that their
//! separation becomes exactly `phi`, while every other row and the
//! orthogonal component of the data stay fixed. All downstream machinery
//! (truncation sets, p-values) is built on top of these primitives.

use crate::cov::CovFactor;
use crate::error::{Error, Result};

/// An n-by-q data matrix, one observation per row, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    data: Vec<f64>,
    n: usize,
    q: usize,
}

impl DataMatrix {
    /// Builds a matrix from `n * q` row-major entries.
    pub fn from_flat(n: usize, q: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || q == 0 {
            return Err(Error::InvalidData(format!(
                "matrix dimensions must be positive, got {n}x{q}"
            )));
        }
        if data.len() != n * q {
            return Err(Error::InvalidData(format!(
                "expected {} entries for a {n}x{q} matrix, got {}",
                n * q,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite entry at row {}, column {}",
                pos / q,
                pos % q
            )));
        }
        Ok(DataMatrix { data, n, q })
    }

    /// Builds a matrix from a list of equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidData("no rows".into()));
        }
        let q = rows[0].len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != q {
                return Err(Error::InvalidData(format!(
                    "ragged input: row 0 has {q} columns but row {i} has {}",
                    row.len()
                )));
            }
        }
        let mut data = Vec::with_capacity(rows.len() * q);
        for row in rows {
            data.extend_from_slice(row);
        }
        Self::from_flat(rows.len(), q, data)
    }

    /// Number of observations (rows).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of features (columns).
    pub fn q(&self) -> usize {
        self.q
    }

    /// Row `i` as a slice.
    ///
    /// # Panics
    /// If `i >= n`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    /// Entry at row `i`, column `j`.
    ///
    /// # Panics
    /// If out of range.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.q + j]
    }

    /// All entries, row-major.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.q..(i + 1) * self.q]
    }
}

/// A nonempty set of row indices (0-based), sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClusterSet {
    members: Vec<usize>,
}

impl ClusterSet {
    /// Builds a cluster from row indices; sorts and deduplicates.
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidPair("empty cluster".into()));
        }
        members.sort_unstable();
        members.dedup();
        Ok(ClusterSet { members })
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Always false; clusters are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sorted member indices.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Membership test.
    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    /// Smallest member index (used for user-facing cluster numbering).
    pub fn min_member(&self) -> usize {
        self.members[0]
    }

    /// Errors unless all members are valid row indices for an n-row matrix.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        let max = *self.members.last().unwrap();
        if max >= n {
            return Err(Error::InvalidPair(format!(
                "cluster member {max} out of range for n={n}"
            )));
        }
        Ok(())
    }
}

/// An unordered pair of disjoint clusters whose mean difference is tested.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPair {
    c1: ClusterSet,
    c2: ClusterSet,
}

impl ClusterPair {
    /// Builds a pair, rejecting overlapping clusters.
    pub fn new(c1: ClusterSet, c2: ClusterSet) -> Result<Self> {
        let overlap = c1.members().iter().any(|i| c2.contains(*i));
        if overlap {
            return Err(Error::InvalidPair("clusters overlap".into()));
        }
        Ok(ClusterPair { c1, c2 })
    }

    /// First cluster.
    pub fn c1(&self) -> &ClusterSet {
        &self.c1
    }

    /// Second cluster.
    pub fn c2(&self) -> &ClusterSet {
        &self.c2
    }

    /// Errors unless both clusters index into an n-row matrix.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.c1.validate_for(n)?;
        self.c2.validate_for(n)
    }
}

/// The contrast vector nu with entries 1/|c1| on the first cluster,
/// -1/|c2| on the second, and 0 elsewhere, so that `x' * nu` is the
/// difference of cluster means.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastVector {
    entries: Vec<f64>,
    squared_norm: f64,
}

impl ContrastVector {
    /// Entries, length n.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Entry for row `i`.
    pub fn entry(&self, i: usize) -> f64 {
        self.entries[i]
    }

    /// `1/|c1| + 1/|c2|`, the squared Euclidean norm of the entries.
    pub fn squared_norm(&self) -> f64 {
        self.squared_norm
    }
}

/// Mean of the rows of `x` indexed by `g`.
///
/// # Panics
/// If `g` indexes out of range.
pub fn empirical_mean(x: &DataMatrix, g: &ClusterSet) -> Vec<f64> {
    let mut mean = vec![0.0; x.q()];
    for &i in g.members() {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    let inv = 1.0 / g.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    mean
}

/// Builds the contrast vector for `pair` in an n-row data set.
pub fn contrast_vector(pair: &ClusterPair, n: usize) -> Result<ContrastVector> {
    pair.validate_for(n)?;
    let mut entries = vec![0.0; n];
    let a = 1.0 / pair.c1().len() as f64;
    let b = 1.0 / pair.c2().len() as f64;
    for &i in pair.c1().members() {
        entries[i] = a;
    }
    for &i in pair.c2().members() {
        entries[i] = -b;
    }
    Ok(ContrastVector {
        entries,
        squared_norm: a + b,
    })
}

/// Unit vector parallel to `w`, or the zero vector when `w = 0`.
pub fn direction(w: &[f64]) -> Vec<f64> {
    let norm = norm2(w);
    if norm == 0.0 {
        return vec![0.0; w.len()];
    }
    w.iter().map(|v| v / norm).collect()
}

/// Euclidean norm.
pub(crate) fn norm2(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `x' * nu`: the difference of cluster means as a length-q vector.
pub(crate) fn mean_difference(x: &DataMatrix, nu: &ContrastVector) -> Vec<f64> {
    let mut w = vec![0.0; x.q()];
    for (i, &ni) in nu.entries().iter().enumerate() {
        if ni != 0.0 {
            for (wj, v) in w.iter_mut().zip(x.row(i)) {
                *wj += ni * v;
            }
        }
    }
    w
}

/// Projects out the nu-component of every column: returns
/// `(I - nu nu' / |nu|^2) x`.
pub fn project_out(x: &DataMatrix, nu: &ContrastVector) -> Result<DataMatrix> {
    if nu.entries().len() != x.n() {
        return Err(Error::InvalidContrast(format!(
            "contrast has length {} but the matrix has {} rows",
            nu.entries().len(),
            x.n()
        )));
    }
    if nu.entries().iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidContrast("contrast is identically zero".into()));
    }
    let w = mean_difference(x, nu);
    let mut out = x.clone();
    let inv_sq = 1.0 / nu.squared_norm();
    for i in 0..x.n() {
        let ni = nu.entry(i);
        if ni != 0.0 {
            let scale = ni * inv_sq;
            for (o, wj) in out.row_mut(i).iter_mut().zip(&w) {
                *o -= scale * wj;
            }
        }
    }
    Ok(out)
}

/// `||x-bar_c1 - x-bar_c2||_2`, the test statistic.
///
/// Computed through the contrast vector, bit-for-bit the same route the
/// perturbation uses for its separation scale, so that
/// `perturbed_dataset(x, pair, test_statistic(x, pair))` returns `x`
/// unchanged.
///
/// # Panics
/// If the pair indexes out of range.
pub fn test_statistic(x: &DataMatrix, pair: &ClusterPair) -> f64 {
    let nu = contrast_vector(pair, x.n()).expect("pair indexes in range");
    norm2(&mean_difference(x, &nu))
}

/// Shared rowwise perturbation: every row `i` moves by
/// `nu_i * (phi/tau - 1) / |nu|^2 * w`, which leaves rows outside the pair
/// untouched and rescales the pair separation from `tau` to `phi` along `w`.
fn perturb_with_tau(
    x: &DataMatrix,
    pair: &ClusterPair,
    phi: f64,
    tau: f64,
    w: &[f64],
) -> Result<DataMatrix> {
    if !phi.is_finite() || phi < 0.0 {
        return Err(Error::BadParameter(format!(
            "phi must be finite and nonnegative, got {phi}"
        )));
    }
    if tau == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    let mut out = x.clone();
    if phi == tau {
        return Ok(out);
    }
    let nu = contrast_vector(pair, x.n())?;
    let factor = (phi / tau - 1.0) / nu.squared_norm();
    for &i in pair.c1().members().iter().chain(pair.c2().members()) {
        let scale = nu.entry(i) * factor;
        for (o, wj) in out.row_mut(i).iter_mut().zip(w) {
            *o += scale * wj;
        }
    }
    Ok(out)
}

/// The perturbed data set `x'(phi)`: cluster separation rescaled to `phi`
/// along the observed mean-difference direction, everything else unchanged.
pub fn perturbed_dataset(x: &DataMatrix, pair: &ClusterPair, phi: f64) -> Result<DataMatrix> {
    let nu = contrast_vector(pair, x.n())?;
    let w = mean_difference(x, &nu);
    let tau = norm2(&w);
    perturb_with_tau(x, pair, phi, tau, &w)
}

/// The perturbed data set used by the known-covariance test: the separation
/// is measured in the whitened metric, so `phi` rescales
/// `||Sigma^{-1/2} (x-bar_c1 - x-bar_c2)||_2` instead of the Euclidean norm.
pub fn perturbed_dataset_cov(
    x: &DataMatrix,
    pair: &ClusterPair,
    phi: f64,
    cov: &CovFactor,
) -> Result<DataMatrix> {
    if cov.dim() != x.q() {
        return Err(Error::NotPositiveDefinite(format!(
            "covariance is {}x{} but the data has q={}",
            cov.dim(),
            cov.dim(),
            x.q()
        )));
    }
    let nu = contrast_vector(pair, x.n())?;
    let w = mean_difference(x, &nu);
    let tau = cov.whitened_norm(&w);
    perturb_with_tau(x, pair, phi, tau, &w)
}
