//! Truncation sets for the perturbation parameter.
//!
//! The selective test conditions on the event that reclustering the
//! perturbed data set reproduces both clusters under test. As the
//! perturbation parameter `phi` sweeps over `[0, inf)`, the values for
//! which the pair survives form the truncation set. Under any
//! Lance-Williams linkage every cluster dissimilarity of the perturbed
//! data set is an exact quadratic in `phi`, so the set is a finite union
//! of intervals: one quadratic inequality per losing pair, intersected.
//! This module computes the set exactly for those linkages and for single
//! linkage, in spherical and whitened (known-covariance) geometry, and
//! provides the grid-reclustering oracle used to cross-check the closed
//! forms.

use crate::cov::CovFactor;
use crate::error::{Error, Result};
use crate::hclust::{run_agglomerative, Linkage, MergeHistory};
use crate::intervals::{Interval, IntervalSet};
use crate::model::{
    contrast_vector, mean_difference, norm2, perturbed_dataset, perturbed_dataset_cov,
    ClusterPair, ContrastVector, DataMatrix,
};

/// Relative closeness to a losing pair's threshold, at the observed
/// statistic, that marks the clustering as containing a near-tie.
const NEAR_TIE_RTOL: f64 = 1e-9;

/// Leading coefficients below this fraction of the other coefficients'
/// scale are solved as linear equations.
const LINEAR_RTOL: f64 = 1e-12;

/// Squared dissimilarity between two clusters of the perturbed data set,
/// as a function of the perturbation parameter: `a*phi^2 + b*phi + c`.
///
/// For a pair of single rows `a >= 0`; quadratics merged under a linkage
/// with a negative third coefficient can have `a < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiQuadratic {
    /// Coefficient of `phi^2`.
    pub a: f64,
    /// Coefficient of `phi`.
    pub b: f64,
    /// Constant term.
    pub c: f64,
}

impl PhiQuadratic {
    /// Evaluates the quadratic at `phi`.
    pub fn eval(&self, phi: f64) -> f64 {
        (self.a * phi + self.b) * phi + self.c
    }
}

/// Truncation set plus a numerical-fragility flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    /// Values of `phi` under which reclustering keeps both clusters intact.
    pub set: IntervalSet,
    /// True when some losing pair sits within [`NEAR_TIE_RTOL`] relative of
    /// its threshold at the observed statistic. The original clustering then
    /// contains a near-tie, the boundary of `set` passes next to the
    /// statistic, and strict-inequality results should be read with care.
    pub near_tie: bool,
}

/// Per-pair quantities shared by every quadratic: contrast weights, the
/// mean difference `w`, and the statistic `tau` that `phi` rescales.
struct Geometry {
    /// `nu_i / ||nu||^2` per row; zero outside the tested pair.
    weight: Vec<f64>,
    /// `<w, x_i> / ||w||` per row.
    along: Vec<f64>,
    /// Mean difference between the two clusters, length q.
    w: Vec<f64>,
    /// The statistic `phi` replaces: `||w||`, or the whitened norm of `w`
    /// when a covariance factor is supplied.
    tau: f64,
    /// `||w|| / tau`; 1 in spherical geometry.
    rho: f64,
}

fn geometry(x: &DataMatrix, nu: &ContrastVector, cov: Option<&CovFactor>) -> Result<Geometry> {
    if nu.entries().len() != x.n() {
        return Err(Error::InvalidContrast(format!(
            "contrast has {} entries but the data has n={}",
            nu.entries().len(),
            x.n()
        )));
    }
    let w = mean_difference(x, nu);
    let norm_w = norm2(&w);
    if norm_w == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    let tau = match cov {
        None => norm_w,
        Some(f) => {
            if f.dim() != x.q() {
                return Err(Error::NotPositiveDefinite(format!(
                    "covariance is {}x{} but the data has q={}",
                    f.dim(),
                    f.dim(),
                    x.q()
                )));
            }
            f.whitened_norm(&w)
        }
    };
    let inv_sq = 1.0 / nu.squared_norm();
    let weight = nu.entries().iter().map(|v| v * inv_sq).collect();
    let along = (0..x.n())
        .map(|i| dot(x.row(i), &w) / norm_w)
        .collect();
    Ok(Geometry {
        weight,
        along,
        w,
        tau,
        rho: norm_w / tau,
    })
}

impl Geometry {
    /// Quadratic for the squared distance between rows `i` and `j` of the
    /// perturbed data set.
    fn row_pair(&self, x: &DataMatrix, i: usize, j: usize) -> PhiQuadratic {
        let kappa = self.weight[i] - self.weight[j];
        let a = kappa * kappa * self.rho * self.rho;
        let b = 2.0 * (kappa * self.rho * (self.along[i] - self.along[j]) - a * self.tau);
        let mut c = 0.0;
        for ((xi, xj), wk) in x.row(i).iter().zip(x.row(j)).zip(&self.w) {
            let r = xi - xj - kappa * wk;
            c += r * r;
        }
        PhiQuadratic { a, b, c }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quadratic in `phi` for the squared distance between rows `i` and `i2`
/// of the perturbed data set.
///
/// Rows on the same side of the contrast (and rows outside it) keep their
/// distance constant: `a = b = 0`.
///
/// # Errors
/// [`Error::InvalidContrast`] when the contrast length does not match the
/// data, [`Error::DegenerateDirection`] when the two cluster means
/// coincide.
///
/// # Panics
/// If `i == i2` or either index is out of range.
pub fn base_quadratic(
    x: &DataMatrix,
    nu: &ContrastVector,
    i: usize,
    i2: usize,
) -> Result<PhiQuadratic> {
    assert!(i != i2, "base quadratic needs two distinct rows");
    assert!(i < x.n() && i2 < x.n(), "row index out of range");
    Ok(geometry(x, nu, None)?.row_pair(x, i, i2))
}

/// [`base_quadratic`] in whitened geometry: `phi` rescales the whitened
/// norm of the mean difference instead of the Euclidean norm.
///
/// # Errors
/// As [`base_quadratic`], plus [`Error::NotPositiveDefinite`] when the
/// factor's dimension does not match the data.
///
/// # Panics
/// If `i == i2` or either index is out of range.
pub fn base_quadratic_cov(
    x: &DataMatrix,
    nu: &ContrastVector,
    cov: &CovFactor,
    i: usize,
    i2: usize,
) -> Result<PhiQuadratic> {
    assert!(i != i2, "base quadratic needs two distinct rows");
    assert!(i < x.n() && i2 < x.n(), "row index out of range");
    Ok(geometry(x, nu, Some(cov))?.row_pair(x, i, i2))
}

/// Lance-Williams update applied coefficientwise: the quadratic for
/// `d(G1 ∪ G2, G3)` from the quadratics for `d(G1, G3)`, `d(G2, G3)`, and
/// `d(G1, G2)`, with `sizes = (|G1|, |G2|, |G3|)`.
///
/// # Errors
/// [`Error::BadParameter`] when the linkage has no Lance-Williams form.
pub fn lw_combine(
    q13: PhiQuadratic,
    q23: PhiQuadratic,
    q12: PhiQuadratic,
    linkage: Linkage,
    sizes: (usize, usize, usize),
) -> Result<PhiQuadratic> {
    let (a1, a2, be) = linkage
        .lw_coefficients(sizes.0, sizes.1, sizes.2)
        .ok_or_else(|| {
            Error::BadParameter(format!("{linkage} linkage has no Lance-Williams update"))
        })?;
    Ok(PhiQuadratic {
        a: a1 * q13.a + a2 * q23.a + be * q12.a,
        b: a1 * q13.b + a2 * q23.b + be * q12.b,
        c: a1 * q13.c + a2 * q23.c + be * q12.c,
    })
}

/// `{phi >= 0 : quad(phi) > h}` as a union of intervals.
///
/// Endpoints at real roots are open, matching the strict inequality; a
/// double root is a single excluded point. Leading coefficients with
/// `|a| < 1e-12 * max(|b|, |c|, 1)` are treated as zero, because merged
/// quadratics can have catastrophically cancelled quadratic terms, and the
/// roots themselves come from the stable half of the quadratic formula
/// paired with its citardauq complement.
///
/// # Panics
/// If any coefficient or `h` is NaN.
pub fn solve_quadratic_gt(quad: PhiQuadratic, h: f64) -> IntervalSet {
    let a = quad.a;
    let b = quad.b;
    let c = quad.c - h;
    let scale = quad.b.abs().max(quad.c.abs()).max(1.0);
    if a.abs() < LINEAR_RTOL * scale {
        return solve_linear_gt(b, c);
    }
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        if a < 0.0 {
            return IntervalSet::empty();
        }
        if disc < 0.0 {
            return IntervalSet::full();
        }
        let r = -b / (2.0 * a);
        return above_zero(&[(f64::NEG_INFINITY, r), (r, f64::INFINITY)]);
    }
    let s = if b >= 0.0 { 1.0 } else { -1.0 };
    let q = -0.5 * (b + s * disc.sqrt());
    let (mut r1, mut r2) = (q / a, c / q);
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    if a > 0.0 {
        above_zero(&[(f64::NEG_INFINITY, r1), (r2, f64::INFINITY)])
    } else {
        above_zero(&[(r1, r2)])
    }
}

fn solve_linear_gt(b: f64, c: f64) -> IntervalSet {
    if b == 0.0 {
        return if c > 0.0 {
            IntervalSet::full()
        } else {
            IntervalSet::empty()
        };
    }
    let root = -c / b;
    if b > 0.0 {
        above_zero(&[(root, f64::INFINITY)])
    } else {
        above_zero(&[(f64::NEG_INFINITY, root)])
    }
}

/// Open intervals intersected with `[0, inf)`. A piece reaching below zero
/// keeps the closed endpoint at zero; a finite end that is a root stays
/// open.
fn above_zero(open: &[(f64, f64)]) -> IntervalSet {
    let mut kept = Vec::with_capacity(open.len());
    for &(lo, hi) in open {
        if hi <= 0.0 || lo >= hi {
            continue;
        }
        if lo < 0.0 {
            kept.push(Interval::new(0.0, hi, false, true));
        } else {
            kept.push(Interval::new(lo, hi, true, true));
        }
    }
    IntervalSet::from_intervals(kept)
}

/// Truncation set for the tested pair under the history's linkage.
///
/// Dispatches to the Lance-Williams merge replay or the single-linkage
/// closed form. Complete linkage has no exact form; use the Monte Carlo
/// test instead.
///
/// # Errors
/// [`Error::BadParameter`] for complete linkage or when the history does
/// not match the data, [`Error::InvalidPair`] when either cluster is
/// missing from the cut, [`Error::DegenerateDirection`] when the cluster
/// means coincide.
pub fn truncation_set(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
) -> Result<Truncation> {
    dispatch(x, history, pair, None)
}

/// [`truncation_set`] in whitened geometry, for the known-covariance test.
///
/// # Errors
/// As [`truncation_set`], plus [`Error::NotPositiveDefinite`] when the
/// factor's dimension does not match the data.
pub fn truncation_set_cov(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
    cov: &CovFactor,
) -> Result<Truncation> {
    dispatch(x, history, pair, Some(cov))
}

fn dispatch(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
    cov: Option<&CovFactor>,
) -> Result<Truncation> {
    match history.linkage() {
        Linkage::Single => single_inner(x, history, pair, cov),
        l if l.is_lance_williams() => lw_inner(x, history, pair, cov),
        l => Err(Error::BadParameter(format!(
            "no exact truncation set for {l} linkage; use the Monte Carlo test"
        ))),
    }
}

/// Truncation set for a Lance-Williams linkage, by replaying the merge
/// history on quadratic coefficients.
///
/// Every pairwise squared distance of the perturbed data set is a
/// quadratic in `phi`, and the Lance-Williams update is linear, so every
/// cluster dissimilarity stays an exact quadratic through the whole
/// dendrogram. The pair survives reclustering exactly when every losing
/// pair stays above its window height, one quadratic inequality each.
///
/// # Errors
/// As [`truncation_set`], but a single-linkage history is also rejected.
pub fn truncation_set_lw(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
) -> Result<Truncation> {
    lw_inner(x, history, pair, None)
}

/// [`truncation_set_lw`] in whitened geometry.
///
/// # Errors
/// As [`truncation_set_cov`], but a single-linkage history is also
/// rejected.
pub fn truncation_set_lw_cov(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
    cov: &CovFactor,
) -> Result<Truncation> {
    lw_inner(x, history, pair, Some(cov))
}

/// Truncation set under single linkage.
///
/// Merging follows minimum cross-cluster distances, so the pair survives
/// exactly when every row pair straddling a cluster boundary (one row in
/// either tested cluster, the other anywhere else) stays above the final
/// merge height. Same-side and fully outside row pairs never constrain
/// the set.
///
/// # Errors
/// As [`truncation_set`], but only single-linkage histories are accepted.
pub fn truncation_set_single(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
) -> Result<Truncation> {
    single_inner(x, history, pair, None)
}

/// [`truncation_set_single`] in whitened geometry.
///
/// # Errors
/// As [`truncation_set_cov`], but only single-linkage histories are
/// accepted.
pub fn truncation_set_single_cov(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
    cov: &CovFactor,
) -> Result<Truncation> {
    single_inner(x, history, pair, Some(cov))
}

/// Shared validation: the history fits the data, both clusters sit at the
/// cut, and the perturbation geometry is well defined.
fn prepared(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
    cov: Option<&CovFactor>,
) -> Result<Geometry> {
    if history.n() != x.n() {
        return Err(Error::BadParameter(format!(
            "clustering was built from {} rows but the data has n={}",
            history.n(),
            x.n()
        )));
    }
    for side in [pair.c1(), pair.c2()] {
        if history.find_cut_id(side).is_none() {
            return Err(Error::InvalidPair(format!(
                "cluster {:?} is not one of the {} clusters at the cut",
                side.members(),
                history.k()
            )));
        }
    }
    let nu = contrast_vector(pair, x.n())?;
    geometry(x, &nu, cov)
}

fn lw_inner(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
    cov: Option<&CovFactor>,
) -> Result<Truncation> {
    if !history.linkage().is_lance_williams() {
        return Err(Error::BadParameter(format!(
            "{} linkage has no Lance-Williams update",
            history.linkage()
        )));
    }
    let geo = prepared(x, history, pair, cov)?;

    let n = x.n();
    let steps = history.steps();
    let linkage = history.linkage();
    let losing = history.losing_pairs();

    // Quadratic coefficients for every pair of live slots, flattened n x n.
    // A merged cluster reuses the smaller slot of its two parents, exactly
    // as the clustering itself did, so replayed coefficients follow the
    // same arithmetic as the recorded dissimilarities.
    let mut qa = vec![0.0; n * n];
    let mut qb = vec![0.0; n * n];
    let mut qc = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let q = geo.row_pair(x, i, j);
            qa[i * n + j] = q.a;
            qa[j * n + i] = q.a;
            qb[i * n + j] = q.b;
            qb[j * n + i] = q.b;
            qc[i * n + j] = q.c;
            qc[j * n + i] = q.c;
        }
    }

    // Losing pairs bucketed by the first step at which they coexist; each
    // is harvested from the replayed state for exactly that step.
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); steps.len() + 1];
    for (k, p) in losing.iter().enumerate() {
        buckets[p.l].push(k);
    }

    let mut slot_of: Vec<usize> = (0..n).collect();
    slot_of.resize(n + steps.len(), usize::MAX);
    let mut size = vec![1usize; n];
    let mut live = vec![true; n];
    let mut sets: Vec<IntervalSet> = Vec::with_capacity(losing.len());
    let mut near_tie = false;

    if !steps.is_empty() {
        harvest(
            &buckets[1], &losing, &slot_of, &qa, &qb, &qc, n, geo.tau, &mut sets, &mut near_tie,
        );
    }
    for (idx, st) in steps.iter().enumerate() {
        let t = idx + 1;
        let (sa, sb) = (slot_of[st.a], slot_of[st.b]);
        let (s1, s2) = (size[sa], size[sb]);
        let (keep, kill) = (sa.min(sb), sa.max(sb));
        let q12 = PhiQuadratic {
            a: qa[sa * n + sb],
            b: qb[sa * n + sb],
            c: qc[sa * n + sb],
        };
        debug_assert!(
            {
                let eval = q12.eval(geo.tau);
                let scale = (q12.a * geo.tau * geo.tau).abs()
                    + (q12.b * geo.tau).abs()
                    + q12.c.abs();
                (eval - st.height).abs() <= 1e-8 * scale.max(st.height.abs()).max(1.0)
            },
            "replayed quadratic disagrees with the recorded merge height at step {t}"
        );
        for r in 0..n {
            if !live[r] || r == sa || r == sb {
                continue;
            }
            let (a1, a2, be) = linkage
                .lw_coefficients(s1, s2, size[r])
                .expect("Lance-Williams linkage");
            let na = a1 * qa[sa * n + r] + a2 * qa[sb * n + r] + be * q12.a;
            let nb = a1 * qb[sa * n + r] + a2 * qb[sb * n + r] + be * q12.b;
            let nc = a1 * qc[sa * n + r] + a2 * qc[sb * n + r] + be * q12.c;
            qa[keep * n + r] = na;
            qa[r * n + keep] = na;
            qb[keep * n + r] = nb;
            qb[r * n + keep] = nb;
            qc[keep * n + r] = nc;
            qc[r * n + keep] = nc;
        }
        live[kill] = false;
        size[keep] = s1 + s2;
        slot_of[n - 1 + t] = keep;
        if t < steps.len() {
            harvest(
                &buckets[t + 1], &losing, &slot_of, &qa, &qb, &qc, n, geo.tau, &mut sets,
                &mut near_tie,
            );
        }
    }

    let set = IntervalSet::intersect_all(&sets);
    debug_assert!(
        near_tie || set.contains(geo.tau),
        "observed statistic fell outside its own truncation set"
    );
    Ok(Truncation { set, near_tie })
}

#[allow(clippy::too_many_arguments)]
fn harvest(
    bucket: &[usize],
    losing: &[crate::hclust::LosingPair],
    slot_of: &[usize],
    qa: &[f64],
    qb: &[f64],
    qc: &[f64],
    n: usize,
    tau: f64,
    sets: &mut Vec<IntervalSet>,
    near_tie: &mut bool,
) {
    for &k in bucket {
        let p = &losing[k];
        let (sa, sb) = (slot_of[p.a], slot_of[p.b]);
        let quad = PhiQuadratic {
            a: qa[sa * n + sb],
            b: qb[sa * n + sb],
            c: qc[sa * n + sb],
        };
        if (quad.eval(tau) - p.h).abs() <= NEAR_TIE_RTOL * p.h.abs() {
            *near_tie = true;
        }
        sets.push(solve_quadratic_gt(quad, p.h));
    }
}

fn single_inner(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
    cov: Option<&CovFactor>,
) -> Result<Truncation> {
    if history.linkage() != Linkage::Single {
        return Err(Error::BadParameter(format!(
            "expected single linkage, got {}",
            history.linkage()
        )));
    }
    let geo = prepared(x, history, pair, cov)?;
    let steps = history.steps();
    if steps.is_empty() {
        return Ok(Truncation {
            set: IntervalSet::full(),
            near_tie: false,
        });
    }
    let h = steps[steps.len() - 1].height;

    let n = x.n();
    let mut side = vec![0u8; n];
    for &i in pair.c1().members() {
        side[i] = 1;
    }
    for &i in pair.c2().members() {
        side[i] = 2;
    }

    let mut sets = Vec::new();
    let mut near_tie = false;
    for i in 0..n {
        for j in (i + 1)..n {
            if side[i] == side[j] {
                continue;
            }
            let quad = geo.row_pair(x, i, j);
            if (quad.eval(geo.tau) - h).abs() <= NEAR_TIE_RTOL * h.abs() {
                near_tie = true;
            }
            sets.push(solve_quadratic_gt(quad, h));
        }
    }
    let set = IntervalSet::intersect_all(&sets);
    debug_assert!(
        near_tie || set.contains(geo.tau),
        "observed statistic fell outside its own truncation set"
    );
    Ok(Truncation { set, near_tie })
}

/// True when clustering `x` into `k` clusters reproduces both sides of
/// `pair` exactly.
///
/// # Errors
/// Propagates clustering failures (`k` out of range, malformed data).
pub fn cluster_pair_preserved(
    x: &DataMatrix,
    linkage: Linkage,
    k: usize,
    pair: &ClusterPair,
) -> Result<bool> {
    let history = run_agglomerative(x, linkage, k)?;
    Ok(history.find_cut_id(pair.c1()).is_some() && history.find_cut_id(pair.c2()).is_some())
}

/// Grid-reclustering oracle: perturbs the data set at each grid value,
/// reclusters from scratch, and reports whether both clusters of the pair
/// survive. Slow but assumption-free; the exact truncation sets are
/// validated against it.
///
/// # Errors
/// Propagates perturbation failures (negative or non-finite grid values,
/// coincident cluster means) and clustering failures.
pub fn reclustering_membership(
    x: &DataMatrix,
    linkage: Linkage,
    k: usize,
    pair: &ClusterPair,
    phi_grid: &[f64],
) -> Result<Vec<bool>> {
    phi_grid
        .iter()
        .map(|&phi| {
            let xp = perturbed_dataset(x, pair, phi)?;
            cluster_pair_preserved(&xp, linkage, k, pair)
        })
        .collect()
}

/// [`reclustering_membership`] in whitened geometry: the perturbation
/// rescales the whitened norm of the mean difference.
///
/// # Errors
/// As [`reclustering_membership`], plus covariance dimension mismatches.
pub fn reclustering_membership_cov(
    x: &DataMatrix,
    linkage: Linkage,
    k: usize,
    pair: &ClusterPair,
    cov: &CovFactor,
    phi_grid: &[f64],
) -> Result<Vec<bool>> {
    phi_grid
        .iter()
        .map(|&phi| {
            let xp = perturbed_dataset_cov(x, pair, phi, cov)?;
            cluster_pair_preserved(&xp, linkage, k, pair)
        })
        .collect()
}

/// Evenly spaced grid of 400 values on `[0, hi]` with
/// `hi = max(4 * stat, 2 * sqrt(max_height))`, wide enough to cover both
/// the push-together and the pull-apart regime of the perturbation.
pub fn default_phi_grid(stat: f64, max_height: f64) -> Vec<f64> {
    let hi = (4.0 * stat).max(2.0 * max_height.max(0.0).sqrt());
    let points = 400;
    (0..points)
        .map(|i| hi * i as f64 / (points - 1) as f64)
        .collect()
}
