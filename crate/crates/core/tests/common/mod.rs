#![allow(dead_code)]

//! Shared oracles for integration tests: a from-scratch agglomerative
//! clusterer that recomputes every cluster dissimilarity from its
//! definition (no recursion on the dissimilarity matrix), and an adaptive
//! quadrature for truncated chi survival probabilities.

use postclust::hclust::Linkage;
use postclust::model::DataMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, q: usize) -> DataMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..q).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    DataMatrix::from_rows(&rows).unwrap()
}

/// A matrix with `groups` shifted blocks of rows, to vary cluster shapes.
pub fn shifted_matrix(
    rng: &mut ChaCha8Rng,
    n: usize,
    q: usize,
    groups: usize,
    shift: f64,
) -> DataMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let g = i % groups;
            (0..q)
                .map(|j| {
                    let mean = if j == g % q { shift * g as f64 } else { 0.0 };
                    let z: f64 = StandardNormal.sample(rng);
                    mean + z
                })
                .collect()
        })
        .collect();
    DataMatrix::from_rows(&rows).unwrap()
}

fn d2(x: &DataMatrix, i: usize, j: usize) -> f64 {
    x.row(i)
        .iter()
        .zip(x.row(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Cluster state carrying everything the from-scratch definitions need.
struct ScratchCluster {
    id: usize,
    members: Vec<usize>,
    /// Per-member weights for the halving-weight linkage; sum to 1.
    weights: Vec<f64>,
    centroid: Vec<f64>,
    midpoint: Vec<f64>,
}

/// One merge of the from-scratch clusterer: the two cluster ids (leaves
/// are `0..n-1`, the merge at 1-based step `t` creates `n - 1 + t`) and
/// the dissimilarity at which they merged.
pub struct ScratchMerge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Agglomerative clustering where every inter-cluster dissimilarity is
/// recomputed from the linkage's definition on the raw points. Ties break
/// toward the lexicographically smallest id pair. Returns the merges and
/// the final clusters' sorted member lists.
pub fn scratch_clustering(
    x: &DataMatrix,
    linkage: Linkage,
    k: usize,
) -> (Vec<ScratchMerge>, Vec<Vec<usize>>) {
    let n = x.n();
    let q = x.q();
    assert!(k >= 1 && k <= n);
    let mut alive: Vec<ScratchCluster> = (0..n)
        .map(|i| ScratchCluster {
            id: i,
            members: vec![i],
            weights: vec![1.0],
            centroid: x.row(i).to_vec(),
            midpoint: x.row(i).to_vec(),
        })
        .collect();

    let dissim = |a: &ScratchCluster, b: &ScratchCluster| -> f64 {
        match linkage {
            Linkage::Average => {
                let mut s = 0.0;
                for &i in &a.members {
                    for &j in &b.members {
                        s += d2(x, i, j);
                    }
                }
                s / (a.members.len() * b.members.len()) as f64
            }
            Linkage::Weighted => {
                let mut s = 0.0;
                for (&i, &wi) in a.members.iter().zip(&a.weights) {
                    for (&j, &wj) in b.members.iter().zip(&b.weights) {
                        s += wi * wj * d2(x, i, j);
                    }
                }
                s
            }
            Linkage::Ward => {
                let (na, nb) = (a.members.len() as f64, b.members.len() as f64);
                let gap: f64 = a
                    .centroid
                    .iter()
                    .zip(&b.centroid)
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum();
                2.0 * na * nb / (na + nb) * gap
            }
            Linkage::Centroid => a
                .centroid
                .iter()
                .zip(&b.centroid)
                .map(|(u, v)| (u - v) * (u - v))
                .sum(),
            Linkage::Median => a
                .midpoint
                .iter()
                .zip(&b.midpoint)
                .map(|(u, v)| (u - v) * (u - v))
                .sum(),
            Linkage::Single => {
                let mut s = f64::INFINITY;
                for &i in &a.members {
                    for &j in &b.members {
                        s = s.min(d2(x, i, j));
                    }
                }
                s
            }
            Linkage::Complete => {
                let mut s = f64::NEG_INFINITY;
                for &i in &a.members {
                    for &j in &b.members {
                        s = s.max(d2(x, i, j));
                    }
                }
                s
            }
        }
    };

    let mut merges = Vec::with_capacity(n - k);
    for t in 1..=(n - k) {
        let mut best: Option<(f64, usize, usize)> = None;
        for u in 0..alive.len() {
            for v in (u + 1)..alive.len() {
                let (lo, hi) = if alive[u].id < alive[v].id {
                    (u, v)
                } else {
                    (v, u)
                };
                let d = dissim(&alive[u], &alive[v]);
                let key = (d, alive[lo].id, alive[hi].id);
                let better = match best {
                    None => true,
                    Some(b) => (key.0, key.1, key.2) < b,
                };
                if better {
                    best = Some(key);
                }
            }
        }
        let (height, ida, idb) = best.expect("at least one pair while merging");
        let pa = alive.iter().position(|c| c.id == ida).unwrap();
        let pb = alive.iter().position(|c| c.id == idb).unwrap();
        let (pa, pb) = (pa.min(pb), pa.max(pb));
        let cb = alive.swap_remove(pb);
        let ca = alive.swap_remove(pa);

        let (na, nb) = (ca.members.len() as f64, cb.members.len() as f64);
        let centroid: Vec<f64> = (0..q)
            .map(|j| (na * ca.centroid[j] + nb * cb.centroid[j]) / (na + nb))
            .collect();
        let midpoint: Vec<f64> = (0..q)
            .map(|j| 0.5 * (ca.midpoint[j] + cb.midpoint[j]))
            .collect();
        let mut members = ca.members.clone();
        members.extend(&cb.members);
        let mut weights: Vec<f64> = ca.weights.iter().map(|w| w / 2.0).collect();
        weights.extend(cb.weights.iter().map(|w| w / 2.0));

        merges.push(ScratchMerge {
            a: ida,
            b: idb,
            height,
        });
        alive.push(ScratchCluster {
            id: n - 1 + t,
            members,
            weights,
            centroid,
            midpoint,
        });
    }

    let mut finals: Vec<Vec<usize>> = alive
        .into_iter()
        .map(|c| {
            let mut m = c.members;
            m.sort_unstable();
            m
        })
        .collect();
    finals.sort();
    (merges, finals)
}

/// Adaptive Simpson integration to the given absolute tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
        }
    }
    if a >= b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 48)
}

/// Survival probability of a chi variable with `q` degrees of freedom
/// scaled by `c` and truncated to the union of `support` intervals,
/// computed by adaptive quadrature of the density. Infinite upper
/// endpoints are cut off far into the tail.
pub fn survival_quadrature(q: usize, c: f64, support: &[(f64, f64)], t: f64) -> f64 {
    let density = move |u: f64| -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        (((q - 1) as f64) * u.ln() - u * u / (2.0 * c * c)).exp()
    };
    let cutoff = c * ((q as f64).sqrt() + 42.0);
    let clip = |lo: f64, hi: f64| -> (f64, f64) { (lo.max(0.0), hi.min(cutoff)) };

    let mut den = 0.0;
    let mut num = 0.0;
    for &(lo, hi) in support {
        let (lo, hi) = clip(lo, hi);
        if lo >= hi {
            continue;
        }
        let peak = density(lo.max(c * ((q - 1) as f64).sqrt()).min(hi));
        let tol = 1e-13 * (peak * (hi - lo)).max(f64::MIN_POSITIVE);
        den += adaptive_simpson(&density, lo, hi, tol);
        let nlo = lo.max(t);
        if nlo < hi {
            num += adaptive_simpson(&density, nlo, hi, tol);
        }
    }
    if den == 0.0 {
        return f64::NAN;
    }
    (num / den).clamp(0.0, 1.0)
}

/// Uniform grid of `points` values on `[0, hi]`.
pub fn grid(hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| hi * i as f64 / (points - 1) as f64)
        .collect()
}

/// Draws a strictly increasing sequence of `2 * parts` interval endpoints
/// in `(lo, hi)` and pairs them into disjoint intervals.
pub fn random_support(
    rng: &mut ChaCha8Rng,
    parts: usize,
    lo: f64,
    hi: f64,
) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = (0..2 * parts)
        .map(|_| rng.random_range(lo..hi))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.chunks(2).map(|c| (c[0], c[1])).collect()
}
