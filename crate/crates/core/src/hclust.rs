//! Agglomerative hierarchical clustering over squared Euclidean
//! dissimilarity, recording the merge metadata that truncation-set
//! computation consumes.
//!
//! Beyond the merge sequence itself, downstream code needs to know, for
//! every pair of clusters that ever coexisted, *when* they coexisted and
//! how high the dendrogram rose during that window: a cluster pair that
//! was present but never chosen constrains the perturbed data exactly on
//! that window. [`MergeHistory`] therefore records winners and heights,
//! enumerates the losing pairs with their lifetimes, and locates
//! dendrogram inversions so that window maxima cost `O(#inversions + 1)`
//! instead of a scan.
//!
//! Clusters are identified by id: leaves are `0..n-1`, and the merge at
//! 1-based step `t` creates id `n - 1 + t`. Ids never change, so a pair of
//! ids names the same pair of clusters at every step.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ClusterSet, DataMatrix};

/// The rule extending pairwise dissimilarities to dissimilarities between
/// clusters.
///
/// Five of the seven kinds (`Average`, `Weighted`, `Ward`, `Centroid`,
/// `Median`) admit a Lance-Williams update: the dissimilarity of a merged
/// cluster to a third cluster is a fixed linear combination of the three
/// pre-merge dissimilarities. `Single` and `Complete` use the minimum and
/// maximum of the two cross dissimilarities instead.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    /// Mean of all cross-pair dissimilarities (UPGMA).
    Average,
    /// Unweighted midpoint recursion (WPGMA).
    Weighted,
    /// Ward's minimum-variance criterion.
    Ward,
    /// Squared distance between cluster centroids.
    Centroid,
    /// Squared distance between recursively tracked midpoints.
    Median,
    /// Minimum cross-pair dissimilarity.
    Single,
    /// Maximum cross-pair dissimilarity.
    Complete,
}

impl Linkage {
    /// All seven supported linkages.
    pub const ALL: [Linkage; 7] = [
        Linkage::Average,
        Linkage::Weighted,
        Linkage::Ward,
        Linkage::Centroid,
        Linkage::Median,
        Linkage::Single,
        Linkage::Complete,
    ];

    /// Whether this linkage follows a Lance-Williams update.
    pub fn is_lance_williams(self) -> bool {
        !matches!(self, Linkage::Single | Linkage::Complete)
    }

    /// Whether the dendrogram can contain inversions (merge heights that
    /// decrease from one step to the next).
    pub fn produces_inversions(self) -> bool {
        matches!(self, Linkage::Centroid | Linkage::Median)
    }

    /// Lance-Williams coefficients `(α1, α2, β)` for merging clusters of
    /// sizes `s1` and `s2`, relative to a third cluster of size `s3`.
    /// `None` for single and complete linkage.
    pub fn lw_coefficients(self, s1: usize, s2: usize, s3: usize) -> Option<(f64, f64, f64)> {
        let (s1, s2, s3) = (s1 as f64, s2 as f64, s3 as f64);
        match self {
            Linkage::Average => Some((s1 / (s1 + s2), s2 / (s1 + s2), 0.0)),
            Linkage::Weighted => Some((0.5, 0.5, 0.0)),
            Linkage::Ward => {
                let d = s1 + s2 + s3;
                Some(((s1 + s3) / d, (s2 + s3) / d, -s3 / d))
            }
            Linkage::Centroid => {
                let s = s1 + s2;
                Some((s1 / s, s2 / s, -s1 * s2 / (s * s)))
            }
            Linkage::Median => Some((0.5, 0.5, -0.25)),
            Linkage::Single | Linkage::Complete => None,
        }
    }
}

impl std::fmt::Display for Linkage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Linkage::Average => "average",
            Linkage::Weighted => "weighted",
            Linkage::Ward => "ward",
            Linkage::Centroid => "centroid",
            Linkage::Median => "median",
            Linkage::Single => "single",
            Linkage::Complete => "complete",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Linkage> {
        match s {
            "average" => Ok(Linkage::Average),
            "weighted" => Ok(Linkage::Weighted),
            "ward" => Ok(Linkage::Ward),
            "centroid" => Ok(Linkage::Centroid),
            "median" => Ok(Linkage::Median),
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            other => Err(Error::BadParameter(format!(
                "unknown linkage {other:?}; expected one of average, weighted, ward, centroid, median, single, complete"
            ))),
        }
    }
}

/// One merge: the ids of the two clusters chosen at this step and the
/// dissimilarity at which they merged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeStep {
    /// Smaller id of the winning pair.
    pub a: usize,
    /// Larger id of the winning pair.
    pub b: usize,
    /// Dissimilarity `d(a, b; x)` under the linkage.
    pub height: f64,
}

/// A pair of clusters that coexisted during some window of steps without
/// ever being the merging pair. Each losing pair contributes one
/// inequality to the truncation set: its dissimilarity must stay above
/// the maximum merge height `h` over the window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LosingPair {
    /// Smaller cluster id.
    pub a: usize,
    /// Larger cluster id.
    pub b: usize,
    /// First step (1-based) at which both clusters exist.
    pub l: usize,
    /// Last step at which both exist without merging together.
    pub u: usize,
    /// Maximum merge height over steps `l..=u`.
    pub h: f64,
}

/// The complete record of an agglomerative clustering run cut at `k`
/// clusters: `n - k` merge steps plus the cluster membership table.
#[derive(Clone, Debug)]
pub struct MergeHistory {
    n: usize,
    k: usize,
    linkage: Linkage,
    steps: Vec<MergeStep>,
    members: Vec<Vec<usize>>,
    final_ids: Vec<usize>,
    tie_broken: bool,
}

/// Squared Euclidean distance between rows `i` and `i2` of `x`.
///
/// Panics if either index is out of range.
pub fn pairwise_dissimilarity(x: &DataMatrix, i: usize, i2: usize) -> f64 {
    let (a, b) = (x.row(i), x.row(i2));
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum()
}

/// Index of the nearest live slot to `p`, with its dissimilarity.
/// Scans in ascending order with a strict comparison, so equal values
/// resolve to the smallest index.
fn nearest(d: &[f64], live: &[bool], n: usize, p: usize) -> (usize, f64) {
    let mut arg = usize::MAX;
    let mut val = f64::INFINITY;
    for q in 0..n {
        if q == p || !live[q] {
            continue;
        }
        let v = d[p * n + q];
        if v < val {
            val = v;
            arg = q;
        }
    }
    (arg, val)
}

/// Runs agglomerative clustering of the rows of `x` under `linkage`,
/// stopping when `k` clusters remain.
///
/// Each step merges the pair of clusters with the smallest current
/// dissimilarity. Exact ties are broken toward the pair whose clusters
/// contain the smallest row indices, and the returned history notes that
/// a tie occurred (the selective guarantees downstream assume a unique
/// minimizer). The implementation keeps a stored dissimilarity matrix
/// with per-slot nearest-neighbor caching: `O(n²)` memory, `O(n²)`
/// typical time, `O(n³)` worst case.
pub fn run_agglomerative(x: &DataMatrix, linkage: Linkage, k: usize) -> Result<MergeHistory> {
    let n = x.n();
    if k < 1 || k > n {
        return Err(Error::BadParameter(format!(
            "cluster count k={k} out of range 1..={n}"
        )));
    }
    let n_steps = n - k;

    let mut d = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = pairwise_dissimilarity(x, i, j);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }

    let mut live = vec![true; n];
    let mut slot_id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut nn_arg = vec![usize::MAX; n];
    let mut nn_val = vec![f64::INFINITY; n];
    for p in 0..n {
        let (arg, val) = nearest(&d, &live, n, p);
        nn_arg[p] = arg;
        nn_val[p] = val;
    }

    let mut steps = Vec::with_capacity(n_steps);
    let mut tie_broken = false;

    for step in 1..=n_steps {
        let mut best_p = usize::MAX;
        let mut best_v = f64::INFINITY;
        for p in 0..n {
            if live[p] && nn_val[p] < best_v {
                best_v = nn_val[p];
                best_p = p;
            }
        }
        // Each minimizing pair contributes both of its slots to the set of
        // slots whose nearest value equals the minimum, so a third such
        // slot can only come from a second distinct pair: an exact tie.
        let at_min = (0..n).filter(|&p| live[p] && nn_val[p] == best_v).count();
        if at_min > 2 {
            tie_broken = true;
        }
        let (p, q) = {
            let o = nn_arg[best_p];
            (best_p.min(o), best_p.max(o))
        };

        let ida = slot_id[p].min(slot_id[q]);
        let idb = slot_id[p].max(slot_id[q]);
        steps.push(MergeStep { a: ida, b: idb, height: best_v });
        if matches!(linkage, Linkage::Single | Linkage::Complete) {
            debug_assert!(steps.len() < 2 || steps[steps.len() - 2].height <= best_v);
        }

        let new_id = n - 1 + step;
        let mut merged: Vec<usize> =
            Vec::with_capacity(members[slot_id[p]].len() + members[slot_id[q]].len());
        merged.extend_from_slice(&members[slot_id[p]]);
        merged.extend_from_slice(&members[slot_id[q]]);
        merged.sort_unstable();
        members.push(merged);

        let (s1, s2) = (size[p], size[q]);
        let dpq = best_v;
        live[q] = false;
        for r in 0..n {
            if r == p || !live[r] {
                continue;
            }
            let (dpr, dqr) = (d[p * n + r], d[q * n + r]);
            let v = match linkage {
                Linkage::Single => dpr.min(dqr),
                Linkage::Complete => dpr.max(dqr),
                lw => {
                    let (a1, a2, beta) = lw.lw_coefficients(s1, s2, size[r]).unwrap();
                    a1 * dpr + a2 * dqr + beta * dpq
                }
            };
            d[p * n + r] = v;
            d[r * n + p] = v;
        }
        slot_id[p] = new_id;
        size[p] = s1 + s2;

        // The merged cluster reuses slot p; slot q is dead. Nearest
        // entries pointing at either slot are stale and rescanned; all
        // others can only improve via the new row.
        if step < n_steps {
            let (arg, val) = nearest(&d, &live, n, p);
            nn_arg[p] = arg;
            nn_val[p] = val;
            for r in 0..n {
                if r == p || !live[r] {
                    continue;
                }
                if nn_arg[r] == p || nn_arg[r] == q {
                    let (arg, val) = nearest(&d, &live, n, r);
                    nn_arg[r] = arg;
                    nn_val[r] = val;
                } else if d[r * n + p] < nn_val[r] {
                    nn_arg[r] = p;
                    nn_val[r] = d[r * n + p];
                }
            }
        }
    }

    let mut final_ids: Vec<usize> = (0..n).filter(|&p| live[p]).map(|p| slot_id[p]).collect();
    final_ids.sort_by_key(|&id| members[id][0]);

    Ok(MergeHistory {
        n,
        k,
        linkage,
        steps,
        members,
        final_ids,
        tie_broken,
    })
}

impl MergeHistory {
    /// Number of data rows.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Retained cluster count.
    pub fn k(&self) -> usize {
        self.k
    }

    /// The linkage the run used.
    pub fn linkage(&self) -> Linkage {
        self.linkage
    }

    /// The `n - k` merge steps in order.
    pub fn steps(&self) -> &[MergeStep] {
        &self.steps
    }

    /// Sorted row indices of the cluster with the given id. Leaf ids are
    /// `0..n-1`; the merge at 1-based step `t` created id `n - 1 + t`.
    ///
    /// Panics if the id was never created.
    pub fn members(&self, id: usize) -> &[usize] {
        &self.members[id]
    }

    /// Whether any step's minimizer was an exact tie, broken toward the
    /// smallest row indices.
    pub fn tie_broken(&self) -> bool {
        self.tie_broken
    }

    /// Ids of the clusters in the final `k`-clustering, ordered by
    /// smallest member.
    pub fn cut_ids(&self) -> &[usize] {
        &self.final_ids
    }

    /// The final `k`-cluster partition, each cluster with sorted members,
    /// ordered by smallest member.
    pub fn cut_clusters(&self) -> Vec<ClusterSet> {
        self.final_ids
            .iter()
            .map(|&id| ClusterSet::new(self.members[id].clone()).expect("cut clusters are nonempty"))
            .collect()
    }

    /// The id of the final cluster with exactly these members, if any.
    pub fn find_cut_id(&self, cluster: &ClusterSet) -> Option<usize> {
        self.final_ids
            .iter()
            .copied()
            .find(|&id| self.members[id] == cluster.members())
    }

    /// Steps `t` (1-based, `t < n - k`) where the dendrogram inverts:
    /// `height(t) > height(t+1)`. Empty for every linkage except centroid
    /// and median.
    pub fn inversion_steps(&self) -> Vec<usize> {
        self.steps
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].height > w[1].height)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Maximum merge height over a lifetime window, via the inversion
    /// list: the running maximum of heights over `l..=u` is attained
    /// either at `u` or at an inversion step inside `[l, u)`, because
    /// heights are nondecreasing between inversions.
    fn window_height(&self, inversions: &[usize], l: usize, u: usize) -> f64 {
        let mut h = self.steps[u - 1].height;
        let start = inversions.partition_point(|&t| t < l);
        for &t in &inversions[start..] {
            if t >= u {
                break;
            }
            h = h.max(self.steps[t - 1].height);
        }
        h
    }

    /// Maximum merge height over the lifetime window of a losing pair.
    pub fn max_merge_height(&self, pair: &LosingPair) -> f64 {
        self.window_height(&self.inversion_steps(), pair.l, pair.u)
    }

    /// Every pair of clusters that coexisted at some step without merging
    /// together there, with its lifetime `[l, u]` and window height `h`.
    ///
    /// Enumerates singleton pairs (alive from step 1) plus, for each
    /// merge, the new cluster against everything alive after that merge.
    /// The lifetime arithmetic drops pairs that only ever coexist at the
    /// step where they themselves merge (the step-1 winner and any pair
    /// that wins immediately after one side is created).
    pub fn losing_pairs(&self) -> Vec<LosingPair> {
        let n = self.n;
        let n_steps = self.steps.len();
        if n_steps == 0 {
            return Vec::new();
        }

        let total_ids = n + n_steps;
        let mut life_l = vec![1usize; total_ids];
        let mut life_u = vec![n_steps; total_ids];
        for (idx, st) in self.steps.iter().enumerate() {
            let t = idx + 1;
            life_l[n - 1 + t] = t + 1;
            life_u[st.a] = t;
            life_u[st.b] = t;
        }

        let inversions = self.inversion_steps();
        let mut out = Vec::new();
        let mut consider = |ida: usize, idb: usize| {
            let (a, b) = (ida.min(idb), ida.max(idb));
            let l = life_l[a].max(life_l[b]);
            let mut u = life_u[a].min(life_u[b]);
            if u >= 1 {
                let w = &self.steps[u - 1];
                if w.a == a && w.b == b {
                    u -= 1;
                }
            }
            if l <= u {
                out.push(LosingPair {
                    a,
                    b,
                    l,
                    u,
                    h: self.window_height(&inversions, l, u),
                });
            }
        };

        for i in 0..n {
            for j in (i + 1)..n {
                consider(i, j);
            }
        }
        let mut alive: Vec<usize> = (0..n).collect();
        for s in 1..n_steps {
            let st = self.steps[s - 1];
            alive.retain(|&id| id != st.a && id != st.b);
            let created = n - 1 + s;
            for &g in &alive {
                consider(created, g);
            }
            alive.push(created);
        }
        out
    }
}
