//! Simulation studies.
//!
//! Generates Gaussian data around fixed mean structures and reproduces the
//! calibration and power experiments: null-calibration QQ data, conditional
//! power and recovery probability over a separation grid, plug-in-scale
//! null behavior under sample splitting, and power as a function of the
//! realized effect size. Every study is deterministic given its seed, with
//! per-replicate seeds derived from disjoint streams so data generation,
//! pair selection, Monte Carlo sampling, and sample splitting never share
//! randomness.

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hclust::{run_agglomerative, Linkage, MergeHistory};
use crate::inference::{
    estimate_sigma, selective_p_exact, selective_p_monte_carlo, selective_p_plugin, wald_p,
    Method, TestResult,
};
use crate::model::{ClusterPair, ClusterSet, DataMatrix};
use crate::seeding::{stream, sub_seed};

/// Mean structure of the generating model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MeanKind {
    /// Every row mean is zero: no cluster structure at all.
    GlobalNull,
    /// Three equally sized clusters whose mean vectors sit at the corners
    /// of an equilateral triangle with side `delta`: `-delta/2` and
    /// `delta/2` in the first coordinate, and `sqrt(3) * delta / 2` in the
    /// last.
    ThreeEquidistant {
        /// Pairwise distance between the three cluster means.
        delta: f64,
    },
    /// Two equally sized clusters at `delta/2` in the first coordinate and
    /// `-delta/2` in the last, hence `delta / sqrt(2)` apart.
    TwoCluster {
        /// Coordinate offset; the means end up `delta / sqrt(2)` apart.
        delta: f64,
    },
}

/// A Gaussian generating model: rows drawn independently around per-row
/// means with isotropic noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanModel {
    kind: MeanKind,
    n: usize,
    q: usize,
    sigma: f64,
}

impl MeanModel {
    fn validated(kind: MeanKind, n: usize, q: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::BadParameter(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        if let MeanKind::ThreeEquidistant { delta } | MeanKind::TwoCluster { delta } = kind {
            if !(delta >= 0.0 && delta.is_finite()) {
                return Err(Error::BadParameter(format!(
                    "delta must be nonnegative and finite, got {delta}"
                )));
            }
            if q < 2 {
                return Err(Error::BadParameter(
                    "clustered mean structures need q >= 2".into(),
                ));
            }
        }
        Ok(MeanModel { kind, n, q, sigma })
    }

    /// A structureless model: all means zero.
    ///
    /// # Errors
    /// [`Error::BadParameter`] for empty shapes or a bad `sigma`.
    pub fn global_null(n: usize, q: usize, sigma: f64) -> Result<Self> {
        if n == 0 || q == 0 {
            return Err(Error::BadParameter("n and q must be positive".into()));
        }
        Self::validated(MeanKind::GlobalNull, n, q, sigma)
    }

    /// Three equally sized clusters with pairwise mean distance exactly
    /// `delta`.
    ///
    /// # Errors
    /// [`Error::BadParameter`] unless `n` is a positive multiple of 3,
    /// `q >= 2`, and `delta` and `sigma` are in range.
    pub fn three_equidistant(n: usize, q: usize, sigma: f64, delta: f64) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(3) {
            return Err(Error::BadParameter(format!(
                "n must be a positive multiple of 3, got {n}"
            )));
        }
        Self::validated(MeanKind::ThreeEquidistant { delta }, n, q, sigma)
    }

    /// Two equally sized clusters with mean distance `delta / sqrt(2)`.
    ///
    /// # Errors
    /// [`Error::BadParameter`] unless `n` is a positive multiple of 2,
    /// `q >= 2`, and `delta` and `sigma` are in range.
    pub fn two_cluster(n: usize, q: usize, sigma: f64, delta: f64) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::BadParameter(format!(
                "n must be a positive multiple of 2, got {n}"
            )));
        }
        Self::validated(MeanKind::TwoCluster { delta }, n, q, sigma)
    }

    /// Rows.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Features.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Noise scale.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The mean structure.
    pub fn kind(&self) -> MeanKind {
        self.kind
    }

    /// True cluster label of row `i` (0 under the global null).
    pub fn label(&self, i: usize) -> usize {
        match self.kind {
            MeanKind::GlobalNull => 0,
            MeanKind::ThreeEquidistant { .. } => i / (self.n / 3),
            MeanKind::TwoCluster { .. } => i / (self.n / 2),
        }
    }

    /// Mean of entry `(i, j)`.
    pub fn mean(&self, i: usize, j: usize) -> f64 {
        match self.kind {
            MeanKind::GlobalNull => 0.0,
            MeanKind::ThreeEquidistant { delta } => match self.label(i) {
                0 if j == 0 => -0.5 * delta,
                1 if j == self.q - 1 => 3f64.sqrt() * 0.5 * delta,
                2 if j == 0 => 0.5 * delta,
                _ => 0.0,
            },
            MeanKind::TwoCluster { delta } => match self.label(i) {
                0 if j == 0 => 0.5 * delta,
                1 if j == self.q - 1 => -0.5 * delta,
                _ => 0.0,
            },
        }
    }

    /// The true clusters as row index sets (a single set under the global
    /// null).
    pub fn true_clusters(&self) -> Vec<Vec<usize>> {
        let groups = match self.kind {
            MeanKind::GlobalNull => 1,
            MeanKind::ThreeEquidistant { .. } => 3,
            MeanKind::TwoCluster { .. } => 2,
        };
        let size = self.n / groups;
        (0..groups)
            .map(|g| (g * size..(g + 1) * size).collect())
            .collect()
    }

    /// Average of the true row means over `members`, length `q`.
    fn mean_over(&self, members: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.q];
        for &i in members {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.mean(i, j);
            }
        }
        for o in &mut out {
            *o /= members.len() as f64;
        }
        out
    }
}

/// Draws one data set from the model: independent Gaussian rows around the
/// model means. Deterministic given `seed`.
pub fn generate(model: &MeanModel, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = Vec::with_capacity(model.n * model.q);
    for i in 0..model.n {
        for j in 0..model.q {
            let z: f64 = StandardNormal.sample(&mut rng);
            flat.push(model.mean(i, j) + model.sigma * z);
        }
    }
    DataMatrix::from_flat(model.n, model.q, flat).expect("finite draws")
}

/// Picks one unordered pair of clusters from the cut, uniformly at random,
/// independent of the data given the clustering.
///
/// # Errors
/// [`Error::BadParameter`] when the cut has fewer than two clusters.
pub fn random_cut_pair(history: &MergeHistory, seed: u64) -> Result<ClusterPair> {
    let k = history.k();
    if k < 2 {
        return Err(Error::BadParameter(format!(
            "need at least two clusters to pick a pair, the cut has {k}"
        )));
    }
    let cut = history.cut_clusters();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut index = rng.random_range(0..k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            if index == 0 {
                return ClusterPair::new(cut[i].clone(), cut[j].clone());
            }
            index -= 1;
        }
    }
    unreachable!("pair index within range")
}

/// Kolmogorov-Smirnov distance between a sample and the uniform law on
/// `[0, 1]`.
pub fn ks_statistic(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        let below = u - i as f64 / m;
        let above = (i + 1) as f64 / m - u;
        d = d.max(below).max(above);
    }
    d
}

/// Largest amount by which the empirical CDF of `values` exceeds the
/// uniform CDF; near zero when the sample is stochastically larger than
/// uniform.
pub fn cdf_excess(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        d = d.max((i + 1) as f64 / m - u);
    }
    d
}

/// One tested replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replicate {
    /// Replicate index within its study (and separation value, if the
    /// study sweeps one).
    pub rep: usize,
    /// Separation parameter of the generating model, when swept.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Observed distance between the tested cluster means.
    pub statistic: f64,
    /// Selective p-value.
    pub p_value: f64,
    /// Base-10 log of the selective p-value.
    pub log10_p: f64,
    /// Untruncated baseline p-value, when the study tracks it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wald_p: Option<f64>,
    /// Sizes of the tested pair.
    pub n1: usize,
    /// Sizes of the tested pair.
    pub n2: usize,
    /// Whether the tested pair exactly recovered two true clusters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovered: Option<bool>,
    /// Realized effect size `||mu-bar_1 - mu-bar_2|| / sigma` over the
    /// estimated clusters, when the study tracks it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effect_size: Option<f64>,
    /// Whether the selective test rejected at the study's level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected: Option<bool>,
    /// How the p-value was computed.
    pub method: Method,
}

/// A replicate that produced no record, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skip {
    /// Replicate index.
    pub rep: usize,
    /// Separation value, when swept.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Why the replicate was dropped.
    pub reason: String,
}

/// Per-separation aggregate of a power study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaAggregate {
    /// Separation value.
    pub delta: f64,
    /// Records at this separation.
    pub records: usize,
    /// Fraction of replicates whose tested pair recovered two true
    /// clusters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_probability: Option<f64>,
    /// Rejection rate among recovered pairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditional_power: Option<f64>,
    /// Unconditional rejection rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection_rate: Option<f64>,
}

/// One effect-size bin: mean rejection over records whose realized effect
/// size falls in `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectBin {
    /// Smallest effect size in the bin.
    pub lo: f64,
    /// Largest effect size in the bin.
    pub hi: f64,
    /// Records in the bin.
    pub count: usize,
    /// Mean rejection indicator in the bin.
    pub power: f64,
}

/// Study-level summaries; fields are filled per study.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Aggregates {
    /// Kolmogorov-Smirnov distance of the selective p-values from uniform.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_statistic: Option<f64>,
    /// Largest excess of the p-value CDF above the uniform CDF.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cdf_excess: Option<f64>,
    /// Selective rejection rate at the study's level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection_rate: Option<f64>,
    /// Baseline rejection rate at the study's level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wald_rejection_rate: Option<f64>,
    /// Per-separation power summaries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_delta: Option<Vec<DeltaAggregate>>,
    /// Decile-binned power over realized effect sizes, for pairs where
    /// both clusters have at least [`MIN_STRATUM_SIZE`] members.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effect_bins: Option<Vec<EffectBin>>,
    /// Decile-binned power for pairs where the smaller cluster has fewer
    /// than [`MIN_STRATUM_SIZE`] members.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effect_bins_small: Option<Vec<EffectBin>>,
}

/// Smallest per-cluster size for the main effect-size stratum.
pub const MIN_STRATUM_SIZE: usize = 10;

/// Full outcome of one simulation study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    /// Study name: `null_calibration`, `conditional_power`,
    /// `plugin_sigma`, or `effect_size`.
    pub study: String,
    /// Linkage under study.
    pub linkage: Linkage,
    /// Rows per data set.
    pub n: usize,
    /// Features per data set.
    pub q: usize,
    /// Generating noise scale.
    pub sigma: f64,
    /// Clusters cut from each dendrogram.
    pub k: usize,
    /// Replicates requested (per separation value, when swept).
    pub reps: usize,
    /// Data sets actually generated. Matches `reps` times the number of
    /// separation values except in the plug-in study, which keeps drawing
    /// until it has `reps` null replicates per separation.
    pub attempts: usize,
    /// Rejection level, for studies that reject.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Master seed.
    pub seed: u64,
    /// Per-replicate records.
    pub records: Vec<Replicate>,
    /// Replicates that produced no record.
    pub skipped: Vec<Skip>,
    /// Study-level summaries.
    pub aggregates: Aggregates,
}

impl SimReport {
    /// The report's records as CSV, one row per replicate, with a header.
    /// Absent optional fields serialize as empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "rep,delta,statistic,p_value,log10_p,wald_p,n1,n2,recovered,effect_size,rejected,method\n",
        );
        let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_b = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.rep,
                opt_f(r.delta),
                r.statistic,
                r.p_value,
                r.log10_p,
                opt_f(r.wald_p),
                r.n1,
                r.n2,
                opt_b(r.recovered),
                opt_f(r.effect_size),
                opt_b(r.rejected),
                r.method,
            ));
        }
        out
    }
}

/// Whether a per-replicate failure is expected statistical degeneracy
/// (skip and record) rather than a bug (propagate).
fn is_skippable(err: &Error) -> bool {
    matches!(
        err,
        Error::DegenerateDirection | Error::DegenerateSupport | Error::UnstableEstimate { .. }
    )
}

/// Selective test dispatch for study replicates: exact where the linkage
/// admits it, importance sampling for complete linkage.
#[allow(clippy::too_many_arguments)]
fn study_p_value(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
    linkage: Linkage,
    k: usize,
    sigma: f64,
    plugin: bool,
    mc_samples: usize,
    mc_seed: u64,
) -> Result<TestResult> {
    if linkage == Linkage::Complete {
        selective_p_monte_carlo(x, linkage, k, pair, sigma, mc_samples, mc_seed)
    } else if plugin {
        selective_p_plugin(x, history, pair, sigma)
    } else {
        selective_p_exact(x, history, pair, sigma)
    }
}

/// Null calibration: structureless data, cluster into `k`, test one
/// random pair per replicate, collect selective and baseline p-values.
///
/// # Errors
/// [`Error::BadParameter`] for bad shapes; replicate-level degeneracies
/// are recorded as skips instead.
#[allow(clippy::too_many_arguments)]
pub fn run_null_study(
    linkage: Linkage,
    n: usize,
    q: usize,
    sigma: f64,
    k: usize,
    reps: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<SimReport> {
    let model = MeanModel::global_null(n, q, sigma)?;
    let alpha = 0.05;
    let mut records = Vec::with_capacity(reps);
    let mut skipped = Vec::new();
    for rep in 0..reps {
        let x = generate(&model, sub_seed(seed, stream::DATA, rep as u64));
        let history = run_agglomerative(&x, linkage, k)?;
        let pair = random_cut_pair(&history, sub_seed(seed, stream::PAIR, rep as u64))?;
        let result = study_p_value(
            &x,
            &history,
            &pair,
            linkage,
            k,
            sigma,
            false,
            mc_samples,
            sub_seed(seed, stream::MC, rep as u64),
        );
        let result = match result {
            Ok(r) => r,
            Err(e) if is_skippable(&e) => {
                skipped.push(Skip {
                    rep,
                    delta: None,
                    reason: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let wald = wald_p(&x, &pair, sigma)?;
        records.push(Replicate {
            rep,
            delta: None,
            statistic: result.statistic,
            p_value: result.p_value,
            log10_p: result.log10_p,
            wald_p: Some(wald),
            n1: pair.c1().len(),
            n2: pair.c2().len(),
            recovered: None,
            effect_size: None,
            rejected: Some(result.p_value < alpha),
            method: result.method,
        });
    }
    let ps: Vec<f64> = records.iter().map(|r| r.p_value).collect();
    let rejection_rate = mean_indicator(records.iter().map(|r| r.p_value < alpha));
    let wald_rejection_rate =
        mean_indicator(records.iter().map(|r| r.wald_p.unwrap_or(1.0) < alpha));
    let aggregates = Aggregates {
        ks_statistic: Some(ks_statistic(&ps)),
        cdf_excess: Some(cdf_excess(&ps)),
        rejection_rate,
        wald_rejection_rate,
        ..Aggregates::default()
    };
    Ok(SimReport {
        study: "null_calibration".into(),
        linkage,
        n,
        q,
        sigma,
        k,
        reps,
        attempts: reps,
        alpha: Some(alpha),
        seed,
        records,
        skipped,
        aggregates,
    })
}

fn mean_indicator(it: impl Iterator<Item = bool>) -> Option<f64> {
    let mut count = 0usize;
    let mut hits = 0usize;
    for b in it {
        count += 1;
        hits += b as usize;
    }
    (count > 0).then(|| hits as f64 / count as f64)
}

/// Whether the tested pair is exactly two of the model's true clusters.
fn pair_recovers(model: &MeanModel, pair: &ClusterPair) -> bool {
    let truth = model.true_clusters();
    let hits = |c: &ClusterSet| truth.iter().any(|t| t.as_slice() == c.members());
    hits(pair.c1()) && hits(pair.c2())
}

/// Conditional power and recovery probability over a separation grid:
/// three equidistant true clusters, `k = 3` estimated, one random pair
/// per replicate.
///
/// # Errors
/// [`Error::BadParameter`] for bad shapes or an empty grid; replicate
/// degeneracies become skips.
#[allow(clippy::too_many_arguments)]
pub fn run_conditional_power_study(
    linkage: Linkage,
    delta_grid: &[f64],
    n: usize,
    q: usize,
    sigma: f64,
    reps: usize,
    alpha: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<SimReport> {
    if delta_grid.is_empty() {
        return Err(Error::BadParameter("empty delta grid".into()));
    }
    check_alpha(alpha)?;
    let k = 3;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut per_delta = Vec::with_capacity(delta_grid.len());
    for (di, &delta) in delta_grid.iter().enumerate() {
        let model = MeanModel::three_equidistant(n, q, sigma, delta)?;
        let mut delta_records = 0usize;
        let mut recoveries = 0usize;
        let mut cond_rejections = 0usize;
        let mut rejections = 0usize;
        for rep in 0..reps {
            let tag = ((di as u64) << 32) | rep as u64;
            let x = generate(&model, sub_seed(seed, stream::DATA, tag));
            let history = run_agglomerative(&x, linkage, k)?;
            let pair = random_cut_pair(&history, sub_seed(seed, stream::PAIR, tag))?;
            let result = study_p_value(
                &x,
                &history,
                &pair,
                linkage,
                k,
                sigma,
                false,
                mc_samples,
                sub_seed(seed, stream::MC, tag),
            );
            let result = match result {
                Ok(r) => r,
                Err(e) if is_skippable(&e) => {
                    skipped.push(Skip {
                        rep,
                        delta: Some(delta),
                        reason: e.to_string(),
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            let recovered = pair_recovers(&model, &pair);
            let rejected = result.p_value < alpha;
            delta_records += 1;
            recoveries += recovered as usize;
            rejections += rejected as usize;
            cond_rejections += (recovered && rejected) as usize;
            records.push(Replicate {
                rep,
                delta: Some(delta),
                statistic: result.statistic,
                p_value: result.p_value,
                log10_p: result.log10_p,
                wald_p: None,
                n1: pair.c1().len(),
                n2: pair.c2().len(),
                recovered: Some(recovered),
                effect_size: None,
                rejected: Some(rejected),
                method: result.method,
            });
        }
        per_delta.push(DeltaAggregate {
            delta,
            records: delta_records,
            recovery_probability: (delta_records > 0)
                .then(|| recoveries as f64 / delta_records as f64),
            conditional_power: (recoveries > 0)
                .then(|| cond_rejections as f64 / recoveries as f64),
            rejection_rate: (delta_records > 0)
                .then(|| rejections as f64 / delta_records as f64),
        });
    }
    Ok(SimReport {
        study: "conditional_power".into(),
        linkage,
        n,
        q,
        sigma,
        k,
        reps,
        attempts: reps * delta_grid.len(),
        alpha: Some(alpha),
        seed,
        records,
        skipped,
        aggregates: Aggregates {
            per_delta: Some(per_delta),
            ..Aggregates::default()
        },
    })
}

/// Largest multiple of the target record count the plug-in study will
/// generate before giving up on reaching it.
const PLUGIN_ATTEMPT_FACTOR: usize = 400;

/// Plug-in-scale null behavior under sample splitting: two true clusters,
/// the data split in half at random, the training half clustered into
/// `k = 3`, one random pair tested with the scale estimated from the test
/// half.
///
/// The null only holds when the tested pair's true mean averages agree,
/// so data sets keep being drawn until `reps` null replicates are
/// collected (or a generous attempt cap is hit); non-null draws are
/// counted in `attempts` but not recorded.
///
/// # Errors
/// [`Error::BadParameter`] for bad shapes; replicate degeneracies become
/// skips.
pub fn run_plugin_sigma_study(
    linkage: Linkage,
    delta: f64,
    n: usize,
    q: usize,
    reps: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<SimReport> {
    let sigma = 1.0;
    let model = MeanModel::two_cluster(n, q, sigma, delta)?;
    let k = 3;
    let half = n / 2;
    let cap = PLUGIN_ATTEMPT_FACTOR * reps.max(1);
    let mut attempts = 0usize;
    let mut records = Vec::with_capacity(reps);
    let mut skipped = Vec::new();
    while records.len() < reps && attempts < cap {
        let rep = attempts;
        attempts += 1;
        let x = generate(&model, sub_seed(seed, stream::DATA, rep as u64));
        let mut order: Vec<usize> = (0..n).collect();
        let mut split_rng =
            ChaCha8Rng::seed_from_u64(sub_seed(seed, stream::SPLIT, rep as u64));
        order.shuffle(&mut split_rng);
        let train_rows = &order[..half];
        let test_rows = &order[half..];
        let train = subset_rows(&x, train_rows);
        let test = subset_rows(&x, test_rows);

        let history = run_agglomerative(&train, linkage, k)?;
        let pair = random_cut_pair(&history, sub_seed(seed, stream::PAIR, rep as u64))?;

        // The null only holds when the true means average out equally over
        // the two estimated clusters.
        let to_original = |c: &ClusterSet| -> Vec<usize> {
            c.members().iter().map(|&i| train_rows[i]).collect()
        };
        let m1 = model.mean_over(&to_original(pair.c1()));
        let m2 = model.mean_over(&to_original(pair.c2()));
        let gap: f64 = m1
            .iter()
            .zip(&m2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if gap > 1e-9 * delta.max(1.0) {
            continue;
        }

        let sigma_hat = match estimate_sigma(&test) {
            Ok(s) if s > 0.0 => s,
            _ => {
                skipped.push(Skip {
                    rep,
                    delta: Some(delta),
                    reason: "degenerate scale estimate from the test half".into(),
                });
                continue;
            }
        };
        let result = study_p_value(
            &train,
            &history,
            &pair,
            linkage,
            k,
            sigma_hat,
            true,
            mc_samples,
            sub_seed(seed, stream::MC, rep as u64),
        );
        let result = match result {
            Ok(r) => r,
            Err(e) if is_skippable(&e) => {
                skipped.push(Skip {
                    rep,
                    delta: Some(delta),
                    reason: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        records.push(Replicate {
            rep,
            delta: Some(delta),
            statistic: result.statistic,
            p_value: result.p_value,
            log10_p: result.log10_p,
            wald_p: None,
            n1: pair.c1().len(),
            n2: pair.c2().len(),
            recovered: None,
            effect_size: None,
            rejected: None,
            method: result.method,
        });
    }
    let ps: Vec<f64> = records.iter().map(|r| r.p_value).collect();
    let aggregates = Aggregates {
        ks_statistic: Some(ks_statistic(&ps)),
        cdf_excess: Some(cdf_excess(&ps)),
        ..Aggregates::default()
    };
    Ok(SimReport {
        study: "plugin_sigma".into(),
        linkage,
        n,
        q,
        sigma,
        k,
        reps,
        attempts,
        alpha: None,
        seed,
        records,
        skipped,
        aggregates,
    })
}

/// Copies the given rows of `x` into a new matrix, in the given order.
fn subset_rows(x: &DataMatrix, rows: &[usize]) -> DataMatrix {
    let rows: Vec<Vec<f64>> = rows.iter().map(|&i| x.row(i).to_vec()).collect();
    DataMatrix::from_rows(&rows).expect("rows of a valid matrix")
}

/// Power as a function of the realized effect size: three equidistant
/// true clusters, one random pair per replicate, the rejection indicator
/// recorded against `||mu-bar_1 - mu-bar_2|| / sigma` over the estimated
/// clusters, decile-binned for pairs with both sides of size at least
/// [`MIN_STRATUM_SIZE`].
///
/// # Errors
/// [`Error::BadParameter`] for bad shapes or an empty grid; replicate
/// degeneracies become skips.
#[allow(clippy::too_many_arguments)]
pub fn run_effect_size_study(
    linkage: Linkage,
    delta_grid: &[f64],
    n: usize,
    q: usize,
    sigma: f64,
    reps: usize,
    alpha: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<SimReport> {
    if delta_grid.is_empty() {
        return Err(Error::BadParameter("empty delta grid".into()));
    }
    check_alpha(alpha)?;
    let k = 3;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (di, &delta) in delta_grid.iter().enumerate() {
        let model = MeanModel::three_equidistant(n, q, sigma, delta)?;
        for rep in 0..reps {
            let tag = ((di as u64) << 32) | rep as u64;
            let x = generate(&model, sub_seed(seed, stream::DATA, tag));
            let history = run_agglomerative(&x, linkage, k)?;
            let pair = random_cut_pair(&history, sub_seed(seed, stream::PAIR, tag))?;
            let result = study_p_value(
                &x,
                &history,
                &pair,
                linkage,
                k,
                sigma,
                false,
                mc_samples,
                sub_seed(seed, stream::MC, tag),
            );
            let result = match result {
                Ok(r) => r,
                Err(e) if is_skippable(&e) => {
                    skipped.push(Skip {
                        rep,
                        delta: Some(delta),
                        reason: e.to_string(),
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            let m1 = model.mean_over(pair.c1().members());
            let m2 = model.mean_over(pair.c2().members());
            let effect: f64 = m1
                .iter()
                .zip(&m2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                / sigma;
            records.push(Replicate {
                rep,
                delta: Some(delta),
                statistic: result.statistic,
                p_value: result.p_value,
                log10_p: result.log10_p,
                wald_p: None,
                n1: pair.c1().len(),
                n2: pair.c2().len(),
                recovered: Some(pair_recovers(&model, &pair)),
                effect_size: Some(effect),
                rejected: Some(result.p_value < alpha),
                method: result.method,
            });
        }
    }
    let aggregates = Aggregates {
        effect_bins: Some(effect_bins(&records, true)),
        effect_bins_small: Some(effect_bins(&records, false)),
        ..Aggregates::default()
    };
    Ok(SimReport {
        study: "effect_size".into(),
        linkage,
        n,
        q,
        sigma,
        k,
        reps,
        attempts: reps * delta_grid.len(),
        alpha: Some(alpha),
        seed,
        records,
        skipped,
        aggregates,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::BadParameter(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Decile bins of rejection rate against realized effect size, over
/// records where the smaller cluster is at least (or, with `large`
/// false, below) [`MIN_STRATUM_SIZE`] members.
fn effect_bins(records: &[Replicate], large: bool) -> Vec<EffectBin> {
    let mut stratum: Vec<(f64, bool)> = records
        .iter()
        .filter(|r| (r.n1.min(r.n2) >= MIN_STRATUM_SIZE) == large)
        .filter_map(|r| Some((r.effect_size?, r.rejected?)))
        .collect();
    stratum.sort_by(|a, b| a.0.total_cmp(&b.0));
    if stratum.is_empty() {
        return Vec::new();
    }
    let bins = 10.min(stratum.len());
    let per = stratum.len().div_ceil(bins);
    stratum
        .chunks(per)
        .map(|chunk| EffectBin {
            lo: chunk[0].0,
            hi: chunk[chunk.len() - 1].0,
            count: chunk.len(),
            power: chunk.iter().filter(|c| c.1).count() as f64 / chunk.len() as f64,
        })
        .collect()
}
