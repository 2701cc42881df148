//! Browser bindings for the interactive demo page in `www/`.
//!
//! Three operations cover the full story: [`demo_dataset`] draws a 2-D
//! dataset, [`analyze`] clusters it and runs the selective test on a chosen
//! pair, and [`perturb`] shows what the test conditions on by moving the
//! cluster separation to an arbitrary `phi` and reclustering.
//!
//! Every export takes and returns JSON strings, so the page needs no
//! bindings beyond `JSON.parse`. Failures come back as
//! `{"error": {"code", "message"}}` instead of throwing across the
//! boundary.

#![deny(missing_docs)]

use postclust::hclust::{run_agglomerative, Linkage, MergeHistory};
use postclust::inference::{
    selective_p_exact, selective_p_monte_carlo, wald_p, TestResult, TruncatedChi,
};
use postclust::intervals::IntervalSet;
use postclust::model::{perturbed_dataset, ClusterPair, ClusterSet, DataMatrix};
use postclust::sim::{generate, MeanModel};
use postclust::{Error, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

fn reply(result: Result<Value>) -> String {
    match result {
        Ok(value) => value.to_string(),
        Err(e) => json!({"error": {"code": e.code(), "message": e.to_string()}}).to_string(),
    }
}

fn parse_points(points: &str) -> Result<DataMatrix> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(points)
        .map_err(|e| Error::InvalidData(format!("points must be a JSON array of rows: {e}")))?;
    DataMatrix::from_rows(&rows)
}

fn points_json(x: &DataMatrix) -> Value {
    Value::Array((0..x.n()).map(|i| json!(x.row(i))).collect())
}

/// The clusters at the cut, ordered by smallest member; the cluster at
/// index `i` carries the 1-based label `i + 1`.
fn labeled_sets(history: &MergeHistory) -> Vec<ClusterSet> {
    let mut sets = history.cut_clusters();
    sets.sort_by_key(|c| c.members()[0]);
    sets
}

fn row_labels(n: usize, sets: &[ClusterSet]) -> Vec<usize> {
    let mut labels = vec![0usize; n];
    for (idx, set) in sets.iter().enumerate() {
        for &m in set.members() {
            labels[m] = idx + 1;
        }
    }
    labels
}

fn pair_by_labels(sets: &[ClusterSet], label_1: usize, label_2: usize) -> Result<ClusterPair> {
    let k = sets.len();
    let fetch = |label: usize| -> Result<ClusterSet> {
        if label == 0 || label > k {
            return Err(Error::InvalidPair(format!(
                "cluster label {label} is outside 1..={k}"
            )));
        }
        Ok(sets[label - 1].clone())
    };
    if label_1 == label_2 {
        return Err(Error::InvalidPair("pick two different clusters".into()));
    }
    ClusterPair::new(fetch(label_1)?, fetch(label_2)?)
}

fn max_merge_height(history: &MergeHistory) -> f64 {
    history
        .steps()
        .iter()
        .map(|s| s.height)
        .fold(0.0, f64::max)
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn demo_dataset_inner(kind: &str, n: usize, delta: f64, seed: u32) -> Result<Value> {
    let model = match kind {
        "null" => MeanModel::global_null(n, 2, 1.0)?,
        "three" => MeanModel::three_equidistant(n, 2, 1.0, delta)?,
        other => {
            return Err(Error::BadParameter(format!(
                "dataset kind must be \"null\" or \"three\", got {other:?}"
            )))
        }
    };
    let x = generate(&model, u64::from(seed));
    Ok(json!({"points": points_json(&x), "n": x.n(), "q": x.q()}))
}

/// Draws a fresh 2-D dataset: `kind` "null" for pure noise or "three" for
/// three equally sized clusters with pairwise mean separation `delta`.
/// Unit noise scale; deterministic per `seed`.
#[wasm_bindgen]
pub fn demo_dataset(kind: &str, n: usize, delta: f64, seed: u32) -> String {
    reply(demo_dataset_inner(kind, n, delta, seed))
}

#[allow(clippy::too_many_arguments)]
fn analyze_inner(
    points: &str,
    linkage: &str,
    k: usize,
    label_1: usize,
    label_2: usize,
    sigma: f64,
    mc_samples: usize,
    seed: u32,
) -> Result<Value> {
    let x = parse_points(points)?;
    let linkage: Linkage = linkage.parse()?;
    let history = run_agglomerative(&x, linkage, k)?;
    let sets = labeled_sets(&history);
    let pair = pair_by_labels(&sets, label_1, label_2)?;

    let result: TestResult = if linkage == Linkage::Complete {
        selective_p_monte_carlo(&x, linkage, k, &pair, sigma, mc_samples, u64::from(seed))?
    } else {
        selective_p_exact(&x, &history, &pair, sigma)?
    };
    let wald = wald_p(&x, &pair, sigma)?;
    let n1 = pair.c1().members().len() as f64;
    let n2 = pair.c2().members().len() as f64;
    let c = sigma * (1.0 / n1 + 1.0 / n2).sqrt();
    let wald_log10 = TruncatedChi::new(x.q(), c, IntervalSet::full())?
        .ln_survival(result.statistic)
        / std::f64::consts::LN_10;
    let phi_max = (4.0 * result.statistic).max(2.0 * max_merge_height(&history).sqrt());

    Ok(json!({
        "n": x.n(),
        "q": x.q(),
        "k": k,
        "labels": row_labels(x.n(), &sets),
        "cluster_sizes": sets.iter().map(|s| s.members().len()).collect::<Vec<_>>(),
        "pair": [label_1, label_2],
        "statistic": result.statistic,
        "p_value": result.p_value,
        "log10_p": finite_or_null(result.log10_p),
        "method": serde_json::to_value(result.method).expect("method serializes"),
        "truncation_set": serde_json::to_value(&result.truncation_set).expect("set serializes"),
        "n_samples": result.n_samples,
        "ess": result.ess,
        "wald_p": wald,
        "wald_log10_p": finite_or_null(wald_log10),
        "warnings": result.warnings,
        "phi_max": phi_max,
    }))
}

/// Clusters the points (JSON array of equal-length rows), cuts `k`
/// clusters, and tests the difference in means between the clusters with
/// 1-based labels `label_1` and `label_2` (labels order clusters by their
/// smallest member). Known noise scale `sigma`; complete linkage falls back
/// to `mc_samples` importance samples seeded by `seed`, every other linkage
/// gets the exact truncation set.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn analyze(
    points: &str,
    linkage: &str,
    k: usize,
    label_1: usize,
    label_2: usize,
    sigma: f64,
    mc_samples: usize,
    seed: u32,
) -> String {
    reply(analyze_inner(
        points, linkage, k, label_1, label_2, sigma, mc_samples, seed,
    ))
}

fn perturb_inner(
    points: &str,
    linkage: &str,
    k: usize,
    label_1: usize,
    label_2: usize,
    phi: f64,
) -> Result<Value> {
    let x = parse_points(points)?;
    let linkage: Linkage = linkage.parse()?;
    let history = run_agglomerative(&x, linkage, k)?;
    let pair = pair_by_labels(&labeled_sets(&history), label_1, label_2)?;

    let xp = perturbed_dataset(&x, &pair, phi)?;
    let perturbed_history = run_agglomerative(&xp, linkage, k)?;
    let preserved = perturbed_history.find_cut_id(pair.c1()).is_some()
        && perturbed_history.find_cut_id(pair.c2()).is_some();

    Ok(json!({
        "phi": phi,
        "points": points_json(&xp),
        "labels": row_labels(xp.n(), &labeled_sets(&perturbed_history)),
        "preserved": preserved,
    }))
}

/// Rescales the separation between the two labeled clusters to `phi`,
/// reclusters the perturbed points from scratch, and reports whether both
/// clusters survive at the cut. This is the event the selective p-value
/// conditions on: sweeping `phi` traces out the truncation set reported by
/// [`analyze`].
#[wasm_bindgen]
pub fn perturb(
    points: &str,
    linkage: &str,
    k: usize,
    label_1: usize,
    label_2: usize,
    phi: f64,
) -> String {
    reply(perturb_inner(points, linkage, k, label_1, label_2, phi))
}
