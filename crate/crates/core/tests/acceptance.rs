//! Acceptance suite: one test per numbered criterion, each printing a
//! single `criterion N: PASS` line (visible with `--nocapture`; the test
//! name itself doubles as the pass/fail line in default output).
//!
//! The full-scale null-uniformity replication takes on the order of half
//! an hour and is `#[ignore]`d; run it with
//! `cargo test -p postclust --test acceptance -- --ignored --nocapture`.
//!
//! The penguin table reproduction is gated on user-supplied data files
//! (see `criterion_11_penguin_table_reproduction_when_data_supplied`);
//! without them it prints a SKIP line and passes.

mod common;

use std::time::Instant;

use postclust::hclust::{run_agglomerative, Linkage};
use postclust::inference::{
    selective_p_exact, selective_p_monte_carlo, selective_p_plugin, wald_p, TruncatedChi,
};
use postclust::intervals::{Interval, IntervalSet};
use postclust::model::{test_statistic, ClusterPair, DataMatrix};
use postclust::sim::{
    generate, random_cut_pair, run_conditional_power_study, run_null_study,
    run_plugin_sigma_study, MeanModel,
};
use postclust::truncation::{default_phi_grid, reclustering_membership, truncation_set};
use rand::RngExt;

fn pass(n: u32, detail: &str) {
    println!("criterion {n:>2}: PASS - {detail}");
}

/// Criterion 1: for every exact linkage, the analytic truncation set and
/// brute-force grid reclustering classify each grid point identically,
/// except within one grid step of an interval endpoint where the grid
/// cannot resolve the boundary.
#[test]
fn criterion_01_analytic_sets_match_grid_reclustering() {
    let linkages = [
        Linkage::Average,
        Linkage::Weighted,
        Linkage::Ward,
        Linkage::Centroid,
        Linkage::Median,
        Linkage::Single,
    ];
    let mut compared = 0usize;
    let mut near_ties = 0usize;
    for (li, &linkage) in linkages.iter().enumerate() {
        let mut rng = common::rng(4100 + li as u64);
        let mut done = 0usize;
        let mut attempt = 0u64;
        while done < 200 {
            attempt += 1;
            assert!(
                attempt < 1000,
                "criterion 1: FAIL - {linkage} burned 1000 attempts on near-ties"
            );
            let n = rng.random_range(8..=20);
            let q = if rng.random_range(0..2) == 0 { 2 } else { 5 };
            let k = rng.random_range(2..=3);
            let x = if done.is_multiple_of(2) {
                common::random_matrix(&mut rng, n, q)
            } else {
                common::shifted_matrix(&mut rng, n, q, k, 3.0)
            };
            let history = run_agglomerative(&x, linkage, k).unwrap();
            let pair = random_cut_pair(&history, 4200 + 1000 * li as u64 + attempt).unwrap();
            let trunc = truncation_set(&x, &history, &pair).unwrap();
            if trunc.near_tie {
                near_ties += 1;
                continue;
            }
            let stat = test_statistic(&x, &pair);
            let max_h = history
                .steps()
                .iter()
                .map(|s| s.height)
                .fold(0.0f64, f64::max);
            let grid = default_phi_grid(stat, max_h);
            let step = grid[1] - grid[0];
            let member = reclustering_membership(&x, linkage, k, &pair, &grid).unwrap();
            let endpoints: Vec<f64> = trunc
                .set
                .intervals()
                .iter()
                .flat_map(|iv| [iv.lo, iv.hi])
                .filter(|e| e.is_finite())
                .collect();
            for (g, &phi) in grid.iter().enumerate() {
                if endpoints.iter().any(|&e| (phi - e).abs() <= step) {
                    continue;
                }
                assert_eq!(
                    member[g],
                    trunc.set.contains(phi),
                    "criterion 1: FAIL - {linkage} n={n} q={q} k={k} phi={phi}: \
                     grid reclustering disagrees with the analytic set {}",
                    trunc.set
                );
                compared += 1;
            }
            done += 1;
        }
    }
    assert!(
        compared > 300_000,
        "criterion 1: FAIL - endpoint guard left only {compared} comparable grid points"
    );
    pass(
        1,
        &format!(
            "{compared} grid points across 1200 instances and six linkages agree \
             ({near_ties} near-tie instances skipped)"
        ),
    );
}

fn null_uniformity(n: usize, reps: usize, mc_samples: usize, ks_bound: f64, seed: u64) -> String {
    let mut details = Vec::new();
    let plans = [
        (Linkage::Average, 0),
        (Linkage::Centroid, 0),
        (Linkage::Single, 0),
        (Linkage::Complete, mc_samples),
    ];
    for (i, &(linkage, mc)) in plans.iter().enumerate() {
        let report = run_null_study(linkage, n, 10, 1.0, 3, reps, mc, seed + i as u64).unwrap();
        assert_eq!(
            report.records.len(),
            reps,
            "criterion 2: FAIL - {linkage} produced {} of {reps} replicates",
            report.records.len()
        );
        let ks = report.aggregates.ks_statistic.unwrap();
        assert!(
            ks < ks_bound,
            "criterion 2: FAIL - {linkage} null p-values at n={n}, {reps} reps: \
             KS distance {ks:.4} >= {ks_bound}"
        );
        details.push(format!("{linkage} KS={ks:.3}"));
    }
    details.join(", ")
}

/// Criterion 2, smoke variant: null p-values are uniform for the exact
/// linkages and for the importance-sampled complete-linkage test.
#[test]
fn criterion_02_null_pvalues_are_uniform_smoke() {
    let details = null_uniformity(60, 500, 2000, 0.10, 20_260_819);
    pass(2, &format!("n=60, 500 reps, KS < 0.10: {details}"));
}

/// Criterion 2, full scale. Takes on the order of half an hour; dominated
/// by the Monte Carlo complete-linkage study.
#[test]
#[ignore = "full-scale null uniformity study, roughly half an hour"]
fn criterion_02_null_pvalues_are_uniform_full() {
    let details = null_uniformity(150, 2000, 2000, 0.05, 21_260_819);
    pass(2, &format!("n=150, 2000 reps, KS < 0.05: {details}"));
}

/// Criterion 3: under the same global null, the Wald test that ignores
/// the selection event rejects far above its nominal level.
#[test]
fn criterion_03_wald_rejects_far_above_alpha_under_the_null() {
    let report = run_null_study(Linkage::Average, 150, 10, 1.0, 3, 500, 0, 30_303).unwrap();
    let wald = report.aggregates.wald_rejection_rate.unwrap();
    let selective = report.aggregates.rejection_rate.unwrap();
    assert!(
        wald > 0.25,
        "criterion 3: FAIL - Wald rejection rate {wald:.3} at alpha=0.05 is not above 0.25"
    );
    pass(
        3,
        &format!(
            "Wald rejection rate {wald:.3} at alpha=0.05 under the global null \
             (selective test: {selective:.3})"
        ),
    );
}

/// Criterion 4: truncated-chi survival values agree with adaptive Simpson
/// quadrature of the truncated density to 1e-8 absolute.
#[test]
fn criterion_04_survival_matches_adaptive_quadrature() {
    let mut rng = common::rng(440);
    let mut worst = 0.0f64;
    for case in 0..500 {
        let q = rng.random_range(1..=12usize);
        let c = rng.random_range(0.3..4.0);
        let parts = rng.random_range(1..=3usize);
        let scale = c * (q as f64).sqrt() + 5.0 * c;
        let support = common::random_support(&mut rng, parts, 0.05 * scale, scale);
        let t = rng.random_range(0.0..1.1 * scale);
        let set = IntervalSet::from_intervals(
            support
                .iter()
                .map(|&(lo, hi)| Interval::new(lo, hi, false, false))
                .collect(),
        );
        let dist = TruncatedChi::new(q, c, set).unwrap();
        let s = dist.survival(t);
        let sq = common::survival_quadrature(q, c, &support, t);
        let err = (s - sq).abs();
        worst = worst.max(err);
        assert!(
            err <= 1e-8,
            "criterion 4: FAIL - case {case} (q={q}, c={c:.3}, t={t:.3}): \
             survival {s:.12} vs quadrature {sq:.12}, |diff| {err:.3e}"
        );
    }
    pass(
        4,
        &format!("500 survival values within 1e-8 of adaptive quadrature (worst {worst:.2e})"),
    );
}

/// Criterion 5: the importance-sampled p-value tracks the exact one on
/// datasets where the exact p-value is moderate.
#[test]
fn criterion_05_importance_sampling_tracks_exact_pvalues() {
    let model = MeanModel::global_null(16, 4, 1.0).unwrap();
    let mut hits = 0usize;
    let mut used = 0usize;
    let mut worst = 0.0f64;
    let mut seed = 0u64;
    while used < 50 {
        seed += 1;
        assert!(
            seed < 1000,
            "criterion 5: FAIL - could not find 50 datasets with exact p in [0.1, 0.9]"
        );
        let x = generate(&model, 50_000 + seed);
        let history = run_agglomerative(&x, Linkage::Average, 3).unwrap();
        let pair = random_cut_pair(&history, 51_000 + seed).unwrap();
        let exact = selective_p_exact(&x, &history, &pair, 1.0).unwrap();
        if !(0.1..=0.9).contains(&exact.p_value) {
            continue;
        }
        used += 1;
        let mc =
            selective_p_monte_carlo(&x, Linkage::Average, 3, &pair, 1.0, 2000, 52_000 + seed)
                .unwrap();
        let err = (mc.p_value - exact.p_value).abs();
        worst = worst.max(err);
        if err <= 0.05 {
            hits += 1;
        }
    }
    assert!(
        hits >= 48,
        "criterion 5: FAIL - only {hits}/50 Monte Carlo p-values within 0.05 of exact \
         (worst |diff| {worst:.4})"
    );
    pass(
        5,
        &format!("{hits}/50 Monte Carlo p-values within 0.05 of exact (worst |diff| {worst:.4})"),
    );
}

/// Criterion 6: over the same truncation set, the survival probability at
/// a fixed point inside the set is strictly increasing in the chi scale,
/// which is what makes an over-estimated noise scale conservative.
#[test]
fn criterion_06_survival_is_strictly_increasing_in_the_scale() {
    let mut rng = common::rng(660);
    for case in 0..1000 {
        let q = rng.random_range(1..=10usize);
        let c1 = rng.random_range(0.3..3.0);
        let c2 = c1 * rng.random_range(1.1..2.5);
        let parts = rng.random_range(1..=3usize);
        let scale = c1 * (q as f64).sqrt() + 4.0 * c1;
        let support = common::random_support(&mut rng, parts, 0.05 * scale, scale);
        let (lo, hi) = support[rng.random_range(0..support.len())];
        let t = lo + rng.random_range(0.05..0.95) * (hi - lo);
        let set = IntervalSet::from_intervals(
            support
                .iter()
                .map(|&(a, b)| Interval::new(a, b, false, false))
                .collect(),
        );
        let d1 = TruncatedChi::new(q, c1, set.clone()).unwrap();
        let d2 = TruncatedChi::new(q, c2, set).unwrap();
        let (s1, s2) = (d1.survival(t), d2.survival(t));
        assert!(
            s1 < s2,
            "criterion 6: FAIL - case {case} (q={q}, c1={c1:.3}, c2={c2:.3}, t={t:.3}): \
             survival {s1:.12} is not strictly below {s2:.12}"
        );
    }
    pass(
        6,
        "1000 random (t in S, S, c1 < c2) triples all strictly ordered",
    );
}

/// Criterion 7: plugging the split-sample over-estimate of sigma into the
/// exact test keeps null p-values stochastically no smaller than uniform,
/// up to the one-sided 95% Kolmogorov band for 500 replicates.
#[test]
fn criterion_07_plugin_pvalues_stay_superuniform() {
    let reps = 500usize;
    let bound = 1.36 / (reps as f64).sqrt();
    let mut details = Vec::new();
    for (i, &delta) in [2.0, 4.0, 6.0].iter().enumerate() {
        let report =
            run_plugin_sigma_study(Linkage::Average, delta, 200, 10, reps, 0, 70_000 + i as u64)
                .unwrap();
        assert_eq!(
            report.records.len(),
            reps,
            "criterion 7: FAIL - delta={delta}: collected {} of {reps} null replicates \
             in {} attempts",
            report.records.len(),
            report.attempts
        );
        let excess = report.aggregates.cdf_excess.unwrap();
        assert!(
            excess <= bound,
            "criterion 7: FAIL - delta={delta}: p-value CDF exceeds uniform by \
             {excess:.4} > {bound:.4}"
        );
        details.push(format!("delta={delta}: excess {excess:.3}"));
    }
    pass(
        7,
        &format!("plug-in null p-values within the one-sided band {bound:.4} ({details})",
            details = details.join(", ")),
    );
}

/// Criterion 8: conditional power and recovery probability both rise with
/// the true cluster separation (within Monte Carlo noise), and single
/// linkage recovers the true clusters less often than average linkage at
/// the smallest separation.
#[test]
fn criterion_08_conditional_power_and_recovery_rise_with_separation() {
    let grid: Vec<f64> = (0..7).map(|i| 4.0 + 0.5 * i as f64).collect();
    let reps = 10_000usize;
    let avg = run_conditional_power_study(
        Linkage::Average,
        &grid,
        30,
        10,
        1.0,
        reps,
        0.05,
        0,
        80_001,
    )
    .unwrap();
    let per = avg.aggregates.per_delta.as_ref().unwrap();
    assert_eq!(per.len(), grid.len());

    let se = |p: f64, m: f64| (p * (1.0 - p) / m).sqrt();
    for w in per.windows(2) {
        let (r0, r1) = (
            w[0].recovery_probability.unwrap(),
            w[1].recovery_probability.unwrap(),
        );
        let tol = 2.0 * (se(r0, reps as f64).powi(2) + se(r1, reps as f64).powi(2)).sqrt();
        assert!(
            r1 >= r0 - tol,
            "criterion 8: FAIL - recovery drops from {r0:.4} at delta={} to {r1:.4} at \
             delta={} by more than 2 standard errors ({tol:.4})",
            w[0].delta,
            w[1].delta
        );
        let (p0, p1) = (
            w[0].conditional_power.unwrap(),
            w[1].conditional_power.unwrap(),
        );
        let (m0, m1) = (
            (r0 * w[0].records as f64).max(1.0),
            (r1 * w[1].records as f64).max(1.0),
        );
        let tol = 2.0 * (se(p0, m0).powi(2) + se(p1, m1).powi(2)).sqrt();
        assert!(
            p1 >= p0 - tol,
            "criterion 8: FAIL - conditional power drops from {p0:.4} at delta={} to \
             {p1:.4} at delta={} by more than 2 standard errors ({tol:.4})",
            w[0].delta,
            w[1].delta
        );
    }

    let single =
        run_conditional_power_study(Linkage::Single, &[4.0], 30, 10, 1.0, reps, 0.05, 0, 80_002)
            .unwrap();
    let single_rec = single.aggregates.per_delta.as_ref().unwrap()[0]
        .recovery_probability
        .unwrap();
    let avg_rec = per[0].recovery_probability.unwrap();
    assert!(
        single_rec < avg_rec,
        "criterion 8: FAIL - single-linkage recovery {single_rec:.4} is not strictly below \
         average-linkage recovery {avg_rec:.4} at delta=4"
    );
    pass(
        8,
        &format!(
            "average-linkage recovery {:.3} -> {:.3} and conditional power {:.3} -> {:.3} \
             over delta in [4, 7], both nondecreasing within 2 SE; single-linkage recovery \
             {single_rec:.3} < average {avg_rec:.3} at delta=4",
            per.first().unwrap().recovery_probability.unwrap(),
            per.last().unwrap().recovery_probability.unwrap(),
            per.first().unwrap().conditional_power.unwrap(),
            per.last().unwrap().conditional_power.unwrap(),
        ),
    );
}

fn timed_truncation(n: usize, seed: u64) -> f64 {
    let model = MeanModel::global_null(n, 5, 1.0).unwrap();
    let x = generate(&model, seed);
    let history = run_agglomerative(&x, Linkage::Average, 3).unwrap();
    let pair = random_cut_pair(&history, seed ^ 0xA5A5).unwrap();
    let start = Instant::now();
    let trunc = truncation_set(&x, &history, &pair).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    std::hint::black_box(trunc);
    elapsed
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}

/// Criterion 9: doubling n multiplies the merge-replay truncation-set cost
/// by at most 8, consistent with an O(n^2 q + n^2 log n) bound (a naive
/// per-pair replay would scale as the cube). Trials interleave the two
/// sizes so background load hits both equally.
#[test]
fn criterion_09_truncation_cost_scales_quadratically() {
    let mut t200 = Vec::new();
    let mut t400 = Vec::new();
    for trial in 0..20u64 {
        t200.push(timed_truncation(200, 90_000 + trial));
        t400.push(timed_truncation(400, 91_000 + trial));
    }
    let m200 = median(&mut t200);
    let m400 = median(&mut t400);
    let ratio = m400 / m200;
    assert!(
        ratio <= 8.0,
        "criterion 9: FAIL - median truncation time {:.2} ms at n=400 vs {:.2} ms at n=200: \
         ratio {ratio:.2} > 8",
        1e3 * m400,
        1e3 * m200
    );
    pass(
        9,
        &format!(
            "median truncation time {:.2} ms at n=200, {:.2} ms at n=400 (ratio {ratio:.2} <= 8)",
            1e3 * m200,
            1e3 * m400
        ),
    );
}

/// Criterion 10: merge heights produced by the dissimilarity recursion
/// match from-scratch evaluations of each linkage definition.
#[test]
fn criterion_10_recursion_heights_match_from_scratch_linkage() {
    let linkages = [
        Linkage::Average,
        Linkage::Weighted,
        Linkage::Ward,
        Linkage::Centroid,
        Linkage::Median,
    ];
    let mut checked = 0usize;
    for (li, &linkage) in linkages.iter().enumerate() {
        let mut rng = common::rng(1000 + li as u64);
        for n in 4..=8 {
            for _ in 0..40 {
                let q = rng.random_range(2..=4);
                let x = common::random_matrix(&mut rng, n, q);
                let history = run_agglomerative(&x, linkage, 1).unwrap();
                let (scratch, _) = common::scratch_clustering(&x, linkage, 1);
                assert_eq!(history.steps().len(), scratch.len());
                for (st, sc) in history.steps().iter().zip(&scratch) {
                    assert_eq!(
                        (st.a, st.b),
                        (sc.a, sc.b),
                        "criterion 10: FAIL - {linkage} n={n}: merge order diverges \
                         from the from-scratch definition"
                    );
                    let tol = 1e-8 * sc.height.abs().max(1e-12);
                    assert!(
                        (st.height - sc.height).abs() <= tol,
                        "criterion 10: FAIL - {linkage} n={n}: recursion height {} vs \
                         from-scratch {}",
                        st.height,
                        sc.height
                    );
                    checked += 1;
                }
            }
        }
    }
    pass(
        10,
        &format!(
            "{checked} merge heights match from-scratch linkage definitions to 1e-8 relative"
        ),
    );
}

const PENGUIN_DATA_ENV: &str = "POSTCLUST_PENGUINS";
const PENGUIN_SIGMA_ENV: &str = "POSTCLUST_PENGUINS_SIGMA";

/// Reference rows for the penguin analysis: statistic, selective p, Wald p.
/// Wald values at 0.0 denote underflow past 1e-307.
const PENGUIN_REFERENCE: [(f64, f64, f64); 6] = [
    (10.1, 0.591, 3.83e-3),
    (25.0, 1.70e-14, 0.0),
    (10.1, 0.714, 1.01e-3),
    (33.8, 0.070, 0.0),
    (17.1, 0.291, 4.29e-5),
    (18.9, 2.10e-6, 1.58e-11),
];

fn read_penguin_csv(path: &str) -> Result<DataMatrix, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 && rows.is_empty() => continue,
            Err(e) => return Err(format!("{path} line {}: {e}", i + 1)),
        }
    }
    DataMatrix::from_rows(&rows).map_err(|e| format!("{path}: {e}"))
}

fn sig3(x: f64) -> String {
    format!("{x:.2e}")
}

/// Criterion 11 (optional, data-gated): with user-supplied penguin
/// measurement files, the clustered pairs reproduce the reference
/// statistics to 3 significant figures and the p-values to within a
/// factor of 2 in log space. Differences print a diagnostic diff; this
/// test never fails, because the data files cannot be shipped.
///
/// Expected files, both headerless or with a single header line,
/// two numeric columns (bill length mm, flipper length mm):
/// - `POSTCLUST_PENGUINS`: the 107 female penguins from 2007-2008 with
///   complete species, bill, and flipper records;
/// - `POSTCLUST_PENGUINS_SIGMA`: the 58 female penguins from 2009 used
///   for the scale estimate.
#[test]
fn criterion_11_penguin_table_reproduction_when_data_supplied() {
    let (Ok(data_path), Ok(sigma_path)) = (
        std::env::var(PENGUIN_DATA_ENV),
        std::env::var(PENGUIN_SIGMA_ENV),
    ) else {
        println!(
            "criterion 11: SKIP - set {PENGUIN_DATA_ENV} and {PENGUIN_SIGMA_ENV} to \
             bill/flipper CSVs to run the table reproduction"
        );
        return;
    };
    let (x, sigma_data) = match (read_penguin_csv(&data_path), read_penguin_csv(&sigma_path)) {
        (Ok(x), Ok(s)) => (x, s),
        (a, b) => {
            for err in [a.err(), b.err()].into_iter().flatten() {
                println!("criterion 11: DIFF - {err}");
            }
            return;
        }
    };
    let sigma_hat = match postclust::inference::estimate_sigma(&sigma_data) {
        Ok(s) => s,
        Err(e) => {
            println!("criterion 11: DIFF - scale estimation failed: {e}");
            return;
        }
    };
    let history = match run_agglomerative(&x, Linkage::Average, 5) {
        Ok(h) => h,
        Err(e) => {
            println!("criterion 11: DIFF - clustering failed: {e}");
            return;
        }
    };
    let mut clusters: Vec<Vec<usize>> = history
        .cut_clusters()
        .iter()
        .map(|c| c.members().to_vec())
        .filter(|m| m.len() > 1)
        .collect();
    clusters.sort_by_key(|m| m[0]);

    let mut results: Vec<(f64, f64, f64)> = Vec::new();
    for i in 0..clusters.len() {
        for j in i + 1..clusters.len() {
            let pair = ClusterPair::new(
                postclust::model::ClusterSet::new(clusters[i].clone()).unwrap(),
                postclust::model::ClusterSet::new(clusters[j].clone()).unwrap(),
            )
            .unwrap();
            let sel = match selective_p_plugin(&x, &history, &pair, sigma_hat) {
                Ok(r) => r,
                Err(e) => {
                    println!("criterion 11: DIFF - pair ({i},{j}) failed: {e}");
                    continue;
                }
            };
            let wald = wald_p(&x, &pair, sigma_hat).unwrap_or(f64::NAN);
            results.push((sel.statistic, sel.p_value, wald));
        }
    }

    let mut diffs: Vec<String> = Vec::new();
    if results.len() != PENGUIN_REFERENCE.len() {
        diffs.push(format!(
            "expected {} multi-member cluster pairs, found {}",
            PENGUIN_REFERENCE.len(),
            results.len()
        ));
    }
    let mut taken = vec![false; PENGUIN_REFERENCE.len()];
    for &(stat, p, wald) in &results {
        let candidate = PENGUIN_REFERENCE
            .iter()
            .enumerate()
            .filter(|(k, r)| !taken[*k] && sig3(r.0) == sig3(stat))
            .min_by(|(_, a), (_, b)| {
                let da = (p.ln() - a.1.ln()).abs();
                let db = (p.ln() - b.1.ln()).abs();
                da.total_cmp(&db)
            });
        let Some((k, reference)) = candidate else {
            diffs.push(format!(
                "statistic {} matches no unmatched reference row",
                sig3(stat)
            ));
            continue;
        };
        taken[k] = true;
        let log_gap = (p.ln() - reference.1.ln()).abs();
        if log_gap > std::f64::consts::LN_2 {
            diffs.push(format!(
                "statistic {}: selective p {p:.3e} vs reference {:.3e} \
                 (off by {:.2}x in probability)",
                sig3(stat),
                reference.1,
                log_gap.exp()
            ));
        }
        let wald_ok = if reference.2 == 0.0 {
            wald <= 1e-307
        } else {
            (wald.ln() - reference.2.ln()).abs() <= std::f64::consts::LN_2
        };
        if !wald_ok {
            diffs.push(format!(
                "statistic {}: Wald p {wald:.3e} vs reference {:.3e}",
                sig3(stat),
                reference.2
            ));
        }
    }
    for (k, r) in PENGUIN_REFERENCE.iter().enumerate() {
        if !taken[k] {
            diffs.push(format!(
                "reference row (stat {}, selective p {:.3e}) matched no computed pair",
                sig3(r.0),
                r.1
            ));
        }
    }

    if diffs.is_empty() {
        pass(
            11,
            &format!(
                "all 6 cluster pairs reproduce the reference table \
                 (scale estimate {sigma_hat:.4})"
            ),
        );
    } else {
        for d in &diffs {
            println!("criterion 11: DIFF - {d}");
        }
        println!(
            "criterion 11: DIFF - {} discrepancies against the reference table \
             (diagnostic only, not a failure)",
            diffs.len()
        );
    }
}
