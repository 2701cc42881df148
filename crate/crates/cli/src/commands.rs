//! The four subcommands: cluster, test, oracle-check, simulate.

use std::path::Path;

use postclust::cov::CovFactor;
use postclust::hclust::{run_agglomerative, Linkage, MergeHistory};
use postclust::inference::{
    estimate_sigma, selective_p_cov, selective_p_exact, selective_p_monte_carlo,
    selective_p_plugin, wald_p, wald_p_cov, TestResult, TruncatedChi,
};
use postclust::intervals::{Interval, IntervalSet};
use postclust::model::{test_statistic, ClusterPair, ClusterSet, DataMatrix};
use postclust::sim::{
    generate, random_cut_pair, run_conditional_power_study, run_effect_size_study,
    run_null_study, run_plugin_sigma_study, MeanModel, SimReport,
};
use postclust::truncation::{reclustering_membership, truncation_set};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::args::{
    ClusterArgs, MethodChoice, OracleCheckArgs, SimulateArgs, StudyChoice, TestArgs,
};
use crate::io::{format_f64, load_cov, load_csv, write_text};
use crate::svg::qq_svg;
use crate::CliError;

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot render JSON: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Clusters at the cut, ordered and labeled 1..K by smallest member.
pub fn labeled_clusters(history: &MergeHistory) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = history
        .cut_clusters()
        .iter()
        .map(|c| c.members().to_vec())
        .collect();
    clusters.sort_by_key(|m| m[0]);
    clusters
}

/// Clusters a dataset and reports the labeled clusters and merge steps.
pub fn cmd_cluster(args: &ClusterArgs) -> Result<(), CliError> {
    let x = load_csv(&args.input)?;
    let history = run_agglomerative(&x, args.linkage, args.k)?;
    let clusters = labeled_clusters(&history);
    let value = json!({
        "input": args.input.display().to_string(),
        "n": x.n(),
        "q": x.q(),
        "linkage": args.linkage,
        "k": args.k,
        "clusters": clusters.iter().enumerate().map(|(i, m)| json!({
            "label": i + 1,
            "size": m.len(),
            "members": m.iter().map(|r| r + 1).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "steps": history.steps().iter().map(|s| json!({
            "a": s.a,
            "b": s.b,
            "height": s.height,
        })).collect::<Vec<_>>(),
        "tie_broken": history.tie_broken(),
    });
    emit_json(&value, args.out.as_deref())
}

/// How the noise scale enters the test.
enum Scale {
    Sigma { value: f64, estimated: bool },
    Cov(CovFactor),
}

/// One tested pair, as serialized into the JSON report and the CSV.
#[derive(Serialize)]
pub struct PairRecord {
    pub cluster_1: usize,
    pub cluster_2: usize,
    pub n_1: usize,
    pub n_2: usize,
    pub members_1: Vec<usize>,
    pub members_2: Vec<usize>,
    pub statistic: f64,
    pub p_value: f64,
    pub p_display: String,
    pub log10_p: f64,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_set: Option<IntervalSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess: Option<f64>,
    pub wald_p: f64,
    pub wald_p_display: String,
    pub wald_log10_p: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Table-style rendering: probabilities below the smallest positive
/// normal-range double print as "<1e-307"; the log-space field keeps the
/// information.
pub fn p_display(log10_p: f64, p: f64) -> String {
    if log10_p < -307.0 {
        "<1e-307".to_string()
    } else {
        format!("{p:.3e}")
    }
}

/// Base-10 log survival of an untruncated scaled chi, for Wald p-values
/// far past linear-domain underflow.
pub fn wald_log10(q: usize, c: f64, stat: f64) -> f64 {
    match TruncatedChi::new(q, c, IntervalSet::full()) {
        Ok(d) => d.ln_survival(stat) / std::f64::consts::LN_10,
        Err(_) => f64::NAN,
    }
}

/// Maps a rank in 0..k(k-1)/2 to the lexicographic unordered pair.
fn unrank_pair(mut r: usize, k: usize) -> (usize, usize) {
    for i in 0..k {
        let span = k - i - 1;
        if r < span {
            return (i, i + 1 + r);
        }
        r -= span;
    }
    unreachable!("rank within k(k-1)/2")
}

fn resolve_pairs(args: &TestArgs, k: usize) -> Result<Vec<(usize, usize)>, CliError> {
    if args.all_pairs {
        let mut pairs = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                pairs.push((i, j));
            }
        }
        return Ok(pairs);
    }
    let spec = args
        .pair
        .as_deref()
        .ok_or_else(|| CliError::Config("one of --pair or --all-pairs is required".into()))?;
    if spec == "random" {
        let total = k * (k - 1) / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        return Ok(vec![unrank_pair(rng.random_range(0..total), k)]);
    }
    let labels: Vec<&str> = spec.split(',').collect();
    if labels.len() != 2 {
        return Err(CliError::Config(format!(
            "--pair expects two labels like \"1,3\" or the word random, got {spec:?}"
        )));
    }
    let mut parsed = [0usize; 2];
    for (slot, label) in parsed.iter_mut().zip(&labels) {
        *slot = label
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("--pair label {label:?} is not an integer")))?;
        if *slot < 1 || *slot > k {
            return Err(CliError::Config(format!(
                "--pair label {slot} is outside 1..={k}"
            )));
        }
    }
    if parsed[0] == parsed[1] {
        return Err(CliError::Config("--pair labels must differ".into()));
    }
    Ok(vec![(parsed[0].min(parsed[1]) - 1, parsed[0].max(parsed[1]) - 1)])
}

fn resolve_scale(args: &TestArgs, x: &DataMatrix) -> Result<Scale, CliError> {
    if let Some(path) = &args.cov {
        return Ok(Scale::Cov(load_cov(path)?));
    }
    if let Some(value) = args.sigma {
        if !(value.is_finite() && value > 0.0) {
            return Err(CliError::Config(format!(
                "--sigma must be a positive finite number, got {value}"
            )));
        }
        return Ok(Scale::Sigma { value, estimated: false });
    }
    let value = match &args.sigma_data {
        Some(path) => estimate_sigma(&load_csv(path)?)?,
        None => estimate_sigma(x)?,
    };
    Ok(Scale::Sigma { value, estimated: true })
}

#[allow(clippy::too_many_arguments)]
fn test_pair(
    x: &DataMatrix,
    history: &MergeHistory,
    clusters: &[Vec<usize>],
    i: usize,
    j: usize,
    scale: &Scale,
    args: &TestArgs,
    record_index: usize,
) -> Result<PairRecord, CliError> {
    let pair = ClusterPair::new(
        ClusterSet::new(clusters[i].clone())?,
        ClusterSet::new(clusters[j].clone())?,
    )?;
    let (n1, n2) = (clusters[i].len(), clusters[j].len());
    let contrast_norm = (1.0 / n1 as f64 + 1.0 / n2 as f64).sqrt();

    let (result, wald, wald_scale): (TestResult, f64, f64) = match scale {
        Scale::Cov(factor) => {
            let r = selective_p_cov(x, history, &pair, factor)?;
            let w = wald_p_cov(x, &pair, factor)?;
            (r, w, contrast_norm)
        }
        Scale::Sigma { value, estimated } => {
            let use_mc = match args.method {
                MethodChoice::Mc => true,
                MethodChoice::Auto => args.linkage == Linkage::Complete,
                MethodChoice::Exact => false,
            };
            let r = if use_mc {
                selective_p_monte_carlo(
                    x,
                    args.linkage,
                    args.k,
                    &pair,
                    *value,
                    args.mc_samples,
                    args.seed.wrapping_add(record_index as u64),
                )?
            } else if *estimated {
                selective_p_plugin(x, history, &pair, *value)?
            } else {
                selective_p_exact(x, history, &pair, *value)?
            };
            let w = wald_p(x, &pair, *value)?;
            (r, w, contrast_norm * value)
        }
    };
    let wald_log10_p = wald_log10(x.q(), wald_scale, result.statistic);
    Ok(PairRecord {
        cluster_1: i + 1,
        cluster_2: j + 1,
        n_1: n1,
        n_2: n2,
        members_1: clusters[i].iter().map(|r| r + 1).collect(),
        members_2: clusters[j].iter().map(|r| r + 1).collect(),
        statistic: result.statistic,
        p_value: result.p_value,
        p_display: p_display(result.log10_p, result.p_value),
        log10_p: result.log10_p,
        method: result.method.to_string(),
        sigma: result.sigma_used,
        truncation_set: result.truncation_set,
        n_samples: result.n_samples,
        ess: result.ess,
        wald_p: wald,
        wald_p_display: p_display(wald_log10_p, wald),
        wald_log10_p,
        warnings: result.warnings,
    })
}

fn records_csv(records: &[PairRecord]) -> String {
    let mut out = String::from(
        "cluster_1,cluster_2,n_1,n_2,statistic,p_value,log10_p,method,sigma,wald_p,wald_log10_p\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.cluster_1,
            r.cluster_2,
            r.n_1,
            r.n_2,
            format_f64(r.statistic),
            format_f64(r.p_value),
            format_f64(r.log10_p),
            r.method,
            r.sigma.map(format_f64).unwrap_or_default(),
            format_f64(r.wald_p),
            format_f64(r.wald_log10_p),
        ));
    }
    out
}

/// Tests one pair, a random pair, or all pairs of clusters at the cut.
pub fn cmd_test(args: &TestArgs) -> Result<(), CliError> {
    if args.method == MethodChoice::Exact && args.linkage == Linkage::Complete {
        return Err(CliError::Config(
            "complete linkage has no closed-form truncation set; use --method mc or auto".into(),
        ));
    }
    if args.cov.is_some() {
        if args.linkage == Linkage::Complete {
            return Err(CliError::Config(
                "the known-covariance test needs a closed-form truncation set, which \
                 complete linkage lacks"
                    .into(),
            ));
        }
        if args.method == MethodChoice::Mc {
            return Err(CliError::Config(
                "Monte Carlo sampling assumes spherical noise; --cov requires --method \
                 exact or auto"
                    .into(),
            ));
        }
    }
    let x = load_csv(&args.input)?;
    let history = run_agglomerative(&x, args.linkage, args.k)?;
    let clusters = labeled_clusters(&history);
    let pairs = resolve_pairs(args, clusters.len())?;
    let scale = resolve_scale(args, &x)?;

    let mut records: Vec<PairRecord> = Vec::new();
    let mut outcomes: Vec<serde_json::Value> = Vec::new();
    let mut first_error: Option<CliError> = None;
    for (ri, &(i, j)) in pairs.iter().enumerate() {
        match test_pair(&x, &history, &clusters, i, j, &scale, args, ri) {
            Ok(record) => {
                outcomes.push(
                    serde_json::to_value(&record)
                        .map_err(|e| CliError::Data(format!("cannot render JSON: {e}")))?,
                );
                records.push(record);
            }
            Err(e) => {
                outcomes.push(json!({
                    "cluster_1": i + 1,
                    "cluster_2": j + 1,
                    "error": e.to_string(),
                }));
                first_error.get_or_insert(e);
            }
        }
    }

    let report = json!({
        "input": args.input.display().to_string(),
        "n": x.n(),
        "q": x.q(),
        "linkage": args.linkage,
        "k": args.k,
        "records": outcomes,
    });
    emit_json(&report, args.out.as_deref())?;
    if let Some(path) = &args.csv {
        write_text(path, &records_csv(&records))?;
    }
    match first_error {
        Some(e) if records.is_empty() => Err(e),
        _ => Ok(()),
    }
}

fn shift_set(set: &IntervalSet, delta: f64) -> IntervalSet {
    IntervalSet::from_intervals(
        set.intervals()
            .iter()
            .map(|iv| {
                Interval::new(
                    if iv.lo.is_finite() { iv.lo + delta } else { iv.lo },
                    if iv.hi.is_finite() { iv.hi + delta } else { iv.hi },
                    iv.lo_open,
                    iv.hi_open,
                )
            })
            .collect(),
    )
}

/// Compares analytic truncation sets against brute-force grid reclustering
/// on one dataset or a batch of generated ones. Grid points within one
/// grid step of an interval endpoint are skipped: the grid cannot resolve
/// the boundary there.
pub fn cmd_oracle_check(args: &OracleCheckArgs) -> Result<(), CliError> {
    if args.linkage == Linkage::Complete {
        return Err(CliError::Config(
            "complete linkage has no analytic truncation set to check".into(),
        ));
    }
    if args.grid_points < 2 {
        return Err(CliError::Config("--grid-points must be at least 2".into()));
    }
    let datasets: Vec<(String, DataMatrix)> = match &args.input {
        Some(path) => vec![(path.display().to_string(), load_csv(path)?)],
        None => {
            let model = MeanModel::global_null(args.n, args.q, 1.0)?;
            (0..args.instances)
                .map(|i| {
                    let x = generate(&model, args.seed.wrapping_add(i as u64));
                    (format!("instance {i}"), x)
                })
                .collect()
        }
    };

    let mut instance_reports = Vec::new();
    let mut total_compared = 0usize;
    let mut total_mismatches = 0usize;
    for (idx, (name, x)) in datasets.iter().enumerate() {
        if x.n() > args.max_n {
            return Err(CliError::Config(format!(
                "{name} has {} rows, above the --max-n {} cap for grid reclustering",
                x.n(),
                args.max_n
            )));
        }
        let history = run_agglomerative(x, args.linkage, args.k)?;
        let pair = random_cut_pair(&history, args.seed.wrapping_add(0x9E37 + idx as u64))?;
        let trunc = truncation_set(x, &history, &pair)?;
        let stat = test_statistic(x, &pair);
        let max_h = history
            .steps()
            .iter()
            .map(|s| s.height)
            .fold(0.0f64, f64::max);
        let hi = (4.0 * stat).max(2.0 * max_h.sqrt());
        let grid: Vec<f64> = (0..args.grid_points)
            .map(|g| hi * g as f64 / (args.grid_points - 1) as f64)
            .collect();
        let step = grid[1] - grid[0];
        let set = if args.mutate {
            shift_set(&trunc.set, 2.0 * step)
        } else {
            trunc.set.clone()
        };
        let member = reclustering_membership(x, args.linkage, args.k, &pair, &grid)?;
        let endpoints: Vec<f64> = set
            .intervals()
            .iter()
            .flat_map(|iv| [iv.lo, iv.hi])
            .filter(|e| e.is_finite())
            .collect();
        let mut compared = 0usize;
        let mut skipped = 0usize;
        let mut mismatch_phis = Vec::new();
        for (g, &phi) in grid.iter().enumerate() {
            if endpoints.iter().any(|&e| (phi - e).abs() <= step) {
                skipped += 1;
                continue;
            }
            compared += 1;
            if member[g] != set.contains(phi) {
                mismatch_phis.push(phi);
            }
        }
        let mismatch_count = mismatch_phis.len();
        total_compared += compared;
        total_mismatches += mismatch_count;
        println!(
            "{name}: {mismatch_count} of {compared} grid points disagree \
             ({skipped} skipped near endpoints)"
        );
        mismatch_phis.truncate(10);
        instance_reports.push(json!({
            "name": name,
            "n": x.n(),
            "q": x.q(),
            "compared": compared,
            "skipped_near_endpoints": skipped,
            "mismatches": mismatch_count,
            "first_mismatch_phis": mismatch_phis,
        }));
    }

    let pass = total_mismatches == 0;
    println!(
        "oracle check: {} ({} instances, {total_compared} grid points, \
         {total_mismatches} mismatches)",
        if pass { "PASS" } else { "FAIL" },
        datasets.len()
    );
    if let Some(path) = &args.out {
        let value = json!({
            "linkage": args.linkage,
            "k": args.k,
            "grid_points": args.grid_points,
            "mutate": args.mutate,
            "instances": instance_reports,
            "total_compared": total_compared,
            "total_mismatches": total_mismatches,
            "pass": pass,
        });
        emit_json(&value, Some(path))?;
    }
    if pass {
        Ok(())
    } else {
        Err(CliError::Mismatch(format!(
            "{total_mismatches} grid points disagree with the analytic set"
        )))
    }
}

fn print_summary(report: &SimReport) {
    println!(
        "study: {} ({} linkage), n={} q={} k={}, {} records from {} attempts, seed {}",
        report.study,
        report.linkage,
        report.n,
        report.q,
        report.k,
        report.records.len(),
        report.attempts,
        report.seed
    );
    let a = &report.aggregates;
    let mut parts = Vec::new();
    if let Some(v) = a.ks_statistic {
        parts.push(format!("ks_statistic={v:.4}"));
    }
    if let Some(v) = a.cdf_excess {
        parts.push(format!("cdf_excess={v:.4}"));
    }
    if let Some(v) = a.rejection_rate {
        parts.push(format!("rejection_rate={v:.4}"));
    }
    if let Some(v) = a.wald_rejection_rate {
        parts.push(format!("wald_rejection_rate={v:.4}"));
    }
    if !parts.is_empty() {
        println!("{}", parts.join(", "));
    }
    if let Some(per) = &a.per_delta {
        for d in per {
            let mut line = format!("delta={}: {} records", d.delta, d.records);
            if let Some(v) = d.recovery_probability {
                line.push_str(&format!(", recovery={v:.4}"));
            }
            if let Some(v) = d.conditional_power {
                line.push_str(&format!(", conditional_power={v:.4}"));
            }
            if let Some(v) = d.rejection_rate {
                line.push_str(&format!(", rejection_rate={v:.4}"));
            }
            println!("{line}");
        }
    }
    if !report.skipped.is_empty() {
        println!("skipped replicates: {}", report.skipped.len());
    }
}

/// Runs a named simulation study and writes its CSV, JSON, and QQ plot.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let fixed_k3 = "this study estimates three clusters; leave --k at 3";
    let report = match args.study {
        StudyChoice::Null => {
            if !args.delta.is_empty() {
                return Err(CliError::Config(
                    "the null study has no separation; drop --delta".into(),
                ));
            }
            run_null_study(
                args.linkage,
                args.n,
                args.q,
                args.sigma,
                args.k,
                args.reps,
                args.mc_samples,
                args.seed,
            )?
        }
        StudyChoice::ConditionalPower => {
            if args.delta.is_empty() {
                return Err(CliError::Config(
                    "--delta is required at least once for conditional-power".into(),
                ));
            }
            if args.k != 3 {
                return Err(CliError::Config(fixed_k3.into()));
            }
            run_conditional_power_study(
                args.linkage,
                &args.delta,
                args.n,
                args.q,
                args.sigma,
                args.reps,
                args.alpha,
                args.mc_samples,
                args.seed,
            )?
        }
        StudyChoice::PluginSigma => {
            if args.delta.len() != 1 {
                return Err(CliError::Config(
                    "plugin-sigma takes exactly one --delta".into(),
                ));
            }
            if args.k != 3 {
                return Err(CliError::Config(fixed_k3.into()));
            }
            if args.sigma != 1.0 {
                return Err(CliError::Config(
                    "the split-sample study fixes sigma at 1; drop --sigma".into(),
                ));
            }
            run_plugin_sigma_study(
                args.linkage,
                args.delta[0],
                args.n,
                args.q,
                args.reps,
                args.mc_samples,
                args.seed,
            )?
        }
        StudyChoice::EffectSize => {
            if args.delta.is_empty() {
                return Err(CliError::Config(
                    "--delta is required at least once for effect-size".into(),
                ));
            }
            if args.k != 3 {
                return Err(CliError::Config(fixed_k3.into()));
            }
            run_effect_size_study(
                args.linkage,
                &args.delta,
                args.n,
                args.q,
                args.sigma,
                args.reps,
                args.alpha,
                args.mc_samples,
                args.seed,
            )?
        }
    };

    print_summary(&report);
    if let Some(path) = &args.out {
        write_text(path, &report.to_csv())?;
    }
    if let Some(path) = &args.json {
        let value = serde_json::to_value(&report)
            .map_err(|e| CliError::Data(format!("cannot render JSON: {e}")))?;
        emit_json(&value, Some(path))?;
    }
    if let Some(path) = &args.svg {
        let pvalues: Vec<f64> = report.records.iter().map(|r| r.p_value).collect();
        write_text(path, &qq_svg(&pvalues))?;
    }
    Ok(())
}
