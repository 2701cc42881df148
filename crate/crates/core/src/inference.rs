//! P-values from truncation sets.
//!
//! Conditional on the clustering keeping the tested pair intact, the
//! distance between the two cluster means follows a scaled chi
//! distribution truncated to the pair's truncation set. The selective
//! p-value is the truncated survival probability at the observed
//! statistic. This module evaluates that survival function with far-tail
//! stabilization, wraps it into the exact, plug-in, and known-covariance
//! tests, provides the importance-sampling fallback for linkages without
//! an exact truncation set, and carries the untruncated Wald baselines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::cov::CovFactor;
use crate::error::{Error, Result};
use crate::hclust::{run_agglomerative, Linkage, MergeHistory};
use crate::intervals::IntervalSet;
use crate::model::{
    contrast_vector, mean_difference, perturbed_dataset, test_statistic, ClusterPair, DataMatrix,
};
use crate::seeding::{stream, sub_seed};
use crate::special::{chi_cdf, chi_sf, ln_chi_cdf, ln_chi_sf, ln_gamma, log_diff_exp, log_sum_exp};
use crate::truncation::{cluster_pair_preserved, truncation_set, truncation_set_cov, Truncation};

/// Total support mass below which the survival ratio is formed in log
/// space instead of the linear domain.
const LOG_SPACE_MASS: f64 = 1e-300;

/// Effective sample sizes below this make a Monte Carlo p-value suspect.
const ESS_WARN: f64 = 20.0;

/// How the p-value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Closed-form truncation set, scaled chi survival.
    Exact,
    /// Importance-sampled survival probability.
    MonteCarlo,
    /// Closed-form set in whitened geometry, known covariance.
    Covariance,
    /// Closed-form set with an estimated scale plugged in.
    Plugin,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "monte_carlo",
            Method::Covariance => "covariance",
            Method::Plugin => "plugin",
        })
    }
}

/// Outcome of one selective test.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    /// The tested distance between cluster means (whitened for the
    /// known-covariance method).
    pub statistic: f64,
    /// Selective p-value, possibly underflowing to zero in extreme tails.
    pub p_value: f64,
    /// Base-10 logarithm of the p-value, finite far past where `p_value`
    /// underflows.
    pub log10_p: f64,
    /// How the p-value was computed.
    pub method: Method,
    /// The truncation set; absent for Monte Carlo results.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_set: Option<IntervalSet>,
    /// Monte Carlo proposals drawn; absent otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    /// Monte Carlo effective sample size (the weight mass that survived
    /// reclustering); absent otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess: Option<f64>,
    /// Noise scale the test used; absent for the known-covariance method,
    /// where the scale lives in the covariance matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_used: Option<f64>,
    /// Caveats attached to this result (near-ties, low effective sample
    /// size).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// A `c * chi_q` distribution truncated to a union of intervals.
///
/// Interval masses are kept in both the linear and the log domain, so
/// survival probabilities stay finite and ordered even when the support
/// sits hundreds of scale units into the tail.
#[derive(Debug, Clone)]
pub struct TruncatedChi {
    q: f64,
    c: f64,
    support: IntervalSet,
    masses: Vec<f64>,
    total: f64,
    ln_masses: Vec<f64>,
    ln_total: f64,
}

impl TruncatedChi {
    /// Builds the distribution, precomputing per-interval masses.
    ///
    /// # Errors
    /// [`Error::BadParameter`] unless `q >= 1` and `c` is positive and
    /// finite; [`Error::DegenerateSupport`] when the support carries no
    /// probability mass.
    pub fn new(q: usize, c: f64, support: IntervalSet) -> Result<Self> {
        if q < 1 {
            return Err(Error::BadParameter(
                "degrees of freedom must be at least 1".into(),
            ));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::BadParameter(format!(
                "scale must be positive and finite, got {c}"
            )));
        }
        let mut dist = TruncatedChi {
            q: q as f64,
            c,
            support,
            masses: Vec::new(),
            total: 0.0,
            ln_masses: Vec::new(),
            ln_total: f64::NEG_INFINITY,
        };
        for iv in dist.support.intervals() {
            dist.masses.push(dist.mass(iv.lo, iv.hi));
            dist.ln_masses.push(dist.ln_mass(iv.lo, iv.hi));
        }
        dist.total = dist.masses.iter().sum();
        dist.ln_total = log_sum_exp(&dist.ln_masses);
        if dist.ln_total.is_nan() || dist.ln_total == f64::NEG_INFINITY {
            return Err(Error::DegenerateSupport);
        }
        Ok(dist)
    }

    /// Degrees of freedom.
    pub fn q(&self) -> usize {
        self.q as usize
    }

    /// Scale.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// The truncation support.
    pub fn support(&self) -> &IntervalSet {
        &self.support
    }

    /// Total mass of the support under the untruncated law; underflows to
    /// zero for far-tail supports (see [`TruncatedChi::ln_support_mass`]).
    pub fn support_mass(&self) -> f64 {
        self.total
    }

    /// Natural log of the support mass, finite even when the linear-domain
    /// mass underflows.
    pub fn ln_support_mass(&self) -> f64 {
        self.ln_total
    }

    /// Mass of `[lo, hi)` under the untruncated `c * chi_q` law, using
    /// whichever tail of the CDF avoids cancellation.
    fn mass(&self, lo: f64, hi: f64) -> f64 {
        let ulo = lo / self.c;
        let uhi = hi / self.c;
        let plo = chi_cdf(self.q, ulo);
        let m = if plo < 0.5 {
            chi_cdf(self.q, uhi) - plo
        } else {
            chi_sf(self.q, ulo) - chi_sf(self.q, uhi)
        };
        m.max(0.0)
    }

    /// Natural log of [`TruncatedChi::mass`].
    fn ln_mass(&self, lo: f64, hi: f64) -> f64 {
        let ulo = lo / self.c;
        let uhi = hi / self.c;
        if chi_cdf(self.q, ulo) < 0.5 {
            log_diff_exp(ln_chi_cdf(self.q, uhi), ln_chi_cdf(self.q, ulo))
        } else {
            log_diff_exp(ln_chi_sf(self.q, ulo), ln_chi_sf(self.q, uhi))
        }
    }

    /// `P(phi >= t | phi in support)`.
    ///
    /// Equal to 1 at or below the support's infimum and 0 past its
    /// supremum; endpoint openness is immaterial (single points carry no
    /// mass). Falls back to the log-domain computation when the support
    /// mass underflows the linear domain.
    pub fn survival(&self, t: f64) -> f64 {
        if self.total < LOG_SPACE_MASS {
            return self.ln_survival(t).exp();
        }
        let mut num = 0.0;
        for (iv, m) in self.support.intervals().iter().zip(&self.masses) {
            if t <= iv.lo {
                num += m;
            } else if t < iv.hi {
                num += self.mass(t, iv.hi);
            }
        }
        (num / self.total).clamp(0.0, 1.0)
    }

    /// Natural log of [`TruncatedChi::survival`], computed entirely in the
    /// log domain.
    pub fn ln_survival(&self, t: f64) -> f64 {
        let mut parts = Vec::with_capacity(self.ln_masses.len());
        for (iv, lm) in self.support.intervals().iter().zip(&self.ln_masses) {
            if t <= iv.lo {
                parts.push(*lm);
            } else if t < iv.hi {
                parts.push(self.ln_mass(t, iv.hi));
            }
        }
        if parts.is_empty() {
            return f64::NEG_INFINITY;
        }
        (log_sum_exp(&parts) - self.ln_total).min(0.0)
    }
}

/// Scale of the chi law for a pair: `sigma * sqrt(1/|c1| + 1/|c2|)`.
fn pair_scale(pair: &ClusterPair, sigma: f64) -> f64 {
    sigma * (1.0 / pair.c1().len() as f64 + 1.0 / pair.c2().len() as f64).sqrt()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::BadParameter(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    Ok(())
}

fn truncated_result(
    stat: f64,
    q: usize,
    c: f64,
    trunc: Truncation,
    method: Method,
    sigma_used: Option<f64>,
) -> Result<TestResult> {
    let dist = TruncatedChi::new(q, c, trunc.set)?;
    let p_value = dist.survival(stat);
    let log10_p = dist.ln_survival(stat) / std::f64::consts::LN_10;
    let mut warnings = Vec::new();
    if trunc.near_tie {
        warnings.push(
            "the clustering contains a near-tie; the truncation set boundary next to the \
             statistic is numerically fragile"
                .to_string(),
        );
    }
    Ok(TestResult {
        statistic: stat,
        p_value,
        log10_p,
        method,
        truncation_set: Some(dist.support.clone()),
        n_samples: None,
        ess: None,
        sigma_used,
        warnings,
    })
}

/// Exact selective test: the probability, conditional on the clustering
/// keeping the pair intact, of a cluster-mean separation at least as large
/// as observed, under isotropic noise with known scale `sigma`.
///
/// # Errors
/// [`Error::BadParameter`] for a non-positive `sigma` or a linkage without
/// an exact truncation set, plus anything [`truncation_set`] rejects.
pub fn selective_p_exact(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
    sigma: f64,
) -> Result<TestResult> {
    check_sigma(sigma)?;
    let trunc = truncation_set(x, history, pair)?;
    let stat = test_statistic(x, pair);
    truncated_result(
        stat,
        x.q(),
        pair_scale(pair, sigma),
        trunc,
        Method::Exact,
        Some(sigma),
    )
}

/// The exact test with an estimated scale plugged in; see
/// [`estimate_sigma`]. Over-estimating the scale pushes the p-value up,
/// so plugging in an asymptotic over-estimate keeps the test valid.
///
/// # Errors
/// As [`selective_p_exact`].
pub fn selective_p_plugin(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
    sigma_hat: f64,
) -> Result<TestResult> {
    check_sigma(sigma_hat)?;
    let trunc = truncation_set(x, history, pair)?;
    let stat = test_statistic(x, pair);
    truncated_result(
        stat,
        x.q(),
        pair_scale(pair, sigma_hat),
        trunc,
        Method::Plugin,
        Some(sigma_hat),
    )
}

/// Selective test under a known feature covariance: the statistic and the
/// truncation set move to whitened geometry, and the chi scale reduces to
/// the contrast norm `sqrt(1/|c1| + 1/|c2|)`.
///
/// # Errors
/// As [`selective_p_exact`], plus [`Error::NotPositiveDefinite`] when the
/// factor does not match the data.
pub fn selective_p_cov(
    x: &DataMatrix,
    history: &MergeHistory,
    pair: &ClusterPair,
    cov: &CovFactor,
) -> Result<TestResult> {
    let trunc = truncation_set_cov(x, history, pair, cov)?;
    let nu = contrast_vector(pair, x.n())?;
    let stat = cov.whitened_norm(&mean_difference(x, &nu));
    truncated_result(
        stat,
        x.q(),
        nu.squared_norm().sqrt(),
        trunc,
        Method::Covariance,
        None,
    )
}

/// Importance-sampled selective test for clustering procedures without an
/// exact truncation set.
///
/// Draws `n_samples` proposals from a Gaussian centered at the observed
/// statistic, weighs each by the ratio of the scaled-chi density to the
/// proposal density, keeps the weight only when `preserved` confirms the
/// perturbed data set still yields both clusters, and returns the weighted
/// fraction of surviving proposals at or above the statistic. Negative
/// proposals carry zero weight. Deterministic given `seed`, with one
/// derived seed per sample.
///
/// # Errors
/// [`Error::BadParameter`] for a bad `sigma` or `n_samples = 0`,
/// [`Error::UnstableEstimate`] when no proposal survives reclustering,
/// plus perturbation failures bubbled up from `preserved` or the
/// perturbation itself.
pub fn selective_p_importance<F>(
    x: &DataMatrix,
    preserved: F,
    pair: &ClusterPair,
    sigma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<TestResult>
where
    F: Fn(&DataMatrix) -> Result<bool>,
{
    check_sigma(sigma)?;
    if n_samples == 0 {
        return Err(Error::BadParameter(
            "need at least one Monte Carlo sample".into(),
        ));
    }
    let stat = test_statistic(x, pair);
    let c = pair_scale(pair, sigma);
    let q = x.q() as f64;
    // ln of the c*chi_q density, dropping the 1/c factor shared with the
    // proposal density.
    let ln_chi_density = |omega: f64| {
        let u = omega / c;
        (1.0 - 0.5 * q) * std::f64::consts::LN_2 + (q - 1.0) * u.ln()
            - 0.5 * u * u
            - ln_gamma(0.5 * q)
    };
    let ln_proposal = |omega: f64| {
        let z = (omega - stat) / c;
        -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
    };

    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let mut n_negative = 0usize;
    for i in 0..n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, stream::MC, i as u64));
        let z: f64 = StandardNormal.sample(&mut rng);
        let omega = stat + c * z;
        if omega < 0.0 {
            n_negative += 1;
            continue;
        }
        let xp = perturbed_dataset(x, pair, omega)?;
        if !preserved(&xp)? {
            continue;
        }
        let weight = (ln_chi_density(omega) - ln_proposal(omega)).exp();
        denominator += weight;
        if omega >= stat {
            numerator += weight;
        }
    }
    if denominator == 0.0 {
        return Err(Error::UnstableEstimate {
            n_samples,
            n_negative,
        });
    }
    let p_value = (numerator / denominator).clamp(0.0, 1.0);
    let mut warnings = Vec::new();
    if denominator < ESS_WARN {
        warnings.push(format!(
            "effective sample size {denominator:.2} is below {ESS_WARN}; \
             the Monte Carlo p-value is unreliable"
        ));
    }
    Ok(TestResult {
        statistic: stat,
        p_value,
        log10_p: p_value.log10(),
        method: Method::MonteCarlo,
        truncation_set: None,
        n_samples: Some(n_samples),
        ess: Some(denominator),
        sigma_used: Some(sigma),
        warnings,
    })
}

/// [`selective_p_importance`] specialized to reclustering with the given
/// hierarchical linkage and cut, after checking that the pair actually
/// sits at that cut.
///
/// # Errors
/// As [`selective_p_importance`], plus [`Error::InvalidPair`] when the
/// pair is not part of the clustering.
pub fn selective_p_monte_carlo(
    x: &DataMatrix,
    linkage: Linkage,
    k: usize,
    pair: &ClusterPair,
    sigma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<TestResult> {
    let history = run_agglomerative(x, linkage, k)?;
    for side in [pair.c1(), pair.c2()] {
        if history.find_cut_id(side).is_none() {
            return Err(Error::InvalidPair(format!(
                "cluster {:?} is not one of the {k} clusters at the cut",
                side.members()
            )));
        }
    }
    selective_p_importance(
        x,
        |xp| cluster_pair_preserved(xp, linkage, k, pair),
        pair,
        sigma,
        n_samples,
        seed,
    )
}

/// Column-centered root mean square of the data, with divisor `nq - q`:
/// a scale estimate that over-estimates the noise whenever real cluster
/// structure inflates the column variances.
///
/// # Errors
/// [`Error::InvalidData`] when the data has fewer than two rows.
pub fn estimate_sigma(x: &DataMatrix) -> Result<f64> {
    let (n, q) = (x.n(), x.q());
    if n < 2 {
        return Err(Error::InvalidData(
            "need at least two rows to estimate sigma".into(),
        ));
    }
    let mut col_means = vec![0.0; q];
    for i in 0..n {
        for (m, v) in col_means.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for m in &mut col_means {
        *m /= n as f64;
    }
    let mut ss = 0.0;
    for i in 0..n {
        for (m, v) in col_means.iter().zip(x.row(i)) {
            let d = v - m;
            ss += d * d;
        }
    }
    Ok((ss / ((n * q - q) as f64)).sqrt())
}

/// Untruncated baseline: the survival probability of the observed
/// separation under a `sigma * sqrt(1/|c1| + 1/|c2|) * chi_q` law, as if
/// the pair had been chosen before seeing the data. Anti-conservative
/// after clustering; kept for comparison.
///
/// # Errors
/// [`Error::BadParameter`] for a non-positive `sigma`,
/// [`Error::InvalidPair`] for an out-of-range pair.
pub fn wald_p(x: &DataMatrix, pair: &ClusterPair, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    pair.validate_for(x.n())?;
    let stat = test_statistic(x, pair);
    Ok(chi_sf(x.q() as f64, stat / pair_scale(pair, sigma)))
}

/// [`wald_p`] under a known feature covariance: the chi_q survival of the
/// whitened separation over the contrast norm.
///
/// # Errors
/// As [`wald_p`], plus covariance dimension mismatches.
pub fn wald_p_cov(x: &DataMatrix, pair: &ClusterPair, cov: &CovFactor) -> Result<f64> {
    if cov.dim() != x.q() {
        return Err(Error::NotPositiveDefinite(format!(
            "covariance is {}x{} but the data has q={}",
            cov.dim(),
            cov.dim(),
            x.q()
        )));
    }
    pair.validate_for(x.n())?;
    let nu = contrast_vector(pair, x.n())?;
    let stat = cov.whitened_norm(&mean_difference(x, &nu));
    Ok(chi_sf(x.q() as f64, stat / nu.squared_norm().sqrt()))
}
