//! Flag definitions for the four subcommands.

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use postclust::hclust::Linkage;

/// Selective inference for hierarchical clustering.
#[derive(Parser, Debug)]
#[command(name = "postclust", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Cluster a dataset and report the K clusters at the cut.
    Cluster(ClusterArgs),
    /// Test the difference in means between two estimated clusters.
    Test(TestArgs),
    /// Compare analytic truncation sets against grid reclustering.
    OracleCheck(OracleCheckArgs),
    /// Run a simulation study and emit CSV/JSON plus a QQ plot.
    Simulate(SimulateArgs),
}

/// How the p-value is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodChoice {
    /// Exact where a closed-form truncation set exists, Monte Carlo for
    /// complete linkage.
    Auto,
    /// Closed-form truncation set only.
    Exact,
    /// Importance-sampled p-value.
    Mc,
}

/// Which simulation study to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StudyChoice {
    /// Null calibration: global-null data, p-values should be uniform.
    Null,
    /// Conditional power and recovery probability over a separation grid.
    ConditionalPower,
    /// Split-sample scale estimation under the null.
    PluginSigma,
    /// Power binned by realized effect size.
    EffectSize,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    /// Input data CSV, one observation per row.
    #[arg(long)]
    pub input: PathBuf,
    /// average, weighted, ward, centroid, median, single, or complete.
    #[arg(long)]
    pub linkage: Linkage,
    /// Number of clusters to cut from the dendrogram.
    #[arg(long)]
    pub k: usize,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("pairing").required(true).args(["pair", "all_pairs"])))]
#[command(group(ArgGroup::new("scale").required(true).args(["sigma", "estimate_sigma", "cov"])))]
pub struct TestArgs {
    /// Input data CSV, one observation per row.
    #[arg(long)]
    pub input: PathBuf,
    /// average, weighted, ward, centroid, median, single, or complete.
    #[arg(long)]
    pub linkage: Linkage,
    /// Number of clusters to cut from the dendrogram.
    #[arg(long)]
    pub k: usize,
    /// Two 1-based cluster labels such as "1,3", or "random" for a seeded
    /// uniform draw. Clusters are numbered by smallest member.
    #[arg(long)]
    pub pair: Option<String>,
    /// Test every unordered pair of clusters at the cut.
    #[arg(long)]
    pub all_pairs: bool,
    /// Seed for --pair random and for Monte Carlo sampling.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Known noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Estimate the noise scale from data instead of fixing it.
    #[arg(long)]
    pub estimate_sigma: bool,
    /// Dataset for the scale estimate (defaults to --input).
    #[arg(long, requires = "estimate_sigma")]
    pub sigma_data: Option<PathBuf>,
    /// Known q x q feature covariance matrix as CSV.
    #[arg(long)]
    pub cov: Option<PathBuf>,
    /// auto, exact, or mc.
    #[arg(long, value_enum, default_value_t = MethodChoice::Auto)]
    pub method: MethodChoice,
    /// Monte Carlo proposals when the method is mc.
    #[arg(long, default_value_t = 2000)]
    pub mc_samples: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one CSV row per successfully tested pair.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleCheckArgs {
    /// Check this dataset; omitted, gaussian instances are generated.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// average, weighted, ward, centroid, median, or single (complete has
    /// no analytic set to check).
    #[arg(long)]
    pub linkage: Linkage,
    /// Number of clusters to cut from the dendrogram.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Generated instances to check.
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    /// Rows per generated instance.
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    /// Features per generated instance.
    #[arg(long, default_value_t = 3)]
    pub q: usize,
    /// Seed for instance generation and pair choice.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Grid resolution for the reclustering oracle.
    #[arg(long, default_value_t = 400)]
    pub grid_points: usize,
    /// Largest dataset the brute-force grid will accept.
    #[arg(long, default_value_t = 25)]
    pub max_n: usize,
    /// Corrupt the analytic set before comparing (negative control: the
    /// check must then fail).
    #[arg(long)]
    pub mutate: bool,
    /// Write the JSON report here as well as the stdout summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// null, conditional-power, plugin-sigma, or effect-size.
    #[arg(long, value_enum)]
    pub study: StudyChoice,
    /// average, weighted, ward, centroid, median, single, or complete.
    #[arg(long)]
    pub linkage: Linkage,
    /// Rows per simulated dataset.
    #[arg(long, default_value_t = 150)]
    pub n: usize,
    /// Features per simulated dataset.
    #[arg(long, default_value_t = 10)]
    pub q: usize,
    /// Generating noise scale.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Clusters cut from each dendrogram (the power and plug-in studies
    /// fix this at 3).
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Replicates (per separation value, where a grid is swept).
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    /// True cluster separation; repeat the flag to sweep a grid.
    #[arg(long)]
    pub delta: Vec<f64>,
    /// Rejection level for the power studies.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Monte Carlo proposals for complete linkage.
    #[arg(long, default_value_t = 2000)]
    pub mc_samples: usize,
    /// Master seed; fixed seed means byte-identical outputs.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Per-replicate CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full JSON report path.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// QQ plot of the selective p-values against uniform quantiles.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}
