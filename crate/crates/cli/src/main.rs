//! `eczones` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or domain errors.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eczones::gp::GridSpec;
use eczones::stats::Covariate;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "eczones", version, about = "Consumption-pattern zones for block-group electricity data")]
pub struct Cli {
    /// Seed for every random choice made by the subcommand.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

/// Serialized untagged: the manifest records the name separately.
#[derive(Subcommand, Debug, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Generate a synthetic dataset with planted zones.
    Synth(SynthArgs),
    /// Parse and validate a dataset; export its normalized patterns.
    Ingest(IngestArgs),
    /// k-means zones on consumption patterns.
    Cluster(ClusterArgs),
    /// Label-change table across repeated k-means runs.
    Stability(StabilityArgs),
    /// Per-zone distance/covariance pair samples and normality summaries.
    Diagnose(DiagnoseArgs),
    /// Per-zone principal components of monthly-average log10 HEC.
    Pca(PcaArgs),
    /// Pooled and per-zone OLS of mean log10 HEC on log10 income.
    Regress(RegressArgs),
    /// Per-zone Gaussian-process regression of mean log10 HEC on log10 PHI.
    Gp(GpArgs),
    /// Mixture of linear regressions fitted by EM.
    Mixreg(MixregArgs),
    /// Weighted per-zone kernel density estimates.
    Kde(KdeArgs),
    /// Evaluate the fixed-coefficient baseline for one set of covariates.
    CecEval(CecArgs),
    /// SVG zone map, pattern heatmap, regression and density plots.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Ingest(_) => "ingest",
            Command::Cluster(_) => "cluster",
            Command::Stability(_) => "stability",
            Command::Diagnose(_) => "diagnose",
            Command::Pca(_) => "pca",
            Command::Regress(_) => "regress",
            Command::Gp(_) => "gp",
            Command::Mixreg(_) => "mixreg",
            Command::Kde(_) => "kde",
            Command::CecEval(_) => "cec-eval",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct DataArg {
    /// Dataset CSV: id,lat,lon,phi,pci,population,ec_1..ec_T,hh_1..hh_T.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ZonesArg {
    /// Zone labels CSV with columns id,zone.
    #[arg(long, alias = "labels")]
    pub zones: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PatternArg {
    /// log10 HEC rows scaled to sum to 1.
    Normalized,
    /// log10 HEC rows as is.
    Raw,
    /// 12 monthly averages of log10 HEC.
    Monthly,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    Random,
    KmeansPlusPlus,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum CovariateArg {
    Phi,
    Pci,
}

impl From<CovariateArg> for Covariate {
    fn from(c: CovariateArg) -> Self {
        match c {
            CovariateArg::Phi => Covariate::Phi,
            CovariateArg::Pci => Covariate::Pci,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum KdeVariable {
    /// Mean log10 HEC per block group.
    LogHec,
    /// log10 PHI per block group.
    LogPhi,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum KdeWeights {
    /// Mean household count per block group.
    Households,
    Uniform,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// Generator config JSON; the built-in three-zone config when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV path [default: <out-dir>/dataset.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct IngestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArg,
    /// Required number of months; inferred from the header when omitted.
    #[arg(long)]
    pub months: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct ClusterArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArg,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 25)]
    pub nstart: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    pub init: InitArg,
    #[arg(long, value_enum, default_value_t = PatternArg::Normalized)]
    pub pattern: PatternArg,
    /// Reference labels (id,zone) to score with the adjusted Rand index.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArg,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8,9,10,11,12")]
    pub ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "10,25,50,100,250")]
    pub nstarts: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = PatternArg::Normalized)]
    pub pattern: PatternArg,
}

#[derive(Args, Debug, Serialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub zones: ZonesArg,
    /// Upper bound on sampled member pairs per zone.
    #[arg(long, default_value_t = eczones::geostats::DEFAULT_MAX_PAIRS)]
    pub max_pairs: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct PcaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArg,
    /// Zone labels CSV; all rows form one zone when omitted.
    #[arg(long, alias = "labels")]
    pub zones: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct RegressArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub zones: ZonesArg,
    #[arg(long, value_enum, default_value_t = CovariateArg::Phi)]
    pub covariate: CovariateArg,
}

#[derive(Args, Debug, Serialize)]
pub struct GpArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub zones: ZonesArg,
    /// Hyperparameter grid, e.g. `theta0=0,0.1,1;theta1=log:0.1:10:5;steps=2,1.25`.
    #[arg(long, default_value_t = GridSpec::default())]
    #[serde(serialize_with = "display")]
    pub grid: GridSpec,
    #[arg(long, default_value_t = 50)]
    pub curve_points: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct MixregArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArg,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, value_enum, default_value_t = CovariateArg::Phi)]
    pub covariate: CovariateArg,
}

#[derive(Args, Debug, Serialize)]
pub struct KdeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArg,
    /// Zone labels CSV; all rows form one zone when omitted.
    #[arg(long, alias = "labels")]
    pub zones: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = KdeVariable::LogHec)]
    pub variable: KdeVariable,
    #[arg(long, value_enum, default_value_t = KdeWeights::Households)]
    pub weights: KdeWeights,
    /// Fixed bandwidth; Silverman's rule on the pooled sample when omitted.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CecArgs {
    /// Persons per household.
    #[arg(long)]
    pub pph: f64,
    /// Per-capita income, $/person.
    #[arg(long)]
    pub pci: f64,
    /// Unemployment rate, percent.
    #[arg(long, allow_negative_numbers = true)]
    pub unemp_rate: f64,
    /// Residential electricity rate, cents/kWh.
    #[arg(long, allow_negative_numbers = true)]
    pub res_elec_rate: f64,
    #[arg(long)]
    pub cool_days: f64,
    #[arg(long)]
    pub heat_days: f64,
    /// 1 inside the LADWP planning area, else 0.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub ladwp: u8,
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub zones: ZonesArg,
    #[arg(long, value_enum, default_value_t = CovariateArg::Phi)]
    pub covariate: CovariateArg,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
