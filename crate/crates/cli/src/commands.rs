use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use eczones::clustering::{
    adjusted_rand_index, hierarchical_order, kmeans, stability_analysis, Init, KMeansConfig,
    StabilityConfig, ZoneAssignment,
};
use eczones::geostats::{zone_diagnostics, MarginalSummary};
use eczones::gp::{clustered_gp_regression, income_consumption_points, GpSummary};
use eczones::ingest::{parse_dataset, read_zone_labels, validate, write_zone_labels, CsvSchema, Dataset};
use eczones::report::{self, FittedLine};
use eczones::stats::{
    self, cec_model_eval, clustered_regression, density_grid, kde_mixture, mixture_regression_em,
    regression_points, silverman_bandwidth, zone_pca, CecCovariates, Covariate,
};
use eczones::synth::{self, SynthConfig};
use eczones::transforms::{
    mean_log_hec, monthly_avg_log_hec_matrix, normalized_log_hec_matrix, raw_log_hec_matrix,
    PatternMatrix,
};
use serde::Serialize;

use crate::output::Run;
use crate::{
    CecArgs, Cli, ClusterArgs, Command, DiagnoseArgs, GpArgs, IngestArgs, InitArg, KdeArgs,
    KdeVariable, KdeWeights, MixregArgs, PatternArg, PcaArgs, RegressArgs, ReportArgs,
    StabilityArgs, SynthArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(eczones::Error),
    Io(PathBuf, io::Error),
    Parse(PathBuf, serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Parse(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

/// Attaches `path` to I/O failures raised while reading it.
fn reading(path: &Path) -> impl FnOnce(eczones::Error) -> CliError + '_ {
    move |e| match e {
        eczones::Error::Io(io) => CliError::Io(path.to_path_buf(), io),
        other => CliError::Data(other),
    }
}

impl From<eczones::Error> for CliError {
    fn from(e: eczones::Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io(path.to_path_buf(), e)
}

pub fn run(cli: &Cli) -> CliResult {
    let params = serde_json::to_value(&cli.command).expect("serializable arguments");
    let mut run = Run::new(&cli.out_dir, cli.command.name(), cli.seed, params);
    let seed = cli.seed;
    match &cli.command {
        Command::Synth(a) => synth_cmd(&mut run, a, seed)?,
        Command::Ingest(a) => ingest_cmd(&mut run, a)?,
        Command::Cluster(a) => cluster_cmd(&mut run, a, seed)?,
        Command::Stability(a) => stability_cmd(&mut run, a, seed)?,
        Command::Diagnose(a) => diagnose_cmd(&mut run, a, seed)?,
        Command::Pca(a) => pca_cmd(&mut run, a)?,
        Command::Regress(a) => regress_cmd(&mut run, a)?,
        Command::Gp(a) => gp_cmd(&mut run, a)?,
        Command::Mixreg(a) => mixreg_cmd(&mut run, a, seed)?,
        Command::Kde(a) => kde_cmd(&mut run, a)?,
        Command::CecEval(a) => cec_cmd(&mut run, a)?,
        Command::Report(a) => report_cmd(&mut run, a)?,
    }
    let dir = cli.out_dir.clone();
    run.finish().map_err(|e| CliError::Io(dir, e))
}

fn load_dataset(run: &mut Run, path: &Path) -> CliResult<Dataset> {
    run.input(path);
    parse_dataset(path, CsvSchema::default()).map_err(reading(path))
}

fn load_zones(run: &mut Run, ds: &Dataset, path: &Path, patterns: &PatternMatrix) -> CliResult<ZoneAssignment> {
    run.input(path);
    let labels = read_zone_labels(ds, path).map_err(reading(path))?;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    Ok(ZoneAssignment::from_labels(patterns, labels, k)?)
}

/// Every row in zone 0.
fn single_zone(patterns: &PatternMatrix) -> CliResult<ZoneAssignment> {
    Ok(ZoneAssignment::from_labels(patterns, vec![0; patterns.n_rows()], 1)?)
}

fn patterns_of(ds: &Dataset, kind: PatternArg) -> CliResult<PatternMatrix> {
    Ok(match kind {
        PatternArg::Normalized => normalized_log_hec_matrix(ds)?,
        PatternArg::Raw => raw_log_hec_matrix(ds)?,
        PatternArg::Monthly => monthly_avg_log_hec_matrix(ds)?,
    })
}

fn csv_bytes<F>(f: F) -> CliResult<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> eczones::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Shortest round-tripping decimal form.
fn num(v: f64) -> String {
    v.to_string()
}

fn write(run: &mut Run, name: &str, bytes: &[u8]) -> CliResult {
    let path = PathBuf::from(name);
    run.write(name, bytes).map_err(|e| CliError::Io(path, e))
}

fn write_json<T: Serialize>(run: &mut Run, name: &str, body: &T) -> CliResult {
    write(run, name, &crate::output::to_json(body))
}

fn synth_cmd(run: &mut Run, a: &SynthArgs, seed: u64) -> CliResult {
    let mut cfg = match &a.config {
        Some(path) => {
            run.input(path);
            let text = std::fs::read_to_string(path).map_err(io_at(path))?;
            serde_json::from_str::<SynthConfig>(&text).map_err(|e| CliError::Parse(path.clone(), e))?
        }
        None => SynthConfig::default(),
    };
    cfg.seed = seed;
    let ds = synth::generate(&cfg)?;
    let data = csv_bytes(|b| eczones::ingest::write_dataset_to(&ds, b))?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("dataset.csv"));
    if a.out.is_some() {
        run.write_path(out.clone(), &data).map_err(io_at(&out))?;
    } else {
        write(run, "dataset.csv", &data)?;
    }
    let truth = csv_bytes(|b| synth::write_truth_labels_to(&ds, b))?;
    write(run, "truth_labels.csv", &truth)?;
    write_json(run, "synth_config.json", &cfg)?;
    println!("generated {} block groups x {} months", ds.len(), ds.months);
    Ok(())
}

#[derive(Serialize)]
struct IngestSummary {
    records: usize,
    months: usize,
    clean: bool,
    validation: eczones::ingest::ValidationReport,
}

fn ingest_cmd(run: &mut Run, a: &IngestArgs) -> CliResult {
    run.input(&a.data.data);
    let schema = match a.months {
        Some(t) => CsvSchema::with_months(t),
        None => CsvSchema::default(),
    };
    let ds = parse_dataset(&a.data.data, schema).map_err(reading(&a.data.data))?;
    let report = validate(&ds);
    let clean = report.is_clean();
    write_json(
        run,
        "validation.json",
        &IngestSummary {
            records: ds.len(),
            months: ds.months,
            clean,
            validation: report,
        },
    )?;
    if clean {
        let m = normalized_log_hec_matrix(&ds)?;
        let bytes = csv_bytes(|b| m.write_csv(b))?;
        write(run, "patterns_normalized.csv", &bytes)?;
        println!("{} records, {} months, clean", ds.len(), ds.months);
    } else {
        eprintln!("warning: validation found problems; see validation.json");
    }
    Ok(())
}

#[derive(Serialize)]
struct ClusterSummary {
    k: usize,
    nstart: usize,
    max_iter: usize,
    seed: u64,
    pattern: PatternArg,
    wss: f64,
    sizes: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adjusted_rand_index: Option<f64>,
}

fn cluster_cmd(run: &mut Run, a: &ClusterArgs, seed: u64) -> CliResult {
    let ds = load_dataset(run, &a.data.data)?;
    let m = patterns_of(&ds, a.pattern)?;
    let cfg = KMeansConfig {
        max_iter: a.max_iter,
        init: match a.init {
            InitArg::Random => Init::Random,
            InitArg::KmeansPlusPlus => Init::KMeansPlusPlus,
        },
        ..KMeansConfig::new(a.k, a.nstart, seed)
    };
    let z = kmeans(&m, &cfg)?;
    let ari = match &a.truth {
        Some(path) => {
            run.input(path);
            let truth = read_zone_labels(&ds, path).map_err(reading(path))?;
            Some(adjusted_rand_index(&z.labels, &truth)?)
        }
        None => None,
    };
    let labels = csv_bytes(|b| write_zone_labels(&ds, &z.labels, b))?;
    write(run, "labels.csv", &labels)?;
    write_json(
        run,
        "cluster.json",
        &ClusterSummary {
            k: a.k,
            nstart: a.nstart,
            max_iter: a.max_iter,
            seed,
            pattern: a.pattern,
            wss: z.wss,
            sizes: z.sizes(),
            centroids: z.centroids.clone(),
            adjusted_rand_index: ari,
        },
    )?;
    match ari {
        Some(v) => println!("wss {} ari {v:.4}", z.wss),
        None => println!("wss {}", z.wss),
    }
    Ok(())
}

fn stability_cmd(run: &mut Run, a: &StabilityArgs, seed: u64) -> CliResult {
    let ds = load_dataset(run, &a.data.data)?;
    let m = patterns_of(&ds, a.pattern)?;
    let cfg = StabilityConfig {
        ks: a.ks.clone(),
        nstarts: a.nstarts.clone(),
        runs: a.runs,
        max_iter: a.max_iter,
        seed,
    };
    let table = stability_analysis(&m, &cfg)?;
    let bytes = csv_bytes(|b| table.write_csv(b))?;
    write(run, "stability.csv", &bytes)?;
    write_json(run, "stability.json", &table)?;
    Ok(())
}

#[derive(Serialize)]
struct ZoneDiagnosticSummary {
    zone: usize,
    members: usize,
    pairs: usize,
    distance: MarginalSummary,
    covariance: MarginalSummary,
    joint_cov: Option<[[f64; 2]; 2]>,
}

#[derive(Serialize)]
struct DiagnoseSummary {
    max_pairs: usize,
    jb_critical_5pct: f64,
    zones: Vec<ZoneDiagnosticSummary>,
}

fn diagnose_cmd(run: &mut Run, a: &DiagnoseArgs, seed: u64) -> CliResult {
    let ds = load_dataset(run, &a.data.data)?;
    let raw = raw_log_hec_matrix(&ds)?;
    let z = load_zones(run, &ds, &a.zones.zones, &raw)?;
    let diags = zone_diagnostics(&ds, &raw, &z, a.max_pairs, seed)?;
    let mut zones = Vec::with_capacity(diags.len());
    for d in diags {
        let mut csv = String::from("dist_miles,cov\n");
        for (x, c) in d.dist_samples.iter().zip(&d.cov_samples) {
            csv.push_str(&format!("{},{}\n", num(*x), num(*c)));
        }
        write(run, &format!("diagnostics_zone_{}.csv", d.zone), csv.as_bytes())?;
        zones.push(ZoneDiagnosticSummary {
            zone: d.zone,
            members: d.members,
            pairs: d.dist_samples.len(),
            distance: d.distance,
            covariance: d.covariance,
            joint_cov: d.joint_cov,
        });
    }
    write_json(
        run,
        "diagnostics.json",
        &DiagnoseSummary {
            max_pairs: a.max_pairs,
            jb_critical_5pct: eczones::geostats::JB_CRITICAL_5PCT,
            zones,
        },
    )
}

#[derive(Serialize)]
struct ZonePca {
    zone: usize,
    members: usize,
    mean: Vec<f64>,
    eigenvalues: Vec<f64>,
    explained: Vec<f64>,
    first_component: Vec<f64>,
    near_constant: stats::NearConstant,
}

#[derive(Serialize)]
struct PcaSummary {
    zones: Vec<ZonePca>,
}

fn pca_cmd(run: &mut Run, a: &PcaArgs) -> CliResult {
    let ds = load_dataset(run, &a.data.data)?;
    let m = monthly_avg_log_hec_matrix(&ds)?;
    let z = match &a.zones {
        Some(p) => load_zones(run, &ds, p, &m)?,
        None => single_zone(&m)?,
    };
    let results = zone_pca(&m, &z)?;
    let sizes = z.sizes();
    let mut csv = String::from("zone,component,eigenvalue,explained");
    for t in 1..=m.n_cols() {
        csv.push_str(&format!(",m_{t}"));
    }
    csv.push('\n');
    let mut zones = Vec::with_capacity(results.len());
    for (zone, p) in results.into_iter().enumerate() {
        for (j, comp) in p.components.iter().enumerate() {
            csv.push_str(&format!("{zone},{},{},{}", j + 1, num(p.eigenvalues[j]), num(p.explained[j])));
            for v in comp {
                csv.push(',');
                csv.push_str(&num(*v));
            }
            csv.push('\n');
        }
        zones.push(ZonePca {
            zone,
            members: sizes[zone],
            near_constant: stats::near_constant_check(&p),
            first_component: p.components[0].clone(),
            mean: p.mean,
            eigenvalues: p.eigenvalues,
            explained: p.explained,
        });
    }
    write(run, "pca.csv", csv.as_bytes())?;
    write_json(run, "pca.json", &PcaSummary { zones })
}

fn regress_cmd(run: &mut Run, a: &RegressArgs) -> CliResult {
    let ds = load_dataset(run, &a.data.data)?;
    let m = raw_log_hec_matrix(&ds)?;
    let z = load_zones(run, &ds, &a.zones.zones, &m)?;
    let reg = clustered_regression(&ds, &z, a.covariate.into())?;
    println!("pooled r2 {:.4}", reg.overall.r2);
    write_json(run, "regress.json", &reg)
}

#[derive(Serialize)]
struct ZoneGpSummary {
    zone: usize,
    #[serde(flatten)]
    summary: GpSummary,
}

#[derive(Serialize)]
struct GpOutput {
    grid: String,
    zones: Vec<ZoneGpSummary>,
}

fn gp_cmd(run: &mut Run, a: &GpArgs) -> CliResult {
    let ds = load_dataset(run, &a.data.data)?;
    let m = raw_log_hec_matrix(&ds)?;
    let z = load_zones(run, &ds, &a.zones.zones, &m)?;
    let fits = clustered_gp_regression(&ds, &z, &a.grid, a.curve_points)?;
    let mut csv = String::from("zone,phi,log_phi,mean,std_err,lo,hi\n");
    for f in &fits {
        for p in &f.curve {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                f.zone,
                num(p.phi),
                num(p.log_phi),
                num(p.mean),
                num(p.std_err),
                num(p.lo),
                num(p.hi)
            ));
        }
    }
    write(run, "gp_curves.csv", csv.as_bytes())?;
    let curves: Vec<_> = fits.iter().map(|f| (f.zone, f.curve.clone())).collect();
    let svg = report::render_band_plot(&curves, "GP regression by zone", "log10 PHI", "mean log10 HEC");
    write(run, "gp_bands.svg", svg.as_bytes())?;
    write_json(
        run,
        "gp.json",
        &GpOutput {
            grid: a.grid.to_string(),
            zones: fits
                .iter()
                .map(|f| ZoneGpSummary {
                    zone: f.zone,
                    summary: f.summary(),
                })
                .collect(),
        },
    )
}

#[derive(Serialize)]
struct MixregOutput {
    covariate: Covariate,
    #[serde(flatten)]
    model: MixregModel,
}

#[derive(Serialize)]
struct MixregModel {
    experts: Vec<stats::Expert>,
    weights: Vec<f64>,
    log_likelihood: f64,
    iterations: usize,
    converged: bool,
    restart: usize,
    ll_trace: Vec<f64>,
}

fn mixreg_cmd(run: &mut Run, a: &MixregArgs, seed: u64) -> CliResult {
    let ds = load_dataset(run, &a.data.data)?;
    let (x, y) = regression_points(&ds, a.covariate.into())?;
    let model = mixture_regression_em(&x, &y, a.k, a.restarts, seed)?;
    let mut csv = String::from("id");
    for j in 0..a.k {
        csv.push_str(&format!(",r_{j}"));
    }
    csv.push('\n');
    for (r, resp) in ds.records.iter().zip(&model.responsibilities) {
        csv.push_str(&r.id);
        for v in resp {
            csv.push(',');
            csv.push_str(&num(*v));
        }
        csv.push('\n');
    }
    write(run, "mixreg_responsibilities.csv", csv.as_bytes())?;
    write_json(
        run,
        "mixreg.json",
        &MixregOutput {
            covariate: a.covariate.into(),
            model: MixregModel {
                experts: model.experts,
                weights: model.weights,
                log_likelihood: model.log_likelihood,
                iterations: model.iterations,
                converged: model.converged,
                restart: model.restart,
                ll_trace: model.ll_trace,
            },
        },
    )
}

/// Per-record value and weight for the density subcommands.
fn density_sample(ds: &Dataset, variable: KdeVariable, weights: KdeWeights) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let values = match variable {
        KdeVariable::LogHec => ds.records.iter().map(mean_log_hec).collect::<eczones::Result<Vec<_>>>()?,
        KdeVariable::LogPhi => {
            let all: Vec<usize> = (0..ds.len()).collect();
            income_consumption_points(ds, &all)?.0
        }
    };
    let w = match weights {
        KdeWeights::Uniform => vec![1.0; ds.len()],
        KdeWeights::Households => ds
            .records
            .iter()
            .map(|r| r.households.iter().map(|&h| f64::from(h)).sum::<f64>() / r.months().max(1) as f64)
            .collect(),
    };
    Ok((values, w))
}

type Groups = Vec<(Vec<f64>, Vec<f64>)>;

fn group_by_zone(values: &[f64], weights: &[f64], z: &ZoneAssignment) -> Groups {
    z.members()
        .iter()
        .map(|rows| {
            (
                rows.iter().map(|&i| values[i]).collect(),
                rows.iter().map(|&i| weights[i]).collect(),
            )
        })
        .collect()
}

fn density_curves(groups: &Groups, bandwidth: Option<f64>, points: usize) -> CliResult<stats::DensityMixture> {
    let pooled_v: Vec<f64> = groups.iter().flat_map(|g| g.0.iter().copied()).collect();
    let pooled_w: Vec<f64> = groups.iter().flat_map(|g| g.1.iter().copied()).collect();
    let h = match bandwidth {
        Some(h) => h,
        None => silverman_bandwidth(&pooled_v, &pooled_w)?,
    };
    let grid = density_grid(&pooled_v, h, points);
    Ok(kde_mixture(groups, Some(h), &grid)?)
}

#[derive(Serialize)]
struct KdeSummary {
    variable: KdeVariable,
    weights: KdeWeights,
    bandwidth: f64,
    fractions: Vec<f64>,
}

fn kde_cmd(run: &mut Run, a: &KdeArgs) -> CliResult {
    if a.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let ds = load_dataset(run, &a.data.data)?;
    let m = raw_log_hec_matrix(&ds)?;
    let z = match &a.zones {
        Some(p) => load_zones(run, &ds, p, &m)?,
        None => single_zone(&m)?,
    };
    let (values, weights) = density_sample(&ds, a.variable, a.weights)?;
    let mix = density_curves(&group_by_zone(&values, &weights, &z), a.bandwidth, a.points)?;
    let mut csv = String::from("x");
    for j in 0..mix.components.len() {
        csv.push_str(&format!(",zone_{j}"));
    }
    csv.push_str(",total\n");
    for (i, x) in mix.grid.iter().enumerate() {
        csv.push_str(&num(*x));
        for c in &mix.components {
            csv.push(',');
            csv.push_str(&num(c[i]));
        }
        csv.push(',');
        csv.push_str(&num(mix.total[i]));
        csv.push('\n');
    }
    write(run, "kde.csv", csv.as_bytes())?;
    write_json(
        run,
        "kde.json",
        &KdeSummary {
            variable: a.variable,
            weights: a.weights,
            bandwidth: mix.bandwidth,
            fractions: mix.fractions,
        },
    )
}

#[derive(Serialize)]
struct CecOutput {
    covariates: CecCovariates,
    ln_hec: f64,
    hec: f64,
}

fn cec_cmd(run: &mut Run, a: &CecArgs) -> CliResult {
    let covariates = CecCovariates {
        pph: a.pph,
        pci: a.pci,
        unemp_rate: a.unemp_rate,
        res_elec_rate: a.res_elec_rate,
        cool_days: a.cool_days,
        heat_days: a.heat_days,
        ladwp: a.ladwp,
    };
    let ln_hec = cec_model_eval(&covariates)?;
    println!("{ln_hec}");
    write_json(
        run,
        "cec.json",
        &CecOutput {
            covariates,
            ln_hec,
            hec: ln_hec.exp(),
        },
    )
}

fn report_cmd(run: &mut Run, a: &ReportArgs) -> CliResult {
    let ds = load_dataset(run, &a.data.data)?;
    let normalized = normalized_log_hec_matrix(&ds)?;
    let z = load_zones(run, &ds, &a.zones.zones, &normalized)?;

    let points: Vec<_> = ds.records.iter().map(|r| r.position()).collect();
    let map = report::render_scatter_map(&points, &z.labels, "Block groups by zone")?;
    write(run, "map.svg", map.as_bytes())?;

    let tree = hierarchical_order(&normalized)?;
    let heat = report::render_heatmap(&normalized, &tree.order)?;
    write(run, "heatmap.svg", heat.as_bytes())?;

    let covariate: Covariate = a.covariate.into();
    let reg = clustered_regression(&ds, &z, covariate)?;
    let (x, y) = regression_points(&ds, covariate)?;
    let lines: Vec<FittedLine> = reg
        .zones
        .iter()
        .enumerate()
        .map(|(zone, m)| FittedLine {
            zone,
            slope: m.slope,
            intercept: m.intercept,
        })
        .collect();
    let xlabel = match covariate {
        Covariate::Phi => "log10 PHI",
        Covariate::Pci => "log10 PCI",
    };
    let svg = report::render_regression_plot(&x, &y, &z.labels, &lines, "Per-zone regression", xlabel, "mean log10 HEC")?;
    write(run, "regression.svg", svg.as_bytes())?;

    let (values, weights) = density_sample(&ds, KdeVariable::LogHec, KdeWeights::Households)?;
    let mix = density_curves(&group_by_zone(&values, &weights, &z), None, 200)?;
    let mut curves: Vec<(String, Vec<f64>)> = mix
        .components
        .iter()
        .enumerate()
        .map(|(j, c)| (format!("zone {j}"), c.iter().map(|v| v * mix.fractions[j]).collect()))
        .collect();
    curves.push(("total".into(), mix.total.clone()));
    let svg = report::render_density_plot(&mix.grid, &curves, true, "Household-weighted density of mean log10 HEC", "mean log10 HEC");
    write(run, "density.svg", svg.as_bytes())
}
