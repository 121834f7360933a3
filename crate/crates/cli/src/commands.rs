//! Subcommands.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use nli_planner::campaign::{
    fit_coefficients, prepare_system, run_campaign, system_index, BenchmarkSpec, CampaignConfig, FitConfig,
    VariantSpec,
};
use nli_planner::cfm::{ModelKind, ModelVariant};
use nli_planner::estimator::NliEstimator;
use nli_planner::gn_oracle::{gn_rx_psd_all, GnOracle, MatchedFilter, QuadratureConfig};
use nli_planner::model::LinkSpec;
use nli_planner::perf::{evaluate_all_channels, reach_from_snr, snr_report, SensitivityPolicy};
use nli_planner::power_opt::PowerOptConfig;
use nli_planner::sysgen::{generate_indexed, Category, CutPosition, GeneratorConfig};

use crate::report;
use crate::schema::{
    from_versioned_str, to_versioned_string, CoefficientsFileV1, EvaluationResult, OracleResult, ResultFileV1,
    StoredTracesFileV1, SystemFileV1,
};

/// Invalid flag combination detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "nli-planner", version, about = "Closed-form NLI estimation and campaign tooling")]
pub struct Cli {
    /// Worker threads (all cores when absent).
    #[arg(long, global = true, env = "NLI_PLANNER_THREADS")]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate random systems, one file each.
    Generate(GenerateArgs),
    /// SNR of every channel of a system under one model.
    Evaluate(EvaluateArgs),
    /// Model-versus-benchmark error campaign.
    Campaign(CampaignArgs),
    /// Fit model coefficients against a benchmark.
    Fit(FitArgs),
    /// Numerical GN reference for one system.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PositionArg {
    Lowest,
    Center,
    Highest,
}

impl From<PositionArg> for CutPosition {
    fn from(p: PositionArg) -> Self {
        match p {
            PositionArg::Lowest => CutPosition::Lowest,
            PositionArg::Center => CutPosition::Center,
            PositionArg::Highest => CutPosition::Highest,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub category: u8,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long, value_enum, default_value = "center")]
    pub cut_position: PositionArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n_spans: Option<usize>,
    /// Counter of the first system.
    #[arg(long, default_value_t = 0)]
    pub first: u64,
    /// Keep the nominal launch PSD instead of optimizing launch powers.
    #[arg(long)]
    pub no_power_opt: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, default_value = "CFM1")]
    pub variant: String,
    /// Coefficients file; its variant overrides --variant.
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
    /// Truncate the link to this many spans.
    #[arg(long)]
    pub spans: Option<usize>,
    /// Result file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for channels.csv and spans.csv.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `oracle`, a model name (CFM1..CFM4), `coefficients:<file>` or `stored:<file>`.
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for stats.csv, histogram.csv and systems.csv.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "CFM2")]
    pub variant: String,
    /// `oracle`, a model name (CFM1..CFM4), `coefficients:<file>` or `stored:<file>`.
    #[arg(long, default_value = "oracle")]
    pub benchmark: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub system: PathBuf,
    /// Evaluation frequencies (THz); the CUT center when absent.
    #[arg(long = "f-eval", num_args = 1..)]
    pub f_eval: Vec<f64>,
    /// Integrate over the matched filter with this many frequency samples.
    #[arg(long)]
    pub matched_samples: Option<usize>,
    #[arg(long)]
    pub points_per_bandwidth: Option<usize>,
    #[arg(long)]
    pub ridge_resolution: Option<f64>,
    /// Skip the refinement check.
    #[arg(long)]
    pub no_check: bool,
    #[arg(long)]
    pub spans: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write oracle.csv here.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Campaign(a) => campaign(a),
        Command::Fit(a) => fit(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(nli_planner::Error::from)
        .with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(nli_planner::Error::from)?;
    }
    fs::write(path, text)
        .map_err(nli_planner::Error::from)
        .with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv_file(dir: &Path, name: &str) -> Result<fs::File> {
    fs::create_dir_all(dir).map_err(nli_planner::Error::from)?;
    let path = dir.join(name);
    fs::File::create(&path)
        .map_err(nli_planner::Error::from)
        .with_context(|| format!("creating {}", path.display()))
}

fn csv_err(e: csv::Error) -> anyhow::Error {
    nli_planner::Error::Io(std::io::Error::other(e.to_string())).into()
}

fn load_versioned<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    from_versioned_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_system(path: &Path) -> Result<SystemFileV1> {
    load_versioned(path)
}

fn load_link(path: &Path, spans: Option<usize>) -> Result<(SystemFileV1, LinkSpec)> {
    let file = load_system(path)?;
    let mut link = file.to_link().with_context(|| format!("building the link of {}", path.display()))?;
    if let Some(n) = spans {
        if n == 0 || n > link.n_spans() {
            return Err(usage(format!("--spans must be in 1..={}", link.n_spans())));
        }
        link = link.truncated(n)?;
    }
    Ok((file, link))
}

fn parse_kind(name: &str) -> Result<ModelKind> {
    name.parse::<ModelKind>().map_err(|e| usage(e.to_string()))
}

/// Variant from a coefficients file, checked for arity.
pub fn load_coefficients(path: &Path) -> Result<(CoefficientsFileV1, ModelVariant)> {
    let file: CoefficientsFileV1 = load_versioned(path)?;
    let variant = ModelVariant::with_coefficients(file.kind, file.coefficients.clone())
        .with_context(|| format!("coefficients in {}", path.display()))?;
    Ok((file, variant))
}

fn parse_benchmark(spec: &str) -> Result<BenchmarkSpec> {
    if spec.eq_ignore_ascii_case("oracle") || spec.eq_ignore_ascii_case("gn") {
        return Ok(BenchmarkSpec::GnOracle { oracle: GnOracle::default() });
    }
    if let Some(path) = spec.strip_prefix("stored:") {
        let file: StoredTracesFileV1 = load_versioned(Path::new(path))?;
        return Ok(BenchmarkSpec::Stored { traces: file.traces });
    }
    if let Some(path) = spec.strip_prefix("coefficients:") {
        let (file, _) = load_coefficients(Path::new(path))?;
        let label = file.label.clone().unwrap_or_else(|| format!("{}-custom", file.kind));
        return Ok(BenchmarkSpec::Model { variant: VariantSpec::custom(file.kind, file.coefficients, label) });
    }
    let kind = parse_kind(spec)?;
    Ok(BenchmarkSpec::Model { variant: VariantSpec::published(kind) })
}

fn generate(a: GenerateArgs) -> Result<()> {
    let category = Category::try_from(a.category).map_err(|e| usage(e.to_string()))?;
    let position = CutPosition::from(a.cut_position);
    let mut generator = GeneratorConfig { category, cut_position: position, seed: a.seed, ..GeneratorConfig::default() };
    if let Some(n) = a.n_spans {
        generator.n_spans = n;
    }
    generator.validate()?;
    let policy = SensitivityPolicy::default();
    let power = PowerOptConfig::default();
    fs::create_dir_all(&a.out).map_err(nli_planner::Error::from)?;
    for k in a.first..a.first + a.count {
        let index = system_index(category, position, k);
        let (link, threshold) = if a.no_power_opt {
            let sys = generate_indexed(&generator, &policy, index)?;
            (sys.link, sys.threshold_db)
        } else {
            let sys = prepare_system(&generator, &power, &policy, index)?;
            (sys.link, sys.threshold_db)
        };
        let file = SystemFileV1::from_link(&link, Some(threshold), Some(index));
        let path = a.out.join(format!("system_c{}_{}_{k:06}.json", category.number(), position.name()));
        write_text(&path, &file.to_json()?)?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (file, link) = load_link(&a.system, a.spans)?;
    let (label, variant) = match &a.coefficients {
        Some(p) => {
            let (file, v) = load_coefficients(p)?;
            (file.label.unwrap_or_else(|| file.kind.to_string()), v)
        }
        None => {
            let kind = parse_kind(&a.variant)?;
            (kind.to_string(), ModelVariant::published(kind))
        }
    };
    let result = evaluate_link(&link, &variant, label, file.threshold_db)?;
    if let Some(dir) = &a.csv_dir {
        report::write_channels(csv_file(dir, "channels.csv")?, &result.channels).map_err(csv_err)?;
        report::write_spans(csv_file(dir, "spans.csv")?, &result.cut).map_err(csv_err)?;
    }
    emit(a.out.as_deref(), &ResultFileV1::Evaluation(result).to_json()?)
}

/// SNR of every channel plus the per-span report and reach of the CUT.
pub fn evaluate_link(
    link: &LinkSpec,
    variant: &ModelVariant,
    label: String,
    threshold_db: Option<f64>,
) -> Result<EvaluationResult> {
    let channels = evaluate_all_channels(link, variant)?;
    let cut = snr_report(link, variant)?;
    let reach = match threshold_db {
        Some(t) => match reach_from_snr(&cut.per_span_snr_db, t) {
            Ok(r) => Some(r),
            Err(e) => {
                warn!("no reach: {e}");
                None
            }
        },
        None => None,
    };
    Ok(EvaluationResult { model: label, n_spans: link.n_spans(), cut_index: link.cut_index(), channels, cut, reach })
}

fn campaign(a: CampaignArgs) -> Result<()> {
    let mut cfg: CampaignConfig = load_versioned(&a.config)?;
    if let Some(b) = &a.benchmark {
        cfg.benchmark = parse_benchmark(b)?;
    }
    let result = run_campaign(&cfg)?;
    info!(
        "{} systems evaluated, {} unreachable, {} low dispersion, {} failed",
        result.systems.len(),
        result.excluded.unreachable,
        result.excluded.low_dispersion,
        result.excluded.failed
    );
    if let Some(dir) = &a.csv_dir {
        report::write_stats(csv_file(dir, "stats.csv")?, &result).map_err(csv_err)?;
        report::write_histogram(csv_file(dir, "histogram.csv")?, &result).map_err(csv_err)?;
        report::write_systems(csv_file(dir, "systems.csv")?, &result).map_err(csv_err)?;
    }
    emit(a.out.as_deref(), &ResultFileV1::Campaign(result).to_json()?)
}

fn fit(a: FitArgs) -> Result<()> {
    let cfg: FitConfig = load_versioned(&a.config)?;
    let kind = parse_kind(&a.variant)?;
    if kind == ModelKind::Cfm1 {
        return Err(usage("CFM1 has no coefficients to fit"));
    }
    let bench = parse_benchmark(&a.benchmark)?.build()?;
    let outcome = fit_coefficients(&cfg, kind, &bench)?;
    if !outcome.improved {
        warn!("fit did not improve on the initial coefficients");
    }
    let file = CoefficientsFileV1::from_fit(&outcome, bench.label());
    write_text(&a.out, &to_versioned_string(&file)?)
}

fn oracle(a: OracleArgs) -> Result<()> {
    let (_, link) = load_link(&a.system, a.spans)?;
    let mut q = QuadratureConfig::default();
    if let Some(n) = a.points_per_bandwidth {
        q.points_per_bandwidth = n;
    }
    if let Some(r) = a.ridge_resolution {
        q.ridge_resolution = r;
    }
    q.check_convergence = !a.no_check;
    q.validate()?;
    let f_eval = if a.f_eval.is_empty() { vec![link.f_cut()] } else { a.f_eval.clone() };
    let mut psds = Vec::with_capacity(f_eval.len());
    for &f in &f_eval {
        psds.push(gn_rx_psd_all(&link, f, &q)?);
    }
    let mut oracle = GnOracle::new(q);
    if let Some(n) = a.matched_samples {
        MatchedFilter::for_channel(link.cut(0)).sample_frequencies(n)?;
        oracle = oracle.with_matched_filter(n);
    }
    let p_nli = oracle.nli_trace(&link)?.power;
    let result = OracleResult {
        f_eval_thz: f_eval,
        nli_psd_w_per_thz: psds,
        p_nli_w: p_nli,
        matched_filter: a.matched_samples.is_some(),
    };
    if let Some(dir) = &a.csv_dir {
        report::write_oracle(csv_file(dir, "oracle.csv")?, &result).map_err(csv_err)?;
    }
    emit(a.out.as_deref(), &ResultFileV1::Oracle(result).to_json()?)
}
