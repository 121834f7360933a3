//! Multi-system evaluation campaigns, the span-increment diagnostic and
//! coefficient fitting against a benchmark.

use std::collections::BTreeMap;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cfm::{beta2_acc, ModelCoefficients, ModelKind, ModelVariant};
use crate::error::{Error, Result};
use crate::estimator::{NliEstimator, NliTrace};
use crate::gn_oracle::GnOracle;
use crate::model::{LinkSpec, LOW_DISPERSION_LIMIT};
use crate::perf::{delta_snr, reach_from_snr, snr_report, SensitivityPolicy};
use crate::power_opt::{optimize_launch, PowerOptConfig};
use crate::sysgen::{generate_system, system_rng, Category, CutPosition, GeneratorConfig};

pub const DEFAULT_BIN_WIDTH_DB: f64 = 0.02;

/// Index bit reserved for training systems.
pub const TRAINING_STREAM: u64 = 1 << 63;

/// Largest per-group system counter.
pub const MAX_SYSTEMS_PER_GROUP: u64 = 1 << 36;

const MAX_HISTOGRAM_BINS: i64 = 1_000_000;

/// Stream index of system `k` of a (category, CUT position) group.
pub fn system_index(category: Category, position: CutPosition, k: u64) -> u64 {
    debug_assert!(k < MAX_SYSTEMS_PER_GROUP);
    (u64::from(category.number()) << 40) | ((position as u64) << 36) | k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub center_db: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    /// Largest |x|.
    pub peak: f64,
    pub peak_to_peak: f64,
    pub min: f64,
    pub max: f64,
    pub bin_width_db: f64,
    pub bins: Vec<HistogramBin>,
}

pub fn error_stats(samples: &[f64]) -> Result<ErrorStats> {
    error_stats_with_bins(samples, DEFAULT_BIN_WIDTH_DB)
}

pub fn error_stats_with_bins(samples: &[f64], bin_width_db: f64) -> Result<ErrorStats> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sample".into()));
    }
    let n = samples.len();
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = (samples.iter().sum::<f64>() / n as f64).clamp(min, max);
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(ErrorStats {
        n,
        mean,
        std_dev: var.sqrt(),
        peak: min.abs().max(max.abs()),
        peak_to_peak: max - min,
        min,
        max,
        bin_width_db,
        bins: histogram(samples, bin_width_db)?,
    })
}

/// Contiguous bins centred on multiples of `bin_width_db`.
pub fn histogram(samples: &[f64], bin_width_db: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width_db.is_finite() && bin_width_db > 0.0) {
        return Err(Error::InvalidParameter(format!("bin width {bin_width_db}")));
    }
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let keys: Vec<i64> = samples.iter().map(|x| (x / bin_width_db).round() as i64).collect();
    let lo = *keys.iter().min().expect("non-empty");
    let hi = *keys.iter().max().expect("non-empty");
    if hi - lo >= MAX_HISTOGRAM_BINS {
        return Err(Error::InvalidParameter(format!("{} histogram bins", hi - lo + 1)));
    }
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for k in keys {
        counts[(k - lo) as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin { center_db: (lo + i as i64) as f64 * bin_width_db, count })
        .collect())
}

/// Serializable model variant with an optional display label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub kind: ModelKind,
    /// Shipped table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<ModelCoefficients>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl VariantSpec {
    pub fn published(kind: ModelKind) -> Self {
        Self { kind, coefficients: None, label: None }
    }

    pub fn custom(kind: ModelKind, coefficients: ModelCoefficients, label: impl Into<String>) -> Self {
        Self { kind, coefficients: Some(coefficients), label: Some(label.into()) }
    }

    pub fn variant(&self) -> Result<ModelVariant> {
        match &self.coefficients {
            None => Ok(ModelVariant::published(self.kind)),
            Some(c) => ModelVariant::with_coefficients(self.kind, c.clone()),
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.to_string())
    }
}

/// Benchmark selection as stored in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BenchmarkSpec {
    GnOracle {
        #[serde(default)]
        oracle: GnOracle,
    },
    Model {
        variant: VariantSpec,
    },
    /// Precomputed traces keyed by system index.
    Stored {
        traces: BTreeMap<u64, NliTrace>,
    },
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec::GnOracle { oracle: GnOracle::default() }
    }
}

impl BenchmarkSpec {
    pub fn build(&self) -> Result<Benchmark> {
        Ok(match self {
            BenchmarkSpec::GnOracle { oracle } => {
                oracle.quadrature.validate()?;
                Benchmark::Oracle(*oracle)
            }
            BenchmarkSpec::Model { variant } => Benchmark::Model(variant.label(), variant.variant()?),
            BenchmarkSpec::Stored { traces } => Benchmark::Stored(traces.clone()),
        })
    }
}

#[derive(Debug, Clone)]
pub enum Benchmark {
    Oracle(GnOracle),
    Model(String, ModelVariant),
    Stored(BTreeMap<u64, NliTrace>),
}

impl Benchmark {
    pub fn label(&self) -> String {
        match self {
            Benchmark::Oracle(o) => o.label(),
            Benchmark::Model(label, _) => label.clone(),
            Benchmark::Stored(_) => "stored".into(),
        }
    }

    /// NLI trace of system `index`.
    pub fn trace(&self, index: u64, link: &LinkSpec) -> Result<NliTrace> {
        match self {
            Benchmark::Oracle(o) => o.nli_trace(link),
            Benchmark::Model(_, v) => v.nli_trace(link),
            Benchmark::Stored(map) => {
                let t = map
                    .get(&index)
                    .ok_or_else(|| Error::InvalidParameter(format!("no stored trace for system {index}")))?;
                if t.psd.len() != link.n_spans() || t.power.len() != link.n_spans() {
                    return Err(Error::InvalidParameter(format!(
                        "stored trace for system {index} has {} spans, link has {}",
                        t.power.len(),
                        link.n_spans()
                    )));
                }
                Ok(t.clone())
            }
        }
    }

    /// The benchmark bound to one system, usable wherever an estimator is expected.
    pub fn for_system(&self, index: u64) -> BoundBenchmark<'_> {
        BoundBenchmark { bench: self, index }
    }
}

pub struct BoundBenchmark<'a> {
    bench: &'a Benchmark,
    index: u64,
}

impl NliEstimator for BoundBenchmark<'_> {
    fn label(&self) -> String {
        self.bench.label()
    }

    fn nli_trace(&self, link: &LinkSpec) -> Result<NliTrace> {
        self.bench.trace(self.index, link)
    }
}

/// A generated, power-optimized system ready for evaluation.
#[derive(Debug, Clone)]
pub struct PreparedSystem {
    pub index: u64,
    pub category: Category,
    pub cut_position: CutPosition,
    pub link: LinkSpec,
    pub threshold_db: f64,
    pub min_cut_dispersion: f64,
}

/// Generates system `index` and sets its launch powers.
pub fn prepare_system(
    generator: &GeneratorConfig,
    power: &PowerOptConfig,
    policy: &SensitivityPolicy,
    index: u64,
) -> Result<PreparedSystem> {
    let mut rng = system_rng(generator.seed, index);
    let sys = generate_system(generator, policy, &mut rng)?;
    let refine = ModelVariant::published(power.refine_model);
    let (link, _) = optimize_launch(&sys.link, &refine, power, &mut rng)?;
    Ok(PreparedSystem {
        index,
        category: sys.category,
        cut_position: sys.cut_position,
        min_cut_dispersion: link.min_cut_dispersion(),
        link,
        threshold_db: sys.threshold_db,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub generator: GeneratorConfig,
    pub categories: Vec<Category>,
    pub cut_positions: Vec<CutPosition>,
    /// Systems per (category, CUT position).
    pub n_systems: u64,
    /// Counter of the first system in every group.
    pub first_index: u64,
    pub variants: Vec<VariantSpec>,
    pub benchmark: BenchmarkSpec,
    pub bin_width_db: f64,
    pub power: PowerOptConfig,
    pub policy: SensitivityPolicy,
    /// Systems whose CUT dispersion falls below this in any span are excluded (ps²/km).
    pub min_cut_dispersion_ps2_per_km: Option<f64>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            categories: vec![Category::FullQam],
            cut_positions: CutPosition::ALL.to_vec(),
            n_systems: 10,
            first_index: 0,
            variants: vec![VariantSpec::published(ModelKind::Cfm1)],
            benchmark: BenchmarkSpec::default(),
            bin_width_db: DEFAULT_BIN_WIDTH_DB,
            power: PowerOptConfig::default(),
            policy: SensitivityPolicy::default(),
            min_cut_dispersion_ps2_per_km: Some(LOW_DISPERSION_LIMIT),
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.policy.validate()?;
        if self.n_systems == 0 {
            return Err(Error::InvalidParameter("n_systems must be at least 1".into()));
        }
        if self.first_index.saturating_add(self.n_systems) > MAX_SYSTEMS_PER_GROUP {
            return Err(Error::InvalidParameter("system counter exceeds the group range".into()));
        }
        if !(self.bin_width_db.is_finite() && self.bin_width_db > 0.0) {
            return Err(Error::InvalidParameter(format!("bin width {}", self.bin_width_db)));
        }
        if self.categories.is_empty() || self.cut_positions.is_empty() || self.variants.is_empty() {
            return Err(Error::InvalidParameter("categories, CUT positions and variants must be non-empty".into()));
        }
        for v in &self.variants {
            v.variant()?;
        }
        Ok(())
    }

    /// (category, position, index) of every system, in evaluation order.
    pub fn jobs(&self) -> Vec<(Category, CutPosition, u64)> {
        let mut out = Vec::new();
        for &c in &self.categories {
            for &p in &self.cut_positions {
                out.extend((self.first_index..self.first_index + self.n_systems).map(|k| (c, p, system_index(c, p, k))));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemOutcome {
    pub index: u64,
    pub category: Category,
    pub cut_position: CutPosition,
    pub max_reach_spans: usize,
    pub threshold_db: f64,
    pub benchmark_snr_db: f64,
    /// Δ_SNR of each variant at the benchmark's maximum reach (dB).
    pub delta_snr_db: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionCounts {
    pub unreachable: usize,
    pub low_dispersion: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub variant: String,
    /// `None` pools every CUT position.
    pub cut_position: Option<CutPosition>,
    pub stats: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub benchmark: String,
    pub variants: Vec<String>,
    pub systems: Vec<SystemOutcome>,
    pub excluded: ExclusionCounts,
    pub failures: Vec<(u64, String)>,
    pub stats: Vec<GroupStats>,
}

impl CampaignResult {
    pub fn stats_for(&self, variant: &str, position: Option<CutPosition>) -> Option<&ErrorStats> {
        self.stats
            .iter()
            .find(|g| g.variant == variant && g.cut_position == position)
            .map(|g| &g.stats)
    }
}

enum Exclusion {
    Unreachable,
    LowDispersion,
    Failed(String),
}

fn evaluate_system(
    cfg: &CampaignConfig,
    bench: &Benchmark,
    variants: &[ModelVariant],
    (category, position, index): (Category, CutPosition, u64),
) -> std::result::Result<SystemOutcome, Exclusion> {
    let generator = GeneratorConfig { category, cut_position: position, ..cfg.generator.clone() };
    let sys = prepare_system(&generator, &cfg.power, &cfg.policy, index).map_err(|e| Exclusion::Failed(e.to_string()))?;
    if cfg.min_cut_dispersion_ps2_per_km.is_some_and(|d| sys.min_cut_dispersion < d) {
        return Err(Exclusion::LowDispersion);
    }
    let bmk = snr_report(&sys.link, &bench.for_system(index)).map_err(|e| Exclusion::Failed(e.to_string()))?;
    let reach = match reach_from_snr(&bmk.per_span_snr_db, sys.threshold_db) {
        Ok(r) => r,
        Err(Error::Unreachable { .. }) => return Err(Exclusion::Unreachable),
        Err(e) => return Err(Exclusion::Failed(e.to_string())),
    };
    let at = reach.max_reach_spans - 1;
    let deltas = variants
        .iter()
        .map(|v| snr_report(&sys.link, v).map(|r| delta_snr(r.per_span_snr_db[at], bmk.per_span_snr_db[at])))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Exclusion::Failed(e.to_string()))?;
    Ok(SystemOutcome {
        index,
        category,
        cut_position: position,
        max_reach_spans: reach.max_reach_spans,
        threshold_db: sys.threshold_db,
        benchmark_snr_db: reach.snr_at_reach_db,
        delta_snr_db: deltas,
    })
}

/// Generates, optimizes and evaluates every system of the campaign, then
/// aggregates Δ_SNR per (variant, CUT position).
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let bench = cfg.benchmark.build()?;
    let variants = cfg.variants.iter().map(VariantSpec::variant).collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = cfg.variants.iter().map(VariantSpec::label).collect();
    let jobs = cfg.jobs();
    let outcomes: Vec<_> = jobs.par_iter().map(|&job| evaluate_system(cfg, &bench, &variants, job)).collect();

    let mut systems = Vec::new();
    let mut excluded = ExclusionCounts::default();
    let mut failures = Vec::new();
    for (job, outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(o) => systems.push(o),
            Err(Exclusion::Unreachable) => excluded.unreachable += 1,
            Err(Exclusion::LowDispersion) => excluded.low_dispersion += 1,
            Err(Exclusion::Failed(msg)) => {
                log::warn!("system {} failed: {msg}", job.2);
                excluded.failed += 1;
                failures.push((job.2, msg));
            }
        }
    }
    if excluded.unreachable + excluded.low_dispersion > 0 {
        log::info!(
            "excluded {} unreachable and {} low-dispersion systems",
            excluded.unreachable,
            excluded.low_dispersion
        );
    }

    let mut stats = Vec::new();
    for (vi, label) in labels.iter().enumerate() {
        let positions = cfg.cut_positions.iter().map(|p| Some(*p)).chain(std::iter::once(None));
        for pos in positions {
            let samples: Vec<f64> = systems
                .iter()
                .filter(|s| pos.map_or(true, |p| s.cut_position == p))
                .map(|s| s.delta_snr_db[vi])
                .collect();
            if !samples.is_empty() {
                stats.push(GroupStats {
                    variant: label.clone(),
                    cut_position: pos,
                    stats: error_stats_with_bins(&samples, cfg.bin_width_db)?,
                });
            }
        }
    }
    Ok(CampaignResult { benchmark: bench.label(), variants: labels, systems, excluded, failures, stats })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementPoint {
    /// 1-based span number.
    pub span: usize,
    /// |β₂,acc| at the start of the span (ps²).
    pub beta2_acc_abs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanIncrementRatio {
    pub points: Vec<IncrementPoint>,
    /// Spans skipped because the denominator increment vanished.
    pub skipped: Vec<usize>,
}

/// Ratio of the per-span increments of the accumulated Rx NLI PSD of two estimators.
pub fn span_increment_ratio<A, B>(link: &LinkSpec, a: &A, b: &B) -> Result<SpanIncrementRatio>
where
    A: NliEstimator + ?Sized,
    B: NliEstimator + ?Sized,
{
    if link.n_spans() < 2 {
        return Err(Error::InvalidLink("span increments need at least two spans".into()));
    }
    let ga = a.nli_trace(link)?.psd;
    let gb = b.nli_trace(link)?.psd;
    let f_cut = link.f_cut();
    let mut out = SpanIncrementRatio { points: Vec::new(), skipped: Vec::new() };
    let (mut prev_a, mut prev_b) = (0.0, 0.0);
    for n in 0..link.n_spans() {
        let (da, db) = (ga[n] - prev_a, gb[n] - prev_b);
        (prev_a, prev_b) = (ga[n], gb[n]);
        if db == 0.0 {
            out.skipped.push(n + 1);
            continue;
        }
        out.points.push(IncrementPoint { span: n + 1, beta2_acc_abs: beta2_acc(link, n, f_cut).abs(), ratio: da / db });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    #[default]
    NelderMead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub generator: GeneratorConfig,
    /// Category and CUT position mix, assigned round-robin.
    pub categories: Vec<Category>,
    pub cut_positions: Vec<CutPosition>,
    pub n_training: u64,
    pub optimizer: Optimizer,
    /// Iterations of each optimizer run.
    pub max_iters: u64,
    /// Restarts from perturbations of the best point.
    pub restarts: usize,
    pub sd_tolerance: f64,
    /// Relative spread of restart perturbations.
    pub restart_spread: f64,
    /// Shipped table when absent.
    pub initial: Option<ModelCoefficients>,
    pub power: PowerOptConfig,
    pub policy: SensitivityPolicy,
    pub min_cut_dispersion_ps2_per_km: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            categories: Category::ALL.to_vec(),
            cut_positions: CutPosition::ALL.to_vec(),
            n_training: 50,
            optimizer: Optimizer::NelderMead,
            max_iters: 400,
            restarts: 2,
            sd_tolerance: 1e-12,
            restart_spread: 0.1,
            initial: None,
            power: PowerOptConfig::default(),
            policy: SensitivityPolicy::default(),
            min_cut_dispersion_ps2_per_km: Some(LOW_DISPERSION_LIMIT),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.policy.validate()?;
        if self.n_training == 0 || self.categories.is_empty() || self.cut_positions.is_empty() {
            return Err(Error::InvalidParameter("empty training set".into()));
        }
        if self.n_training >= MAX_SYSTEMS_PER_GROUP {
            return Err(Error::InvalidParameter("training set too large".into()));
        }
        if !(self.sd_tolerance >= 0.0 && self.restart_spread.is_finite() && self.restart_spread >= 0.0) {
            return Err(Error::InvalidParameter("invalid optimizer settings".into()));
        }
        Ok(())
    }

    /// (category, position, index) of every training system.
    pub fn training_jobs(&self) -> Vec<(Category, CutPosition, u64)> {
        let mix: Vec<(Category, CutPosition)> = self
            .categories
            .iter()
            .flat_map(|&c| self.cut_positions.iter().map(move |&p| (c, p)))
            .collect();
        (0..self.n_training)
            .map(|j| {
                let (c, p) = mix[(j % mix.len() as u64) as usize];
                (c, p, TRAINING_STREAM | system_index(c, p, j / mix.len() as u64))
            })
            .collect()
    }
}

/// Fails when a training system index also appears among the evaluation systems.
pub fn assert_disjoint(training: &[u64], evaluation: &[u64]) -> Result<()> {
    let eval: std::collections::BTreeSet<u64> = evaluation.iter().copied().collect();
    match training.iter().find(|i| eval.contains(i)) {
        Some(i) => Err(Error::InvalidParameter(format!("system {i} is in both training and evaluation sets"))),
        None => Ok(()),
    }
}

/// One training system truncated at the benchmark's maximum reach.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub index: u64,
    pub link: LinkSpec,
    /// Benchmark NLI power for truncations 1…reach (W).
    pub benchmark_power: Vec<f64>,
}

/// Builds the training set; unreachable, low-dispersion and failed systems are skipped.
pub fn build_training_set(fit: &FitConfig, bench: &Benchmark) -> Result<Vec<TrainingSample>> {
    fit.validate()?;
    let jobs = fit.training_jobs();
    let samples: Vec<Option<TrainingSample>> = jobs
        .par_iter()
        .map(|&(category, position, index)| {
            let generator = GeneratorConfig { category, cut_position: position, ..fit.generator.clone() };
            let sys = prepare_system(&generator, &fit.power, &fit.policy, index).ok()?;
            if fit.min_cut_dispersion_ps2_per_km.is_some_and(|d| sys.min_cut_dispersion < d) {
                return None;
            }
            let est = bench.for_system(index);
            let trace = est.nli_trace(&sys.link).ok()?;
            let report = snr_report(&sys.link, &est).ok()?;
            let reach = reach_from_snr(&report.per_span_snr_db, sys.threshold_db).ok()?.max_reach_spans;
            Some(TrainingSample {
                index,
                link: sys.link.truncated(reach).ok()?,
                benchmark_power: trace.power[..reach].to_vec(),
            })
        })
        .collect();
    let out: Vec<TrainingSample> = samples.into_iter().flatten().collect();
    if out.is_empty() {
        return Err(Error::InvalidParameter("no usable training system".into()));
    }
    debug_assert!(out.iter().all(|s| s.index & TRAINING_STREAM != 0));
    Ok(out)
}

const PENALTY: f64 = 1e30;

/// Σ over systems and spans of the squared relative NLI power error.
pub fn fit_cost(kind: ModelKind, a: &[f64], training: &[TrainingSample]) -> f64 {
    let Ok(variant) = ModelCoefficients::new(kind, a.to_vec()).and_then(|c| ModelVariant::with_coefficients(kind, c)) else {
        return PENALTY;
    };
    let terms: Vec<f64> = training
        .par_iter()
        .map(|s| match variant.nli_trace(&s.link) {
            Ok(t) => t
                .power
                .iter()
                .zip(&s.benchmark_power)
                .filter(|(_, b)| **b != 0.0)
                .map(|(p, b)| ((p - b) / b).powi(2))
                .sum(),
            Err(_) => PENALTY,
        })
        .collect();
    let c: f64 = terms.iter().sum();
    if c.is_finite() {
        c.min(PENALTY)
    } else {
        PENALTY
    }
}

struct FitProblem<'a> {
    kind: ModelKind,
    training: &'a [TrainingSample],
}

impl CostFunction for FitProblem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(fit_cost(self.kind, p, self.training))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub kind: ModelKind,
    pub coefficients: ModelCoefficients,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// False when no start point beat the initial cost; the initial coefficients are returned.
    pub improved: bool,
    pub n_training_systems: usize,
    pub n_terms: usize,
    pub training_indices: Vec<u64>,
}

fn nelder_mead(problem: FitProblem<'_>, x0: &[f64], fit: &FitConfig) -> Result<(Vec<f64>, f64)> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += 0.05 * x0[i].abs().max(0.1);
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(fit.sd_tolerance)
        .map_err(|e| Error::Numeric(e.to_string()))?;
    let res = Executor::new(problem, solver)
        .configure(|s| s.max_iters(fit.max_iters))
        .run()
        .map_err(|e| Error::Numeric(e.to_string()))?;
    let state = res.state();
    let best = state.get_best_param().cloned().unwrap_or_else(|| x0.to_vec());
    Ok((best, state.get_best_cost()))
}

/// Fits the coefficients of `kind` to a prepared training set.
///
/// Starts from the initial point and from the ρ ≡ 1 point, then restarts
/// from perturbations of the best point found. The result never has a
/// higher cost than the initial point.
pub fn fit_to_training(fit: &FitConfig, kind: ModelKind, training: &[TrainingSample]) -> Result<FitOutcome> {
    if kind == ModelKind::Cfm1 {
        return Err(Error::InvalidParameter("CFM1 has no coefficients to fit".into()));
    }
    let initial = match &fit.initial {
        Some(c) => ModelCoefficients::new(kind, c.as_slice().to_vec())?,
        None => ModelCoefficients::published(kind)?,
    };
    let x0 = initial.as_slice().to_vec();
    let c0 = fit_cost(kind, &x0, training);
    let mut best = (x0.clone(), c0);
    let mut starts = vec![x0.clone(), ModelCoefficients::identity(kind)?.as_slice().to_vec()];
    let mut rng = system_rng(fit.generator.seed, TRAINING_STREAM);
    for round in 0..starts.len() + fit.restarts {
        let start = if round < starts.len() {
            std::mem::take(&mut starts[round])
        } else {
            best.0.iter().map(|v| v * (1.0 + fit.restart_spread * rng.gen_range(-1.0..=1.0))).collect()
        };
        let (x, c) = nelder_mead(FitProblem { kind, training }, &start, fit)?;
        log::debug!("fit start {round}: cost {c:e}");
        if c < best.1 {
            best = (x, c);
        }
    }
    let improved = best.1 < c0;
    let coefficients = if improved { ModelCoefficients::new(kind, best.0)? } else { initial };
    Ok(FitOutcome {
        kind,
        coefficients,
        initial_cost: c0,
        final_cost: if improved { best.1 } else { c0 },
        improved,
        n_training_systems: training.len(),
        n_terms: training.iter().map(|s| s.benchmark_power.len()).sum(),
        training_indices: training.iter().map(|s| s.index).collect(),
    })
}

/// Builds the training set and fits the coefficients of `kind` against `bench`.
pub fn fit_coefficients(fit: &FitConfig, kind: ModelKind, bench: &Benchmark) -> Result<FitOutcome> {
    let training = build_training_set(fit, bench)?;
    fit_to_training(fit, kind, &training)
}
