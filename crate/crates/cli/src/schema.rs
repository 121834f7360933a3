//! Versioned JSON file formats.
//!
//! Every file is a JSON object carrying `"version": 1`. Readers reject other
//! versions, and schema violations are reported with a JSON pointer to the
//! offending value.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use nli_planner::campaign::{CampaignResult, FitOutcome};
use nli_planner::cfm::{ModelCoefficients, ModelKind};
use nli_planner::estimator::NliTrace;
use nli_planner::model::{
    ChannelSpec, FiberParams, FiberPreset, GainProfile, LinkSpec, ModulationFormat, SpanConfig,
};
use nli_planner::perf::{ChannelEvaluation, ReachResult, SnrReport};
use nli_planner::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

/// Parses a versioned document into `T`.
pub fn from_versioned_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value: Value = serde_json::from_str(text)?;
    let Value::Object(mut obj) = value else {
        return Err(Error::Schema("/: expected a JSON object".into()));
    };
    match obj.remove("version") {
        None => return Err(Error::Schema("/version: missing".into())),
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(Value::Number(n)) if n.as_u64().is_some_and(|v| v > SCHEMA_VERSION) => {
            return Err(Error::Schema(format!(
                "/version: unsupported version {n}, this build reads version {SCHEMA_VERSION}"
            )))
        }
        Some(v) => return Err(Error::Schema(format!("/version: invalid value {v}"))),
    }
    serde_path_to_error::deserialize(Value::Object(obj)).map_err(|e| {
        let pointer = json_pointer(e.path());
        Error::Schema(format!("{pointer}: {}", e.into_inner()))
    })
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Serializes `value` with the version tag as first key.
pub fn to_versioned_string<T: Serialize>(value: &T) -> Result<String> {
    let Value::Object(body) = serde_json::to_value(value)? else {
        return Err(Error::Schema("document body must serialize to an object".into()));
    };
    let mut obj = Map::new();
    obj.insert("version".into(), Value::from(SCHEMA_VERSION));
    obj.extend(body);
    let mut s = serde_json::to_string_pretty(&Value::Object(obj))?;
    s.push('\n');
    Ok(s)
}

/// Fiber given by preset name or by inline parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FiberRef {
    Preset(FiberPreset),
    Inline(FiberParams),
}

impl FiberRef {
    pub fn params(&self) -> FiberParams {
        match self {
            FiberRef::Preset(p) => p.params(),
            FiberRef::Inline(p) => *p,
        }
    }

    pub fn from_params(p: &FiberParams) -> Self {
        match FiberPreset::matching(p) {
            Some(preset) => FiberRef::Preset(preset),
            None => FiberRef::Inline(*p),
        }
    }
}

/// One value for every span, or one per span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSpan<T> {
    Scalar(T),
    Spans(Vec<T>),
}

impl<T: Copy + PartialEq> PerSpan<T> {
    fn at(&self, s: usize) -> T {
        match self {
            PerSpan::Scalar(v) => *v,
            PerSpan::Spans(v) => v[s],
        }
    }

    fn check_len(&self, n: usize, what: &str) -> Result<()> {
        match self {
            PerSpan::Spans(v) if v.len() != n => {
                Err(Error::Schema(format!("{what}: {} values for {n} spans", v.len())))
            }
            _ => Ok(()),
        }
    }

    fn compact(values: Vec<T>) -> Self {
        if values.windows(2).all(|w| w[0] == w[1]) {
            PerSpan::Scalar(values[0])
        } else {
            PerSpan::Spans(values)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanEntry {
    pub fiber: FiberRef,
    pub length_km: f64,
    pub nf_db: f64,
    /// Transparent at the CUT frequency when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<GainProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub f_center_thz: f64,
    pub rate_tbaud: f64,
    pub roll_off: f64,
    pub format: ModulationFormat,
    pub power_w: PerSpan<f64>,
    #[serde(default = "all_active")]
    pub active: PerSpan<bool>,
}

fn all_active() -> PerSpan<bool> {
    PerSpan::Scalar(true)
}

/// A link and its WDM comb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFileV1 {
    pub spans: Vec<SpanEntry>,
    pub channels: Vec<ChannelEntry>,
    pub cut_index: usize,
    /// SNR threshold of the CUT (dB), enables the reach figure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_db: Option<f64>,
    /// Campaign stream index of a generated system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_index: Option<u64>,
}

impl SystemFileV1 {
    pub fn parse(text: &str) -> Result<Self> {
        from_versioned_str(text)
    }

    pub fn to_json(&self) -> Result<String> {
        to_versioned_string(self)
    }

    pub fn to_link(&self) -> Result<LinkSpec> {
        let n = self.spans.len();
        if n == 0 {
            return Err(Error::Schema("/spans: at least one span is required".into()));
        }
        for (i, ch) in self.channels.iter().enumerate() {
            ch.power_w.check_len(n, &format!("/channels/{i}/power_w"))?;
            ch.active.check_len(n, &format!("/channels/{i}/active"))?;
        }
        let cut = self.channels.get(self.cut_index).ok_or_else(|| {
            Error::Schema(format!("/cut_index: {} out of range", self.cut_index))
        })?;
        let spans = self
            .spans
            .iter()
            .map(|e| {
                let fiber = e.fiber.params();
                let mut span = SpanConfig::transparent(fiber, e.length_km, e.nf_db, cut.f_center_thz);
                if let Some(g) = &e.gain {
                    span.gain = g.clone();
                }
                span
            })
            .collect();
        let combs = (0..n)
            .map(|s| {
                self.channels
                    .iter()
                    .map(|c| ChannelSpec {
                        f_center_thz: c.f_center_thz,
                        symbol_rate_tbaud: c.rate_tbaud,
                        roll_off: c.roll_off,
                        format: c.format,
                        launch_power_w: c.power_w.at(s),
                        active: c.active.at(s),
                    })
                    .collect()
            })
            .collect();
        LinkSpec::new(spans, combs, self.cut_index)
    }

    pub fn from_link(link: &LinkSpec, threshold_db: Option<f64>, system_index: Option<u64>) -> Self {
        let spans = link
            .spans()
            .iter()
            .map(|s| SpanEntry {
                fiber: FiberRef::from_params(&s.fiber),
                length_km: s.length_km,
                nf_db: s.noise_figure_db,
                gain: Some(s.gain.clone()),
            })
            .collect();
        let channels = (0..link.comb(0).len())
            .map(|i| {
                let c = link.comb(0)[i];
                let per_span = |f: &dyn Fn(&ChannelSpec) -> f64| link.combs().iter().map(|comb| f(&comb[i])).collect();
                let active: Vec<bool> = link.combs().iter().map(|comb| comb[i].active).collect();
                ChannelEntry {
                    f_center_thz: c.f_center_thz,
                    rate_tbaud: c.symbol_rate_tbaud,
                    roll_off: c.roll_off,
                    format: c.format,
                    power_w: PerSpan::compact(per_span(&|ch| ch.launch_power_w)),
                    active: PerSpan::compact(active),
                }
            })
            .collect();
        SystemFileV1 { spans, channels, cut_index: link.cut_index(), threshold_db, system_index }
    }
}

/// Model coefficients, optionally with the fit that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsFileV1 {
    pub kind: ModelKind,
    pub coefficients: ModelCoefficients,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSummary {
    pub benchmark: String,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub improved: bool,
    pub n_training_systems: usize,
    pub n_terms: usize,
}

impl CoefficientsFileV1 {
    pub fn from_fit(out: &FitOutcome, benchmark: String) -> Self {
        CoefficientsFileV1 {
            kind: out.kind,
            coefficients: out.coefficients.clone(),
            label: None,
            fit: Some(FitSummary {
                benchmark,
                initial_cost: out.initial_cost,
                final_cost: out.final_cost,
                improved: out.improved,
                n_training_systems: out.n_training_systems,
                n_terms: out.n_terms,
            }),
        }
    }
}

/// Benchmark NLI traces keyed by campaign system index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredTracesFileV1 {
    pub traces: BTreeMap<u64, NliTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub model: String,
    pub n_spans: usize,
    pub cut_index: usize,
    /// Every channel active in all spans, each evaluated as CUT.
    pub channels: Vec<ChannelEvaluation>,
    /// Per-truncation figures of the designated CUT.
    pub cut: SnrReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reach: Option<ReachResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub f_eval_thz: Vec<f64>,
    /// Rx NLI PSD per evaluation frequency and truncation (W/THz).
    pub nli_psd_w_per_thz: Vec<Vec<f64>>,
    /// NLI power affecting the CUT per truncation (W).
    pub p_nli_w: Vec<f64>,
    pub matched_filter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResultFileV1 {
    Evaluation(EvaluationResult),
    Campaign(CampaignResult),
    Oracle(OracleResult),
}

impl ResultFileV1 {
    pub fn parse(text: &str) -> Result<Self> {
        from_versioned_str(text)
    }

    pub fn to_json(&self) -> Result<String> {
        to_versioned_string(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "version": 1,
        "spans": [
            {"fiber": "SMF", "length_km": 100.0, "nf_db": 5.5},
            {"fiber": {"alpha_db_per_km": 0.2, "beta2_ps2_per_km": -20.0, "beta3_ps3_per_km": 0.1,
                       "gamma_per_w_km": 1.2, "f_ref_thz": 193.8},
             "length_km": 80.0, "nf_db": 6.0, "gain": [[190.0, 16.0], [197.0, 16.5]]}
        ],
        "channels": [
            {"f_center_thz": 193.7, "rate_tbaud": 0.064, "roll_off": 0.1, "format": "PM-16QAM", "power_w": 0.001},
            {"f_center_thz": 193.8, "rate_tbaud": 0.032, "roll_off": 0.2, "format": "PM-QPSK",
             "power_w": [0.0005, 0.0006], "active": true},
            {"f_center_thz": 193.9, "rate_tbaud": 0.064, "roll_off": 0.1, "format": "PM-Gaussian",
             "power_w": 0.001, "active": [true, false]}
        ],
        "cut_index": 1,
        "threshold_db": 12.0
    }"#;

    #[test]
    fn sample_round_trips() {
        let f = SystemFileV1::parse(SAMPLE).unwrap();
        let again = SystemFileV1::parse(&f.to_json().unwrap()).unwrap();
        assert_eq!(f, again);
        let link = f.to_link().unwrap();
        assert_eq!(link.n_spans(), 2);
        assert_eq!(link.comb(1)[1].launch_power_w, 0.0006);
        assert!(!link.comb(1)[2].active);
        assert_eq!(link.span(1).fiber.alpha_db_per_km, 0.2);
        let back = SystemFileV1::from_link(&link, f.threshold_db, None);
        assert_eq!(back.to_link().unwrap(), link);
    }

    #[test]
    fn unknown_field_reports_pointer() {
        let bad = SAMPLE.replace("\"nf_db\": 5.5", "\"nf_db\": 5.5, \"nf\": 1");
        let err = SystemFileV1::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("/spans/0"), "{err}");
        let bad = SAMPLE.replace("\"PM-QPSK\"", "\"PM-7QAM\"");
        let err = SystemFileV1::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("/channels/1/format"), "{err}");
    }

    #[test]
    fn versions_are_checked() {
        let v2 = SAMPLE.replace("\"version\": 1", "\"version\": 2");
        assert!(SystemFileV1::parse(&v2).unwrap_err().to_string().contains("unsupported version 2"));
        let none = SAMPLE.replace("\"version\": 1,", "");
        assert!(SystemFileV1::parse(&none).unwrap_err().to_string().contains("/version"));
    }

    #[test]
    fn per_span_lengths_are_checked() {
        let bad = SAMPLE.replace("[0.0005, 0.0006]", "[0.0005]");
        let err = SystemFileV1::parse(&bad).unwrap().to_link().unwrap_err().to_string();
        assert!(err.contains("/channels/1/power_w"), "{err}");
    }

    #[test]
    fn version_is_the_first_key() {
        let f = SystemFileV1::parse(SAMPLE).unwrap();
        assert!(f.to_json().unwrap().trim_start().starts_with("{\n  \"version\": 1,"));
    }
}
