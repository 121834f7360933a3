//! Link, span and channel descriptions shared by every model.
//!
//! Units follow one convention project-wide: THz, TBaud, W, W/THz, km,
//! ps²/km, ps³/km and 1/(W·km). Span indices are 0-based; truncation
//! lengths (`n_end`) count spans from 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assets;
use crate::error::{Error, Result};

/// Below this |β̄₂| (ps²/km) the closed-form models lose accuracy.
pub const LOW_DISPERSION_LIMIT: f64 = 2.5;

const DB_TO_NEPER_POWER: f64 = std::f64::consts::LN_10 / 10.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// Fiber parameters of one span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberParams {
    /// Attenuation at `f_ref_thz` (dB/km).
    pub alpha_db_per_km: f64,
    /// Linear attenuation slope (dB/km/THz); zero for the shipped presets.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub alpha_slope_db_per_km_per_thz: f64,
    pub beta2_ps2_per_km: f64,
    pub beta3_ps3_per_km: f64,
    pub gamma_per_w_km: f64,
    /// Frequency where β₂ and β₃ are specified (THz).
    pub f_ref_thz: f64,
}

impl FiberParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.alpha_db_per_km,
            self.alpha_slope_db_per_km_per_thz,
            self.beta2_ps2_per_km,
            self.beta3_ps3_per_km,
            self.gamma_per_w_km,
            self.f_ref_thz,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite fiber parameter".into()));
        }
        if self.alpha_db_per_km <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "fiber attenuation must be positive, got {} dB/km",
                self.alpha_db_per_km
            )));
        }
        if self.gamma_per_w_km < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "fiber nonlinearity must be non-negative, got {}",
                self.gamma_per_w_km
            )));
        }
        if self.f_ref_thz <= 0.0 {
            return Err(Error::InvalidParameter("fiber f_ref must be positive".into()));
        }
        Ok(())
    }

    pub fn alpha_db_at(&self, f_thz: f64) -> f64 {
        self.alpha_db_per_km + self.alpha_slope_db_per_km_per_thz * (f_thz - self.f_ref_thz)
    }

    /// Power-loss coefficient 2α(f) in 1/km.
    pub fn power_loss_at(&self, f_thz: f64) -> f64 {
        self.alpha_db_at(f_thz) * DB_TO_NEPER_POWER
    }
}

/// The three fiber types used by the randomized test-set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FiberPreset {
    #[serde(rename = "SMF")]
    Smf,
    #[serde(rename = "NZDSF1")]
    Nzdsf1,
    #[serde(rename = "NZDSF2")]
    Nzdsf2,
}

impl FiberPreset {
    pub const ALL: [FiberPreset; 3] = [FiberPreset::Smf, FiberPreset::Nzdsf1, FiberPreset::Nzdsf2];

    pub fn name(self) -> &'static str {
        match self {
            FiberPreset::Smf => "SMF",
            FiberPreset::Nzdsf1 => "NZDSF1",
            FiberPreset::Nzdsf2 => "NZDSF2",
        }
    }

    pub fn params(self) -> FiberParams {
        let row = &assets::FIBERS[self.name()];
        FiberParams {
            alpha_db_per_km: row.alpha_db_per_km,
            alpha_slope_db_per_km_per_thz: 0.0,
            beta2_ps2_per_km: row.beta2_ps2_per_km,
            beta3_ps3_per_km: row.beta3_ps3_per_km,
            gamma_per_w_km: row.gamma_per_w_km,
            f_ref_thz: row.f_ref_thz,
        }
    }

    /// Preset whose parameters equal `params` exactly, if any.
    pub fn matching(params: &FiberParams) -> Option<FiberPreset> {
        Self::ALL.into_iter().find(|p| p.params() == *params)
    }
}

impl FromStr for FiberPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Schema(format!("unknown fiber preset '{s}'")))
    }
}

/// End-of-span lumped gain/loss Γ(f), in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainProfile {
    Flat(f64),
    /// `(frequency THz, gain dB)` points, linearly interpolated, flat outside.
    Table(Vec<(f64, f64)>),
}

impl GainProfile {
    pub fn gain_db_at(&self, f_thz: f64) -> f64 {
        match self {
            GainProfile::Flat(db) => *db,
            GainProfile::Table(points) => {
                let first = points[0];
                let last = points[points.len() - 1];
                if f_thz <= first.0 {
                    return first.1;
                }
                if f_thz >= last.0 {
                    return last.1;
                }
                let i = points.partition_point(|p| p.0 <= f_thz);
                let (f0, g0) = points[i - 1];
                let (f1, g1) = points[i];
                g0 + (g1 - g0) * (f_thz - f0) / (f1 - f0)
            }
        }
    }

    pub fn gain_linear_at(&self, f_thz: f64) -> f64 {
        db_to_linear(self.gain_db_at(f_thz))
    }

    fn validate(&self) -> Result<()> {
        match self {
            GainProfile::Flat(db) if !db.is_finite() => {
                Err(Error::InvalidParameter("non-finite gain".into()))
            }
            GainProfile::Flat(_) => Ok(()),
            GainProfile::Table(points) => {
                if points.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "gain table needs at least two points".into(),
                    ));
                }
                if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite gain table entry".into()));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidParameter(
                        "gain table frequencies must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn covers(&self, f_thz: f64) -> bool {
        match self {
            GainProfile::Flat(_) => true,
            GainProfile::Table(points) => {
                f_thz >= points[0].0 && f_thz <= points[points.len() - 1].0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanConfig {
    pub fiber: FiberParams,
    pub length_km: f64,
    pub noise_figure_db: f64,
    pub gain: GainProfile,
}

impl SpanConfig {
    /// Span whose flat gain exactly offsets the fiber loss at `f_thz`.
    pub fn transparent(fiber: FiberParams, length_km: f64, noise_figure_db: f64, f_thz: f64) -> Self {
        SpanConfig {
            fiber,
            length_km,
            noise_figure_db,
            gain: GainProfile::Flat(fiber.alpha_db_at(f_thz) * length_km),
        }
    }

    /// Fiber power transmission exp(−2α(f)·L).
    pub fn fiber_transmission(&self, f_thz: f64) -> f64 {
        (-self.fiber.power_loss_at(f_thz) * self.length_km).exp()
    }

    /// Γ(f)·exp(−2α(f)·L): net power transfer of the span including its lumped element.
    pub fn net_transfer(&self, f_thz: f64) -> f64 {
        self.gain.gain_linear_at(f_thz) * self.fiber_transmission(f_thz)
    }

    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        if !(self.length_km > 0.0 && self.length_km.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "span length must be positive, got {} km",
                self.length_km
            )));
        }
        if !self.noise_figure_db.is_finite() {
            return Err(Error::InvalidParameter("non-finite noise figure".into()));
        }
        self.gain.validate()
    }
}

/// Modulation formats with their EGN constant Φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModulationFormat {
    #[serde(rename = "PM-BPSK")]
    PmBpsk,
    #[serde(rename = "PM-QPSK")]
    PmQpsk,
    #[serde(rename = "PM-8QAM")]
    Pm8Qam,
    #[serde(rename = "PM-16QAM")]
    Pm16Qam,
    #[serde(rename = "PM-32QAM")]
    Pm32Qam,
    #[serde(rename = "PM-64QAM")]
    Pm64Qam,
    #[serde(rename = "PM-128QAM")]
    Pm128Qam,
    #[serde(rename = "PM-256QAM")]
    Pm256Qam,
    #[serde(rename = "PM-Gaussian")]
    PmGaussian,
}

impl ModulationFormat {
    pub const ALL: [ModulationFormat; 9] = [
        ModulationFormat::PmBpsk,
        ModulationFormat::PmQpsk,
        ModulationFormat::Pm8Qam,
        ModulationFormat::Pm16Qam,
        ModulationFormat::Pm32Qam,
        ModulationFormat::Pm64Qam,
        ModulationFormat::Pm128Qam,
        ModulationFormat::Pm256Qam,
        ModulationFormat::PmGaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModulationFormat::PmBpsk => "PM-BPSK",
            ModulationFormat::PmQpsk => "PM-QPSK",
            ModulationFormat::Pm8Qam => "PM-8QAM",
            ModulationFormat::Pm16Qam => "PM-16QAM",
            ModulationFormat::Pm32Qam => "PM-32QAM",
            ModulationFormat::Pm64Qam => "PM-64QAM",
            ModulationFormat::Pm128Qam => "PM-128QAM",
            ModulationFormat::Pm256Qam => "PM-256QAM",
            ModulationFormat::PmGaussian => "PM-Gaussian",
        }
    }

    /// Constellation cardinality per polarization; `None` for the Gaussian format.
    pub fn cardinality(self) -> Option<u32> {
        match self {
            ModulationFormat::PmBpsk => Some(2),
            ModulationFormat::PmQpsk => Some(4),
            ModulationFormat::Pm8Qam => Some(8),
            ModulationFormat::Pm16Qam => Some(16),
            ModulationFormat::Pm32Qam => Some(32),
            ModulationFormat::Pm64Qam => Some(64),
            ModulationFormat::Pm128Qam => Some(128),
            ModulationFormat::Pm256Qam => Some(256),
            ModulationFormat::PmGaussian => None,
        }
    }

    /// Φ as an exact fraction `(numerator, denominator)`.
    pub fn phi_fraction(self) -> (u64, u64) {
        assets::PHI[self.name()]
    }

    pub fn phi(self) -> f64 {
        let (num, den) = self.phi_fraction();
        num as f64 / den as f64
    }
}

impl fmt::Display for ModulationFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Schema(format!("unknown modulation format '{s}'")))
    }
}

/// One WDM channel as seen at the input of a particular span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub f_center_thz: f64,
    pub symbol_rate_tbaud: f64,
    pub roll_off: f64,
    pub format: ModulationFormat,
    /// Launch power into the span (W).
    pub launch_power_w: f64,
    pub active: bool,
}

impl ChannelSpec {
    /// Raised-cosine null-to-null width (THz).
    pub fn occupied_bandwidth(&self) -> f64 {
        (1.0 + self.roll_off) * self.symbol_rate_tbaud
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_center_thz.is_finite() && self.f_center_thz > 0.0) {
            return Err(Error::InvalidParameter("channel frequency must be positive".into()));
        }
        if !(self.symbol_rate_tbaud > 0.0 && self.symbol_rate_tbaud.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "symbol rate must be positive, got {}",
                self.symbol_rate_tbaud
            )));
        }
        if !(0.0..=1.0).contains(&self.roll_off) {
            return Err(Error::InvalidParameter(format!(
                "roll-off must lie in [0, 1], got {}",
                self.roll_off
            )));
        }
        if self.active && !(self.launch_power_w > 0.0 && self.launch_power_w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "active channel needs positive launch power, got {} W",
                self.launch_power_w
            )));
        }
        Ok(())
    }
}

/// Ordered spans, each with the WDM comb launched into it.
///
/// `cut_index` addresses the channel under test in every comb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    spans: Vec<SpanConfig>,
    combs: Vec<Vec<ChannelSpec>>,
    cut_index: usize,
}

impl LinkSpec {
    pub fn new(spans: Vec<SpanConfig>, combs: Vec<Vec<ChannelSpec>>, cut_index: usize) -> Result<Self> {
        let link = LinkSpec {
            spans,
            combs,
            cut_index,
        };
        link.validate()?;
        Ok(link)
    }

    /// Link whose comb is identical at every span input.
    pub fn uniform(spans: Vec<SpanConfig>, comb: Vec<ChannelSpec>, cut_index: usize) -> Result<Self> {
        let combs = vec![comb; spans.len()];
        Self::new(spans, combs, cut_index)
    }

    pub fn validate(&self) -> Result<()> {
        if self.spans.is_empty() {
            return Err(Error::InvalidLink("link has no spans".into()));
        }
        if self.combs.len() != self.spans.len() {
            return Err(Error::InvalidLink(format!(
                "{} spans but {} combs",
                self.spans.len(),
                self.combs.len()
            )));
        }
        for (s, (span, comb)) in self.spans.iter().zip(&self.combs).enumerate() {
            span.validate()
                .map_err(|e| Error::InvalidLink(format!("span {s}: {e}")))?;
            let cut = comb.get(self.cut_index).ok_or_else(|| {
                Error::InvalidLink(format!("cut index {} out of range in span {s}", self.cut_index))
            })?;
            if !cut.active {
                return Err(Error::InvalidLink(format!("channel under test inactive in span {s}")));
            }
            for (i, ch) in comb.iter().enumerate() {
                ch.validate()
                    .map_err(|e| Error::InvalidLink(format!("span {s}, channel {i}: {e}")))?;
                if ch.active && !span.gain.covers(ch.f_center_thz) {
                    return Err(Error::InvalidLink(format!(
                        "span {s}: gain profile does not cover channel {i} at {} THz",
                        ch.f_center_thz
                    )));
                }
            }
            let first = &self.combs[0][self.cut_index];
            if cut.f_center_thz != first.f_center_thz
                || cut.symbol_rate_tbaud != first.symbol_rate_tbaud
                || cut.format != first.format
                || cut.roll_off != first.roll_off
            {
                return Err(Error::InvalidLink(format!(
                    "channel under test changes its parameters at span {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn spans(&self) -> &[SpanConfig] {
        &self.spans
    }

    pub fn span(&self, s: usize) -> &SpanConfig {
        &self.spans[s]
    }

    pub fn combs(&self) -> &[Vec<ChannelSpec>] {
        &self.combs
    }

    pub fn comb(&self, s: usize) -> &[ChannelSpec] {
        &self.combs[s]
    }

    pub fn n_spans(&self) -> usize {
        self.spans.len()
    }

    pub fn cut_index(&self) -> usize {
        self.cut_index
    }

    /// Channel under test as launched into span `s`.
    pub fn cut(&self, s: usize) -> &ChannelSpec {
        &self.combs[s][self.cut_index]
    }

    pub fn f_cut(&self) -> f64 {
        self.cut(0).f_center_thz
    }

    /// Same link with the first `n_end` spans only.
    pub fn truncated(&self, n_end: usize) -> Result<LinkSpec> {
        self.check_n_end(n_end)?;
        Ok(LinkSpec {
            spans: self.spans[..n_end].to_vec(),
            combs: self.combs[..n_end].to_vec(),
            cut_index: self.cut_index,
        })
    }

    /// Same link with every launch power multiplied by `factor`.
    pub fn scaled_powers(&self, factor: f64) -> LinkSpec {
        let mut link = self.clone();
        for comb in &mut link.combs {
            for ch in comb.iter_mut() {
                ch.launch_power_w *= factor;
            }
        }
        link
    }

    /// Same spans and combs with another channel designated as CUT.
    pub fn with_cut(&self, cut_index: usize) -> Result<LinkSpec> {
        Self::new(self.spans.clone(), self.combs.clone(), cut_index)
    }

    pub fn set_span_gain(&mut self, s: usize, gain: GainProfile) {
        self.spans[s].gain = gain;
    }

    pub fn comb_mut(&mut self, s: usize) -> &mut [ChannelSpec] {
        &mut self.combs[s]
    }

    pub(crate) fn check_n_end(&self, n_end: usize) -> Result<()> {
        if n_end == 0 || n_end > self.n_spans() {
            return Err(Error::InvalidParameter(format!(
                "span count {n_end} outside 1..={}",
                self.n_spans()
            )));
        }
        Ok(())
    }

    /// Smallest |β̄₂| seen by the CUT over all spans (ps²/km).
    pub fn min_cut_dispersion(&self) -> f64 {
        let f_cut = self.f_cut();
        self.spans
            .iter()
            .map(|s| crate::cfm::effective_beta2_cut(&s.fiber, f_cut).abs())
            .fold(f64::INFINITY, f64::min)
    }
}
