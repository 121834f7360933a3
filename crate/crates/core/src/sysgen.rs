//! Randomized WDM test systems.
//!
//! Each system is drawn from its own ChaCha8 stream: the generator is
//! seeded with the campaign seed and the stream number is the system
//! index, so any system can be regenerated in isolation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ChannelSpec, FiberPreset, GainProfile, LinkSpec, ModulationFormat, SpanConfig, LOW_DISPERSION_LIMIT,
};
use crate::perf::SensitivityPolicy;

/// Symbol rates (TBaud) and the slot width (THz) each one occupies.
pub const RATE_SLOTS: [(f64, f64); 4] = [(0.032, 0.0435), (0.064, 0.0875), (0.096, 0.13125), (0.128, 0.175)];
pub const ROLL_OFF_RANGE: (f64, f64) = (0.05, 0.25);
pub const SPAN_LENGTH_RANGE_KM: (f64, f64) = (80.0, 120.0);
pub const ULTRA_DENSE_GAP_THZ: (f64, f64) = (0.005, 0.020);
pub const NF_RANGE_DB: (f64, f64) = (5.0, 6.0);
pub const FIXED_NF_DB: f64 = 6.0;

const QAM_16_256: [ModulationFormat; 5] = [
    ModulationFormat::Pm16Qam,
    ModulationFormat::Pm32Qam,
    ModulationFormat::Pm64Qam,
    ModulationFormat::Pm128Qam,
    ModulationFormat::Pm256Qam,
];
const QAM_4_256: [ModulationFormat; 7] = [
    ModulationFormat::PmQpsk,
    ModulationFormat::Pm8Qam,
    ModulationFormat::Pm16Qam,
    ModulationFormat::Pm32Qam,
    ModulationFormat::Pm64Qam,
    ModulationFormat::Pm128Qam,
    ModulationFormat::Pm256Qam,
];

/// System categories 1–5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Category {
    /// Full load, QAM 16–256.
    FullQam = 1,
    /// Half load on average, QAM 16–256.
    PartialQam = 2,
    /// Full load, QAM 16–256 or Gaussian.
    FullMixed = 3,
    /// Half load on average, QAM 16–256 or Gaussian.
    PartialMixed = 4,
    /// Full load, QAM 4–256 or Gaussian, CUT in {QPSK, 8QAM}.
    LowOrderCut = 5,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::FullQam,
        Category::PartialQam,
        Category::FullMixed,
        Category::PartialMixed,
        Category::LowOrderCut,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn is_partial(self) -> bool {
        matches!(self, Category::PartialQam | Category::PartialMixed)
    }

    fn allows_gaussian(self) -> bool {
        matches!(self, Category::FullMixed | Category::PartialMixed | Category::LowOrderCut)
    }

    fn qam_set(self) -> &'static [ModulationFormat] {
        if self == Category::LowOrderCut {
            &QAM_4_256
        } else {
            &QAM_16_256
        }
    }
}

impl TryFrom<u8> for Category {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.number() == v)
            .ok_or_else(|| Error::InvalidParameter(format!("category must be 1..=5, got {v}")))
    }
}

impl From<Category> for u8 {
    fn from(c: Category) -> u8 {
        c.number()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutPosition {
    Lowest,
    Center,
    Highest,
}

impl CutPosition {
    pub const ALL: [CutPosition; 3] = [CutPosition::Lowest, CutPosition::Center, CutPosition::Highest];

    pub fn index_in(self, n_channels: usize) -> usize {
        match self {
            CutPosition::Lowest => 0,
            CutPosition::Center => n_channels / 2,
            CutPosition::Highest => n_channels - 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CutPosition::Lowest => "lowest",
            CutPosition::Center => "center",
            CutPosition::Highest => "highest",
        }
    }
}

impl std::str::FromStr for CutPosition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CutPosition::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown CUT position '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum NfMode {
    /// Every amplifier at 6 dB.
    Fixed6Db,
    /// Each amplifier uniform in [5, 6] dB.
    Uniform5To6Db,
    /// Per system: fixed with probability `fixed_fraction`, uniform otherwise.
    Mixed { fixed_fraction: f64 },
}

/// How the ultra-dense separation is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenseSpacing {
    /// Gap between the raised-cosine nulls of neighbours.
    NullGap,
    /// Center-to-center spacing; spectra may overlap.
    CenterSpacing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub category: Category,
    pub cut_position: CutPosition,
    pub band_center_thz: f64,
    pub band_width_thz: f64,
    pub seed: u64,
    pub nf_mode: NfMode,
    pub ultra_dense_fraction: f64,
    pub dense_spacing: DenseSpacing,
    pub n_spans: usize,
    /// Uniform launch PSD before power optimization (W/THz).
    pub launch_psd_w_per_thz: f64,
    /// Fiber types drawn uniformly per span.
    pub fibers: Vec<FiberPreset>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            category: Category::FullQam,
            cut_position: CutPosition::Center,
            band_center_thz: 193.8,
            band_width_thz: 5.0,
            seed: 0,
            nf_mode: NfMode::Mixed { fixed_fraction: 0.5 },
            ultra_dense_fraction: 0.1,
            dense_spacing: DenseSpacing::NullGap,
            n_spans: 35,
            launch_psd_w_per_thz: 0.03,
            fibers: FiberPreset::ALL.to_vec(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.band_width_thz > 0.0 && self.band_center_thz > self.band_width_thz) {
            return Err(Error::InvalidParameter("invalid band".into()));
        }
        if !(0.0..=1.0).contains(&self.ultra_dense_fraction) {
            return Err(Error::InvalidParameter("ultra-dense fraction outside [0, 1]".into()));
        }
        if let NfMode::Mixed { fixed_fraction } = self.nf_mode {
            if !(0.0..=1.0).contains(&fixed_fraction) {
                return Err(Error::InvalidParameter("fixed NF fraction outside [0, 1]".into()));
            }
        }
        if self.n_spans == 0 {
            return Err(Error::InvalidParameter("at least one span is required".into()));
        }
        if !(self.launch_psd_w_per_thz > 0.0) {
            return Err(Error::InvalidParameter("launch PSD must be positive".into()));
        }
        if self.fibers.is_empty() {
            return Err(Error::InvalidParameter("at least one fiber type is required".into()));
        }
        Ok(())
    }
}

/// RNG of system `index` under campaign seed `seed`.
pub fn system_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generated WDM comb together with its CUT.
#[derive(Debug, Clone, PartialEq)]
pub struct Comb {
    pub channels: Vec<ChannelSpec>,
    pub cut_index: usize,
    pub ultra_dense: bool,
}

fn draw_format<R: Rng>(category: Category, rng: &mut R) -> ModulationFormat {
    if category.allows_gaussian() && rng.gen_bool(0.5) {
        ModulationFormat::PmGaussian
    } else {
        *category.qam_set().choose(rng).expect("non-empty set")
    }
}

/// Packs channels left to right over the band.
pub fn generate_comb<R: Rng>(cfg: &GeneratorConfig, rng: &mut R) -> Comb {
    let ultra_dense = rng.gen_bool(cfg.ultra_dense_fraction);
    let lo = cfg.band_center_thz - 0.5 * cfg.band_width_thz;
    let hi = cfg.band_center_thz + 0.5 * cfg.band_width_thz;

    let mut channels: Vec<ChannelSpec> = Vec::new();
    let mut edge = lo;
    loop {
        let (rate, slot) = *RATE_SLOTS.choose(rng).expect("non-empty");
        let roll_off = rng.gen_range(ROLL_OFF_RANGE.0..=ROLL_OFF_RANGE.1);
        let width = (1.0 + roll_off) * rate;
        let center = if !ultra_dense {
            edge + 0.5 * slot
        } else if let Some(prev) = channels.last() {
            let gap = rng.gen_range(ULTRA_DENSE_GAP_THZ.0..=ULTRA_DENSE_GAP_THZ.1);
            match cfg.dense_spacing {
                DenseSpacing::NullGap => prev.f_center_thz + 0.5 * (prev.occupied_bandwidth() + width) + gap,
                DenseSpacing::CenterSpacing => prev.f_center_thz + gap,
            }
        } else {
            lo + 0.5 * width
        };
        let upper = if ultra_dense { center + 0.5 * width } else { edge + slot };
        if upper > hi {
            break;
        }
        channels.push(ChannelSpec {
            f_center_thz: center,
            symbol_rate_tbaud: rate,
            roll_off,
            format: draw_format(cfg.category, rng),
            launch_power_w: cfg.launch_psd_w_per_thz * rate,
            active: true,
        });
        edge = upper;
    }

    let cut_index = cfg.cut_position.index_in(channels.len());
    if cfg.category.is_partial() {
        for (i, ch) in channels.iter_mut().enumerate() {
            ch.active = i == cut_index || rng.gen_bool(0.5);
        }
    }
    if cfg.category == Category::LowOrderCut {
        channels[cut_index].format = *[ModulationFormat::PmQpsk, ModulationFormat::Pm8Qam]
            .choose(rng)
            .expect("non-empty");
    }
    Comb {
        channels,
        cut_index,
        ultra_dense,
    }
}

/// Draws the spans of a link with gains transparent at `f_cut_thz`.
pub fn generate_link<R: Rng>(cfg: &GeneratorConfig, f_cut_thz: f64, rng: &mut R) -> Vec<SpanConfig> {
    let fixed_nf = match cfg.nf_mode {
        NfMode::Fixed6Db => true,
        NfMode::Uniform5To6Db => false,
        NfMode::Mixed { fixed_fraction } => rng.gen_bool(fixed_fraction),
    };
    (0..cfg.n_spans)
        .map(|_| {
            let fiber = cfg.fibers.choose(rng).expect("validated non-empty").params();
            let length = rng.gen_range(SPAN_LENGTH_RANGE_KM.0..=SPAN_LENGTH_RANGE_KM.1);
            let nf = if fixed_nf {
                FIXED_NF_DB
            } else {
                rng.gen_range(NF_RANGE_DB.0..=NF_RANGE_DB.1)
            };
            SpanConfig {
                fiber,
                length_km: length,
                noise_figure_db: nf,
                gain: GainProfile::Flat(fiber.alpha_db_at(f_cut_thz) * length),
            }
        })
        .collect()
}

/// A generated system with the data needed to evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSystem {
    pub link: LinkSpec,
    pub category: Category,
    pub cut_position: CutPosition,
    /// MI target drawn for a Gaussian CUT.
    pub mi_target: Option<f64>,
    pub threshold_db: f64,
    pub ultra_dense: bool,
    /// CUT dispersion below the validity limit in at least one span.
    pub low_dispersion: bool,
}

pub fn generate_system<R: Rng>(cfg: &GeneratorConfig, policy: &SensitivityPolicy, rng: &mut R) -> Result<GeneratedSystem> {
    cfg.validate()?;
    let comb = generate_comb(cfg, rng);
    if comb.channels.is_empty() {
        return Err(Error::InvalidParameter("band too narrow for a single channel".into()));
    }
    let cut = comb.channels[comb.cut_index];
    let spans = generate_link(cfg, cut.f_center_thz, rng);
    let mi_target = (cut.format == ModulationFormat::PmGaussian)
        .then(|| rng.gen_range(policy.gaussian_mi_range.0..=policy.gaussian_mi_range.1));
    let threshold_db = policy.threshold_db(cut.format, mi_target)?;
    let link = LinkSpec::uniform(spans, comb.channels, comb.cut_index)?;
    let low_dispersion = link.min_cut_dispersion() < LOW_DISPERSION_LIMIT;
    if low_dispersion {
        log::warn!(
            "generated system has CUT dispersion {:.3} ps^2/km below the validity limit",
            link.min_cut_dispersion()
        );
    }
    Ok(GeneratedSystem {
        link,
        category: cfg.category,
        cut_position: cfg.cut_position,
        mi_target,
        threshold_db,
        ultra_dense: comb.ultra_dense,
        low_dispersion,
    })
}

/// System `index` of a seeded batch.
pub fn generate_indexed(cfg: &GeneratorConfig, policy: &SensitivityPolicy, index: u64) -> Result<GeneratedSystem> {
    generate_system(cfg, policy, &mut system_rng(cfg.seed, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(category: Category) -> GeneratorConfig {
        GeneratorConfig {
            category,
            n_spans: 10,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn combs_do_not_overlap_and_fit_the_band() {
        for i in 0..200 {
            let c = cfg(Category::ALL[i % 5]);
            let comb = generate_comb(&c, &mut system_rng(7, i as u64));
            assert!(!comb.channels.is_empty());
            for w in comb.channels.windows(2) {
                let need = 0.5 * (w[0].occupied_bandwidth() + w[1].occupied_bandwidth());
                assert!(w[1].f_center_thz - w[0].f_center_thz >= need - 1e-12);
            }
            let first = &comb.channels[0];
            let last = comb.channels.last().unwrap();
            assert!(first.f_center_thz - 0.5 * first.occupied_bandwidth() >= 191.3 - 1e-12);
            assert!(last.f_center_thz + 0.5 * last.occupied_bandwidth() <= 196.3 + 1e-12);
        }
    }

    #[test]
    fn category_format_rules() {
        let policy = SensitivityPolicy::default();
        for i in 0..50 {
            let s1 = generate_indexed(&cfg(Category::FullQam), &policy, i).unwrap();
            assert!(s1.link.comb(0).iter().all(|c| c.format != ModulationFormat::PmGaussian && c.active));
            let s5 = generate_indexed(&cfg(Category::LowOrderCut), &policy, i).unwrap();
            assert!(matches!(s5.link.cut(0).format, ModulationFormat::PmQpsk | ModulationFormat::Pm8Qam));
            let s4 = generate_indexed(&cfg(Category::PartialMixed), &policy, i).unwrap();
            assert!(s4.link.cut(0).active);
        }
    }

    #[test]
    fn cut_position_is_respected() {
        let policy = SensitivityPolicy::default();
        for pos in CutPosition::ALL {
            let c = GeneratorConfig { cut_position: pos, ..cfg(Category::FullQam) };
            let s = generate_indexed(&c, &policy, 3).unwrap();
            let fs: Vec<f64> = s.link.comb(0).iter().map(|c| c.f_center_thz).collect();
            let f = s.link.f_cut();
            match pos {
                CutPosition::Lowest => assert_eq!(f, fs[0]),
                CutPosition::Highest => assert_eq!(f, *fs.last().unwrap()),
                CutPosition::Center => assert_eq!(f, fs[fs.len() / 2]),
            }
        }
    }

    #[test]
    fn generation_is_deterministic_per_stream() {
        let policy = SensitivityPolicy::default();
        let c = cfg(Category::PartialMixed);
        let a = generate_indexed(&c, &policy, 11).unwrap();
        let b = generate_indexed(&c, &policy, 11).unwrap();
        assert_eq!(a, b);
        let other = generate_indexed(&c, &policy, 12).unwrap();
        assert_ne!(a.link, other.link);
    }

    #[test]
    fn fixed_nf_mode() {
        let c = GeneratorConfig { nf_mode: NfMode::Fixed6Db, ..cfg(Category::FullQam) };
        let spans = generate_link(&c, 193.8, &mut system_rng(1, 0));
        assert!(spans.iter().all(|s| s.noise_figure_db == 6.0));
        assert!(spans.iter().all(|s| (s.net_transfer(193.8) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ultra_dense_gaps() {
        let c = GeneratorConfig { ultra_dense_fraction: 1.0, ..cfg(Category::FullQam) };
        let comb = generate_comb(&c, &mut system_rng(5, 0));
        assert!(comb.ultra_dense);
        for w in comb.channels.windows(2) {
            let gap = w[1].f_center_thz - w[0].f_center_thz - 0.5 * (w[0].occupied_bandwidth() + w[1].occupied_bandwidth());
            assert!((0.005 - 1e-12..=0.020 + 1e-12).contains(&gap));
        }
    }

    #[test]
    fn category_parses_from_number() {
        assert_eq!(Category::try_from(4).unwrap(), Category::PartialMixed);
        assert!(Category::try_from(6).is_err());
        assert_eq!(serde_json::to_string(&Category::LowOrderCut).unwrap(), "5");
    }
}
