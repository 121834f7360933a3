//! Launch-power setting: per-channel randomization around the CUT PSD,
//! span-local (LOGO) optimization and a final whole-link refinement of the
//! CUT launch PSD.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cfm::{span_nli_psd, ModelKind, ModelVariant};
use crate::error::{Error, Result};
use crate::estimator::NliEstimator;
use crate::model::{ChannelSpec, GainProfile, LinkSpec, SpanConfig};
use crate::perf::{ase_power_all, ase_psd_amplifier, snr_report};

pub const XI_RANGE: (f64, f64) = (0.7, 1.3);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPlan {
    /// CUT launch PSD into each span (W/THz).
    pub g_cut_per_span: Vec<f64>,
    /// Per-channel PSD multipliers relative to the CUT.
    pub xi: Vec<f64>,
    /// Link nonlinearity coefficient at the frozen gains, (W/THz)⁻².
    pub eta_nli: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerOptConfig {
    /// Model used for the whole-link refinement.
    pub refine_model: ModelKind,
    /// Launch PSD used when a span generates no NLI (W/THz).
    pub psd_ceiling_w_per_thz: f64,
}

impl Default for PowerOptConfig {
    fn default() -> Self {
        PowerOptConfig {
            refine_model: ModelKind::Cfm4,
            psd_ceiling_w_per_thz: 1.0,
        }
    }
}

/// ξ ~ U[0.7, 1.3] per channel, with ξ = 1 for the CUT.
pub fn randomize_launch<R: Rng>(comb: &[ChannelSpec], cut_index: usize, rng: &mut R) -> Vec<f64> {
    (0..comb.len())
        .map(|i| {
            let x = rng.gen_range(XI_RANGE.0..=XI_RANGE.1);
            if i == cut_index {
                1.0
            } else {
                x
            }
        })
        .collect()
}

/// Same link with launch PSDs `g_cut[s]·ξ[ch]` in every span.
pub fn apply_psds(link: &LinkSpec, g_cut: &[f64], xi: &[f64]) -> Result<LinkSpec> {
    if g_cut.len() != link.n_spans() {
        return Err(Error::InvalidParameter("one CUT PSD per span is required".into()));
    }
    let mut out = link.clone();
    for (s, g) in g_cut.iter().enumerate() {
        let comb = out.comb_mut(s);
        if comb.len() != xi.len() {
            return Err(Error::InvalidParameter(format!(
                "span {s} has {} channels but {} multipliers were given",
                comb.len(),
                xi.len()
            )));
        }
        for (ch, x) in comb.iter_mut().zip(xi) {
            ch.launch_power_w = g * x * ch.symbol_rate_tbaud;
        }
    }
    Ok(out)
}

fn transparent_copy(span: &SpanConfig, f_cut: f64) -> SpanConfig {
    SpanConfig {
        gain: GainProfile::Flat(span.fiber.alpha_db_at(f_cut) * span.length_km),
        ..span.clone()
    }
}

/// CFM1 span NLI PSD at unit CUT PSD, with channels at ξ and a transparent span.
pub fn span_eta(link: &LinkSpec, s: usize, xi: &[f64]) -> Result<f64> {
    let f_cut = link.f_cut();
    let span = transparent_copy(link.span(s), f_cut);
    let comb: Vec<ChannelSpec> = link
        .comb(s)
        .iter()
        .zip(xi)
        .map(|(ch, x)| ChannelSpec {
            launch_power_w: x * ch.symbol_rate_tbaud,
            ..*ch
        })
        .collect();
    let single = LinkSpec::uniform(vec![span], comb, link.cut_index())?;
    span_nli_psd(&single, 0, &ModelVariant::cfm1())
}

/// ASE PSD (W/THz) of a span whose amplifier exactly recovers the fiber loss.
pub fn span_ase_psd(span: &SpanConfig, f_cut: f64) -> f64 {
    ase_psd_amplifier(span.noise_figure_db, f_cut, 1.0 / span.fiber_transmission(f_cut))
}

/// Span-local optimum G* = (G_ASE/(2η))^(1/3) of every span.
pub fn logo_optimize(link: &LinkSpec, xi: &[f64], cfg: &PowerOptConfig) -> Result<Vec<f64>> {
    let f_cut = link.f_cut();
    (0..link.n_spans())
        .map(|s| {
            let eta = span_eta(link, s, xi)?;
            let ase = span_ase_psd(link.span(s), f_cut);
            if eta <= 0.0 {
                log::warn!("span {s} generates no NLI; using the PSD ceiling");
                return Ok(cfg.psd_ceiling_w_per_thz);
            }
            Ok((ase / (2.0 * eta)).cbrt())
        })
        .collect()
}

/// Sets each amplifier so that span `s+1` receives `g_cut[s+1]`; the last
/// span is transparent.
pub fn set_gains_for_psds(link: &LinkSpec, g_cut: &[f64]) -> LinkSpec {
    let f_cut = link.f_cut();
    let mut out = link.clone();
    let n = link.n_spans();
    for s in 0..n {
        let span = link.span(s);
        let loss_db = span.fiber.alpha_db_at(f_cut) * span.length_km;
        let ratio_db = if s + 1 < n {
            10.0 * (g_cut[s + 1] / g_cut[s]).log10()
        } else {
            0.0
        };
        out.set_span_gain(s, GainProfile::Flat(loss_db + ratio_db));
    }
    out
}

/// η = (P_NLI/R_CUT)/G₁³ at full link length, with G₁ the CUT launch PSD.
pub fn eta_nli<E: NliEstimator + ?Sized>(link: &LinkSpec, estimator: &E) -> Result<f64> {
    let trace = estimator.nli_trace(link)?;
    let cut = link.cut(0);
    let g1 = cut.launch_power_w / cut.symbol_rate_tbaud;
    let p = *trace.power.last().expect("at least one span");
    Ok(p / cut.symbol_rate_tbaud / (g1 * g1 * g1))
}

/// Optimal first-span CUT PSD for the frozen gains.
pub fn refine_cut_launch(link: &LinkSpec, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    let ase_psd = ase_power_all(link).last().copied().expect("at least one span") / link.cut(0).symbol_rate_tbaud;
    Ok((ase_psd / (2.0 * eta)).cbrt())
}

/// Full pipeline: ξ randomization, span-local optimization, gain setting
/// and whole-link refinement of the CUT launch PSD.
pub fn optimize_launch<R: Rng, E: NliEstimator + ?Sized>(
    link: &LinkSpec,
    refine_with: &E,
    cfg: &PowerOptConfig,
    rng: &mut R,
) -> Result<(LinkSpec, PowerPlan)> {
    let xi = randomize_launch(link.comb(0), link.cut_index(), rng);
    let g_local = logo_optimize(link, &xi, cfg)?;
    let staged = set_gains_for_psds(&apply_psds(link, &g_local, &xi)?, &g_local);
    let eta = eta_nli(&staged, refine_with)?;
    let (g_cut, final_link) = if eta > 0.0 {
        let scale = refine_cut_launch(&staged, eta)? / g_local[0];
        let g: Vec<f64> = g_local.iter().map(|g| g * scale).collect();
        let l = staged.scaled_powers(scale);
        (g, l)
    } else {
        (g_local, staged)
    };
    Ok((
        final_link,
        PowerPlan {
            g_cut_per_span: g_cut,
            xi,
            eta_nli: eta,
        },
    ))
}

/// Receiver SNR (dB) of the CUT at full length after scaling all launch powers.
pub fn snr_at_scale<E: NliEstimator + ?Sized>(link: &LinkSpec, estimator: &E, scale: f64) -> Result<f64> {
    let r = snr_report(&link.scaled_powers(scale), estimator)?;
    Ok(*r.per_span_snr_db.last().expect("at least one span"))
}
