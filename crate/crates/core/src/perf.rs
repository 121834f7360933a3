//! ASE noise, SNR, sensitivity thresholds and maximum reach.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assets;
use crate::cfm::{ModelVariant, SpanTerms};
use crate::error::{Error, Result};
use crate::estimator::NliEstimator;
use crate::model::{db_to_linear, linear_to_db, LinkSpec, ModulationFormat};

/// Planck constant (J·s).
pub const PLANCK_J_S: f64 = 6.626_070_15e-34;

const THZ: f64 = 1e12;

/// ASE PSD (W/THz) of one amplifier with linear gain `gain`.
///
/// Amplifiers with gain ≤ 1 contribute nothing.
pub fn ase_psd_amplifier(noise_figure_db: f64, f_thz: f64, gain: f64) -> f64 {
    if gain <= 1.0 {
        return 0.0;
    }
    db_to_linear(noise_figure_db) * PLANCK_J_S * f_thz * THZ * (gain - 1.0) * THZ
}

/// ASE power in the CUT bandwidth at the receiver for every truncation.
fn ase_power_all_for(link: &LinkSpec, ci: usize) -> Vec<f64> {
    let cut = &link.comb(0)[ci];
    let f = cut.f_center_thz;
    let r = cut.symbol_rate_tbaud;
    let mut acc = 0.0;
    link.spans()
        .iter()
        .map(|span| {
            acc = acc * span.net_transfer(f)
                + ase_psd_amplifier(span.noise_figure_db, f, span.gain.gain_linear_at(f)) * r;
            acc
        })
        .collect()
}

/// ASE power (W) in R_CUT at the receiver of the link truncated after `n_end` spans.
pub fn ase_power(link: &LinkSpec, n_end: usize) -> Result<f64> {
    link.check_n_end(n_end)?;
    Ok(ase_power_all_for(link, link.cut_index())[n_end - 1])
}

/// ASE power for every truncation 1…N_span.
pub fn ase_power_all(link: &LinkSpec) -> Vec<f64> {
    ase_power_all_for(link, link.cut_index())
}

fn signal_power_all_for(link: &LinkSpec, ci: usize) -> Vec<f64> {
    let f = link.comb(0)[ci].f_center_thz;
    (0..link.n_spans())
        .map(|s| link.comb(s)[ci].launch_power_w * link.span(s).net_transfer(f))
        .collect()
}

/// CUT power at the receiver: launch into the last span times its net transfer.
pub fn cut_rx_power(link: &LinkSpec, n_end: usize) -> Result<f64> {
    link.check_n_end(n_end)?;
    Ok(signal_power_all_for(link, link.cut_index())[n_end - 1])
}

/// NLI power from the PSD at f_CUT, flat over R_CUT.
pub fn nli_power_cfm(psd: f64, r_cut_tbaud: f64) -> f64 {
    psd * r_cut_tbaud
}

pub fn snr_db_from_powers(signal_w: f64, ase_w: f64, nli_w: f64) -> f64 {
    linear_to_db(signal_w / (ase_w + nli_w))
}

/// SNR (dB) of the CUT after `n_end` spans.
pub fn snr(link: &LinkSpec, variant: &ModelVariant, n_end: usize) -> Result<f64> {
    link.check_n_end(n_end)?;
    let report = snr_report(link, variant)?;
    Ok(report.per_span_snr_db[n_end - 1])
}

/// SNR, ASE and NLI of the CUT for every truncation 1…N_span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub model: String,
    pub per_span_snr_db: Vec<f64>,
    pub p_signal_w: Vec<f64>,
    pub p_ase_w: Vec<f64>,
    pub p_nli_w: Vec<f64>,
    pub nli_psd_w_per_thz: Vec<f64>,
}

impl SnrReport {
    fn assemble(model: String, signal: Vec<f64>, ase: Vec<f64>, nli_psd: Vec<f64>, nli: Vec<f64>) -> Self {
        let snr = signal
            .iter()
            .zip(&ase)
            .zip(&nli)
            .map(|((s, a), n)| snr_db_from_powers(*s, *a, *n))
            .collect();
        SnrReport {
            model,
            per_span_snr_db: snr,
            p_signal_w: signal,
            p_ase_w: ase,
            p_nli_w: nli,
            nli_psd_w_per_thz: nli_psd,
        }
    }

    pub fn n_spans(&self) -> usize {
        self.per_span_snr_db.len()
    }
}

/// SNR report of the link's CUT with any NLI estimator.
pub fn snr_report<E: NliEstimator + ?Sized>(link: &LinkSpec, estimator: &E) -> Result<SnrReport> {
    let trace = estimator.nli_trace(link)?;
    let ci = link.cut_index();
    Ok(SnrReport::assemble(
        estimator.label(),
        signal_power_all_for(link, ci),
        ase_power_all_for(link, ci),
        trace.psd,
        trace.power,
    ))
}

/// SNR thresholds for the QAM formats and the MI interval used for
/// Gaussian-shaped channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPolicy {
    pub qam_thresholds_db: BTreeMap<ModulationFormat, f64>,
    pub gaussian_mi_range: (f64, f64),
}

impl Default for SensitivityPolicy {
    fn default() -> Self {
        let (table, range) = &*assets::QAM_THRESHOLDS_DB;
        let qam_thresholds_db = table
            .iter()
            .map(|(name, v)| (name.parse::<ModulationFormat>().expect("shipped format name"), *v))
            .collect();
        SensitivityPolicy {
            qam_thresholds_db,
            gaussian_mi_range: *range,
        }
    }
}

impl SensitivityPolicy {
    /// Threshold SNR (dB). Gaussian channels need an MI target.
    pub fn threshold_db(&self, format: ModulationFormat, mi_target: Option<f64>) -> Result<f64> {
        if format == ModulationFormat::PmGaussian {
            let mi = mi_target.ok_or_else(|| {
                Error::InvalidParameter("Gaussian channel needs an MI target".into())
            })?;
            return self.shannon_sensitivity(mi);
        }
        self.qam_thresholds_db
            .get(&format)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("no sensitivity threshold for {format}")))
    }

    /// Range-checked Shannon sensitivity.
    pub fn shannon_sensitivity(&self, mi: f64) -> Result<f64> {
        let (lo, hi) = self.gaussian_mi_range;
        if !(lo..=hi).contains(&mi) {
            return Err(Error::InvalidParameter(format!(
                "MI target {mi} outside [{lo}, {hi}] bit/symbol"
            )));
        }
        Ok(shannon_snr_db(mi))
    }

    pub fn validate(&self) -> Result<()> {
        let mut by_card: Vec<(u32, f64)> = self
            .qam_thresholds_db
            .iter()
            .filter_map(|(m, v)| m.cardinality().map(|c| (c, *v)))
            .collect();
        by_card.sort_by_key(|p| p.0);
        if by_card.windows(2).any(|w| w[1].1 <= w[0].1) {
            return Err(Error::InvalidParameter(
                "thresholds must increase with constellation size".into(),
            ));
        }
        let (lo, hi) = self.gaussian_mi_range;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidParameter("invalid MI range".into()));
        }
        Ok(())
    }
}

/// Dual-polarization Shannon SNR (dB) for a mutual information `mi` (bit/symbol).
pub fn shannon_snr_db(mi: f64) -> f64 {
    linear_to_db(2f64.powf(mi / 2.0) - 1.0)
}

/// [`SensitivityPolicy::shannon_sensitivity`] with the shipped MI range.
pub fn shannon_sensitivity(mi: f64) -> Result<f64> {
    SensitivityPolicy::default().shannon_sensitivity(mi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachResult {
    pub max_reach_spans: usize,
    pub threshold_db: f64,
    pub snr_at_reach_db: f64,
}

/// Largest span count whose SNR meets the threshold, from a per-truncation SNR list.
///
/// Every truncation is checked; SNR is not assumed monotonic.
pub fn reach_from_snr(snr_db: &[f64], threshold_db: f64) -> Result<ReachResult> {
    let first = *snr_db
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty SNR list".into()))?;
    let n = snr_db
        .iter()
        .rposition(|s| *s >= threshold_db)
        .ok_or(Error::Unreachable { snr_db: first, threshold_db })?;
    if first < threshold_db {
        return Err(Error::Unreachable { snr_db: first, threshold_db });
    }
    Ok(ReachResult {
        max_reach_spans: n + 1,
        threshold_db,
        snr_at_reach_db: snr_db[n],
    })
}

pub fn max_reach<E: NliEstimator + ?Sized>(link: &LinkSpec, estimator: &E, threshold_db: f64) -> Result<ReachResult> {
    reach_from_snr(&snr_report(link, estimator)?.per_span_snr_db, threshold_db)
}

/// SNR estimation error of a model against a benchmark (dB).
pub fn delta_snr(snr_cfm_db: f64, snr_bmk_db: f64) -> f64 {
    snr_cfm_db - snr_bmk_db
}

/// Full-link figures of one channel evaluated as CUT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEvaluation {
    pub index: usize,
    pub f_center_thz: f64,
    pub format: ModulationFormat,
    pub snr_db: f64,
    pub nli_psd_w_per_thz: f64,
    pub p_nli_w: f64,
    pub p_ase_w: f64,
    pub p_signal_w: f64,
}

/// Evaluates every channel active in all spans as CUT over the full link.
pub fn evaluate_all_channels(link: &LinkSpec, variant: &ModelVariant) -> Result<Vec<ChannelEvaluation>> {
    let n = link.n_spans();
    let candidates = (0..link.comb(0).len())
        .filter(|&i| (0..n).all(|s| link.comb(s).get(i).is_some_and(|c| c.active)));
    candidates
        .map(|ci| {
            let cut = &link.comb(0)[ci];
            let psd = *SpanTerms::compute_for_cut(link, variant, ci)?
                .rx_psd_all()
                .last()
                .expect("at least one span");
            let p_nli = nli_power_cfm(psd, cut.symbol_rate_tbaud);
            let p_ase = *ase_power_all_for(link, ci).last().expect("at least one span");
            let p_sig = *signal_power_all_for(link, ci).last().expect("at least one span");
            Ok(ChannelEvaluation {
                index: ci,
                f_center_thz: cut.f_center_thz,
                format: cut.format,
                snr_db: snr_db_from_powers(p_sig, p_ase, p_nli),
                nli_psd_w_per_thz: psd,
                p_nli_w: p_nli,
                p_ase_w: p_ase,
                p_signal_w: p_sig,
            })
        })
        .collect()
}
