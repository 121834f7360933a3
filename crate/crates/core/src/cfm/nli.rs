//! Per-span and accumulated NLI PSD at the CUT frequency.

use std::f64::consts::PI;

use super::coefficients::{rho_sci_value, rho_xci_value, ModelVariant, SciRhoInputs, XciRhoInputs};
use super::integrals::{coherent_sci_raw, i_cut_incoherent_raw, i_xci_raw, nonzero_dispersion};
use super::special::coherence_bracket;
use super::{
    effective_beta2_cut, effective_beta2_xci, effective_psd, i_cut_coherent, i_cut_incoherent, i_xci,
    NLI_PREFACTOR,
};
use crate::error::{Error, Result};
use crate::model::{ChannelSpec, LinkSpec};

/// Accumulated dispersion (ps²) at frequency `f_ch` from link start to the
/// input of span `s` (0-based), using the pair dispersion with the CUT.
pub fn beta2_acc(link: &LinkSpec, s: usize, f_ch: f64) -> f64 {
    let f_cut = link.f_cut();
    link.spans()[..s]
        .iter()
        .map(|k| effective_beta2_xci(&k.fiber, f_ch, f_cut) * k.length_km)
        .sum()
}

/// ρ_nch of interferer `nch` in span `s`.
pub fn rho_xci(variant: &ModelVariant, link: &LinkSpec, s: usize, nch: &ChannelSpec) -> f64 {
    rho_xci_value(
        variant,
        &XciRhoInputs {
            phi_nch: nch.format.phi(),
            beta_acc_abs: beta2_acc(link, s, nch.f_center_thz).abs(),
            roll_off_cut: link.cut(s).roll_off,
            roll_off_nch: nch.roll_off,
        },
    )
}

/// ρ_CUT in span `s`.
pub fn rho_sci(variant: &ModelVariant, link: &LinkSpec, s: usize) -> f64 {
    let cut = link.cut(s);
    rho_sci_value(
        variant,
        &SciRhoInputs {
            phi_cut: cut.format.phi(),
            rate_cut_tbaud: cut.symbol_rate_tbaud,
            beta_acc_abs: beta2_acc(link, s, cut.f_center_thz).abs(),
            roll_off_cut: cut.roll_off,
        },
    )
}

/// NLI PSD generated in span `s` alone, at the end of that span.
///
/// Coherent variants use `n_total` as the accumulated span count.
pub fn span_nli_psd_with_total(link: &LinkSpec, s: usize, variant: &ModelVariant, n_total: usize) -> Result<f64> {
    let span = link.span(s);
    let comb = link.comb(s);
    let ci = link.cut_index();
    let cut = &comb[ci];
    let f_cut = cut.f_center_thz;
    let g_cut = effective_psd(cut, s, ci)?;

    let i_cut = if variant.is_coherent() {
        i_cut_coherent(span, cut, n_total as u32)?
    } else {
        i_cut_incoherent(span, cut)?
    };
    let mut sum = rho_sci(variant, link, s) * g_cut * g_cut * i_cut;
    for (i, ch) in comb.iter().enumerate() {
        if i == ci || !ch.active {
            continue;
        }
        let g = effective_psd(ch, s, i)?;
        sum += 2.0 * rho_xci(variant, link, s, ch) * g * g * i_xci(span, cut, ch)?;
    }
    let gamma = span.fiber.gamma_per_w_km;
    Ok(NLI_PREFACTOR * gamma * gamma * span.net_transfer(f_cut) * g_cut * sum)
}

/// NLI PSD generated in span `s`, with the whole link as span count.
pub fn span_nli_psd(link: &LinkSpec, s: usize, variant: &ModelVariant) -> Result<f64> {
    span_nli_psd_with_total(link, s, variant, link.n_spans())
}

/// Receiver NLI PSD at f_CUT for the link truncated after `n_end` spans.
pub fn rx_nli_psd(link: &LinkSpec, variant: &ModelVariant, n_end: usize) -> Result<f64> {
    link.check_n_end(n_end)?;
    let f_cut = link.f_cut();
    let mut total = 0.0;
    for s in 0..n_end {
        let mut g = span_nli_psd_with_total(link, s, variant, n_end)?;
        for k in s + 1..n_end {
            g *= link.span(k).net_transfer(f_cut);
        }
        total += g;
    }
    Ok(total)
}

/// Span-resolved decomposition of the NLI PSD at f_CUT.
///
/// Span `s` contributes `incoherent[s] + bracket(N)·coherent[s]` at its end,
/// which is then multiplied by `transfer[k]` for every later span `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanTerms {
    pub incoherent: Vec<f64>,
    pub coherent: Vec<f64>,
    pub transfer: Vec<f64>,
}

impl SpanTerms {
    pub fn compute(link: &LinkSpec, variant: &ModelVariant) -> Result<Self> {
        Self::compute_for_cut(link, variant, link.cut_index())
    }

    /// Same as [`SpanTerms::compute`] with channel `ci` taken as the CUT.
    ///
    /// The channel must be active in every span.
    pub fn compute_for_cut(link: &LinkSpec, variant: &ModelVariant, ci: usize) -> Result<Self> {
        let n = link.n_spans();
        let table = variant.rho_table();
        let coherent_model = variant.is_coherent();
        let f_cut = link
            .comb(0)
            .get(ci)
            .ok_or_else(|| Error::InvalidLink(format!("no channel {ci}")))?
            .f_center_thz;

        let mut out = SpanTerms {
            incoherent: Vec::with_capacity(n),
            coherent: Vec::with_capacity(n),
            transfer: Vec::with_capacity(n),
        };
        // β_acc(f) = acc_a + acc_b·f, linear in the channel frequency.
        let (mut acc_a, mut acc_b) = (0.0, 0.0);
        for s in 0..n {
            let span = link.span(s);
            let fiber = &span.fiber;
            let comb = link.comb(s);
            let cut = comb
                .get(ci)
                .ok_or_else(|| Error::InvalidLink(format!("channel {ci} missing from span {s}")))?;
            let r_cut = cut.symbol_rate_tbaud;
            let g_cut = effective_psd(cut, s, ci)?;

            let two_alpha_cut = fiber.power_loss_at(f_cut);
            let beta_cut = nonzero_dispersion(effective_beta2_cut(fiber, f_cut))?;
            let rho_cut = table.sci(cut.format, r_cut, (acc_a + acc_b * f_cut).abs(), cut.roll_off);
            let sci = rho_cut * g_cut * g_cut;
            let mut inc = sci * i_cut_incoherent_raw(beta_cut, two_alpha_cut, r_cut);
            let coh = if coherent_model {
                sci * coherent_sci_raw(beta_cut, two_alpha_cut, span.length_km, r_cut)
            } else {
                0.0
            };

            let cut_roll = table.xci_cut_rolloff(cut.roll_off);
            let pair_base = fiber.beta2_ps2_per_km + PI * fiber.beta3_ps3_per_km * (f_cut - 2.0 * fiber.f_ref_thz);
            let pair_slope = PI * fiber.beta3_ps3_per_km;
            for (i, ch) in comb.iter().enumerate() {
                if i == ci || !ch.active {
                    continue;
                }
                let f = ch.f_center_thz;
                let beta = nonzero_dispersion(pair_base + pair_slope * f)?;
                let g = effective_psd(ch, s, i)?;
                let rho = table.xci(ch.format, (acc_a + acc_b * f).abs(), cut_roll, ch.roll_off);
                inc += 2.0 * rho * g * g * i_xci_raw(beta, fiber.power_loss_at(f), f - f_cut, ch.symbol_rate_tbaud, r_cut);
            }

            let transfer = span.net_transfer(f_cut);
            let gamma = fiber.gamma_per_w_km;
            let pre = NLI_PREFACTOR * gamma * gamma * transfer * g_cut;
            out.incoherent.push(pre * inc);
            out.coherent.push(pre * coh);
            out.transfer.push(transfer);

            acc_a += pair_base * span.length_km;
            acc_b += pair_slope * span.length_km;
        }
        Ok(out)
    }

    pub fn n_spans(&self) -> usize {
        self.transfer.len()
    }

    /// Receiver NLI PSD for every truncation 1…N, in one pass.
    pub fn rx_psd_all(&self) -> Vec<f64> {
        let mut sum_inc = 0.0;
        let mut sum_coh = 0.0;
        let mut out = Vec::with_capacity(self.n_spans());
        for s in 0..self.n_spans() {
            let t = self.transfer[s];
            // Contributions of earlier spans cross span s before reaching its end.
            sum_inc = sum_inc * t + self.incoherent[s];
            sum_coh = sum_coh * t + self.coherent[s];
            out.push(sum_inc + coherence_bracket((s + 1) as u32) * sum_coh);
        }
        out
    }
}

/// Receiver NLI PSD for every truncation 1…N_span.
pub fn rx_nli_psd_all(link: &LinkSpec, variant: &ModelVariant) -> Result<Vec<f64>> {
    Ok(SpanTerms::compute(link, variant)?.rx_psd_all())
}
