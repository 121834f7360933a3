//! Closed-form SCI and XCI integrals of a single span.

use std::f64::consts::PI;

use super::special::{coherence_bracket, sine_integral};
use super::{effective_beta2_cut, effective_beta2_xci};
use crate::error::{Error, Result};
use crate::model::{ChannelSpec, SpanConfig};

const PI2: f64 = PI * PI;

#[inline]
pub(crate) fn nonzero_dispersion(beta2: f64) -> Result<f64> {
    if beta2 == 0.0 || !beta2.is_finite() {
        Err(Error::ZeroDispersion { beta2 })
    } else {
        Ok(beta2.abs())
    }
}

/// Incoherent SCI integral from |β̄₂|, 2α and R_CUT.
#[inline]
pub fn i_cut_incoherent_raw(beta_abs: f64, two_alpha: f64, r_cut: f64) -> f64 {
    (0.5 * PI2 * beta_abs / two_alpha * r_cut * r_cut).asinh() / (2.0 * PI * beta_abs * two_alpha)
}

/// Coherent SCI term per unit bracket value.
///
/// Multiply by [`coherence_bracket`] and add [`i_cut_incoherent_raw`] to
/// obtain the coherent SCI integral. `two_alpha` is the power loss; the
/// field loss α = two_alpha / 2 appears in the denominator.
#[inline]
pub fn coherent_sci_raw(beta_abs: f64, two_alpha: f64, length_km: f64, b_cut: f64) -> f64 {
    let alpha = 0.5 * two_alpha;
    let si = sine_integral(PI2 * beta_abs * length_km * b_cut * b_cut);
    2.0 * si / (PI * alpha * length_km) / (2.0 * PI * beta_abs * two_alpha)
}

/// XCI integral of an interferer offset by `df` from the CUT.
#[inline]
pub fn i_xci_raw(beta_abs: f64, two_alpha: f64, df: f64, r_nch: f64, r_cut: f64) -> f64 {
    let k = PI2 * beta_abs / two_alpha * r_cut;
    ((k * (df + 0.5 * r_nch)).asinh() - (k * (df - 0.5 * r_nch)).asinh())
        / (4.0 * PI * beta_abs * two_alpha)
}

/// Incoherent SCI integral of `cut` in `span`.
pub fn i_cut_incoherent(span: &SpanConfig, cut: &ChannelSpec) -> Result<f64> {
    let f = cut.f_center_thz;
    let beta = nonzero_dispersion(effective_beta2_cut(&span.fiber, f))?;
    Ok(i_cut_incoherent_raw(beta, span.fiber.power_loss_at(f), cut.symbol_rate_tbaud))
}

/// SCI integral including coherent accumulation over `n_span_total` spans.
///
/// The CUT bandwidth in the coherent term is its symbol rate.
pub fn i_cut_coherent(span: &SpanConfig, cut: &ChannelSpec, n_span_total: u32) -> Result<f64> {
    if n_span_total == 0 {
        return Err(Error::InvalidParameter("span count must be at least 1".into()));
    }
    let f = cut.f_center_thz;
    let beta = nonzero_dispersion(effective_beta2_cut(&span.fiber, f))?;
    let two_alpha = span.fiber.power_loss_at(f);
    let r = cut.symbol_rate_tbaud;
    let bracket = coherence_bracket(n_span_total);
    let extra = if bracket == 0.0 {
        0.0
    } else {
        bracket * coherent_sci_raw(beta, two_alpha, span.length_km, r)
    };
    Ok(i_cut_incoherent_raw(beta, two_alpha, r) + extra)
}

/// XCI integral of interferer `nch` onto `cut` in `span`.
pub fn i_xci(span: &SpanConfig, cut: &ChannelSpec, nch: &ChannelSpec) -> Result<f64> {
    let f = nch.f_center_thz;
    let beta = nonzero_dispersion(effective_beta2_xci(&span.fiber, f, cut.f_center_thz))?;
    Ok(i_xci_raw(
        beta,
        span.fiber.power_loss_at(f),
        f - cut.f_center_thz,
        nch.symbol_rate_tbaud,
        cut.symbol_rate_tbaud,
    ))
}
