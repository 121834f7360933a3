//! Closed-form NLI models CFM1–CFM4.
//!
//! CFM1 is the plain closed-form GN approximation. CFM2 multiplies the SCI
//! and XCI terms by fitted ρ factors, CFM3 adds coherent SCI accumulation,
//! and CFM4 makes the ρ factors roll-off aware.

mod coefficients;
mod integrals;
mod nli;
pub mod special;

use std::f64::consts::PI;

pub use coefficients::{
    power_term, rho_sci_value, rho_xci_value, ModelCoefficients, ModelKind, ModelVariant, RhoTable,
    SciRhoInputs, XciRhoInputs, BRACKET_FLOOR,
};
pub use integrals::{
    coherent_sci_raw, i_cut_coherent, i_cut_incoherent, i_cut_incoherent_raw, i_xci, i_xci_raw,
};
pub use nli::{
    beta2_acc, rho_sci, rho_xci, rx_nli_psd, rx_nli_psd_all, span_nli_psd, span_nli_psd_with_total,
    SpanTerms,
};

use crate::error::{Error, Result};
use crate::model::{ChannelSpec, FiberParams, ModulationFormat};

/// Nonlinear prefactor 16/27.
pub const NLI_PREFACTOR: f64 = 16.0 / 27.0;

pub fn phi_of_format(format: ModulationFormat) -> f64 {
    format.phi()
}

/// β̄₂ seen by the CUT (ps²/km).
#[inline]
pub fn effective_beta2_cut(fiber: &FiberParams, f_cut: f64) -> f64 {
    fiber.beta2_ps2_per_km + PI * fiber.beta3_ps3_per_km * (2.0 * f_cut - 2.0 * fiber.f_ref_thz)
}

/// β̄₂ of the interferer/CUT pair (ps²/km).
#[inline]
pub fn effective_beta2_xci(fiber: &FiberParams, f_nch: f64, f_cut: f64) -> f64 {
    fiber.beta2_ps2_per_km + PI * fiber.beta3_ps3_per_km * (f_nch + f_cut - 2.0 * fiber.f_ref_thz)
}

/// Power-loss coefficient 2α (1/km) at the fiber reference frequency.
pub fn alpha_power_per_km(fiber: &FiberParams) -> f64 {
    fiber.power_loss_at(fiber.f_ref_thz)
}

/// Effective PSD P/R (W/THz) of a channel launched into span `span`.
pub fn effective_psd(channel: &ChannelSpec, span: usize, index: usize) -> Result<f64> {
    if !channel.active {
        return Err(Error::InactiveChannel { index, span });
    }
    Ok(channel.launch_power_w / channel.symbol_rate_tbaud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::channel;
    use crate::model::FiberPreset;

    #[test]
    fn effective_dispersion_examples() {
        let smf = FiberPreset::Smf.params();
        assert_eq!(effective_beta2_cut(&smf, 193.8), -21.3);
        assert!((effective_beta2_cut(&smf, 196.3) - (-21.3 + PI * 0.1452 * 5.0)).abs() < 1e-12);
        assert!((effective_beta2_cut(&smf, 196.3) - (-19.019)).abs() < 1e-3);
        assert!((effective_beta2_xci(&smf, 196.3, 193.8) - (-20.159)).abs() < 1e-3);
        assert_eq!(effective_beta2_xci(&smf, 193.7, 193.9), -21.3);
        let flat = FiberParams { beta3_ps3_per_km: 0.0, ..smf };
        assert_eq!(effective_beta2_cut(&flat, 191.0), -21.3);
    }

    #[test]
    fn effective_psd_examples() {
        let ch = channel(193.8, 0.064, ModulationFormat::Pm16Qam, 1e-3);
        assert!((effective_psd(&ch, 0, 0).unwrap() - 0.015625).abs() < 1e-15);
        let ch = channel(193.8, 0.064, ModulationFormat::Pm16Qam, 0.064e-3);
        assert!((effective_psd(&ch, 0, 0).unwrap() - 1e-3).abs() < 1e-15);
        let off = ChannelSpec { active: false, ..ch };
        assert!(matches!(effective_psd(&off, 2, 5), Err(Error::InactiveChannel { index: 5, span: 2 })));
    }

    #[test]
    fn loss_conversion() {
        let smf = FiberPreset::Smf.params();
        assert!((alpha_power_per_km(&smf) - 0.048_354).abs() < 1e-6);
        assert!(((-alpha_power_per_km(&smf) * 100.0).exp() - 7.943e-3).abs() < 1e-6);
        let lossless = FiberParams { alpha_db_per_km: 0.0, ..smf };
        assert_eq!(alpha_power_per_km(&lossless), 0.0);
    }

    #[test]
    fn phi_table() {
        assert_eq!(phi_of_format(ModulationFormat::Pm16Qam), 17.0 / 25.0);
        assert_eq!(phi_of_format(ModulationFormat::PmQpsk), 1.0);
        assert_eq!(phi_of_format(ModulationFormat::PmGaussian), 0.0);
    }
}
