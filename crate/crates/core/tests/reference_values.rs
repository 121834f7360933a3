//! Closed-form model values against arbitrary-precision references
//! produced by `tests/reference/cfm_reference.py`.

use nli_planner::cfm::{
    i_cut_coherent, i_cut_incoherent, i_xci, rho_sci_value, rho_xci_value, rx_nli_psd, ModelKind, ModelVariant,
    SciRhoInputs, XciRhoInputs,
};
use nli_planner::model::{ChannelSpec, FiberPreset, GainProfile, LinkSpec, ModulationFormat, SpanConfig};

const TOL: f64 = 1e-10;

fn close(got: f64, want: f64, tol: f64, what: &str) {
    let rel = ((got - want) / want).abs();
    assert!(rel <= tol, "{what}: got {got:e}, want {want:e}, rel {rel:e}");
}

fn channel(f: f64, r: f64, roll_off: f64, format: ModulationFormat, p: f64) -> ChannelSpec {
    ChannelSpec { f_center_thz: f, symbol_rate_tbaud: r, roll_off, format, launch_power_w: p, active: true }
}

fn span(preset: FiberPreset, length_km: f64, extra_gain_db: f64) -> SpanConfig {
    let fiber = preset.params();
    SpanConfig {
        fiber,
        length_km,
        noise_figure_db: 5.0,
        gain: GainProfile::Flat(fiber.alpha_db_per_km * length_km + extra_gain_db),
    }
}

const XCI_INPUTS: [(ModulationFormat, f64, f64, f64); 3] = [
    (ModulationFormat::Pm16Qam, 2130.0, 0.1, 0.2),
    (ModulationFormat::PmQpsk, 0.0, 0.05, 0.25),
    (ModulationFormat::Pm256Qam, 41234.5, 0.25, 0.05),
];
const SCI_INPUTS: [(ModulationFormat, f64, f64, f64); 3] = [
    (ModulationFormat::Pm16Qam, 0.064, 2130.0, 0.1),
    (ModulationFormat::Pm8Qam, 0.032, 0.0, 0.05),
    (ModulationFormat::Pm64Qam, 0.128, 41234.5, 0.25),
];

#[rustfmt::skip]
const RHO_XCI: [(ModelKind, [f64; 3]); 3] = [
    (ModelKind::Cfm2, [7.5212403555487356e-1, 8.0966712151469981e-2, 9.2490897148602935e-1]),
    (ModelKind::Cfm3, [6.8778993806011507e-1, 1.547492053252186e-1, 8.4109559345500238e-1]),
    (ModelKind::Cfm4, [6.7659287841438722e-1, 1.4047162534459977e-1, 8.4918675381142897e-1]),
];
#[rustfmt::skip]
const RHO_SCI: [(ModelKind, [f64; 3]); 3] = [
    (ModelKind::Cfm2, [7.8514854071680335e-1, 4.1631962859224678e-1, 9.2584872730698842e-1]),
    (ModelKind::Cfm3, [6.1401708326793869e-1, 3.1336124405095245e-1, 7.3487497324915167e-1]),
    (ModelKind::Cfm4, [6.3474392148172256e-1, 3.2923221139983958e-1, 7.1873480594220386e-1]),
];

#[test]
fn rho_factors_match_reference() {
    for (kind, want) in RHO_XCI {
        let v = ModelVariant::published(kind);
        for (j, &(format, beta, rc, rn)) in XCI_INPUTS.iter().enumerate() {
            let x = XciRhoInputs { phi_nch: format.phi(), beta_acc_abs: beta, roll_off_cut: rc, roll_off_nch: rn };
            close(rho_xci_value(&v, &x), want[j], TOL, &format!("rho_xci {kind} {j}"));
        }
    }
    for (kind, want) in RHO_SCI {
        let v = ModelVariant::published(kind);
        for (j, &(format, rate, beta, rc)) in SCI_INPUTS.iter().enumerate() {
            let x = SciRhoInputs { phi_cut: format.phi(), rate_cut_tbaud: rate, beta_acc_abs: beta, roll_off_cut: rc };
            close(rho_sci_value(&v, &x), want[j], TOL, &format!("rho_sci {kind} {j}"));
        }
    }
}

#[test]
fn rho_tables_match_direct_evaluation() {
    for kind in [ModelKind::Cfm2, ModelKind::Cfm3, ModelKind::Cfm4] {
        let v = ModelVariant::published(kind);
        let table = v.rho_table();
        for &(format, beta, rc, rn) in &XCI_INPUTS {
            let direct = rho_xci_value(&v, &XciRhoInputs { phi_nch: format.phi(), beta_acc_abs: beta, roll_off_cut: rc, roll_off_nch: rn });
            close(table.xci(format, beta, table.xci_cut_rolloff(rc), rn), direct, 1e-14, "table xci");
        }
        for &(format, rate, beta, rc) in &SCI_INPUTS {
            let direct = rho_sci_value(&v, &SciRhoInputs { phi_cut: format.phi(), rate_cut_tbaud: rate, beta_acc_abs: beta, roll_off_cut: rc });
            close(table.sci(format, rate, beta, rc), direct, 1e-14, "table sci");
        }
    }
}

#[test]
fn phi_table_is_exact() {
    use ModulationFormat::*;
    let want = [
        (PmBpsk, (1, 1)),
        (PmQpsk, (1, 1)),
        (Pm8Qam, (2, 3)),
        (Pm16Qam, (17, 25)),
        (Pm32Qam, (69, 100)),
        (Pm64Qam, (13, 21)),
        (Pm128Qam, (1105, 1681)),
        (Pm256Qam, (257, 425)),
        (PmGaussian, (0, 1)),
    ];
    assert_eq!(ModulationFormat::ALL.len(), want.len());
    for (format, frac) in want {
        assert_eq!(format.phi_fraction(), frac, "{}", format.name());
        assert_eq!(format.phi(), frac.0 as f64 / frac.1 as f64);
    }
}

#[test]
fn integrals_match_reference() {
    let smf = span(FiberPreset::Smf, 100.0, 0.0);
    let cut = channel(193.8, 0.064, 0.1, ModulationFormat::Pm16Qam, 1e-3);
    close(i_cut_incoherent(&smf, &cut).unwrap(), 4.454656919000432e-1, TOL, "i_cut");
    close(i_cut_coherent(&smf, &cut, 2).unwrap(), 4.774924386084156e-1, TOL, "i_cut_coh N=2");
    close(i_cut_coherent(&smf, &cut, 10).unwrap(), 5.6902284725670848e-1, TOL, "i_cut_coh N=10");
    let nch = channel(193.9, 0.064, 0.1, ModulationFormat::Pm16Qam, 1e-3);
    close(i_xci(&smf, &cut, &nch).unwrap(), 5.1318719442460191e-2, TOL, "i_xci");
    let nz2 = span(FiberPreset::Nzdsf2, 100.0, 0.0);
    let wide = channel(195.9, 0.096, 0.1, ModulationFormat::Pm16Qam, 1e-3);
    close(i_cut_incoherent(&nz2, &wide).unwrap(), 2.5367081390745803, TOL, "i_cut NZDSF2");
}

fn five_span_link() -> LinkSpec {
    let spans = vec![
        span(FiberPreset::Smf, 95.0, 0.0),
        span(FiberPreset::Nzdsf1, 110.0, 0.5),
        span(FiberPreset::Smf, 82.0, -0.3),
        span(FiberPreset::Nzdsf2, 118.0, 0.0),
        span(FiberPreset::Smf, 100.0, 0.2),
    ];
    let comb = vec![
        channel(192.3, 0.032, 0.05, ModulationFormat::PmQpsk, 0.4e-3),
        channel(192.4, 0.064, 0.15, ModulationFormat::Pm16Qam, 0.9e-3),
        channel(192.5, 0.064, 0.10, ModulationFormat::Pm64Qam, 1.0e-3),
        channel(192.65, 0.096, 0.20, ModulationFormat::PmGaussian, 1.6e-3),
        channel(193.9, 0.128, 0.25, ModulationFormat::Pm256Qam, 2.2e-3),
    ];
    LinkSpec::uniform(spans, comb, 2).unwrap()
}

#[rustfmt::skip]
const FIVE_SPAN: [(ModelKind, [f64; 3]); 4] = [
    (ModelKind::Cfm1, [2.485870918780668e-6, 1.1932799704466234e-5, 3.241014097548898e-5]),
    (ModelKind::Cfm2, [1.3155078494103294e-6, 9.0042451993705435e-6, 2.64717269285563e-5]),
    (ModelKind::Cfm3, [1.2304612091339551e-6, 8.5401706481089672e-6, 2.6188823920458748e-5]),
    (ModelKind::Cfm4, [1.2435355364804272e-6, 8.6735707281805232e-6, 2.657879736202171e-5]),
];

#[test]
fn five_span_psd_matches_reference() {
    let link = five_span_link();
    for (kind, want) in FIVE_SPAN {
        let v = ModelVariant::published(kind);
        for (j, n) in [1, 3, 5].into_iter().enumerate() {
            close(rx_nli_psd(&link, &v, n).unwrap(), want[j], TOL, &format!("{kind} N={n}"));
        }
    }
}
