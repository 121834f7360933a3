use num_rational::Ratio;
use proptest::prelude::*;

use nli_planner::campaign::{error_stats_with_bins, ErrorStats};
use nli_planner::cfm::special::{coherence_bracket, harmonic_number};
use nli_planner::cfm::{i_xci_raw, rx_nli_psd_all, ModelCoefficients, ModelKind, ModelVariant};
use nli_planner::model::LinkSpec;
use nli_planner::perf::{ase_power_all, SensitivityPolicy};
use nli_planner::sysgen::{generate_indexed, Category, GeneratorConfig};

fn random_link(category: usize, n_spans: usize, seed: u64, index: u64) -> LinkSpec {
    let cfg = GeneratorConfig {
        category: Category::ALL[category],
        n_spans,
        band_width_thz: 1.5,
        seed,
        ..GeneratorConfig::default()
    };
    generate_indexed(&cfg, &SensitivityPolicy::default(), index).unwrap().link
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn nli_is_cubic_in_launch_power(
        category in 0usize..5,
        n_spans in 1usize..8,
        index in 0u64..1_000_000,
        scale in 0.05f64..20.0,
    ) {
        let link = random_link(category, n_spans, 17, index);
        let scaled = link.scaled_powers(scale);
        for kind in ModelKind::ALL {
            let v = ModelVariant::published(kind);
            let base = rx_nli_psd_all(&link, &v).unwrap();
            let up = rx_nli_psd_all(&scaled, &v).unwrap();
            for (b, u) in base.iter().zip(&up) {
                prop_assert!(rel(*u, b * scale.powi(3)) <= 1e-9, "{kind}: {u} vs {}", b * scale.powi(3));
            }
        }
    }

    #[test]
    fn identity_coefficients_reduce_to_cfm1(
        category in 0usize..5,
        n_spans in 1usize..10,
        index in 0u64..1_000_000,
    ) {
        let link = random_link(category, n_spans, 29, index);
        let cfm1 = rx_nli_psd_all(&link, &ModelVariant::cfm1()).unwrap();
        let id = ModelVariant::with_coefficients(ModelKind::Cfm2, ModelCoefficients::identity(ModelKind::Cfm2).unwrap()).unwrap();
        let cfm2 = rx_nli_psd_all(&link, &id).unwrap();
        for (a, b) in cfm2.iter().zip(&cfm1) {
            prop_assert!(rel(*a, *b) <= 1e-12);
        }
    }

    #[test]
    fn xci_is_symmetric_under_reflection(
        beta in 0.5f64..30.0,
        two_alpha in 0.03f64..0.07,
        df in 0.0f64..3.0,
        r_nch in 0.01f64..0.15,
        r_cut in 0.01f64..0.15,
    ) {
        let up = i_xci_raw(beta, two_alpha, df, r_nch, r_cut);
        let down = i_xci_raw(beta, two_alpha, -df, r_nch, r_cut);
        prop_assert!(rel(up, down) <= 1e-12);
        prop_assert!(up > 0.0);
    }

    #[test]
    fn xci_decreases_with_spacing(
        beta in 0.5f64..30.0,
        df in 0.1f64..3.0,
        step in 0.01f64..1.0,
        r in 0.01f64..0.1,
    ) {
        let near = i_xci_raw(beta, 0.046, df, r, r);
        let far = i_xci_raw(beta, 0.046, df + step, r, r);
        prop_assert!(far < near);
    }

    #[test]
    fn incoherent_nli_and_ase_grow_with_distance(
        category in 0usize..5,
        n_spans in 2usize..12,
        index in 0u64..1_000_000,
    ) {
        let link = random_link(category, n_spans, 41, index);
        for kind in [ModelKind::Cfm1, ModelKind::Cfm2] {
            let psd = rx_nli_psd_all(&link, &ModelVariant::published(kind)).unwrap();
            for w in psd.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
        }
        let ase = ase_power_all(&link);
        for w in ase.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn error_statistics_invariants(
        samples in prop::collection::vec(-3.0f64..3.0, 1..200),
        shift in -1.0f64..1.0,
        width in 0.005f64..0.5,
    ) {
        let s = error_stats_with_bins(&samples, width).unwrap();
        check_stats(&s, &samples);
        let moved: Vec<f64> = samples.iter().map(|x| x + shift).collect();
        let t = error_stats_with_bins(&moved, width).unwrap();
        prop_assert!((t.mean - s.mean - shift).abs() <= 1e-9);
        prop_assert!((t.std_dev - s.std_dev).abs() <= 1e-9);
        prop_assert!((t.peak_to_peak - s.peak_to_peak).abs() <= 1e-9);
    }
}

fn check_stats(s: &ErrorStats, samples: &[f64]) {
    assert_eq!(s.n, samples.len());
    assert!(s.min <= s.mean && s.mean <= s.max);
    assert!(s.std_dev >= 0.0);
    assert_eq!(s.peak, s.min.abs().max(s.max.abs()));
    assert_eq!(s.peak_to_peak, s.max - s.min);
    assert_eq!(s.bins.iter().map(|b| b.count).sum::<usize>(), samples.len());
    for w in s.bins.windows(2) {
        assert!(((w[1].center_db - w[0].center_db) - s.bin_width_db).abs() < 1e-9);
    }
    for x in samples {
        let hit = s.bins.iter().any(|b| (x - b.center_db).abs() <= 0.5 * s.bin_width_db * (1.0 + 1e-9));
        assert!(hit, "{x} not covered");
    }
}

#[test]
fn coherence_bracket_matches_direct_summation() {
    assert_eq!(coherence_bracket(1), 0.0);
    for n in 1..=40i128 {
        let direct: Ratio<i128> = (1..n).map(|k| Ratio::new(n - k, n * k)).sum();
        let closed: Ratio<i128> = (1..n).map(|k| Ratio::new(1, k)).sum::<Ratio<i128>>() + Ratio::new(1 - n, n);
        assert_eq!(direct, closed, "N = {n}");
        let exact = *direct.numer() as f64 / *direct.denom() as f64;
        let got = coherence_bracket(n as u32);
        assert!((got - exact).abs() <= 1e-15 * exact.max(1.0), "N = {n}: {got} vs {exact}");
        if n > 1 {
            assert!(got > 0.0);
            assert!((harmonic_number(n as u32 - 1) + (1 - n) as f64 / n as f64 - got).abs() < 1e-15);
        }
    }
}
