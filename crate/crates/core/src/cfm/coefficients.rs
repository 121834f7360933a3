//! Model variants, their coefficient sets and the ρ correction factors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assets;
use crate::error::{Error, Result};
use crate::model::ModulationFormat;

/// Lower clamp applied to every power-law base with a non-positive exponent.
pub const BRACKET_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "CFM1")]
    Cfm1,
    #[serde(rename = "CFM2")]
    Cfm2,
    #[serde(rename = "CFM3")]
    Cfm3,
    #[serde(rename = "CFM4")]
    Cfm4,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Cfm1, ModelKind::Cfm2, ModelKind::Cfm3, ModelKind::Cfm4];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cfm1 => "CFM1",
            ModelKind::Cfm2 => "CFM2",
            ModelKind::Cfm3 => "CFM3",
            ModelKind::Cfm4 => "CFM4",
        }
    }

    /// Number of free parameters; zero for CFM1.
    pub fn arity(self) -> usize {
        match self {
            ModelKind::Cfm1 => 0,
            ModelKind::Cfm2 | ModelKind::Cfm3 => 18,
            ModelKind::Cfm4 => 24,
        }
    }

    /// Whether the SCI integral carries the coherent-accumulation term.
    pub fn is_coherent(self) -> bool {
        matches!(self, ModelKind::Cfm3 | ModelKind::Cfm4)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Schema(format!("unknown model variant '{s}'")))
    }
}

/// The a₁…a₁₈ (or a₁…a₂₄) parameters, stored 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelCoefficients {
    a: Vec<f64>,
}

impl ModelCoefficients {
    pub fn new(kind: ModelKind, a: Vec<f64>) -> Result<Self> {
        if kind == ModelKind::Cfm1 {
            return Err(Error::InvalidParameter("CFM1 takes no coefficients".into()));
        }
        if a.len() != kind.arity() {
            return Err(Error::InvalidParameter(format!(
                "{kind} needs {} coefficients, got {}",
                kind.arity(),
                a.len()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        Ok(ModelCoefficients { a })
    }

    /// Published coefficient table shipped with the crate.
    pub fn published(kind: ModelKind) -> Result<Self> {
        let table = assets::COEFFICIENT_TABLES
            .get(kind.name())
            .ok_or_else(|| Error::InvalidParameter(format!("no shipped table for {kind}")))?;
        Self::new(kind, table.clone())
    }

    /// Coefficients forcing ρ ≡ 1; the remaining entries keep published values.
    pub fn identity(kind: ModelKind) -> Result<Self> {
        let mut c = Self::published(kind)?;
        for (i, v) in [(1, 1.0), (2, 0.0), (4, 0.0), (9, 1.0), (10, 0.0), (12, 0.0)] {
            c.a[i - 1] = v;
        }
        if kind == ModelKind::Cfm4 {
            for i in [19, 21, 23] {
                c.a[i - 1] = 0.0;
            }
        }
        Ok(c)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// 1-based access matching the a₁…a₂₄ naming.
    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.a[i - 1]
    }
}

/// A model kind together with its coefficients (none for CFM1).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVariant {
    kind: ModelKind,
    coefficients: Option<ModelCoefficients>,
}

impl ModelVariant {
    pub fn cfm1() -> Self {
        ModelVariant {
            kind: ModelKind::Cfm1,
            coefficients: None,
        }
    }

    /// Variant with the shipped coefficient table.
    pub fn published(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Cfm1 => Self::cfm1(),
            _ => ModelVariant {
                kind,
                coefficients: Some(
                    ModelCoefficients::published(kind).expect("shipped tables have correct arity"),
                ),
            },
        }
    }

    pub fn with_coefficients(kind: ModelKind, coefficients: ModelCoefficients) -> Result<Self> {
        if kind == ModelKind::Cfm1 {
            return Err(Error::InvalidParameter("CFM1 takes no coefficients".into()));
        }
        if coefficients.len() != kind.arity() {
            return Err(Error::InvalidParameter(format!(
                "{kind} needs {} coefficients, got {}",
                kind.arity(),
                coefficients.len()
            )));
        }
        Ok(ModelVariant {
            kind,
            coefficients: Some(coefficients),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn coefficients(&self) -> Option<&ModelCoefficients> {
        self.coefficients.as_ref()
    }

    pub fn is_coherent(&self) -> bool {
        self.kind.is_coherent()
    }

    pub fn rho_table(&self) -> RhoTable {
        RhoTable::new(self)
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)
    }
}

/// `coef · base^exp`, total for every input.
///
/// A zero coefficient gives 0, a zero base with positive exponent gives 0,
/// and otherwise the base is clamped to [`BRACKET_FLOOR`].
#[inline]
pub fn power_term(coef: f64, base: f64, exp: f64) -> f64 {
    if coef == 0.0 {
        return 0.0;
    }
    if base <= 0.0 && exp > 0.0 {
        return 0.0;
    }
    coef * base.max(BRACKET_FLOOR).powf(exp)
}

/// Inputs of the interfering-channel factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XciRhoInputs {
    pub phi_nch: f64,
    /// |β₂,acc| of the interferer at the span input (ps²).
    pub beta_acc_abs: f64,
    pub roll_off_cut: f64,
    pub roll_off_nch: f64,
}

/// Inputs of the self-channel factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SciRhoInputs {
    pub phi_cut: f64,
    pub rate_cut_tbaud: f64,
    pub beta_acc_abs: f64,
    pub roll_off_cut: f64,
}

/// ρ_nch for arbitrary inputs.
pub fn rho_xci_value(variant: &ModelVariant, x: &XciRhoInputs) -> f64 {
    let Some(c) = variant.coefficients() else {
        return 1.0;
    };
    let a = |i| c.get(i);
    let brace = a(1)
        + power_term(a(2), x.phi_nch, a(3))
        + power_term(a(4), x.phi_nch, a(5))
            * (1.0 + power_term(a(6), x.beta_acc_abs + a(7), a(8)));
    if variant.kind() == ModelKind::Cfm4 {
        let roll = 1.0 + power_term(a(19), x.roll_off_cut, a(20)) + power_term(a(21), x.roll_off_nch, a(22));
        roll * brace
    } else {
        brace
    }
}

/// ρ_CUT for arbitrary inputs.
pub fn rho_sci_value(variant: &ModelVariant, x: &SciRhoInputs) -> f64 {
    let Some(c) = variant.coefficients() else {
        return 1.0;
    };
    let a = |i| c.get(i);
    let brace = a(9)
        + power_term(a(10), x.phi_cut, a(11))
        + power_term(a(12), x.phi_cut, a(13))
            * (1.0
                + power_term(a(14), x.rate_cut_tbaud, a(15))
                + power_term(a(16), x.beta_acc_abs + a(17), a(18)));
    if variant.kind() == ModelKind::Cfm4 {
        (1.0 + power_term(a(23), x.roll_off_cut, a(24))) * brace
    } else {
        brace
    }
}

/// Precomputed format-dependent pieces of the ρ formulas.
///
/// Evaluates the same expressions as [`rho_xci_value`] and
/// [`rho_sci_value`] with the Φ powers hoisted out of the inner loops.
#[derive(Debug, Clone)]
pub struct RhoTable {
    kind: ModelKind,
    a: Vec<f64>,
    xci_format: [(f64, f64); ModulationFormat::ALL.len()],
    sci_format: [(f64, f64); ModulationFormat::ALL.len()],
}

fn format_slot(format: ModulationFormat) -> usize {
    ModulationFormat::ALL
        .iter()
        .position(|m| *m == format)
        .expect("format listed in ALL")
}

impl RhoTable {
    fn new(variant: &ModelVariant) -> Self {
        let a = variant
            .coefficients()
            .map(|c| c.as_slice().to_vec())
            .unwrap_or_default();
        let mut xci_format = [(0.0, 0.0); ModulationFormat::ALL.len()];
        let mut sci_format = [(0.0, 0.0); ModulationFormat::ALL.len()];
        if !a.is_empty() {
            let g = |i: usize| a[i - 1];
            for (slot, m) in ModulationFormat::ALL.iter().enumerate() {
                let phi = m.phi();
                xci_format[slot] = (power_term(g(2), phi, g(3)), power_term(g(4), phi, g(5)));
                sci_format[slot] = (power_term(g(10), phi, g(11)), power_term(g(12), phi, g(13)));
            }
        }
        RhoTable {
            kind: variant.kind(),
            a,
            xci_format,
            sci_format,
        }
    }

    #[inline]
    fn g(&self, i: usize) -> f64 {
        self.a[i - 1]
    }

    pub fn is_unity(&self) -> bool {
        self.a.is_empty()
    }

    /// Roll-off prefactor of ρ_nch that depends on the CUT only.
    #[inline]
    pub fn xci_cut_rolloff(&self, roll_off_cut: f64) -> f64 {
        if self.kind == ModelKind::Cfm4 {
            power_term(self.g(19), roll_off_cut, self.g(20))
        } else {
            0.0
        }
    }

    #[inline]
    pub fn xci(&self, format: ModulationFormat, beta_acc_abs: f64, cut_rolloff_term: f64, roll_off_nch: f64) -> f64 {
        if self.is_unity() {
            return 1.0;
        }
        let (t2, t4) = self.xci_format[format_slot(format)];
        let brace = self.g(1) + t2 + t4 * (1.0 + power_term(self.g(6), beta_acc_abs + self.g(7), self.g(8)));
        if self.kind == ModelKind::Cfm4 {
            (1.0 + cut_rolloff_term + power_term(self.g(21), roll_off_nch, self.g(22))) * brace
        } else {
            brace
        }
    }

    #[inline]
    pub fn sci(&self, format: ModulationFormat, rate_tbaud: f64, beta_acc_abs: f64, roll_off_cut: f64) -> f64 {
        if self.is_unity() {
            return 1.0;
        }
        let (t10, t12) = self.sci_format[format_slot(format)];
        let brace = self.g(9)
            + t10
            + t12
                * (1.0
                    + power_term(self.g(14), rate_tbaud, self.g(15))
                    + power_term(self.g(16), beta_acc_abs + self.g(17), self.g(18)));
        if self.kind == ModelKind::Cfm4 {
            (1.0 + power_term(self.g(23), roll_off_cut, self.g(24))) * brace
        } else {
            brace
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xci(phi: f64, beta: f64) -> XciRhoInputs {
        XciRhoInputs {
            phi_nch: phi,
            beta_acc_abs: beta,
            roll_off_cut: 0.1,
            roll_off_nch: 0.2,
        }
    }

    fn sci(phi: f64, beta: f64) -> SciRhoInputs {
        SciRhoInputs {
            phi_cut: phi,
            rate_cut_tbaud: 0.064,
            beta_acc_abs: beta,
            roll_off_cut: 0.1,
        }
    }

    #[test]
    fn cfm1_factors_are_one() {
        let v = ModelVariant::cfm1();
        assert_eq!(rho_xci_value(&v, &xci(0.68, 1000.0)), 1.0);
        assert_eq!(rho_sci_value(&v, &sci(0.68, 1000.0)), 1.0);
    }

    #[test]
    fn gaussian_format_leaves_constant_terms() {
        let v = ModelVariant::published(ModelKind::Cfm2);
        assert_eq!(rho_xci_value(&v, &xci(0.0, 5000.0)), 0.93143);
        assert_eq!(rho_sci_value(&v, &sci(0.0, 5000.0)), 0.99313);
    }

    #[test]
    fn zero_roll_off_removes_cfm4_prefactor() {
        let v = ModelVariant::published(ModelKind::Cfm4);
        let mut x = xci(0.68, 2130.0);
        x.roll_off_cut = 0.0;
        x.roll_off_nch = 0.0;
        let c = v.coefficients().unwrap();
        let a = |i| c.get(i);
        let brace = a(1) + a(2) * 0.68f64.powf(a(3))
            + a(4) * 0.68f64.powf(a(5)) * (1.0 + a(6) * (2130.0 + a(7)).powf(a(8)));
        assert!((rho_xci_value(&v, &x) - brace).abs() < 1e-15);
    }

    #[test]
    fn identity_coefficients_force_unity() {
        for kind in [ModelKind::Cfm2, ModelKind::Cfm3, ModelKind::Cfm4] {
            let v = ModelVariant::with_coefficients(kind, ModelCoefficients::identity(kind).unwrap()).unwrap();
            for phi in [0.0, 0.6, 1.0] {
                assert_eq!(rho_xci_value(&v, &xci(phi, 321.0)), 1.0);
                assert_eq!(rho_sci_value(&v, &sci(phi, 321.0)), 1.0);
            }
        }
    }

    #[test]
    fn negative_bracket_is_clamped() {
        let mut a = ModelCoefficients::published(ModelKind::Cfm2).unwrap().as_slice().to_vec();
        a[6] = -1e6;
        let v = ModelVariant::with_coefficients(ModelKind::Cfm2, ModelCoefficients::new(ModelKind::Cfm2, a).unwrap()).unwrap();
        assert!(rho_xci_value(&v, &xci(1.0, 10.0)).is_finite());
    }

    #[test]
    fn table_matches_direct_formula() {
        for kind in ModelKind::ALL {
            let v = ModelVariant::published(kind);
            let t = v.rho_table();
            for m in ModulationFormat::ALL {
                for beta in [0.0, 850.0, 40_000.0] {
                    let direct = rho_xci_value(
                        &v,
                        &XciRhoInputs { phi_nch: m.phi(), beta_acc_abs: beta, roll_off_cut: 0.07, roll_off_nch: 0.21 },
                    );
                    let fast = t.xci(m, beta, t.xci_cut_rolloff(0.07), 0.21);
                    assert!((direct - fast).abs() <= 1e-15 * direct.abs().max(1.0));
                    let direct = rho_sci_value(
                        &v,
                        &SciRhoInputs { phi_cut: m.phi(), rate_cut_tbaud: 0.096, beta_acc_abs: beta, roll_off_cut: 0.07 },
                    );
                    let fast = t.sci(m, 0.096, beta, 0.07);
                    assert!((direct - fast).abs() <= 1e-15 * direct.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn coefficient_arity_is_checked() {
        assert!(ModelCoefficients::new(ModelKind::Cfm2, vec![0.0; 24]).is_err());
        assert!(ModelCoefficients::new(ModelKind::Cfm4, vec![0.0; 24]).is_ok());
        assert!(ModelCoefficients::new(ModelKind::Cfm1, vec![]).is_err());
    }
}
