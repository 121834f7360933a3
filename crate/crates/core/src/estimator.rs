//! Common interface of every NLI estimator: closed-form models and the
//! numerical GN reference.

use serde::{Deserialize, Serialize};

use crate::cfm::{rx_nli_psd_all, ModelVariant};
use crate::error::Result;
use crate::model::LinkSpec;

/// NLI at the receiver for every truncation 1…N_span of a link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NliTrace {
    /// PSD at f_CUT (W/THz).
    pub psd: Vec<f64>,
    /// Power affecting the CUT after the receiver filter (W).
    pub power: Vec<f64>,
}

pub trait NliEstimator: Sync {
    fn label(&self) -> String;

    fn nli_trace(&self, link: &LinkSpec) -> Result<NliTrace>;
}

impl NliEstimator for ModelVariant {
    fn label(&self) -> String {
        self.kind().to_string()
    }

    /// Power is the PSD at f_CUT times R_CUT.
    fn nli_trace(&self, link: &LinkSpec) -> Result<NliTrace> {
        let psd = rx_nli_psd_all(link, self)?;
        let r = link.cut(0).symbol_rate_tbaud;
        let power = psd.iter().map(|g| g * r).collect();
        Ok(NliTrace { psd, power })
    }
}

impl<T: NliEstimator + ?Sized> NliEstimator for &T {
    fn label(&self) -> String {
        (**self).label()
    }

    fn nli_trace(&self, link: &LinkSpec) -> Result<NliTrace> {
        (**self).nli_trace(link)
    }
}
