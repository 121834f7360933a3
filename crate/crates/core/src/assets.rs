//! Read-only data shipped with the crate: fiber presets, format constants,
//! coefficient tables and QAM sensitivity thresholds.
//!
//! Every asset is embedded at compile time and carries a SHA-256 digest so
//! that a modified table is detected by [`verify_checksums`].

use std::collections::BTreeMap;

use once_cell::sync::Lazy;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FIBERS_JSON: &str = include_str!("../assets/fibers.json");
pub const PHI_JSON: &str = include_str!("../assets/phi.json");
pub const COEFFICIENTS_JSON: &str = include_str!("../assets/coefficients.json");
pub const SENSITIVITY_JSON: &str = include_str!("../assets/sensitivity.json");

/// Asset schema version understood by this build.
pub const ASSET_VERSION: u32 = 1;

/// `(name, contents, sha256)` for every shipped asset.
pub const MANIFEST: [(&str, &str, &str); 4] = [
    (
        "fibers.json",
        FIBERS_JSON,
        "d43576740b21d9ccaf31b33e3672457f00620bdb8e8a0fa901e8655674e67fb0",
    ),
    (
        "phi.json",
        PHI_JSON,
        "a685f2873affc4d78c18941c30bf8d86da4b5031989e5b8b099df0627c5d57e3",
    ),
    (
        "coefficients.json",
        COEFFICIENTS_JSON,
        "a0661562d219f8a8553d4557610c5a9e54a8a6972e02ef1a3950575f98f91d6d",
    ),
    (
        "sensitivity.json",
        SENSITIVITY_JSON,
        "e9dcbe99d539b4a34ddb98910d4478fc60d392f2fac254a2db35c7de8d9afeaa",
    ),
];

pub fn sha256_hex(contents: &str) -> String {
    let digest = Sha256::digest(contents.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Recomputes every asset digest and compares it with the manifest.
pub fn verify_checksums() -> Result<()> {
    for (name, contents, expected) in MANIFEST {
        let actual = sha256_hex(contents);
        if actual != expected {
            return Err(Error::Schema(format!(
                "asset {name} checksum mismatch: expected {expected}, found {actual}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct FiberRow {
    pub alpha_db_per_km: f64,
    pub beta2_ps2_per_km: f64,
    pub beta3_ps3_per_km: f64,
    pub gamma_per_w_km: f64,
    pub f_ref_thz: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FiberAsset {
    version: u32,
    fibers: BTreeMap<String, FiberRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PhiAsset {
    version: u32,
    phi: BTreeMap<String, (u64, u64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientAsset {
    version: u32,
    tables: BTreeMap<String, Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SensitivityAsset {
    version: u32,
    qam_thresholds_db: BTreeMap<String, f64>,
    gaussian_mi_range: (f64, f64),
}

fn check_version(name: &str, version: u32) {
    assert_eq!(
        version, ASSET_VERSION,
        "embedded asset {name} has unsupported version {version}"
    );
}

pub(crate) static FIBERS: Lazy<BTreeMap<String, FiberRow>> = Lazy::new(|| {
    let asset: FiberAsset = serde_json::from_str(FIBERS_JSON).expect("embedded fibers.json");
    check_version("fibers.json", asset.version);
    asset.fibers
});

/// Format name -> (numerator, denominator) of the EGN constant.
pub(crate) static PHI: Lazy<BTreeMap<String, (u64, u64)>> = Lazy::new(|| {
    let asset: PhiAsset = serde_json::from_str(PHI_JSON).expect("embedded phi.json");
    check_version("phi.json", asset.version);
    asset.phi
});

pub(crate) static COEFFICIENT_TABLES: Lazy<BTreeMap<String, Vec<f64>>> = Lazy::new(|| {
    let asset: CoefficientAsset =
        serde_json::from_str(COEFFICIENTS_JSON).expect("embedded coefficients.json");
    check_version("coefficients.json", asset.version);
    asset.tables
});

pub(crate) static QAM_THRESHOLDS_DB: Lazy<(BTreeMap<String, f64>, (f64, f64))> =
    Lazy::new(|| {
        let asset: SensitivityAsset =
            serde_json::from_str(SENSITIVITY_JSON).expect("embedded sensitivity.json");
        check_version("sensitivity.json", asset.version);
        (asset.qam_thresholds_db, asset.gaussian_mi_range)
    });
