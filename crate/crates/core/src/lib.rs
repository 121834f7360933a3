//! Closed-form nonlinear-interference models for coherent WDM links.
//!
//! The crate covers the CFM1–CFM4 model family, SNR and reach evaluation,
//! randomized test-set generation, launch-power optimization, a numerical
//! GN-model quadrature used as reference, and campaign/fitting tooling.

pub mod assets;
pub mod campaign;
pub mod cfm;
pub mod error;
pub mod estimator;
pub mod gn_oracle;
pub mod model;
pub mod perf;
pub mod power_opt;
pub mod sysgen;

pub use error::{Error, ErrorClass, Result};
