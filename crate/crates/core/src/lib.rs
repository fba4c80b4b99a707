//! Secret key rates of all-optical quantum repeater chains whose memories are
//! fiber loops protected by GKP, Steane-GKP or quantum parity codes.

pub mod chain;
pub mod code_gkp;
pub mod code_qpc;
pub mod config;
pub mod error;
pub mod gauss_noise;
pub mod geom_stats;
pub mod mc_oracle;
pub mod report;
pub mod sweep;
pub mod validation;

pub use chain::{secret_key_rate, CodeSpec, RateBreakdown, RepeaterConfig};
pub use error::{Error, Result};
