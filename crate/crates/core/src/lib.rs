//! Time-to-drift (TTD) forecasting and calibration scheduling.
//!
//! The crate turns run-to-failure sensor trajectories into a calibration
//! surrogate (virtual thresholds plus synthetic resets), labels and windows
//! the result, trains TTD forecasters, and replays calibration policies
//! under a violation-aware cost model.
//!
//! Pipeline, in module order:
//!
//! 1. [`cmapss`]: parse the whitespace-separated trajectory format.
//! 2. [`adaptation`]: rank drift sensors, place thresholds, insert resets.
//! 3. [`labeling`]: TTD labels, sliding windows, engine splits, standardization.
//! 4. [`models`]: linear, quantile and self-attention forecasters.
//! 5. [`metrics`]: MAE / RMSE / R².
//! 6. [`scheduler`]: reactive, fixed, predictive and quantile policies.

// `!(x >= 0.0)` is how NaN-rejecting range checks are written here.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptation;
pub mod cmapss;
mod error;
pub mod fmt;
pub mod labeling;
pub mod metrics;
pub mod models;
pub mod scheduler;
pub mod synthetic;

pub use error::{Error, Result};

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    use std::fmt::Write;
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        write!(out, "{b:02x}").unwrap();
    }
    out
}
