//! Position fixes from ranging bursts, and the statistical localization-error
//! model used for fast emulation.

mod error_model;
mod trilateration;

pub use error_model::{
    calibrate_gamma, sample_localization_error, ErrorConfig, LocalizationErrorSampler,
    BUILTIN_CONFIGS,
};
pub use trilateration::{trilaterate, Range, Solution};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polygon, Vec2};
use crate::ranging::RangingSample;
use crate::scene::TxNode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationFix {
    pub target_id: String,
    pub timestamp: f64,
    pub position: Vec2,
    pub residual_rms: f64,
    pub num_tx_used: usize,
    pub confidence: f64,
}

/// Maps a fit residual to a confidence in `[0, 1]`: `exp(-residual / sigma_ref)`.
pub fn confidence_from_residual(residual_rms: f64, sigma_ref: f64) -> f64 {
    if residual_rms <= 0.0 {
        return 1.0;
    }
    if !(sigma_ref > 0.0) {
        return 0.0;
    }
    libm::exp(-residual_rms / sigma_ref).clamp(0.0, 1.0)
}

/// Averages the beacons of each transmitter, removes the known mean ranging
/// offset and trilaterates on the results.
///
/// All samples must belong to one target; the fix is stamped with the first
/// sample's time.
pub fn fix_from_burst(
    samples: &[RangingSample],
    transmitters: &[TxNode],
    prior: Option<&Polygon>,
    range_offset: f64,
    sigma_ref: f64,
) -> Result<LocalizationFix> {
    let mut per_tx: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for s in samples {
        let e = per_tx.entry(s.tx_id.as_str()).or_insert((0.0, 0));
        e.0 += s.measured_distance;
        e.1 += 1;
    }
    if per_tx.len() < 2 {
        return Err(Error::InsufficientRanges {
            need: 2,
            have: per_tx.len(),
        });
    }
    let ranges = per_tx
        .iter()
        .map(|(id, (sum, n))| {
            let tx = transmitters.iter().find(|t| t.id == *id).ok_or_else(|| {
                Error::InvalidParameter {
                    entity: alloc::format!("transmitters[{id}]"),
                    reason: "ranging sample references an unknown transmitter",
                }
            })?;
            Ok(Range {
                anchor: tx.position,
                distance: (sum / *n as f64 - range_offset).max(0.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let solution = trilaterate(&ranges, prior)?;
    Ok(LocalizationFix {
        target_id: samples[0].target_id.clone(),
        timestamp: samples[0].timestamp,
        position: solution.position,
        residual_rms: solution.residual_rms,
        num_tx_used: ranges.len(),
        confidence: confidence_from_residual(solution.residual_rms, sigma_ref),
    })
}
