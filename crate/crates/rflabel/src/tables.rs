//! CSV tables of ranging samples and fixes.

use std::path::Path;

use rflabel_core::localization::LocalizationFix;
use rflabel_core::ranging::RangingSample;
use rflabel_core::Vec2;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangingRow {
    pub timestamp: f64,
    pub tx_id: String,
    pub target_id: String,
    pub true_m: f64,
    pub measured_m: f64,
    pub rss_dbm: f64,
    pub los: bool,
}

impl From<&RangingSample> for RangingRow {
    fn from(s: &RangingSample) -> Self {
        RangingRow {
            timestamp: s.timestamp,
            tx_id: s.tx_id.clone(),
            target_id: s.target_id.clone(),
            true_m: s.true_distance,
            measured_m: s.measured_distance,
            rss_dbm: s.rss,
            los: s.los,
        }
    }
}

impl From<RangingRow> for RangingSample {
    fn from(r: RangingRow) -> Self {
        RangingSample {
            tx_id: r.tx_id,
            target_id: r.target_id,
            timestamp: r.timestamp,
            true_distance: r.true_m,
            measured_distance: r.measured_m,
            rss: r.rss_dbm,
            los: r.los,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixRow {
    pub timestamp: f64,
    pub target_id: String,
    pub x_m: f64,
    pub y_m: f64,
    pub residual_m: f64,
    pub confidence: f64,
    pub num_tx: usize,
}

impl From<&LocalizationFix> for FixRow {
    fn from(f: &LocalizationFix) -> Self {
        FixRow {
            timestamp: f.timestamp,
            target_id: f.target_id.clone(),
            x_m: f.position.x,
            y_m: f.position.y,
            residual_m: f.residual_rms,
            confidence: f.confidence,
            num_tx: f.num_tx_used,
        }
    }
}

impl From<FixRow> for LocalizationFix {
    fn from(r: FixRow) -> Self {
        LocalizationFix {
            target_id: r.target_id,
            timestamp: r.timestamp,
            position: Vec2::new(r.x_m, r.y_m),
            residual_rms: r.residual_m,
            num_tx_used: r.num_tx,
            confidence: r.confidence,
        }
    }
}

pub fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    write_atomic(path, &to_csv(rows))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::config(format!("{}: {other:?}", path.display())),
    })?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}
