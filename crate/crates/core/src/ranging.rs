//! Fine-timing-measurement ranging: per-beacon round-trip-time distance
//! estimates with heavy-tailed noise, log-distance received power, and the
//! range/power signature of blocked (NLoS) paths.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Vec2, Vec3};
use crate::scene::{path_blocked, Occluder, Scene, Target, TxNode};

/// Standard deviation of the signed ranging error, in metres.
pub const RANGING_ERROR_STD: f64 = 0.54;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangingModel {
    /// Scale σ of the t location-scale error (m).
    pub t_scale: f64,
    /// Degrees of freedom ν.
    pub t_dof: f64,
    /// Extra path length of a blocked link (m).
    pub nlos_extra_path: f64,
    /// Received-power loss of a blocked link (dB).
    pub nlos_rss_penalty: f64,
    pub pathloss_exponent: f64,
    /// Received power at 1 m (dBm).
    pub ref_rss_1m: f64,
    /// When false, beacons report the true distance plus any NLoS excess only.
    #[serde(default = "yes")]
    pub noise_enabled: bool,
}

fn yes() -> bool {
    true
}

impl Default for RangingModel {
    fn default() -> Self {
        RangingModel::with_std(RANGING_ERROR_STD, 3.0)
    }
}

impl RangingModel {
    /// Model whose signed error has standard deviation `std` with `dof` degrees
    /// of freedom: σ = std·√((ν − 2)/ν).
    pub fn with_std(std: f64, dof: f64) -> Self {
        RangingModel {
            t_scale: std * libm::sqrt((dof - 2.0) / dof),
            t_dof: dof,
            nlos_extra_path: 3.0,
            nlos_rss_penalty: 15.0,
            pathloss_exponent: 2.0,
            ref_rss_1m: -40.0,
            noise_enabled: true,
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.noise_enabled = false;
        self
    }

    /// Standard deviation of the signed error implied by σ and ν.
    pub fn signed_std(&self) -> f64 {
        self.t_scale * libm::sqrt(self.t_dof / (self.t_dof - 2.0))
    }

    /// Mean of the folded error, E|σ·T|; zero when noise is disabled.
    pub fn folded_mean(&self) -> f64 {
        if !self.noise_enabled {
            return 0.0;
        }
        let v = self.t_dof;
        let log_ratio = libm::lgamma(0.5 * (v + 1.0)) - libm::lgamma(0.5 * v);
        self.t_scale * 2.0 * libm::sqrt(v) * libm::exp(log_ratio)
            / (libm::sqrt(core::f64::consts::PI) * (v - 1.0))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason| {
            Err(Error::InvalidParameter {
                entity: "ranging_model".into(),
                reason,
            })
        };
        if !(self.t_scale > 0.0) {
            return bad("t_scale must be positive");
        }
        if !(self.t_dof > 2.0) {
            return bad("t_dof must exceed 2 for a finite variance");
        }
        if !(self.nlos_extra_path >= 0.0 && self.nlos_rss_penalty >= 0.0) {
            return bad("NLoS penalties must be non-negative");
        }
        if !(self.pathloss_exponent > 0.0) {
            return bad("pathloss_exponent must be positive");
        }
        Ok(())
    }

    /// Pre-built noise source for repeated draws.
    pub fn noise(&self) -> Result<RangingNoise> {
        self.validate()?;
        let t = StudentT::new(self.t_dof).map_err(|_| Error::InvalidParameter {
            entity: "ranging_model".into(),
            reason: "t_dof must be positive",
        })?;
        Ok(RangingNoise {
            scale: if self.noise_enabled {
                self.t_scale
            } else {
                0.0
            },
            t,
        })
    }
}

/// Scaled Student-t error generator.
#[derive(Debug, Clone, Copy)]
pub struct RangingNoise {
    scale: f64,
    t: StudentT<f64>,
}

impl RangingNoise {
    /// Signed error σ·T before folding.
    pub fn signed<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        self.scale * self.t.sample(rng)
    }

    /// Folded (non-negative) error |σ·T|.
    pub fn folded<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.signed(rng).abs()
    }
}

pub fn sample_signed_ranging_error<R: Rng + ?Sized>(
    model: &RangingModel,
    rng: &mut R,
) -> Result<f64> {
    Ok(model.noise()?.signed(rng))
}

/// One folded ranging-error draw.
pub fn sample_ranging_error<R: Rng + ?Sized>(model: &RangingModel, rng: &mut R) -> Result<f64> {
    Ok(model.noise()?.folded(rng))
}

/// Log-distance received power in dBm.
pub fn rss(distance: f64, los: bool, model: &RangingModel) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    let penalty = if los { 0.0 } else { model.nlos_rss_penalty };
    Ok(model.ref_rss_1m - 10.0 * model.pathloss_exponent * libm::log10(distance) - penalty)
}

/// One simulated beacon exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangingSample {
    pub tx_id: String,
    pub target_id: String,
    pub timestamp: f64,
    pub true_distance: f64,
    pub measured_distance: f64,
    pub rss: f64,
    pub los: bool,
}

/// Whether the link from a transmitter to a device standing at `ground` is
/// unobstructed (see [`path_blocked`]).
pub fn line_of_sight(
    tx: &TxNode,
    ground: Vec2,
    target_height: f64,
    occluders: &[Occluder],
) -> bool {
    !path_blocked(tx.position, ground, target_height, occluders)
}

// Rss floor distance so that a device under the antenna still gets a finite power.
const MIN_RSS_DISTANCE: f64 = 0.1;

fn link(tx: &TxNode, target: &Target, t: f64, scene: &Scene) -> Result<(String, f64, bool)> {
    let device = target.device_id.clone().ok_or(Error::RfInvisible)?;
    let ground = target.position_at(t)?;
    let true_distance = tx.position.distance(Vec3::new(ground.x, ground.y, 0.0));
    let los = line_of_sight(tx, ground, target.true_height, &scene.occluders);
    Ok((device, true_distance, los))
}

fn sample(
    tx: &TxNode,
    device: &str,
    t: f64,
    true_distance: f64,
    los: bool,
    model: &RangingModel,
    error: f64,
) -> Result<RangingSample> {
    let excess = if los { 0.0 } else { model.nlos_extra_path };
    Ok(RangingSample {
        tx_id: tx.id.clone(),
        target_id: device.into(),
        timestamp: t,
        true_distance,
        measured_distance: true_distance + error + excess,
        rss: rss(true_distance.max(MIN_RSS_DISTANCE), los, model)?,
        los,
    })
}

/// Simulates one beacon from `tx` to `target` at time `t`.
pub fn measure_range<R: Rng + ?Sized>(
    tx: &TxNode,
    target: &Target,
    t: f64,
    scene: &Scene,
    model: &RangingModel,
    rng: &mut R,
) -> Result<RangingSample> {
    let (device, true_distance, los) = link(tx, target, t, scene)?;
    let error = model.noise()?.folded(rng);
    sample(tx, &device, t, true_distance, los, model, error)
}

/// `beacons` exchanges between one transmitter and one target at time `t`.
pub fn measure_burst<R: Rng + ?Sized>(
    tx: &TxNode,
    target: &Target,
    t: f64,
    scene: &Scene,
    model: &RangingModel,
    beacons: usize,
    rng: &mut R,
) -> Result<Vec<RangingSample>> {
    let (device, true_distance, los) = link(tx, target, t, scene)?;
    let noise = model.noise()?;
    (0..beacons)
        .map(|_| sample(tx, &device, t, true_distance, los, model, noise.folded(rng)))
        .collect()
}

/// Mean row of a [`measure_burst`] call with the same generator state, without
/// materialising the individual beacons.
pub fn measure_burst_mean<R: Rng + ?Sized>(
    tx: &TxNode,
    target: &Target,
    t: f64,
    scene: &Scene,
    model: &RangingModel,
    beacons: usize,
    rng: &mut R,
) -> Result<RangingSample> {
    if beacons == 0 {
        return Err(Error::InvalidParameter {
            entity: "beacons".into(),
            reason: "must be at least 1",
        });
    }
    let (device, true_distance, los) = link(tx, target, t, scene)?;
    let noise = model.noise()?;
    let mut row = sample(tx, &device, t, true_distance, los, model, 0.0)?;
    let excess = if los { 0.0 } else { model.nlos_extra_path };
    let sum: f64 = (0..beacons)
        .map(|_| true_distance + noise.folded(rng) + excess)
        .sum();
    row.measured_distance = sum / beacons as f64;
    Ok(row)
}
