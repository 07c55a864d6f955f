use alloc::string::String;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::stats::gamma_quantile;

/// Hardware configurations with their measured/projected error quantiles:
/// (name, transmitters, beacons per fix, median cm, 95th percentile cm).
pub const BUILTIN_CONFIGS: [(&str, usize, usize, f64, f64); 4] = [
    ("S0", 2, 256, 132.0, 462.8),
    ("S1", 4, 2048, 31.8, 93.8),
    ("S2", 6, 2048, 24.6, 63.8),
    ("S3", 6, 5012, 16.2, 42.0),
];

/// Named localization-error configuration. Distances are in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorConfig {
    pub name: String,
    pub num_tx: usize,
    pub samples_per_fix: usize,
    #[serde(default)]
    pub gamma_shape: Option<f64>,
    #[serde(default)]
    pub gamma_scale: Option<f64>,
    pub target_median: f64,
    pub target_p95: f64,
}

impl ErrorConfig {
    /// One of `S0`..`S3`, not yet calibrated.
    pub fn builtin(name: &str) -> Option<ErrorConfig> {
        BUILTIN_CONFIGS
            .iter()
            .find(|c| c.0.eq_ignore_ascii_case(name))
            .map(
                |&(name, num_tx, samples_per_fix, median_cm, p95_cm)| ErrorConfig {
                    name: name.into(),
                    num_tx,
                    samples_per_fix,
                    gamma_shape: None,
                    gamma_scale: None,
                    target_median: median_cm / 100.0,
                    target_p95: p95_cm / 100.0,
                },
            )
    }

    pub fn custom(name: impl Into<String>, median: f64, p95: f64) -> ErrorConfig {
        ErrorConfig {
            name: name.into(),
            num_tx: 2,
            samples_per_fix: 256,
            gamma_shape: None,
            gamma_scale: None,
            target_median: median,
            target_p95: p95,
        }
    }

    /// Fits the gamma parameters to the target quantiles.
    pub fn calibrated(mut self) -> Result<ErrorConfig> {
        let (k, theta) = calibrate_gamma(self.target_median, self.target_p95)?;
        self.gamma_shape = Some(k);
        self.gamma_scale = Some(theta);
        Ok(self)
    }

    pub fn is_calibrated(&self) -> bool {
        self.gamma_shape.is_some() && self.gamma_scale.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason| {
            Err(Error::InvalidParameter {
                entity: self.name.clone(),
                reason,
            })
        };
        if self.num_tx < 2 {
            return bad("num_tx must be at least 2");
        }
        if self.samples_per_fix < 1 {
            return bad("samples_per_fix must be at least 1");
        }
        match (self.gamma_shape, self.gamma_scale) {
            (Some(k), Some(t)) if !(k > 0.0 && t > 0.0) => bad("gamma parameters must be positive"),
            _ => Ok(()),
        }
    }
}

const SHAPE_MIN: f64 = 0.05;
const SHAPE_MAX: f64 = 1e4;

fn quantile_ratio(shape: f64) -> f64 {
    gamma_quantile(shape, 0.95) / gamma_quantile(shape, 0.5)
}

/// Gamma shape `k` and scale `θ` whose median and 95th percentile equal the targets.
///
/// The ratio q95/q50 of a gamma distribution falls monotonically with `k`, so `k`
/// comes from a bisection on `ln k`; `θ` then follows from the median.
pub fn calibrate_gamma(target_median: f64, target_p95: f64) -> Result<(f64, f64)> {
    let infeasible = Error::InfeasibleQuantiles {
        median: target_median,
        p95: target_p95,
    };
    if !(target_median > 0.0 && target_p95 > target_median && target_p95.is_finite()) {
        return Err(infeasible);
    }
    let ratio = target_p95 / target_median;
    if ratio > quantile_ratio(SHAPE_MIN) || ratio < quantile_ratio(SHAPE_MAX) {
        return Err(infeasible);
    }
    let (mut lo, mut hi) = (libm::log(SHAPE_MIN), libm::log(SHAPE_MAX));
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if quantile_ratio(libm::exp(mid)) > ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = libm::exp(0.5 * (lo + hi));
    Ok((k, target_median / gamma_quantile(k, 0.5)))
}

/// Draws isotropic ground-plane displacements whose magnitude is gamma distributed.
#[derive(Debug, Clone, Copy)]
pub struct LocalizationErrorSampler {
    magnitude: Option<Gamma<f64>>,
}

impl LocalizationErrorSampler {
    pub fn new(config: &ErrorConfig) -> Result<Self> {
        config.validate()?;
        let (k, theta) = match (config.gamma_shape, config.gamma_scale) {
            (Some(k), Some(t)) => (k, t),
            _ => return Err(Error::Uncalibrated(config.name.clone())),
        };
        let magnitude = Gamma::new(k, theta).map_err(|_| Error::InvalidParameter {
            entity: config.name.clone(),
            reason: "gamma parameters must be positive",
        })?;
        Ok(LocalizationErrorSampler {
            magnitude: Some(magnitude),
        })
    }

    /// A sampler that never displaces.
    pub fn zero() -> Self {
        LocalizationErrorSampler { magnitude: None }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        let Some(g) = self.magnitude else {
            return Vec2::ZERO;
        };
        let r = g.sample(rng);
        let angle = rng.random::<f64>() * core::f64::consts::TAU;
        let (s, c) = libm::sincos(angle);
        Vec2::new(r * c, r * s)
    }
}

/// One displacement drawn from a calibrated configuration.
pub fn sample_localization_error<R: Rng + ?Sized>(
    config: &ErrorConfig,
    rng: &mut R,
) -> Result<Vec2> {
    Ok(LocalizationErrorSampler::new(config)?.sample(rng))
}
