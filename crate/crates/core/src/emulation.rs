//! Noisy-label emulation on existing annotations and mismatch injection.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Vec2, Vec3};
use crate::labeling::{Frame, Label, Provenance};
use crate::localization::{ErrorConfig, LocalizationErrorSampler};
use crate::projection::{back_project, depth_of, synthesize_bbox, BodyBoxParams};
use crate::quality::iou;
use crate::scene::{path_blocked, CameraModel, Scene};
use crate::seed::SeedKey;
use crate::stats::Summary;

/// Which part of a localization error reaches the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmulationMode {
    /// Sideways error only: the target keeps its optical depth.
    #[serde(alias = "angular")]
    AngularOnly,
    /// Error along the camera-to-target ground ray only.
    #[serde(alias = "depth")]
    DepthOnly,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulationSpec {
    pub error_config: ErrorConfig,
    #[serde(default = "one")]
    pub coverage_p: f64,
    #[serde(default = "both")]
    pub mode: EmulationMode,
    #[serde(default = "yes")]
    pub height_variation_enabled: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub body: BodyBoxParams,
}

fn one() -> f64 {
    1.0
}

fn both() -> EmulationMode {
    EmulationMode::Both
}

fn yes() -> bool {
    true
}

impl EmulationSpec {
    pub fn new(error_config: ErrorConfig) -> Self {
        EmulationSpec {
            error_config,
            coverage_p: 1.0,
            mode: EmulationMode::Both,
            height_variation_enabled: true,
            seed: 0,
            body: BodyBoxParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("coverage_p", self.coverage_p)?;
        self.body.validate()?;
        self.error_config.validate()
    }
}

fn check_probability(entity: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            entity: entity.into(),
            reason: "must lie in [0, 1]",
        })
    }
}

/// Keeps each item independently with probability `p`.
pub fn apply_coverage<T, R: Rng + ?Sized>(items: Vec<T>, p: f64, rng: &mut R) -> Result<Vec<T>> {
    check_probability("coverage_p", p)?;
    Ok(items
        .into_iter()
        .filter(|_| rng.random::<f64>() < p)
        .collect())
}

/// Body height assumed when sizing a label: the mean height, perturbed uniformly
/// by ± `height_variation` when enabled.
pub fn sample_assumed_height<R: Rng + ?Sized>(
    params: &BodyBoxParams,
    vary: bool,
    rng: &mut R,
) -> f64 {
    if !vary || params.height_variation == 0.0 {
        return params.mean_height;
    }
    let v = params.height_variation;
    params.mean_height * rng.random_range(1.0 - v..=1.0 + v)
}

/// The part of `error` that `mode` lets through, for a target at `ground`.
///
/// Depth error runs along the horizontal ray from the camera to the target.
/// Angular error takes the magnitude of the component perpendicular to that ray
/// and applies it along the camera's horizontal x axis, so the target's optical
/// depth is untouched.
pub fn project_error(camera: &CameraModel, ground: Vec2, error: Vec2, mode: EmulationMode) -> Vec2 {
    let Some(ray) = (ground - camera.position.xy()).normalized() else {
        return if mode == EmulationMode::Both {
            error
        } else {
            Vec2::ZERO
        };
    };
    match mode {
        EmulationMode::Both => error,
        EmulationMode::DepthOnly => ray * error.dot(ray),
        EmulationMode::AngularOnly => {
            let normal = ray.perp();
            let x_axis = camera
                .orientation
                .world_from_camera()
                .mul_vec(Vec3::new(1.0, 0.0, 0.0))
                .xy();
            let lateral = match x_axis.normalized() {
                Some(l) if l.dot(normal) < 0.0 => -l,
                Some(l) => l,
                None => normal,
            };
            lateral * error.dot(normal)
        }
    }
}

/// What happened to one input label.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelOutcome {
    Emulated {
        label: Label,
        iou: f64,
    },
    /// Clipped inputs carry no recoverable depth and are skipped.
    SkippedClipped,
    /// The displaced target left the image.
    OutsideImage,
    DroppedByCoverage {
        iou: f64,
    },
}

/// Emulates one label with its own random stream, keyed on the emulation seed and the
/// label's (camera, frame, index) position.
pub fn emulate_label(
    label: &Label,
    index: usize,
    camera: &CameraModel,
    spec: &EmulationSpec,
    sampler: &LocalizationErrorSampler,
) -> Result<LabelOutcome> {
    if label.bbox.clipped {
        return Ok(LabelOutcome::SkippedClipped);
    }
    let mut rng = SeedKey::new(spec.seed)
        .str("emulate")
        .str(&label.camera_id)
        .u64(label.frame_id)
        .u64(index as u64)
        .rng();
    let height = sample_assumed_height(&spec.body, spec.height_variation_enabled, &mut rng);
    let (ground, _) = back_project(camera, &label.bbox, height).map_err(|e| match e {
        Error::BehindCamera { .. } | Error::OutsideImage => Error::InvalidParameter {
            entity: alloc::format!("{}/{}", label.camera_id, label.frame_id),
            reason:
                "annotation box does not correspond to a standing target in front of the camera",
        },
        other => other,
    })?;
    let error = project_error(camera, ground, sampler.sample(&mut rng), spec.mode);
    let moved = ground + error;
    let bbox = match synthesize_bbox(camera, moved, height, spec.body.aspect_ratio) {
        Ok(b) => b,
        Err(Error::OutsideImage | Error::BehindCamera { .. }) => {
            return Ok(LabelOutcome::OutsideImage)
        }
        Err(e) => return Err(e),
    };
    let overlap = iou(&label.bbox, &bbox);
    if rng.random::<f64>() >= spec.coverage_p {
        return Ok(LabelOutcome::DroppedByCoverage { iou: overlap });
    }
    let provenance = match label.provenance {
        Provenance::Rf => Provenance::Rf,
        _ => Provenance::EmulatedHuman,
    };
    Ok(LabelOutcome::Emulated {
        label: Label {
            bbox,
            depth: Some(depth_of(camera, moved.extend(0.0))),
            provenance,
            ..label.clone()
        },
        iou: overlap,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmulationReport {
    pub input_labels: usize,
    pub skipped_clipped: usize,
    pub lost_outside_image: usize,
    pub dropped_by_coverage: usize,
    pub output_labels: usize,
    pub clipped_outputs: usize,
    /// IoU between each emulated box and its input, before coverage sampling.
    pub iou: Summary,
}

impl EmulationReport {
    /// Folds per-label outcomes, in input order, into frames and a report.
    pub fn collect(
        frames: &[Frame],
        outcomes: Vec<Vec<LabelOutcome>>,
    ) -> (Vec<Frame>, EmulationReport) {
        let mut report = EmulationReport::default();
        let mut ious = Vec::new();
        let out = frames
            .iter()
            .zip(outcomes)
            .map(|(frame, results)| {
                report.input_labels += results.len();
                let mut labels = Vec::new();
                for r in results {
                    match r {
                        LabelOutcome::Emulated { label, iou } => {
                            ious.push(iou);
                            report.clipped_outputs += usize::from(label.bbox.clipped);
                            labels.push(label);
                        }
                        LabelOutcome::SkippedClipped => report.skipped_clipped += 1,
                        LabelOutcome::OutsideImage => report.lost_outside_image += 1,
                        LabelOutcome::DroppedByCoverage { iou } => {
                            ious.push(iou);
                            report.dropped_by_coverage += 1;
                        }
                    }
                }
                report.output_labels += labels.len();
                Frame {
                    labels,
                    ..frame.clone()
                }
            })
            .collect();
        report.iou = Summary::of(&ious);
        (out, report)
    }
}

fn sampler_for(spec: &EmulationSpec) -> Result<LocalizationErrorSampler> {
    spec.validate()?;
    LocalizationErrorSampler::new(&spec.error_config)
}

/// Back-projects every label with an assumed height, displaces it by a sampled
/// localization error filtered through `spec.mode`, re-projects it and finally
/// applies RF coverage.
pub fn emulate_noisy_labels(
    frames: &[Frame],
    camera: &CameraModel,
    spec: &EmulationSpec,
) -> Result<(Vec<Frame>, EmulationReport)> {
    let sampler = sampler_for(spec)?;
    let outcomes = frames
        .iter()
        .map(|frame| emulate_frame(frame, camera, spec, &sampler))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmulationReport::collect(frames, outcomes))
}

/// All label outcomes of one frame.
pub fn emulate_frame(
    frame: &Frame,
    camera: &CameraModel,
    spec: &EmulationSpec,
    sampler: &LocalizationErrorSampler,
) -> Result<Vec<LabelOutcome>> {
    if frame.camera_id != camera.id || frame.labels.iter().any(|l| l.camera_id != camera.id) {
        return Err(Error::InvalidParameter {
            entity: alloc::format!("{}/{}", frame.camera_id, frame.frame_id),
            reason: "annotation belongs to a different camera",
        });
    }
    frame
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if !(l.bbox.w > 0.0 && l.bbox.h > 0.0) || !l.bbox.x.is_finite() || !l.bbox.y.is_finite()
            {
                return Err(Error::InvalidParameter {
                    entity: alloc::format!("{}/{}", frame.camera_id, frame.frame_id),
                    reason: "bounding box must be finite with positive size",
                });
            }
            emulate_label(l, i, camera, spec, sampler)
        })
        .collect()
}

/// Builds the sampler for a spec; exposed so callers that parallelise
/// [`emulate_frame`] construct it once.
pub fn emulation_sampler(spec: &EmulationSpec) -> Result<LocalizationErrorSampler> {
    sampler_for(spec)
}

/// Adds RF labels for device-carrying targets standing in an occluder's shadow,
/// i.e. whose ground position is cut off from the camera (see
/// [`path_blocked`]).
///
/// Every (frame, shadowed target) pair without a label for that identity
/// receives one with probability `rate`. Injected labels are boxed at the
/// target's true position with the mean body height and carry the internal
/// `hidden` flag.
/// Returns the new frames and the number of labels added.
pub fn inject_extraneous<R: Rng + ?Sized>(
    frames: Vec<Frame>,
    scene: &Scene,
    params: &BodyBoxParams,
    rate: f64,
    rng: &mut R,
) -> Result<(Vec<Frame>, usize)> {
    check_probability("rate", rate)?;
    let mut added = 0;
    let out = frames
        .into_iter()
        .map(|mut frame| {
            let Some(camera) = scene.camera(&frame.camera_id) else {
                return frame;
            };
            if rate == 0.0 || scene.occluders.is_empty() {
                return frame;
            }
            for target in &scene.targets {
                let Some(id) = target.device_id.as_deref() else {
                    continue;
                };
                let Ok(ground) = target.position_at(frame.timestamp) else {
                    continue;
                };
                if frame
                    .labels
                    .iter()
                    .any(|l| l.identity.as_deref() == Some(id))
                {
                    continue;
                }
                if !path_blocked(
                    camera.position,
                    ground,
                    target.true_height,
                    &scene.occluders,
                ) {
                    continue;
                }
                let Ok(bbox) =
                    synthesize_bbox(camera, ground, params.mean_height, params.aspect_ratio)
                else {
                    continue;
                };
                if rng.random::<f64>() >= rate {
                    continue;
                }
                frame.labels.push(Label {
                    frame_id: frame.frame_id,
                    camera_id: frame.camera_id.clone(),
                    bbox,
                    depth: Some(depth_of(camera, ground.extend(0.0))),
                    identity: Some(id.into()),
                    confidence: 1.0,
                    provenance: Provenance::Rf,
                    occluded: false,
                    hidden: true,
                });
                added += 1;
            }
            frame
        })
        .collect();
    Ok((out, added))
}
