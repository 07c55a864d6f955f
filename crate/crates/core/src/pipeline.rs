//! End-to-end RF labeling of a scene: ranging bursts, fixes, ground truth, RF
//! labels, occlusion events, filtering and the quality report.
//!
//! Work is split per target ([`simulate_target`]) and then combined
//! ([`assemble`]); every random stream is keyed on (seed, device, transmitter,
//! burst), so callers may run the per-target step in any order or in parallel.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::labeling::{
    apply_optout, frame_count, generate_ground_truth, generate_rf_labels, Frame,
    OCCLUSION_THRESHOLD,
};
use crate::localization::{fix_from_burst, ErrorConfig, LocalizationFix};
use crate::projection::BodyBoxParams;
use crate::quality::{
    detect_occlusion, filter_labels, quality_report, FilterCriteria, FilterReport, LinkBudget,
    OcclusionEvent, OcclusionThresholds, QualityReport,
};
use crate::ranging::{measure_burst, measure_burst_mean, RangingModel, RangingSample};
use crate::scene::{OptOutPolicy, Scene, Target, TxNode};
use crate::seed::SeedKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub error: ErrorConfig,
    #[serde(default)]
    pub ranging: RangingModel,
    #[serde(default)]
    pub body: BodyBoxParams,
    #[serde(default = "default_occlusion_threshold")]
    pub occlusion_threshold: f64,
    #[serde(default)]
    pub occlusion: OcclusionThresholds,
    #[serde(default)]
    pub filter: FilterCriteria,
    /// Transmitters this close to a camera (m) share its viewpoint; their links
    /// drive the occlusion filter for that camera.
    #[serde(default = "default_colocation_radius")]
    pub colocation_radius: f64,
    #[serde(default = "default_match_iou")]
    pub match_iou: f64,
    /// Keep every beacon rather than one mean row per (transmitter, burst).
    #[serde(default)]
    pub keep_beacons: bool,
}

fn default_occlusion_threshold() -> f64 {
    OCCLUSION_THRESHOLD
}

fn default_colocation_radius() -> f64 {
    0.5
}

fn default_match_iou() -> f64 {
    0.5
}

impl PipelineConfig {
    pub fn new(error: ErrorConfig) -> Self {
        PipelineConfig {
            error,
            ranging: RangingModel::default(),
            body: BodyBoxParams::default(),
            occlusion_threshold: OCCLUSION_THRESHOLD,
            occlusion: OcclusionThresholds::default(),
            filter: FilterCriteria::default(),
            colocation_radius: default_colocation_radius(),
            match_iou: default_match_iou(),
            keep_beacons: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.error.validate()?;
        self.ranging.validate()?;
        self.body.validate()
    }
}

/// The first `error.num_tx` transmitters of the scene.
pub fn active_transmitters<'a>(scene: &'a Scene, config: &PipelineConfig) -> Result<&'a [TxNode]> {
    let n = config.error.num_tx;
    if scene.transmitters.len() < n {
        return Err(Error::InvalidParameter {
            entity: config.error.name.clone(),
            reason: "configuration needs more transmitters than the scene provides",
        });
    }
    Ok(&scene.transmitters[..n])
}

/// Burst schedule: one burst per tick of the first camera while the target is
/// present, as (tick, time).
pub fn burst_times(scene: &Scene, target: &Target) -> Vec<(u64, f64)> {
    let Some(camera) = scene.cameras.first() else {
        return Vec::new();
    };
    (0..frame_count(camera, scene.duration))
        .map(|k| (k, k as f64 / camera.frame_rate))
        .filter(|&(_, t)| target.is_present(t))
        .collect()
}

/// Ranging rows and fixes for one target.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TargetTrack {
    pub device_id: String,
    /// Per-burst mean rows, or every beacon with `keep_beacons`.
    pub samples: Vec<RangingSample>,
    pub fixes: Vec<LocalizationFix>,
    pub failed_bursts: usize,
}

/// Runs every burst of one device-carrying target. Targets without a device
/// yield an empty track.
pub fn simulate_target(
    scene: &Scene,
    target: &Target,
    config: &PipelineConfig,
    seed: u64,
) -> Result<TargetTrack> {
    let Some(device) = target.device_id.clone() else {
        return Ok(TargetTrack::default());
    };
    let txs = active_transmitters(scene, config)?;
    let prior = scene.bounds.to_polygon();
    let mut track = TargetTrack {
        device_id: device.clone(),
        ..TargetTrack::default()
    };
    for (k, t) in burst_times(scene, target) {
        let mut burst = Vec::new();
        for tx in txs {
            let mut rng = SeedKey::new(seed)
                .str("ranging")
                .str(&device)
                .str(&tx.id)
                .u64(k)
                .rng();
            let beacons = config.error.samples_per_fix;
            if config.keep_beacons {
                burst.extend(measure_burst(
                    tx,
                    target,
                    t,
                    scene,
                    &config.ranging,
                    beacons,
                    &mut rng,
                )?);
            } else {
                burst.push(measure_burst_mean(
                    tx,
                    target,
                    t,
                    scene,
                    &config.ranging,
                    beacons,
                    &mut rng,
                )?);
            }
        }
        match fix_from_burst(
            &burst,
            txs,
            Some(&prior),
            config.ranging.folded_mean(),
            config.ranging.t_scale,
        ) {
            Ok(fix) => track.fixes.push(fix),
            Err(
                Error::AmbiguousSolution
                | Error::DegenerateGeometry
                | Error::SolverDiverged
                | Error::InsufficientRanges { .. },
            ) => track.failed_bursts += 1,
            Err(e) => return Err(e),
        }
        track.samples.extend(burst);
    }
    Ok(track)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub samples: Vec<RangingSample>,
    pub fixes: Vec<LocalizationFix>,
    pub ground_truth: Vec<Frame>,
    pub rf_labels: Vec<Frame>,
    pub filtered_labels: Vec<Frame>,
    pub events: Vec<OcclusionEvent>,
    pub filter_report: FilterReport,
    pub report: QualityReport,
    pub failed_bursts: usize,
    /// Links whose series was too short for the occlusion detector.
    pub skipped_links: usize,
}

/// Combines per-target tracks (in scene target order) into labels, events, the
/// filtered label set and the quality report, then applies the privacy policies
/// to every artifact.
pub fn assemble(
    scene: &Scene,
    config: &PipelineConfig,
    tracks: Vec<TargetTrack>,
) -> Result<SimulationOutput> {
    let mut samples = Vec::new();
    let mut fixes = Vec::new();
    let mut failed_bursts = 0;
    for t in tracks {
        samples.extend(t.samples);
        fixes.extend(t.fixes);
        failed_bursts += t.failed_bursts;
    }

    let mut ground_truth = Vec::new();
    let mut rf_labels = Vec::new();
    let mut filtered_labels = Vec::new();
    let mut events = Vec::new();
    let mut filter_report = FilterReport::default();
    let mut skipped_links = 0;
    let thresholds = OcclusionThresholds {
        link_budget: config.occlusion.link_budget.or(Some(LinkBudget {
            ref_rss_1m: config.ranging.ref_rss_1m,
            pathloss_exponent: config.ranging.pathloss_exponent,
        })),
        ..config.occlusion
    };
    for camera in &scene.cameras {
        ground_truth.extend(generate_ground_truth(
            scene,
            camera,
            &config.body,
            config.occlusion_threshold,
        ));
        let rf = generate_rf_labels(
            scene,
            camera,
            &fixes,
            &config.body,
            config.occlusion_threshold,
        );

        let colocated: Vec<&str> = scene
            .colocated_transmitters(camera, config.colocation_radius)
            .iter()
            .map(|t| t.id.as_str())
            .collect();
        let mut links: BTreeMap<(&str, &str), Vec<RangingSample>> = BTreeMap::new();
        for s in samples
            .iter()
            .filter(|s| colocated.contains(&s.tx_id.as_str()))
        {
            links
                .entry((s.tx_id.as_str(), s.target_id.as_str()))
                .or_default()
                .push(s.clone());
        }
        let mut camera_events = Vec::new();
        for series in links.values() {
            match detect_occlusion(series, &thresholds) {
                Ok(found) => camera_events.extend(found),
                Err(Error::SeriesTooShort { .. }) => skipped_links += 1,
                Err(e) => return Err(e),
            }
        }
        let criteria = FilterCriteria {
            events: camera_events.clone(),
            ..config.filter.clone()
        };
        let (kept, r) = filter_labels(rf.clone(), &fixes, &criteria);
        filter_report.input_labels += r.input_labels;
        filter_report.removed_low_confidence += r.removed_low_confidence;
        filter_report.removed_occlusion += r.removed_occlusion;
        filter_report.removed_speed += r.removed_speed;
        filter_report.kept += r.kept;
        rf_labels.extend(rf);
        filtered_labels.extend(kept);
        events.extend(camera_events);
    }

    let policies = &scene.opt_out;
    if !policies.is_empty() {
        let cams = &scene.cameras;
        ground_truth = apply_optout(ground_truth, policies, cams, &config.body);
        rf_labels = apply_optout(rf_labels, policies, cams, &config.body);
        filtered_labels = apply_optout(filtered_labels, policies, cams, &config.body);
        let (f, s) = optout_measurements(fixes, samples, policies);
        fixes = f;
        samples = s;
        events.retain(|e| !event_suppressed(e, policies));
    }

    let mut report = quality_report(&rf_labels, &ground_truth, config.match_iou)?;
    report.dropped_label_count = filter_report.removed();
    Ok(SimulationOutput {
        samples,
        fixes,
        ground_truth,
        rf_labels,
        filtered_labels,
        events,
        filter_report,
        report,
        failed_bursts,
        skipped_links,
    })
}

/// Sequential reference run of the whole pipeline.
pub fn simulate(scene: &Scene, config: &PipelineConfig, seed: u64) -> Result<SimulationOutput> {
    config.validate()?;
    let tracks = scene
        .targets
        .iter()
        .map(|t| simulate_target(scene, t, config, seed))
        .collect::<Result<Vec<_>>>()?;
    assemble(scene, config, tracks)
}

fn suppressed(policies: &[OptOutPolicy], device: &str, t: f64, position: Option<Vec2>) -> bool {
    policies
        .iter()
        .filter(|p| p.device_id == device)
        .any(|p| p.suppresses(t, position))
}

/// Drops fixes covered by a policy, and the ranging rows of those bursts. Rows
/// of bursts that produced no fix are dropped whenever the device has a policy
/// with regions, since their position is unknown.
pub fn optout_measurements(
    fixes: Vec<LocalizationFix>,
    samples: Vec<RangingSample>,
    policies: &[OptOutPolicy],
) -> (Vec<LocalizationFix>, Vec<RangingSample>) {
    let position: BTreeMap<(&str, u64), Vec2> = fixes
        .iter()
        .map(|f| ((f.target_id.as_str(), f.timestamp.to_bits()), f.position))
        .collect();
    let samples = samples
        .into_iter()
        .filter(|s| {
            let p = position
                .get(&(s.target_id.as_str(), s.timestamp.to_bits()))
                .copied();
            !suppressed(policies, &s.target_id, s.timestamp, p)
        })
        .collect();
    let fixes = fixes
        .into_iter()
        .filter(|f| !suppressed(policies, &f.target_id, f.timestamp, Some(f.position)))
        .collect();
    (fixes, samples)
}

fn event_suppressed(event: &OcclusionEvent, policies: &[OptOutPolicy]) -> bool {
    policies
        .iter()
        .filter(|p| p.device_id == event.target_id)
        .any(|p| {
            p.full_opt_out
                || !p.regions.is_empty()
                || p.time_windows
                    .iter()
                    .any(|w| w.start <= event.interval.end && event.interval.start <= w.end)
        })
}

/// Scores of the occlusion stage against simulator truth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OcclusionScores {
    /// Blocked time (s) on links from camera-colocated transmitters.
    pub blocked_time: f64,
    /// Share of that time covered by detected events.
    pub overlap: f64,
    /// Share of detected event time that was blocked.
    pub event_precision: f64,
    pub injected: usize,
    /// Share of injected extraneous labels removed by the filter.
    pub removal_recall: f64,
    pub clean: usize,
    /// Share of the other labels removed by the filter.
    pub false_removal: f64,
}

/// Measures event overlap on `out`, then adds an extraneous label for every
/// shadowed target (see [`inject_extraneous`](crate::emulation::inject_extraneous))
/// to the RF labels and runs the filter over them.
pub fn occlusion_scores(
    scene: &Scene,
    config: &PipelineConfig,
    out: &SimulationOutput,
    seed: u64,
) -> Result<OcclusionScores> {
    let mut scores = OcclusionScores::default();
    let (mut hit, mut event_time) = (0.0, 0.0);
    for camera in &scene.cameras {
        let half = 0.5 / camera.frame_rate;
        let colocated: Vec<&str> = scene
            .colocated_transmitters(camera, config.colocation_radius)
            .iter()
            .map(|t| t.id.as_str())
            .collect();
        let blocked: Vec<&RangingSample> = out
            .samples
            .iter()
            .filter(|s| !s.los && colocated.contains(&s.tx_id.as_str()))
            .collect();
        for s in &blocked {
            let (a, b) = (s.timestamp - half, s.timestamp + half);
            scores.blocked_time += b - a;
            for e in out
                .events
                .iter()
                .filter(|e| e.target_id == s.target_id && e.tx_id == s.tx_id)
            {
                hit += (b.min(e.interval.end) - a.max(e.interval.start)).max(0.0);
            }
        }
        for e in out
            .events
            .iter()
            .filter(|e| colocated.contains(&e.tx_id.as_str()))
        {
            event_time += e.interval.end - e.interval.start;
        }
    }
    scores.overlap = if scores.blocked_time > 0.0 {
        hit / scores.blocked_time
    } else {
        1.0
    };
    scores.event_precision = if event_time > 0.0 {
        hit / event_time
    } else {
        1.0
    };

    let clean: Vec<Frame> = out
        .rf_labels
        .iter()
        .cloned()
        .map(|mut f| {
            f.labels.retain(|l| !l.hidden);
            f
        })
        .collect();
    let mut rng = SeedKey::new(seed).str("inject").rng();
    let (frames, _) =
        crate::emulation::inject_extraneous(clean, scene, &config.body, 1.0, &mut rng)?;
    let criteria = FilterCriteria {
        events: out.events.clone(),
        ..config.filter.clone()
    };
    let (kept, _) = filter_labels(frames.clone(), &out.fixes, &criteria);
    let (mut removed_injected, mut removed_clean) = (0, 0);
    for (before, after) in frames.iter().zip(&kept) {
        for l in &before.labels {
            let removed = !after.labels.iter().any(|k| k.identity == l.identity);
            if l.hidden {
                scores.injected += 1;
                removed_injected += usize::from(removed);
            } else {
                scores.clean += 1;
                removed_clean += usize::from(removed);
            }
        }
    }
    scores.removal_recall = if scores.injected > 0 {
        removed_injected as f64 / scores.injected as f64
    } else {
        1.0
    };
    scores.false_removal = if scores.clean > 0 {
        removed_clean as f64 / scores.clean as f64
    } else {
        0.0
    };
    Ok(scores)
}
