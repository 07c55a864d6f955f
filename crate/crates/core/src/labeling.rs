//! Label synthesis: ground-truth frames, RF labels from fixes, privacy opt-out,
//! activity classification and cross-camera identity correlation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polygon, Vec2, Vec3};
use crate::localization::LocalizationFix;
use crate::projection::{back_project, depth_of, synthesize_bbox, BodyBoxParams, BoundingBox};
use crate::scene::{Activity, CameraModel, Occluder, OptOutPolicy, Scene, SpeedBands};
use crate::stats::median;

/// Fraction of the body box that must be hidden for a ground-truth label to be
/// marked occluded.
pub const OCCLUSION_THRESHOLD: f64 = 0.35;

/// Window over which fix-to-fix speeds are measured for activity classification (s).
pub const SPEED_WINDOW: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provenance {
    GroundTruth,
    #[serde(rename = "RF")]
    Rf,
    EmulatedHuman,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Label {
    pub frame_id: u64,
    pub camera_id: String,
    pub bbox: BoundingBox,
    /// Optical depth of the foot point (m).
    pub depth: Option<f64>,
    pub identity: Option<String>,
    pub confidence: f64,
    pub provenance: Provenance,
    pub occluded: bool,
    /// Simulation-side truth: the labelled target is hidden from this camera.
    /// Never exported; used to score extraneous-label detection.
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_id: u64,
    pub camera_id: String,
    pub timestamp: f64,
    pub labels: Vec<Label>,
}

impl Frame {
    pub fn empty(camera: &CameraModel, frame_id: u64) -> Frame {
        Frame {
            frame_id,
            camera_id: camera.id.clone(),
            timestamp: frame_id as f64 / camera.frame_rate,
            labels: Vec::new(),
        }
    }
}

/// Number of frames a camera captures over `duration` seconds, starting at t = 0.
pub fn frame_count(camera: &CameraModel, duration: f64) -> u64 {
    if !(duration >= 0.0) {
        return 0;
    }
    libm::floor(duration * camera.frame_rate + 1e-9) as u64 + 1
}

/// Frame index closest to `t`. A timestamp exactly half-way between two frames
/// goes to the earlier one.
pub fn nearest_frame(camera: &CameraModel, t: f64) -> Option<u64> {
    if !(t >= 0.0) {
        return None;
    }
    let x = t * camera.frame_rate;
    let k = libm::floor(x);
    let k = if x - k > 0.5 + 1e-9 { k + 1.0 } else { k };
    Some(k as u64)
}

/// Fraction of a standing body's silhouette whose sight lines to the camera pass
/// through an occluder.
pub fn occlusion_fraction(
    camera: &CameraModel,
    ground: Vec2,
    height: f64,
    aspect: f64,
    occluders: &[Occluder],
) -> f64 {
    const COLUMNS: usize = 9;
    const ROWS: usize = 16;
    if occluders.is_empty() {
        return 0.0;
    }
    let eye = camera.position;
    let lateral = (ground - eye.xy())
        .normalized()
        .map(Vec2::perp)
        .unwrap_or(Vec2::new(1.0, 0.0));
    let width = aspect * height;
    let mut blocked = 0usize;
    for i in 0..COLUMNS {
        let s = ((i as f64 + 0.5) / COLUMNS as f64 - 0.5) * width;
        let foot = ground + lateral * s;
        for j in 0..ROWS {
            let z = (j as f64 + 0.5) / ROWS as f64 * height;
            if occluders
                .iter()
                .any(|o| sight_line_blocked(eye, foot.extend(z), o))
            {
                blocked += 1;
            }
        }
    }
    blocked as f64 / (COLUMNS * ROWS) as f64
}

fn sight_line_blocked(eye: Vec3, point: Vec3, occluder: &Occluder) -> bool {
    occluder
        .footprint
        .segment_inside_intervals(eye.xy(), point.xy())
        .iter()
        .any(|&(t0, t1)| {
            let z0 = eye.z + t0 * (point.z - eye.z);
            let z1 = eye.z + t1 * (point.z - eye.z);
            z0.min(z1) < occluder.height
        })
}

/// Oracle labels: every visible target in every camera tick, boxed with its true
/// height. Targets at least `occlusion_threshold` hidden are flagged occluded.
pub fn generate_ground_truth(
    scene: &Scene,
    camera: &CameraModel,
    params: &BodyBoxParams,
    occlusion_threshold: f64,
) -> Vec<Frame> {
    (0..frame_count(camera, scene.duration))
        .map(|k| {
            let mut frame = Frame::empty(camera, k);
            for target in &scene.targets {
                if !target.is_present(frame.timestamp) {
                    continue;
                }
                let Ok(ground) = target.position_at(frame.timestamp) else {
                    continue;
                };
                let Ok(bbox) =
                    synthesize_bbox(camera, ground, target.true_height, params.aspect_ratio)
                else {
                    continue;
                };
                let hidden = occlusion_fraction(
                    camera,
                    ground,
                    target.true_height,
                    params.aspect_ratio,
                    &scene.occluders,
                ) >= occlusion_threshold;
                frame.labels.push(Label {
                    frame_id: k,
                    camera_id: camera.id.clone(),
                    bbox,
                    depth: Some(depth_of(camera, ground.extend(0.0))),
                    identity: target.device_id.clone(),
                    confidence: 1.0,
                    provenance: Provenance::GroundTruth,
                    occluded: hidden,
                    hidden,
                });
            }
            frame
        })
        .collect()
}

/// Projects localization fixes into camera frames.
///
/// Each fix goes to the nearest frame; when a target has several fixes for one
/// frame the closest in time wins. Boxes use the mean body height. Labels of
/// targets that are in truth hidden from the camera carry the internal `hidden`
/// flag but are otherwise emitted as usual.
pub fn generate_rf_labels(
    scene: &Scene,
    camera: &CameraModel,
    fixes: &[LocalizationFix],
    params: &BodyBoxParams,
    occlusion_threshold: f64,
) -> Vec<Frame> {
    let n = frame_count(camera, scene.duration);
    let mut frames: Vec<Frame> = (0..n).map(|k| Frame::empty(camera, k)).collect();
    let mut chosen: BTreeMap<(u64, &str), (f64, usize)> = BTreeMap::new();
    for (i, fix) in fixes.iter().enumerate() {
        let Some(k) = nearest_frame(camera, fix.timestamp).filter(|k| *k < n) else {
            continue;
        };
        let dt = (fix.timestamp - frames[k as usize].timestamp).abs();
        chosen
            .entry((k, fix.target_id.as_str()))
            .and_modify(|best| {
                if dt < best.0 {
                    *best = (dt, i);
                }
            })
            .or_insert((dt, i));
    }
    for ((k, _), (_, i)) in chosen {
        let fix = &fixes[i];
        let Ok(bbox) = synthesize_bbox(
            camera,
            fix.position,
            params.mean_height,
            params.aspect_ratio,
        ) else {
            continue;
        };
        let frame = &mut frames[k as usize];
        let hidden = scene
            .target_by_device(&fix.target_id)
            .and_then(|t| Some((t, t.position_at(frame.timestamp).ok()?)))
            .is_some_and(|(t, g)| {
                occlusion_fraction(
                    camera,
                    g,
                    t.true_height,
                    params.aspect_ratio,
                    &scene.occluders,
                ) >= occlusion_threshold
            });
        frame.labels.push(Label {
            frame_id: k,
            camera_id: camera.id.clone(),
            bbox,
            depth: Some(depth_of(camera, fix.position.extend(0.0))),
            identity: Some(fix.target_id.clone()),
            confidence: fix.confidence,
            provenance: Provenance::Rf,
            occluded: false,
            hidden,
        });
    }
    frames
}

/// Removes labels of devices whose privacy policy covers them.
///
/// Region rules use the label's ground position recovered with the mean body
/// height; a label whose position cannot be recovered (clipped box, unknown
/// camera) is removed whenever the policy has regions.
pub fn apply_optout(
    frames: Vec<Frame>,
    policies: &[OptOutPolicy],
    cameras: &[CameraModel],
    params: &BodyBoxParams,
) -> Vec<Frame> {
    if policies.is_empty() {
        return frames;
    }
    frames
        .into_iter()
        .map(|mut frame| {
            let camera = cameras.iter().find(|c| c.id == frame.camera_id);
            let t = frame.timestamp;
            frame.labels.retain(|label| {
                let Some(id) = label.identity.as_deref() else {
                    return true;
                };
                let ground = || {
                    camera
                        .and_then(|c| back_project(c, &label.bbox, params.mean_height).ok())
                        .map(|g| g.0)
                };
                !policies
                    .iter()
                    .filter(|p| p.device_id == id)
                    .any(|p| p.suppresses(t, ground()))
            });
            frame
        })
        .collect()
}

/// Activity of one identity from its time-ordered fixes.
///
/// The median of speeds measured over `SPEED_WINDOW` is matched to the nearest
/// band. Speeds nearer the running/biking bands than the walking band are
/// resolved by place: a track mostly inside the `bike_lane` region is biking;
/// elsewhere it is running up to the running band's maximum and biking above.
pub fn classify_activity(
    fixes: &[LocalizationFix],
    road_regions: &BTreeMap<String, Polygon>,
    bands: &SpeedBands,
) -> Result<Activity> {
    let insufficient = Error::InsufficientFixes {
        need: 2,
        window: SPEED_WINDOW,
    };
    let (Some(first), Some(last)) = (fixes.first(), fixes.last()) else {
        return Err(insufficient);
    };
    if fixes.len() < 2 || last.timestamp - first.timestamp < SPEED_WINDOW - 1e-9 {
        return Err(insufficient);
    }
    let mut speeds = Vec::new();
    let mut j = 0;
    for (i, a) in fixes.iter().enumerate() {
        j = j.max(i + 1);
        while j < fixes.len() && fixes[j].timestamp - a.timestamp < SPEED_WINDOW - 1e-9 {
            j += 1;
        }
        let Some(b) = fixes.get(j) else { break };
        speeds.push(a.position.distance(b.position) / (b.timestamp - a.timestamp));
    }
    let v = median(&mut speeds);

    let candidates = [
        (Activity::Stationary, bands.stationary.gap(v)),
        (Activity::Walking, bands.walking.gap(v)),
        (
            Activity::Running,
            bands.running.gap(v).min(bands.biking.gap(v)),
        ),
    ];
    let nearest = candidates
        .iter()
        .fold(
            candidates[0],
            |best, c| if c.1 < best.1 { *c } else { best },
        )
        .0;
    if nearest != Activity::Running {
        return Ok(nearest);
    }
    let on_bike_lane = road_regions.get("bike_lane").is_some_and(|lane| {
        2 * fixes.iter().filter(|f| lane.contains(f.position)).count() > fixes.len()
    });
    Ok(if on_bike_lane || v > bands.running.max {
        Activity::Biking
    } else {
        Activity::Running
    })
}

/// One sighting of an identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Sighting {
    pub camera_id: String,
    pub frame_id: u64,
    pub timestamp: f64,
    pub label: Label,
}

/// Groups labels by identity across cameras; each group is ordered by time,
/// then camera, then frame.
pub fn correlate_identities(frames: &[Frame]) -> BTreeMap<String, Vec<Sighting>> {
    let mut out: BTreeMap<String, Vec<Sighting>> = BTreeMap::new();
    for frame in frames {
        for label in &frame.labels {
            if let Some(id) = &label.identity {
                out.entry(id.clone()).or_default().push(Sighting {
                    camera_id: frame.camera_id.clone(),
                    frame_id: frame.frame_id,
                    timestamp: frame.timestamp,
                    label: label.clone(),
                });
            }
        }
    }
    for group in out.values_mut() {
        group.sort_by(|a, b| {
            a.timestamp
                .total_cmp(&b.timestamp)
                .then_with(|| a.camera_id.cmp(&b.camera_id))
                .then_with(|| a.frame_id.cmp(&b.frame_id))
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::scene::{build_scene, templates, TimeWindow, Waypoint};
    use alloc::string::ToString;
    use alloc::vec;

    const DEVICE: &str = "02:00:00:00:00:01";

    fn fix(t: f64, x: f64, y: f64) -> LocalizationFix {
        LocalizationFix {
            target_id: DEVICE.into(),
            timestamp: t,
            position: Vec2::new(x, y),
            residual_rms: 0.0,
            num_tx_used: 2,
            confidence: 1.0,
        }
    }

    fn minimal() -> Scene {
        build_scene(templates::minimal()).unwrap()
    }

    #[test]
    fn empty_scene_gives_empty_frames() {
        let mut cfg = templates::minimal();
        cfg.targets.clear();
        let scene = build_scene(cfg).unwrap();
        let frames =
            generate_ground_truth(&scene, &scene.cameras[0], &BodyBoxParams::default(), 0.35);
        assert_eq!(frames.len(), 101);
        assert!(frames.iter().all(|f| f.labels.is_empty()));
    }

    #[test]
    fn standing_target_is_labelled_in_every_frame() {
        let scene = minimal();
        let frames =
            generate_ground_truth(&scene, &scene.cameras[0], &BodyBoxParams::default(), 0.35);
        assert!(frames
            .iter()
            .all(|f| f.labels.len() == 1 && !f.labels[0].occluded));
        assert!(frames.iter().all(|f| f.labels[0].confidence == 1.0));
    }

    #[test]
    fn occluded_exactly_inside_window() {
        let mut cfg = templates::minimal();
        let (open, behind) = (Vec2::new(8.5, 8.0), Vec2::new(5.0, 8.0));
        cfg.targets[0].trajectory = vec![
            Waypoint::new(0.0, open),
            Waypoint::new(4.99, open),
            Waypoint::new(5.0, behind),
            Waypoint::new(8.0, behind),
            Waypoint::new(8.01, open),
            Waypoint::new(10.0, open),
        ];
        cfg.occluders.push(Occluder {
            footprint: Rect::new(Vec2::new(4.0, 5.0), Vec2::new(6.0, 5.5)).to_polygon(),
            height: 3.0,
        });
        let scene = build_scene(cfg).unwrap();
        let frames = labelled(&scene);
        for f in &frames {
            let inside = (5.0..=8.0).contains(&f.timestamp);
            assert_eq!(f.labels[0].occluded, inside, "t = {}", f.timestamp);
        }
    }

    #[test]
    fn tall_wall_hides_target_fully() {
        let scene = minimal();
        let cam = &scene.cameras[0];
        let wall = Occluder {
            footprint: Rect::new(Vec2::new(3.0, 4.0), Vec2::new(7.0, 4.5)).to_polygon(),
            height: 3.0,
        };
        assert_eq!(
            occlusion_fraction(cam, Vec2::new(5.0, 8.0), 1.76, 0.41, &[wall.clone()]),
            1.0
        );
        assert_eq!(
            occlusion_fraction(cam, Vec2::new(5.0, 3.0), 1.76, 0.41, &[wall]),
            0.0
        );
    }

    #[test]
    fn frame_matching_breaks_ties_to_earlier_frame() {
        let scene = minimal();
        let cam = &scene.cameras[0];
        assert_eq!(nearest_frame(cam, 0.25), Some(2));
        assert_eq!(nearest_frame(cam, 0.26), Some(3));
        assert_eq!(nearest_frame(cam, 0.24), Some(2));
        let frames = generate_rf_labels(
            &scene,
            cam,
            &[fix(0.25, 5.0, 8.0)],
            &BodyBoxParams::default(),
            0.35,
        );
        let hits: Vec<u64> = frames
            .iter()
            .filter(|f| !f.labels.is_empty())
            .map(|f| f.frame_id)
            .collect();
        assert_eq!(hits, vec![2]);
    }

    #[test]
    fn rf_label_equals_ground_truth_when_heights_agree() {
        let scene = minimal();
        let cam = &scene.cameras[0];
        let params = BodyBoxParams::default();
        let gt = generate_ground_truth(&scene, cam, &params, 0.35);
        let rf = generate_rf_labels(&scene, cam, &[fix(1.0, 5.0, 8.0)], &params, 0.35);
        let (a, b) = (&gt[10].labels[0], &rf[10].labels[0]);
        assert!((a.bbox.x - b.bbox.x).abs() < 1e-6 && (a.bbox.h - b.bbox.h).abs() < 1e-6);
        assert_eq!(b.provenance, Provenance::Rf);
        assert!(b.depth.is_some());
    }

    #[test]
    fn rf_label_behind_occluder_is_emitted_unflagged() {
        let mut cfg = templates::minimal();
        cfg.occluders.push(Occluder {
            footprint: Rect::new(Vec2::new(4.0, 5.0), Vec2::new(6.0, 5.5)).to_polygon(),
            height: 3.0,
        });
        let scene = build_scene(cfg).unwrap();
        let rf = generate_rf_labels(
            &scene,
            &scene.cameras[0],
            &[fix(1.0, 5.0, 8.0)],
            &BodyBoxParams::default(),
            0.35,
        );
        let label = &rf[10].labels[0];
        assert!(!label.occluded);
        assert!(label.hidden);
    }

    fn labelled(scene: &Scene) -> Vec<Frame> {
        generate_ground_truth(scene, &scene.cameras[0], &BodyBoxParams::default(), 0.35)
    }

    #[test]
    fn opt_out_variants() {
        let scene = minimal();
        let params = BodyBoxParams::default();
        let full = apply_optout(
            labelled(&scene),
            &[OptOutPolicy::full(DEVICE)],
            &scene.cameras,
            &params,
        );
        assert!(full.iter().all(|f| f.labels.is_empty()));

        let mut windowed = OptOutPolicy::full(DEVICE);
        windowed.full_opt_out = false;
        windowed.time_windows.push(TimeWindow::new(1.0, 2.0));
        let out = apply_optout(labelled(&scene), &[windowed], &scene.cameras, &params);
        assert_eq!(out[5].labels.len(), 1);
        assert!(out[15].labels.is_empty());
        assert_eq!(out[25].labels.len(), 1);

        let mut region = OptOutPolicy::full(DEVICE);
        region.full_opt_out = false;
        region.regions.push(scene.bounds.to_polygon());
        let out = apply_optout(labelled(&scene), &[region], &scene.cameras, &params);
        assert!(out.iter().all(|f| f.labels.is_empty()));
    }

    fn track(speed: f64, x: f64) -> Vec<LocalizationFix> {
        (0..=20)
            .map(|i| fix(i as f64 * 0.5, x, 1.0 + speed * i as f64 * 0.5))
            .collect()
    }

    #[test]
    fn activity_from_speed_and_place() {
        let cfg = templates::street(1).unwrap();
        let bands = SpeedBands::default();
        let r = &cfg.road_regions;
        assert_eq!(
            classify_activity(&track(0.0, 0.7), r, &bands),
            Ok(Activity::Stationary)
        );
        assert_eq!(
            classify_activity(&track(1.4, 0.7), r, &bands),
            Ok(Activity::Walking)
        );
        assert_eq!(
            classify_activity(&track(3.0, 2.5), r, &bands),
            Ok(Activity::Biking)
        );
        assert_eq!(
            classify_activity(&track(3.0, 0.7), r, &bands),
            Ok(Activity::Running)
        );
        assert_eq!(
            classify_activity(&track(5.0, 0.7), r, &bands),
            Ok(Activity::Biking)
        );
        assert_eq!(
            classify_activity(&track(1.4, 0.7)[..3], r, &bands),
            Err(Error::InsufficientFixes {
                need: 2,
                window: SPEED_WINDOW
            })
        );
    }

    #[test]
    fn correlation_groups_across_cameras() {
        let scene = minimal();
        let mut other = labelled(&scene);
        for f in &mut other {
            f.camera_id = "cam1".to_string();
        }
        let mut all = labelled(&scene);
        all.extend(other);
        let groups = correlate_identities(&all);
        assert_eq!(groups.len(), 1);
        let g = &groups[DEVICE];
        assert_eq!(g.len(), 2 * 101);
        assert_eq!(
            (g[0].camera_id.as_str(), g[1].camera_id.as_str()),
            ("cam0", "cam1")
        );
        assert!(g.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));

        let anonymous: Vec<Frame> = labelled(&scene)
            .into_iter()
            .map(|mut f| {
                f.labels.iter_mut().for_each(|l| l.identity = None);
                f
            })
            .collect();
        assert!(correlate_identities(&anonymous).is_empty());
    }
}
