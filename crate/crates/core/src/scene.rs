//! Simulated world: cameras, transmitters, targets, occluders, road regions and
//! privacy policies.
//!
//! A [`SceneConfig`] is the unvalidated description (what the JSON file holds);
//! [`build_scene`] checks every invariant and wraps it into an immutable
//! [`Scene`].

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Polygon, Rect, Vec2, Vec3};

/// Camera attitude in radians.
///
/// With all angles zero the camera is level and looks along world `+y`
/// (image x to world `+x`, image y to world `-z`). `yaw` turns the heading
/// counter-clockwise about world `+z`, then `pitch` tilts about the camera's
/// right axis (positive looks up), then `roll` rotates about the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Orientation {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Orientation {
    /// Level camera looking along the given ground heading (radians from `+y`,
    /// counter-clockwise).
    pub fn level(heading: f64) -> Self {
        Orientation {
            yaw: heading,
            pitch: 0.0,
            roll: 0.0,
        }
    }

    /// The attitude whose camera axes coincide with the world axes
    /// (optical axis along world `+z`).
    pub fn aligned() -> Self {
        Orientation {
            yaw: 0.0,
            pitch: FRAC_PI_2,
            roll: 0.0,
        }
    }

    /// Rotation taking camera-frame vectors to world-frame vectors.
    pub fn world_from_camera(&self) -> Mat3 {
        // camera x→world x, camera y→world -z, camera z→world y
        let base = Mat3([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]);
        Mat3::rot_z(self.yaw)
            .mul_mat(&Mat3::rot_x(self.pitch))
            .mul_mat(&Mat3::rot_y(self.roll))
            .mul_mat(&base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub id: String,
    pub position: Vec3,
    pub orientation: Orientation,
    /// Focal length in pixels.
    pub focal_length: f64,
    pub principal_point: Vec2,
    pub image_size: ImageSize,
    /// Frames per second.
    pub frame_rate: f64,
}

impl CameraModel {
    pub fn frame_period(&self) -> f64 {
        1.0 / self.frame_rate
    }

    fn validate(&self) -> Result<()> {
        let entity = || format!("cameras[{}]", self.id);
        let bad = |reason| {
            Err(Error::InvalidParameter {
                entity: entity(),
                reason,
            })
        };
        if !(self.focal_length > 0.0 && self.focal_length.is_finite()) {
            return bad("focal_length must be positive");
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad("frame_rate must be positive");
        }
        if self.image_size.width == 0 || self.image_size.height == 0 {
            return bad("image_size components must be positive");
        }
        let pp = self.principal_point;
        if !(pp.x >= 0.0
            && pp.y >= 0.0
            && pp.x <= f64::from(self.image_size.width)
            && pp.y <= f64::from(self.image_size.height))
        {
            return bad("principal_point must lie within the image");
        }
        if !self.position.is_finite() {
            return bad("position must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxNode {
    pub id: String,
    pub position: Vec3,
    /// Transmit power in dBm. Informational; received power follows the ranging model's
    /// reference level.
    #[serde(default = "default_tx_power")]
    pub tx_power: f64,
}

fn default_tx_power() -> f64 {
    20.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Stationary,
    Walking,
    Running,
    Biking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub position: Vec2,
}

impl Waypoint {
    pub fn new(t: f64, position: Vec2) -> Self {
        Self { t, position }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// MAC-style device identifier; `None` means the target carries no RF device.
    #[serde(default)]
    pub device_id: Option<String>,
    pub true_height: f64,
    pub trajectory: Vec<Waypoint>,
    pub activity_truth: Activity,
}

impl Target {
    pub fn span(&self) -> (f64, f64) {
        match (self.trajectory.first(), self.trajectory.last()) {
            (Some(a), Some(b)) => (a.t, b.t),
            _ => (f64::NAN, f64::NAN),
        }
    }

    pub fn is_present(&self, t: f64) -> bool {
        let (a, b) = self.span();
        t >= a && t <= b
    }

    pub fn position_at(&self, t: f64) -> Result<Vec2> {
        position_at(self, t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub footprint: Polygon,
    pub height: f64,
}

/// Whether any occluder cuts the straight path from `from` to a target of
/// `target_height` standing at `ground`: the ground segment crosses its
/// footprint and it is taller than both ends.
pub fn path_blocked(from: Vec3, ground: Vec2, target_height: f64, occluders: &[Occluder]) -> bool {
    let clearance = from.z.max(target_height);
    occluders
        .iter()
        .any(|o| o.height > clearance && o.footprint.intersects_segment(from.xy(), ground))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

impl From<[f64; 2]> for TimeWindow {
    fn from([start, end]: [f64; 2]) -> Self {
        Self { start, end }
    }
}

impl From<TimeWindow> for [f64; 2] {
    fn from(w: TimeWindow) -> Self {
        [w.start, w.end]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptOutPolicy {
    pub device_id: String,
    #[serde(default)]
    pub full_opt_out: bool,
    #[serde(default)]
    pub time_windows: Vec<TimeWindow>,
    #[serde(default)]
    pub regions: Vec<Polygon>,
}

impl OptOutPolicy {
    pub fn full(device_id: impl Into<String>) -> Self {
        OptOutPolicy {
            device_id: device_id.into(),
            full_opt_out: true,
            time_windows: Vec::new(),
            regions: Vec::new(),
        }
    }

    /// Whether an observation of this device at `t` and (optionally known) ground
    /// position must be suppressed. An unknown position is suppressed whenever the
    /// policy has regions.
    pub fn suppresses(&self, t: f64, position: Option<Vec2>) -> bool {
        if self.full_opt_out || self.time_windows.iter().any(|w| w.contains(t)) {
            return true;
        }
        if self.regions.is_empty() {
            return false;
        }
        match position {
            Some(p) => self.regions.iter().any(|r| r.contains(p)),
            None => true,
        }
    }
}

/// Unvalidated scene description, one-to-one with the scene JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub cameras: Vec<CameraModel>,
    pub transmitters: Vec<TxNode>,
    #[serde(default)]
    pub targets: Vec<Target>,
    #[serde(default)]
    pub occluders: Vec<Occluder>,
    #[serde(default)]
    pub road_regions: BTreeMap<String, Polygon>,
    #[serde(default)]
    pub opt_out: Vec<OptOutPolicy>,
    pub bounds: Rect,
    pub duration: f64,
}

/// A validated, immutable scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Scene(SceneConfig);

impl Deref for Scene {
    type Target = SceneConfig;
    fn deref(&self) -> &SceneConfig {
        &self.0
    }
}

impl Scene {
    pub fn config(&self) -> &SceneConfig {
        &self.0
    }

    pub fn into_config(self) -> SceneConfig {
        self.0
    }

    pub fn camera(&self, id: &str) -> Option<&CameraModel> {
        self.cameras.iter().find(|c| c.id == id)
    }

    pub fn transmitter(&self, id: &str) -> Option<&TxNode> {
        self.transmitters.iter().find(|t| t.id == id)
    }

    pub fn target_by_device(&self, device_id: &str) -> Option<&Target> {
        self.targets
            .iter()
            .find(|t| t.device_id.as_deref() == Some(device_id))
    }

    pub fn road_region(&self, name: &str) -> Option<&Polygon> {
        self.road_regions.get(name)
    }

    /// Transmitters within `radius` metres of the camera (in 3D).
    pub fn colocated_transmitters(&self, camera: &CameraModel, radius: f64) -> Vec<&TxNode> {
        self.transmitters
            .iter()
            .filter(|t| t.position.distance(camera.position) <= radius)
            .collect()
    }
}

/// Validates a scene description.
pub fn build_scene(config: SceneConfig) -> Result<Scene> {
    let bounds = config.bounds;
    if !(bounds.min.is_finite() && bounds.max.is_finite())
        || bounds.width() <= 0.0
        || bounds.height() <= 0.0
    {
        return Err(Error::InvalidParameter {
            entity: "bounds".into(),
            reason: "bounds must be a non-empty finite rectangle",
        });
    }
    if !(config.duration > 0.0 && config.duration.is_finite()) {
        return Err(Error::InvalidParameter {
            entity: "duration".into(),
            reason: "duration must be positive",
        });
    }
    if config.cameras.is_empty() {
        return Err(Error::InvalidParameter {
            entity: "cameras".into(),
            reason: "at least one camera is required",
        });
    }
    if config.transmitters.len() < 2 {
        return Err(Error::InvalidParameter {
            entity: "transmitters".into(),
            reason: "at least two transmitters are required",
        });
    }
    let in_bounds = |entity: String, p: Vec2| -> Result<()> {
        if bounds.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfBounds { entity })
        }
    };

    let mut ids = BTreeSet::new();
    for cam in &config.cameras {
        if !ids.insert(cam.id.as_str()) {
            return Err(Error::DuplicateId(cam.id.clone()));
        }
        cam.validate()?;
        in_bounds(format!("cameras[{}]", cam.id), cam.position.xy())?;
    }
    let mut ids = BTreeSet::new();
    for tx in &config.transmitters {
        if !ids.insert(tx.id.as_str()) {
            return Err(Error::DuplicateId(tx.id.clone()));
        }
        if !tx.position.is_finite() {
            return Err(Error::InvalidParameter {
                entity: format!("transmitters[{}]", tx.id),
                reason: "position must be finite",
            });
        }
        in_bounds(format!("transmitters[{}]", tx.id), tx.position.xy())?;
    }

    let mut devices = BTreeSet::new();
    for (i, target) in config.targets.iter().enumerate() {
        let entity = match &target.device_id {
            Some(d) => format!("targets[{d}]"),
            None => format!("targets[{i}]"),
        };
        if let Some(d) = &target.device_id {
            if !devices.insert(d.as_str()) {
                return Err(Error::DuplicateId(d.clone()));
            }
            if !is_mac_like(d) {
                return Err(Error::InvalidParameter {
                    entity,
                    reason: "device_id must be a 48-bit identifier like 02:00:00:00:00:01",
                });
            }
        }
        if !(target.true_height > 0.5 && target.true_height < 2.5) {
            return Err(Error::InvalidParameter {
                entity,
                reason: "true_height must lie in (0.5, 2.5) m",
            });
        }
        if target.trajectory.is_empty() {
            return Err(Error::InvalidParameter {
                entity,
                reason: "trajectory is empty",
            });
        }
        if target.trajectory.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::InvalidParameter {
                entity,
                reason: "trajectory timestamps must be strictly increasing",
            });
        }
        for wp in &target.trajectory {
            if !wp.t.is_finite() {
                return Err(Error::InvalidParameter {
                    entity,
                    reason: "trajectory timestamps must be finite",
                });
            }
            in_bounds(entity.clone(), wp.position)?;
        }
    }

    for (i, occ) in config.occluders.iter().enumerate() {
        let entity = format!("occluders[{i}]");
        occ.footprint
            .validate()
            .map_err(|reason| Error::MalformedPolygon {
                entity: entity.clone(),
                reason,
            })?;
        if !(occ.height > 0.0) {
            return Err(Error::InvalidParameter {
                entity,
                reason: "height must be positive",
            });
        }
        for v in &occ.footprint.vertices {
            in_bounds(entity.clone(), *v)?;
        }
    }
    for (name, region) in &config.road_regions {
        region
            .validate()
            .map_err(|reason| Error::MalformedPolygon {
                entity: format!("road_regions[{name}]"),
                reason,
            })?;
    }
    for policy in &config.opt_out {
        let entity = format!("opt_out[{}]", policy.device_id);
        let mut windows = policy.time_windows.clone();
        windows.sort_by(|a, b| a.start.total_cmp(&b.start));
        if windows.iter().any(|w| !(w.start < w.end)) {
            return Err(Error::InvalidParameter {
                entity,
                reason: "window start must precede end",
            });
        }
        if windows.windows(2).any(|w| w[1].start <= w[0].end) {
            return Err(Error::InvalidParameter {
                entity,
                reason: "time windows overlap",
            });
        }
        for region in &policy.regions {
            region
                .validate()
                .map_err(|reason| Error::MalformedPolygon {
                    entity: entity.clone(),
                    reason,
                })?;
        }
    }
    Ok(Scene(config))
}

fn is_mac_like(s: &str) -> bool {
    let parts: Vec<&str> = s.split(':').collect();
    parts.len() == 6
        && parts
            .iter()
            .all(|p| p.len() == 2 && p.bytes().all(|b| b.is_ascii_hexdigit()))
}

/// Piecewise-linear position along the trajectory.
pub fn position_at(target: &Target, t: f64) -> Result<Vec2> {
    let traj = &target.trajectory;
    let (start, end) = target.span();
    if traj.is_empty() || !(t >= start && t <= end) {
        return Err(Error::OutsideTrajectory { t, start, end });
    }
    // first waypoint with time >= t
    let i = traj.partition_point(|w| w.t < t);
    let b = traj[i];
    if b.t == t || i == 0 {
        return Ok(b.position);
    }
    let a = traj[i - 1];
    let s = (t - a.t) / (b.t - a.t);
    Ok(a.position + (b.position - a.position) * s)
}

/// Closed speed interval in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedBand {
    pub min: f64,
    pub max: f64,
}

impl SpeedBand {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    /// Distance from `v` to the band (0 inside).
    pub fn gap(&self, v: f64) -> f64 {
        if v < self.min {
            self.min - v
        } else if v > self.max {
            v - self.max
        } else {
            0.0
        }
    }
}

/// Speed band per activity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedBands {
    pub stationary: SpeedBand,
    pub walking: SpeedBand,
    pub running: SpeedBand,
    pub biking: SpeedBand,
}

impl Default for SpeedBands {
    fn default() -> Self {
        SpeedBands {
            stationary: SpeedBand { min: 0.0, max: 0.2 },
            walking: SpeedBand { min: 1.0, max: 1.8 },
            running: SpeedBand { min: 2.2, max: 3.5 },
            biking: SpeedBand { min: 3.5, max: 7.0 },
        }
    }
}

impl SpeedBands {
    pub fn band(&self, activity: Activity) -> SpeedBand {
        match activity {
            Activity::Stationary => self.stationary,
            Activity::Walking => self.walking,
            Activity::Running => self.running,
            Activity::Biking => self.biking,
        }
    }
}

const HEADING_TRIES: usize = 256;

/// Random waypoint track at 1 Hz whose per-step speed stays within the band for
/// `kind` and whose points all lie in `region`.
pub fn generate_trajectory<R: Rng + ?Sized>(
    kind: Activity,
    duration: f64,
    region: &Polygon,
    bands: &SpeedBands,
    rng: &mut R,
) -> Result<Vec<Waypoint>> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter {
            entity: "duration".into(),
            reason: "duration must be positive",
        });
    }
    region
        .validate()
        .map_err(|reason| Error::MalformedPolygon {
            entity: "region".into(),
            reason,
        })?;
    let rect = region.bounding_rect();
    let start = (0..HEADING_TRIES)
        .map(|_| {
            Vec2::new(
                rng.random_range(rect.min.x..=rect.max.x),
                rng.random_range(rect.min.y..=rect.max.y),
            )
        })
        .find(|p| region.contains(*p))
        .ok_or(Error::RegionTooSmall)?;

    let mut times: Vec<f64> = (0..)
        .map(|i| i as f64)
        .take_while(|&t| t < duration)
        .collect();
    times.push(duration);

    let band = bands.band(kind);
    let mut out = Vec::with_capacity(times.len());
    out.push(Waypoint::new(0.0, start));
    let mut heading: f64 = rng.random_range(-PI..PI);
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let here = out[out.len() - 1].position;
        let step = match kind {
            Activity::Stationary => 0.0,
            _ => rng.random_range(band.min..=band.max) * dt,
        };
        let next = if step == 0.0 {
            here
        } else {
            let mut found = None;
            for attempt in 0..HEADING_TRIES {
                let h = if attempt < HEADING_TRIES / 4 {
                    heading + rng.random_range(-0.4..0.4)
                } else {
                    rng.random_range(-PI..PI)
                };
                let (s, c) = libm::sincos(h);
                let p = here + Vec2::new(c, s) * step;
                if region.contains(p) && segment_stays_inside(region, here, p) {
                    heading = h;
                    found = Some(p);
                    break;
                }
            }
            found.ok_or(Error::RegionTooSmall)?
        };
        out.push(Waypoint::new(w[1], next));
    }
    Ok(out)
}

fn segment_stays_inside(region: &Polygon, a: Vec2, b: Vec2) -> bool {
    let iv = region.segment_inside_intervals(a, b);
    iv.len() == 1 && iv[0].0 <= 1e-9 && iv[0].1 >= 1.0 - 1e-9
}

/// Named scene templates.
pub mod templates {
    use super::*;
    use crate::seed::SeedKey;

    /// Smallest legal scene: one camera, two transmitters, one standing target.
    pub fn minimal() -> SceneConfig {
        SceneConfig {
            cameras: alloc::vec![CameraModel {
                id: "cam0".into(),
                position: Vec3::new(5.0, 0.0, 1.5),
                orientation: Orientation::level(0.0),
                focal_length: 1000.0,
                principal_point: Vec2::new(640.0, 360.0),
                image_size: ImageSize {
                    width: 1280,
                    height: 720
                },
                frame_rate: 10.0,
            }],
            transmitters: alloc::vec![
                TxNode {
                    id: "tx0".into(),
                    position: Vec3::new(0.0, 0.0, 0.0),
                    tx_power: 20.0
                },
                TxNode {
                    id: "tx1".into(),
                    position: Vec3::new(10.0, 0.0, 0.0),
                    tx_power: 20.0
                },
            ],
            targets: alloc::vec![Target {
                device_id: Some("02:00:00:00:00:01".into()),
                true_height: 1.76,
                trajectory: alloc::vec![
                    Waypoint::new(0.0, Vec2::new(5.0, 8.0)),
                    Waypoint::new(10.0, Vec2::new(5.0, 8.0)),
                ],
                activity_truth: Activity::Stationary,
            }],
            occluders: Vec::new(),
            road_regions: BTreeMap::new(),
            opt_out: Vec::new(),
            bounds: Rect::new(Vec2::new(0.0, 0.0), Vec2::new(10.0, 10.0)),
            duration: 10.0,
        }
    }

    pub const STREET_WIDTH: f64 = 5.0;
    pub const STREET_LENGTH: f64 = 40.0;

    fn strip(x0: f64, x1: f64) -> Polygon {
        Rect::new(Vec2::new(x0, 0.0), Vec2::new(x1, STREET_LENGTH)).to_polygon()
    }

    /// A 5 m × 40 m street watched by one level camera at its south end.
    ///
    /// `tx0` shares the camera mast; `tx1` completes the two-transmitter testbed
    /// layout along the south edge, and `tx2`..`tx5` are the extra access points
    /// used by the larger hardware configurations. A kiosk stands in the middle of
    /// the street. Target tracks are drawn from `seed`.
    pub fn street(seed: u64) -> Result<SceneConfig> {
        let bands = SpeedBands::default();
        let mut regions = BTreeMap::new();
        regions.insert("sidewalk_west".to_string(), strip(0.0, 1.5));
        regions.insert("bike_lane".to_string(), strip(1.5, 3.5));
        regions.insert("sidewalk_east".to_string(), strip(3.5, STREET_WIDTH));
        let duration = 30.0;

        let cast: [(Activity, &str); 7] = [
            (Activity::Walking, "sidewalk_west"),
            (Activity::Walking, "sidewalk_west"),
            (Activity::Walking, "sidewalk_east"),
            (Activity::Stationary, "sidewalk_west"),
            (Activity::Running, "sidewalk_east"),
            (Activity::Biking, "bike_lane"),
            (Activity::Walking, "sidewalk_east"),
        ];
        let mut targets = Vec::new();
        for (i, (activity, region)) in cast.iter().enumerate() {
            let mut rng = SeedKey::new(seed).str("street").u64(i as u64).rng();
            let trajectory =
                generate_trajectory(*activity, duration, &regions[*region], &bands, &mut rng)?;
            // the last walker carries no device
            let device_id = (i + 1 < cast.len()).then(|| format!("02:00:00:00:00:{:02x}", i + 1));
            targets.push(Target {
                device_id,
                true_height: rng.random_range(1.60..=1.92),
                trajectory,
                activity_truth: *activity,
            });
        }

        let tx = |id: &str, x: f64, y: f64, z: f64| TxNode {
            id: id.into(),
            position: Vec3::new(x, y, z),
            tx_power: 20.0,
        };
        Ok(SceneConfig {
            cameras: alloc::vec![CameraModel {
                id: "cam0".into(),
                position: Vec3::new(2.5, 0.0, 2.0),
                orientation: Orientation::level(0.0),
                focal_length: 600.0,
                principal_point: Vec2::new(320.0, 240.0),
                image_size: ImageSize {
                    width: 640,
                    height: 480
                },
                frame_rate: 5.0,
            }],
            transmitters: alloc::vec![
                tx("tx0", 2.5, 0.0, 2.0),
                tx("tx1", 5.0, 0.0, 3.0),
                tx("tx2", 0.0, 20.0, 3.0),
                tx("tx3", 5.0, 20.0, 3.0),
                tx("tx4", 0.0, 40.0, 3.0),
                tx("tx5", 5.0, 40.0, 3.0),
            ],
            targets,
            occluders: alloc::vec![Occluder {
                footprint: Rect::new(Vec2::new(1.5, 15.0), Vec2::new(3.0, 17.5)).to_polygon(),
                height: 2.6,
            }],
            road_regions: regions,
            opt_out: Vec::new(),
            bounds: Rect::new(Vec2::new(0.0, 0.0), Vec2::new(STREET_WIDTH, STREET_LENGTH)),
            duration,
        })
    }
}
