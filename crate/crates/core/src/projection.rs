//! Ideal pinhole projection, body-box synthesis and back-projection.
//!
//! Camera frame: x right, y down, z forward. A target is a vertical body box
//! standing on the ground at its foot point; its image box spans the projected
//! foot and head points and its width is `aspect × pixel height`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Vec2, Vec3};
use crate::scene::CameraModel;

/// Image-space box, top-left anchored, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    /// Set when the box was truncated at the image border.
    #[serde(default)]
    pub clipped: bool,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self {
            x,
            y,
            w,
            h,
            clipped: false,
        }
    }

    pub fn center_x(&self) -> f64 {
        self.x + 0.5 * self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// Physical body-box prior used to size RF labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyBoxParams {
    /// Average human height in metres.
    pub mean_height: f64,
    /// Width over height.
    pub aspect_ratio: f64,
    /// Half-width of the uniform height perturbation, as a fraction of the mean.
    pub height_variation: f64,
}

impl Default for BodyBoxParams {
    fn default() -> Self {
        BodyBoxParams {
            mean_height: 1.76,
            aspect_ratio: 0.41,
            height_variation: 0.10,
        }
    }
}

impl BodyBoxParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mean_height > 0.0
            && self.aspect_ratio > 0.0
            && self.aspect_ratio < 1.0
            && self.height_variation > 0.0
            && self.height_variation < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                entity: "body_box".into(),
                reason: "parameters must be positive with aspect_ratio and variation below 1",
            })
        }
    }
}

/// World point expressed in the camera frame.
pub fn to_camera_frame(camera: &CameraModel, world: Vec3) -> Vec3 {
    camera
        .orientation
        .world_from_camera()
        .transpose()
        .mul_vec(world - camera.position)
}

/// Camera-frame point expressed in the world frame.
pub fn to_world_frame(camera: &CameraModel, cam: Vec3) -> Vec3 {
    camera.orientation.world_from_camera().mul_vec(cam) + camera.position
}

/// Optical-axis depth of a world point.
pub fn depth_of(camera: &CameraModel, world: Vec3) -> f64 {
    to_camera_frame(camera, world).z
}

pub fn project_point(camera: &CameraModel, world: Vec3) -> Result<Vec2> {
    let p = to_camera_frame(camera, world);
    if !(p.z > 0.0) {
        return Err(Error::BehindCamera { depth: p.z });
    }
    let f = camera.focal_length;
    let c = camera.principal_point;
    Ok(Vec2::new(c.x + f * p.x / p.z, c.y + f * p.y / p.z))
}

/// Unclipped projected body box together with the foot depth.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RawBox {
    center_u: f64,
    top: f64,
    height: f64,
    width: f64,
    depth: f64,
}

fn raw_box(camera: &CameraModel, ground: Vec2, height: f64, aspect: f64) -> Result<RawBox> {
    let foot_w = ground.extend(0.0);
    let foot = project_point(camera, foot_w)?;
    let head = project_point(camera, ground.extend(height))?;
    let top = foot.y.min(head.y);
    let h = (foot.y - head.y).abs();
    if !(h > 0.0) {
        return Err(Error::OutsideImage);
    }
    Ok(RawBox {
        center_u: 0.5 * (foot.x + head.x),
        top,
        height: h,
        width: aspect * h,
        depth: depth_of(camera, foot_w),
    })
}

/// Projects a standing body of the given height at `ground` into the image.
pub fn synthesize_bbox(
    camera: &CameraModel,
    ground: Vec2,
    height: f64,
    aspect: f64,
) -> Result<BoundingBox> {
    let raw = raw_box(camera, ground, height, aspect)?;
    let (w_img, h_img) = (
        f64::from(camera.image_size.width),
        f64::from(camera.image_size.height),
    );
    let left = raw.center_u - 0.5 * raw.width;
    let right = left + raw.width;
    let top = raw.top;
    let bottom = top + raw.height;
    if right <= 0.0 || left >= w_img || bottom <= 0.0 || top >= h_img {
        return Err(Error::OutsideImage);
    }
    let clipped = left < 0.0 || top < 0.0 || right > w_img || bottom > h_img;
    if !clipped {
        return Ok(BoundingBox {
            x: left,
            y: top,
            w: raw.width,
            h: raw.height,
            clipped,
        });
    }
    let (l, t) = (left.max(0.0), top.max(0.0));
    let (r, b) = (right.min(w_img), bottom.min(h_img));
    Ok(BoundingBox {
        x: l,
        y: t,
        w: r - l,
        h: b - t,
        clipped,
    })
}

/// Ground position and foot depth of a target whose unclipped box is `bbox`,
/// assuming it is `assumed_height` tall.
///
/// Exact in closed form for level cameras; tilted or rolled cameras are refined
/// with Newton steps on the box centre column and pixel height.
pub fn back_project(
    camera: &CameraModel,
    bbox: &BoundingBox,
    assumed_height: f64,
) -> Result<(Vec2, f64)> {
    if bbox.clipped {
        return Err(Error::ClippedBox);
    }
    if !(assumed_height > 0.0) || !(bbox.h > 0.0) {
        return Err(Error::InvalidParameter {
            entity: "back_project".into(),
            reason: "assumed height and box height must be positive",
        });
    }
    let f = camera.focal_length;
    let c = camera.principal_point;
    let z = f * assumed_height / bbox.h;
    let cam_foot = Vec3::new(
        (bbox.center_x() - c.x) * z / f,
        (bbox.bottom() - c.y) * z / f,
        z,
    );
    let mut g = to_world_frame(camera, cam_foot).xy();

    let target = (bbox.center_x(), bbox.h);
    let residual = |g: Vec2| -> Result<(f64, f64)> {
        let r = raw_box(camera, g, assumed_height, 1.0)?;
        Ok((r.center_u - target.0, r.height - target.1))
    };
    let scale = bbox.h.max(1.0);
    for _ in 0..50 {
        let (r0, r1) = residual(g)?;
        if r0.abs() < 1e-10 * scale && r1.abs() < 1e-10 * scale {
            break;
        }
        let step = 1e-6 * z.max(1.0);
        let (a0, a1) = residual(g + Vec2::new(step, 0.0))?;
        let (b0, b1) = residual(g + Vec2::new(0.0, step))?;
        let j = [
            [(a0 - r0) / step, (b0 - r0) / step],
            [(a1 - r1) / step, (b1 - r1) / step],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return Err(Error::DegenerateGeometry);
        }
        let dx = (r0 * j[1][1] - r1 * j[0][1]) / det;
        let dy = (j[0][0] * r1 - j[1][0] * r0) / det;
        g = g - Vec2::new(dx, dy);
    }
    let depth = depth_of(camera, g.extend(0.0));
    if !(depth > 0.0) {
        return Err(Error::BehindCamera { depth });
    }
    Ok((g, depth))
}
