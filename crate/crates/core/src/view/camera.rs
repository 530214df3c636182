//! Pinhole front camera and 3D box projection.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::scenario::{to_ego_frame, ObjectState, Pose2D};

/// Points closer than this to the camera plane are clipped.
pub const NEAR_PLANE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRig {
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
    pub mount_height: f64,
    /// Distance from the ego center to the camera along the ego heading.
    pub forward_offset: f64,
}

impl CameraRig {
    /// 1920x1080, 60 degree horizontal field of view.
    pub fn generation() -> Self {
        Self {
            fov_deg: 60.0,
            width: 1920,
            height: 1080,
            mount_height: 1.6,
            forward_offset: 0.0,
        }
    }

    /// 1600x900, 60 degree horizontal field of view.
    pub fn closed_loop() -> Self {
        Self {
            width: 1600,
            height: 900,
            ..Self::generation()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err("fov_deg must be in (0, 180)".into());
        }
        if self.width == 0 || self.height == 0 {
            return Err("width and height must be positive".into());
        }
        if !(self.mount_height >= 0.0 && self.mount_height.is_finite()) {
            return Err("mount_height must be >= 0".into());
        }
        Ok(())
    }

    /// Same rig, mounted at the front center of a vehicle with the given
    /// half length.
    pub fn mounted_at_front(&self, half_length: f64) -> Self {
        Self {
            forward_offset: half_length,
            ..self.clone()
        }
    }

    pub fn focal_px(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.fov_deg.to_radians() / 2.0).tan()
    }

    pub fn pose(&self, ego: &Pose2D) -> Pose2D {
        Pose2D::new(ego.position + ego.heading * self.forward_offset, ego.heading)
    }

    /// Camera-frame point (forward, left, up relative to the ground below
    /// the camera) to pixel coordinates. Requires `forward > 0`.
    pub fn to_pixel(&self, p: [f64; 3]) -> [f64; 2] {
        let f = self.focal_px();
        let [x, y, z] = p;
        [
            self.width as f64 / 2.0 - f * y / x,
            self.height as f64 / 2.0 - f * (z - self.mount_height) / x,
        ]
    }
}

/// Axis-aligned pixel rectangle, `max` exclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BBox2D {
    pub track_id: String,
    pub min: [u32; 2],
    pub max: [u32; 2],
    /// Distance from the camera to the object center, meters.
    pub depth: f64,
}

impl BBox2D {
    pub fn width(&self) -> u32 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> u32 {
        self.max[1] - self.min[1]
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.min[0] && x < self.max[0] && y >= self.min[1] && y < self.max[1]
    }

    pub fn center(&self) -> [f64; 2] {
        [
            (self.min[0] + self.max[0]) as f64 / 2.0,
            (self.min[1] + self.max[1]) as f64 / 2.0,
        ]
    }
}

/// Projects the 8 corners of an object's 3D box (ground and roof) and
/// returns the enclosing pixel rectangle clamped to the image. Portions
/// behind the near plane are clipped; `None` when nothing remains in view.
pub fn project_box(
    camera: &CameraRig,
    ego: &Pose2D,
    track_id: &str,
    state: &ObjectState,
    height: f64,
) -> Option<BBox2D> {
    let cam = camera.pose(ego);
    let ground: Vec<Vec2> = state
        .rect()
        .corners()
        .iter()
        .map(|c| to_ego_frame(&cam, *c))
        .collect();
    let mut pts: Vec<[f64; 3]> = Vec::with_capacity(16);
    for z in [0.0, height] {
        pts.extend(ground.iter().map(|g| [g.x, g.y, z]));
    }
    // 12 box edges: bottom ring, top ring, verticals
    let mut edges = Vec::with_capacity(12);
    for i in 0..4 {
        let j = (i + 1) % 4;
        edges.push((i, j));
        edges.push((i + 4, j + 4));
        edges.push((i, i + 4));
    }
    let mut visible: Vec<[f64; 3]> = pts.iter().copied().filter(|p| p[0] >= NEAR_PLANE).collect();
    for (i, j) in edges {
        let (a, b) = (pts[i], pts[j]);
        if (a[0] < NEAR_PLANE) != (b[0] < NEAR_PLANE) {
            let t = (NEAR_PLANE - a[0]) / (b[0] - a[0]);
            visible.push([
                NEAR_PLANE,
                a[1] + t * (b[1] - a[1]),
                a[2] + t * (b[2] - a[2]),
            ]);
        }
    }
    if visible.is_empty() {
        return None;
    }
    let (mut umin, mut vmin) = (f64::INFINITY, f64::INFINITY);
    let (mut umax, mut vmax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &visible {
        let [u, v] = camera.to_pixel(*p);
        umin = umin.min(u);
        umax = umax.max(u);
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    let clamp = |x: f64, hi: u32| x.clamp(0.0, hi as f64) as u32;
    let min = [clamp(umin.floor(), camera.width), clamp(vmin.floor(), camera.height)];
    let max = [clamp(umax.ceil(), camera.width), clamp(vmax.ceil(), camera.height)];
    if max[0] <= min[0] || max[1] <= min[1] {
        return None;
    }
    let center = to_ego_frame(&cam, state.pose.position);
    Some(BBox2D {
        track_id: track_id.to_string(),
        min,
        max,
        depth: center.x.hypot(center.y).hypot(height / 2.0 - camera.mount_height),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car_at(x: f64, y: f64) -> ObjectState {
        ObjectState {
            pose: Pose2D::new(Vec2::new(x, y), Vec2::X),
            speed: 0.0,
            half_extents: Vec2::new(2.3, 0.95),
            valid: true,
        }
    }

    fn ego() -> Pose2D {
        Pose2D::new(Vec2::ZERO, Vec2::X)
    }

    #[test]
    fn dead_ahead_is_centered() {
        let cam = CameraRig::generation();
        let b = project_box(&cam, &ego(), "a", &car_at(10.0, 0.0), 1.5).unwrap();
        assert!((b.center()[0] - cam.width as f64 / 2.0).abs() <= 1.0);
    }

    #[test]
    fn behind_is_culled() {
        let cam = CameraRig::generation();
        assert!(project_box(&cam, &ego(), "a", &car_at(-10.0, 0.0), 1.5).is_none());
    }

    #[test]
    fn far_left_outside_frustum_is_culled() {
        let cam = CameraRig::generation();
        assert!(project_box(&cam, &ego(), "a", &car_at(5.0, 30.0), 1.5).is_none());
    }

    #[test]
    fn nearer_box_is_larger() {
        // Pixel size scales with 1/depth for an identical object.
        let cam = CameraRig::generation();
        let near = project_box(&cam, &ego(), "a", &car_at(10.0, 0.0), 1.5).unwrap();
        let far = project_box(&cam, &ego(), "b", &car_at(20.0, 0.0), 1.5).unwrap();
        assert!(near.width() > far.width());
        assert!(near.height() > far.height());
        let f = cam.focal_px();
        // width of the rear face at depth 7.7 m (10 - 2.3) is 1.9 m
        let expected = f * 1.9 / 7.7;
        assert!((near.width() as f64 - expected).abs() <= 2.0, "{} vs {expected}", near.width());
    }

    #[test]
    fn straddling_object_is_clipped_not_dropped() {
        let cam = CameraRig::generation();
        let b = project_box(&cam, &ego(), "a", &car_at(1.5, 2.5), 1.5);
        assert!(b.is_some());
    }
}
