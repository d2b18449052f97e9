//! Depth-image potential field controller.
//!
//! Every valid depth pixel back-projects to a point `p` in the camera frame
//! and contributes `k_rep * (1/p_max - 1/p_z) * p / |p|`, which points away
//! from the obstacle for depths below `p_max`. The per-camera sums are
//! rotated into the body frame, blended with the unit direction to the
//! lookahead point and mapped to unicycle velocity commands.
//!
//! Frames: camera z forward, x right, y down; body x forward, y left, z up.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::fmm_planner::LookaheadPath;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Depths at or beyond this contribute nothing.
    pub max_depth: f64,
}

impl CameraIntrinsics {
    /// Centered camera whose image edges span the given fields of view.
    pub fn from_fov(width: usize, height: usize, h_fov: f64, v_fov: f64, max_depth: f64) -> Self {
        Self {
            fx: width as f64 / 2.0 / (h_fov / 2.0).tan(),
            fy: height as f64 / 2.0 / (v_fov / 2.0).tan(),
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
            max_depth,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err("focal lengths must be positive".into());
        }
        if self.width == 0 || self.height == 0 {
            return Err("image must have pixels".into());
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err("principal point outside the image".into());
        }
        if !(self.max_depth > 0.0) {
            return Err("max depth must be positive".into());
        }
        Ok(())
    }
}

/// Rigid camera placement on the body.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraMount {
    /// Maps camera-frame vectors to body-frame vectors.
    pub rotation: Matrix3<f64>,
    /// Camera origin in the body frame.
    pub translation: Vec3,
}

impl CameraMount {
    fn from_axes(x: Vec3, y: Vec3, z: Vec3) -> Self {
        Self {
            rotation: Matrix3::from_columns(&[x, y, z]),
            translation: Vec3::zeros(),
        }
    }

    pub fn forward() -> Self {
        Self::from_axes(-Vec3::y(), -Vec3::z(), Vec3::x())
    }

    pub fn up() -> Self {
        Self::from_axes(-Vec3::y(), Vec3::x(), Vec3::z())
    }

    pub fn down() -> Self {
        Self::from_axes(-Vec3::y(), -Vec3::x(), -Vec3::z())
    }
}

/// Row-major depth image. Zero, negative and NaN pixels are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub intrinsics: CameraIntrinsics,
    pub mount: CameraMount,
    pub depth: Vec<f64>,
}

impl DepthImage {
    pub fn new(intrinsics: CameraIntrinsics, mount: CameraMount) -> Self {
        let n = intrinsics.width * intrinsics.height;
        Self {
            intrinsics,
            mount,
            depth: vec![f64::NAN; n],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.depth[v * self.intrinsics.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, d: f64) {
        let w = self.intrinsics.width;
        self.depth[v * w + u] = d;
    }
}

/// Back-project pixel `(s_x, s_y)` at `depth` into the camera frame.
pub fn pixel_to_ray(s_x: f64, s_y: f64, depth: f64, k: &CameraIntrinsics) -> Vec3 {
    Vec3::new(depth * (s_x - k.cx) / k.fx, depth * (s_y - k.cy) / k.fy, depth)
}

/// Pinhole projection of a camera-frame point with positive z.
pub fn project(p: &Vec3, k: &CameraIntrinsics) -> (f64, f64) {
    (k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy)
}

/// Repulsion summed over the valid pixels of one image, camera frame.
pub fn repulsive_from_image(img: &DepthImage, k_rep: f64) -> Vec3 {
    let k = &img.intrinsics;
    let inv_max = 1.0 / k.max_depth;
    let mut u = Vec3::zeros();
    for v in 0..k.height {
        for s in 0..k.width {
            let d = img.get(s, v);
            if !(d > 0.0) || d >= k.max_depth {
                continue;
            }
            let p = pixel_to_ray(s as f64, v as f64, d, k);
            u += k_rep * (inv_max - 1.0 / d) * p / p.norm();
        }
    }
    u
}

/// Sum of the per-camera repulsions in the body frame, in slice order.
pub fn combine_repulsion(images: &[DepthImage], k_rep: f64) -> Vec3 {
    images.iter().fold(Vec3::zeros(), |acc, img| {
        acc + img.mount.rotation * repulsive_from_image(img, k_rep)
    })
}

/// Blend repulsion with the lookahead direction. The repulsion magnitude is
/// clamped to `u_rep_max` first, so the attractive weight stays in `[0, 1]`.
pub fn resultant(u_rep: &Vec3, lookahead_dir: &Vec3, u_rep_max: f64) -> Vec3 {
    let mag = u_rep.norm();
    let rep = if mag > u_rep_max { u_rep * (u_rep_max / mag) } else { *u_rep };
    let clamped = mag.min(u_rep_max);
    (1.0 - clamped / u_rep_max) * lookahead_dir + rep / u_rep_max
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityLimits {
    pub v_x_max: f64,
    pub v_z_max: f64,
    pub v_theta_max: f64,
}

impl Default for VelocityLimits {
    fn default() -> Self {
        Self {
            v_x_max: 1.0,
            v_z_max: 0.5,
            v_theta_max: PI / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyCommand {
    /// Forward speed, m/s.
    pub v_x: f64,
    /// Vertical speed, m/s.
    pub v_z: f64,
    /// Yaw rate, rad/s.
    pub v_theta: f64,
}

/// Map the resultant to forward, vertical and steering commands.
///
/// Components are clamped to the limits; forward speed is not allowed to go
/// negative when the resultant points behind the vehicle.
pub fn to_body_command(u_res: &Vec3, limits: &VelocityLimits) -> BodyCommand {
    let bearing = if u_res.x == 0.0 && u_res.y == 0.0 {
        0.0
    } else {
        u_res.y.atan2(u_res.x)
    };
    let mut v_x = (limits.v_x_max * u_res.x).clamp(-limits.v_x_max, limits.v_x_max);
    if bearing.abs() > PI / 2.0 {
        v_x = v_x.max(0.0);
    }
    BodyCommand {
        v_x,
        v_z: (limits.v_z_max * u_res.z).clamp(-limits.v_z_max, limits.v_z_max),
        v_theta: (limits.v_theta_max * bearing / PI).clamp(-limits.v_theta_max, limits.v_theta_max),
    }
}

/// Keeps the lookahead point a fixed arc length ahead of the robot's
/// progress along the current path.
///
/// Progress is the arc length of the robot's closest point on the path,
/// searched only in a window ahead of the previous progress, and it never
/// decreases.
#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadTracker {
    cumulative: Vec<f64>,
    progress: f64,
}

impl LookaheadTracker {
    pub fn new(path: &LookaheadPath) -> Self {
        Self {
            cumulative: path.cumulative(),
            progress: 0.0,
        }
    }

    pub fn progress(&self) -> f64 {
        self.progress
    }

    pub fn remaining(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0) - self.progress
    }

    fn point_at(path: &LookaheadPath, cum: &[f64], s: f64) -> Vec3 {
        let pts = &path.points;
        if pts.len() == 1 || s <= 0.0 {
            return pts[0];
        }
        let i = cum.partition_point(|&c| c <= s);
        if i >= pts.len() {
            return *pts.last().unwrap();
        }
        let seg = cum[i] - cum[i - 1];
        if seg <= 0.0 {
            return pts[i];
        }
        let f = (s - cum[i - 1]) / seg;
        pts[i - 1] + (pts[i] - pts[i - 1]) * f
    }

    /// Update progress from the robot position and return the lookahead
    /// point `distance` meters further along the path.
    pub fn advance(&mut self, path: &LookaheadPath, robot: &Vec3, distance: f64) -> Vec3 {
        assert!(!path.is_empty(), "lookahead on an empty path");
        let cum = &self.cumulative;
        let total = *cum.last().unwrap();
        let window_end = (self.progress + 2.0 * distance).min(total);
        let mut best = (f64::INFINITY, self.progress);
        for i in 0..path.points.len().saturating_sub(1) {
            if cum[i + 1] < self.progress || cum[i] > window_end {
                continue;
            }
            let (a, b) = (path.points[i], path.points[i + 1]);
            let seg = b - a;
            let len2 = seg.norm_squared();
            let t = if len2 > 0.0 { ((robot - a).dot(&seg) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let s = (cum[i] + t * (cum[i + 1] - cum[i])).clamp(self.progress, window_end);
            let d = (Self::point_at(path, cum, s) - robot).norm();
            if d < best.0 {
                best = (d, s);
            }
        }
        self.progress = self.progress.max(best.1);
        Self::point_at(path, cum, (self.progress + distance).min(total))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApfParams {
    pub k_rep: f64,
    pub u_rep_max: f64,
    /// Lookahead distance, meters.
    pub lookahead: f64,
    pub limits: VelocityLimits,
}

impl Default for ApfParams {
    fn default() -> Self {
        Self {
            k_rep: 1.0,
            u_rep_max: 50.0,
            lookahead: 1.0,
            limits: VelocityLimits::default(),
        }
    }
}

/// Result of one control evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub command: BodyCommand,
    pub u_rep: Vec3,
    pub u_res: Vec3,
}

/// Full control law for one tick: repulsion from the images plus attraction
/// toward `target` (world frame), given the robot position and yaw.
pub fn control_step(
    images: &[DepthImage],
    position: &Vec3,
    yaw: f64,
    target: Option<&Vec3>,
    params: &ApfParams,
) -> ControlOutput {
    let u_rep = combine_repulsion(images, params.k_rep);
    let dir = match target {
        Some(t) => {
            let w = t - position;
            let (s, c) = yaw.sin_cos();
            let body = Vec3::new(c * w.x + s * w.y, -s * w.x + c * w.y, w.z);
            let n = body.norm();
            if n > 1e-9 {
                body / n
            } else {
                Vec3::zeros()
            }
        }
        None => Vec3::zeros(),
    };
    let u_res = resultant(&u_rep, &dir, params.u_rep_max);
    ControlOutput {
        command: to_body_command(&u_res, &params.limits),
        u_rep,
        u_res,
    }
}
