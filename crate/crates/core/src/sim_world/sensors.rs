//! Robot kinematics and synthetic sensing.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use thiserror::Error;

use super::scene::{cast_subset, Scene};
use crate::apf_controller::{BodyCommand, CameraIntrinsics, CameraMount, DepthImage};
use crate::view_planner::wrap_angle;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub position: Vec3,
    /// Heading in `(-pi, pi]`.
    pub yaw: f64,
    pub radius: f64,
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("collision at ({x:.3}, {y:.3}, {z:.3}), clearance {clearance:.3} m")]
pub struct CollisionEvent {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub clearance: f64,
}

/// One explicit Euler step of the unicycle with independent climb rate.
pub fn step_kinematics(state: &RobotState, cmd: &BodyCommand, dt: f64) -> RobotState {
    assert!(dt > 0.0, "dt must be positive");
    let (s, c) = state.yaw.sin_cos();
    RobotState {
        position: state.position + Vec3::new(cmd.v_x * c * dt, cmd.v_x * s * dt, cmd.v_z * dt),
        yaw: wrap_angle(state.yaw + cmd.v_theta * dt),
        radius: state.radius,
    }
}

/// Collision when any primitive is closer to the center than the radius.
pub fn check_collision(scene: &Scene, state: &RobotState) -> Result<(), CollisionEvent> {
    let clearance = scene.distance(&state.position);
    if clearance < state.radius {
        Err(CollisionEvent {
            x: state.position.x,
            y: state.position.y,
            z: state.position.z,
            clearance,
        })
    } else {
        Ok(())
    }
}

/// Body-to-world rotation for a yaw angle.
pub fn yaw_rotation(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// First sampled pixel along an axis so the samples sit symmetrically.
fn first_sample(len: usize, stride: usize) -> usize {
    let n = (len + stride - 1) / stride;
    (len - 1 - (n - 1) * stride) / 2
}

/// Render a depth image by exact ray casting.
///
/// Only every `stride`-th pixel per axis is rendered; the rest stay invalid.
/// Depth is the camera-frame z of the hit; no hit within `max_depth` reads as
/// `max_depth`.
pub fn render_depth(
    state: &RobotState,
    intrinsics: &CameraIntrinsics,
    mount: &CameraMount,
    scene: &Scene,
    stride: usize,
) -> DepthImage {
    assert!(stride >= 1, "stride must be at least 1");
    let k = intrinsics;
    let r = yaw_rotation(state.yaw) * mount.rotation;
    let origin = state.position + yaw_rotation(state.yaw) * mount.translation;
    let corner = Vec3::new(
        (k.cx.max(k.width as f64 - 1.0 - k.cx) + 0.5) / k.fx,
        (k.cy.max(k.height as f64 - 1.0 - k.cy) + 0.5) / k.fy,
        1.0,
    );
    let reach = k.max_depth * corner.norm();
    let near: Vec<bool> = scene
        .primitives
        .iter()
        .map(|p| p.distance(&origin) <= reach)
        .collect();
    let mut img = DepthImage::new(k.clone(), mount.clone());
    let mut v = first_sample(k.height, stride);
    while v < k.height {
        let mut u = first_sample(k.width, stride);
        while u < k.width {
            let d_cam = Vec3::new((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy, 1.0);
            let d = r * d_cam;
            let depth = cast_subset(&scene.primitives, near.iter().copied(), &origin, &d, k.max_depth)
                .unwrap_or(k.max_depth);
            img.set(u, v, depth);
            u += stride;
        }
        v += stride;
    }
    img
}

/// Ray fan used for mapping, relative to the body heading.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingSensor {
    /// Full horizontal span; `2 pi` for a spinning sensor.
    pub h_fov: f64,
    /// Full vertical span.
    pub v_fov: f64,
    pub n_h: usize,
    pub n_v: usize,
    pub range: f64,
}

impl Default for MappingSensor {
    fn default() -> Self {
        Self {
            h_fov: 2.0 * PI,
            v_fov: 2.0 * 16.6f64.to_radians(),
            n_h: 64,
            n_v: 16,
            range: 20.0,
        }
    }
}

impl MappingSensor {
    /// Body-frame unit directions in a fixed order (elevation outer).
    pub fn directions(&self) -> Vec<Vec3> {
        self.directions_shifted(0.0, 0.0)
    }

    /// Directions with every azimuth moved by `du` and every elevation by
    /// `dv` angular steps. Varying the shift between scans fills the gaps
    /// that a fixed pattern leaves on distant surfaces.
    pub fn directions_shifted(&self, du: f64, dv: f64) -> Vec<Vec3> {
        let full_circle = self.h_fov >= 2.0 * PI - 1e-12;
        let mut out = Vec::with_capacity(self.n_h * self.n_v);
        for j in 0..self.n_v {
            let el = if self.n_v == 1 {
                0.0
            } else {
                -self.v_fov / 2.0 + self.v_fov * (j as f64 + dv) / (self.n_v - 1) as f64
            };
            for i in 0..self.n_h {
                let az = if full_circle {
                    -PI + 2.0 * PI * (i as f64 + 0.5 + du) / self.n_h as f64
                } else if self.n_h == 1 {
                    0.0
                } else {
                    -self.h_fov / 2.0 + self.h_fov * (i as f64 + du) / (self.n_h - 1) as f64
                };
                out.push(Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()));
            }
        }
        out
    }
}

/// Cameras used by the controller (and, for up/down, by mapping).
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRig {
    pub mapping: MappingSensor,
    pub camera: CameraIntrinsics,
    pub forward: CameraMount,
    pub up: CameraMount,
    pub down: CameraMount,
    /// Pixel stride for the controller's images.
    pub stride: usize,
    /// Pixel stride for the up/down images fed to the map.
    pub mapping_stride: usize,
}

impl SensorRig {
    pub fn new(mapping: MappingSensor, camera: CameraIntrinsics, stride: usize) -> Self {
        Self {
            mapping,
            camera,
            forward: CameraMount::forward(),
            up: CameraMount::up(),
            down: CameraMount::down(),
            stride,
            mapping_stride: 1,
        }
    }

    /// Forward, up and down images, in that order.
    pub fn render_all(&self, state: &RobotState, scene: &Scene) -> Vec<DepthImage> {
        [&self.forward, &self.up, &self.down]
            .into_iter()
            .map(|m| render_depth(state, &self.camera, m, scene, self.stride))
            .collect()
    }
}

/// One mapping ray. `hit` marks the endpoint as a surface return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorRay {
    pub origin: Vec3,
    pub endpoint: Vec3,
    pub hit: bool,
}

/// Hit endpoints are pushed this far past the surface so that a face lying
/// on a voxel boundary is attributed to the voxel behind it.
pub const HIT_NUDGE: f64 = 1e-6;

/// Mapping rays: the fan first, then the up and down camera pixels.
pub fn scan_mapping_sensor(state: &RobotState, rig: &SensorRig, scene: &Scene) -> Vec<SensorRay> {
    scan_mapping_sensor_shifted(state, rig, scene, (0.0, 0.0))
}

/// Same as [`scan_mapping_sensor`] with the fan pattern shifted by a
/// fraction of its angular step, see [`MappingSensor::directions_shifted`].
pub fn scan_mapping_sensor_shifted(
    state: &RobotState,
    rig: &SensorRig,
    scene: &Scene,
    shift: (f64, f64),
) -> Vec<SensorRay> {
    let origin = state.position;
    let rot = yaw_rotation(state.yaw);
    let m = &rig.mapping;
    let near: Vec<bool> = scene
        .primitives
        .iter()
        .map(|p| p.distance(&origin) <= m.range)
        .collect();
    let mut rays = Vec::new();
    for d in m.directions_shifted(shift.0, shift.1) {
        let dir = rot * d;
        let (t, hit) = match cast_subset(&scene.primitives, near.iter().copied(), &origin, &dir, m.range) {
            Some(t) => (t + HIT_NUDGE, true),
            None => (m.range, false),
        };
        rays.push(SensorRay {
            origin,
            endpoint: origin + t * dir,
            hit,
        });
    }
    for mount in [&rig.up, &rig.down] {
        let img = render_depth(state, &rig.camera, mount, scene, rig.mapping_stride);
        let k = &img.intrinsics;
        let r = rot * mount.rotation;
        for v in 0..k.height {
            for u in 0..k.width {
                let d = img.get(u, v);
                if !(d > 0.0) {
                    continue;
                }
                let p = r * crate::apf_controller::pixel_to_ray(u as f64, v as f64, d, k);
                let hit = d < k.max_depth;
                let nudge = if hit { p * (HIT_NUDGE / p.norm()) } else { Vec3::zeros() };
                rays.push(SensorRay {
                    origin,
                    endpoint: origin + p + nudge,
                    hit,
                });
            }
        }
    }
    rays
}
