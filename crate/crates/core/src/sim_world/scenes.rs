//! Built-in scenes: the box maze, rooms and the scripted avoidance setups.

use std::f64::consts::PI;

use super::scene::{Primitive, Scene};
use super::sensors::{MappingSensor, SensorRig};
use crate::apf_controller::{ApfParams, CameraIntrinsics};
use crate::fmm_planner::PlanParams;
use crate::voxel_map::OccupancyModel;
use crate::Vec3;

/// Wall and slab thickness of the built-in scenes.
pub const WALL: f64 = 0.2;

fn slab(lo: Vec3, hi: Vec3) -> Primitive {
    Primitive::Box {
        center: (lo + hi) / 2.0,
        size: hi - lo,
    }
}

/// Floor, ceiling and four outer walls around `[0, sx] x [0, sy] x [0, h]`.
pub fn walled_room(sx: f64, sy: f64, h: f64) -> Vec<Primitive> {
    let w = WALL;
    vec![
        slab(Vec3::new(-w, -w, -w), Vec3::new(sx + w, sy + w, 0.0)),
        slab(Vec3::new(-w, -w, h), Vec3::new(sx + w, sy + w, h + w)),
        slab(Vec3::new(-w, -w, 0.0), Vec3::new(0.0, sy + w, h)),
        slab(Vec3::new(sx, -w, 0.0), Vec3::new(sx + w, sy + w, h)),
        slab(Vec3::new(0.0, -w, 0.0), Vec3::new(sx, 0.0, h)),
        slab(Vec3::new(0.0, sy, 0.0), Vec3::new(sx, sy + w, h)),
    ]
}

/// At the default 0.2 m resolution the bounds put wall faces on planes of
/// voxel centers and floor and ceiling faces on voxel boundaries.
///
/// A wall voxel is then partly free, so the voxels along floor and wall
/// corners can all be seen from inside. Floor and ceiling voxels are fully
/// solid, so the long grazing rays of a level flight never pass through them.
fn room_bounds(sx: f64, sy: f64, h: f64) -> (Vec3, Vec3) {
    let dz = 0.1;
    (
        Vec3::new(-WALL, -WALL, -WALL - dz),
        Vec3::new(sx + WALL, sy + WALL, h + WALL + dz),
    )
}

/// Closed empty room of the given interior size.
pub fn empty_room(sx: f64, sy: f64, h: f64) -> Scene {
    let (lo, hi) = room_bounds(sx, sy, h);
    Scene::new(lo, hi, walled_room(sx, sy, h)).expect("room is valid")
}

/// A room with a closed `2 x 2 m` cell around `(cx, cy)`; a robot started
/// inside cannot reach the rest of the room.
pub fn boxed_in(cx: f64, cy: f64) -> Scene {
    let (sx, sy, h) = (8.0, 8.0, 3.0);
    let mut prims = walled_room(sx, sy, h);
    let (x0, x1, y0, y1) = (cx - 1.2, cx + 1.0, cy - 1.2, cy + 1.0);
    prims.push(slab(Vec3::new(x0, y0, 0.0), Vec3::new(x0 + WALL, y1 + WALL, h)));
    prims.push(slab(Vec3::new(x1, y0, 0.0), Vec3::new(x1 + WALL, y1 + WALL, h)));
    prims.push(slab(Vec3::new(x0, y0, 0.0), Vec3::new(x1 + WALL, y0 + WALL, h)));
    prims.push(slab(Vec3::new(x0, y1, 0.0), Vec3::new(x1 + WALL, y1 + WALL, h)));
    let (lo, hi) = room_bounds(sx, sy, h);
    Scene::new(lo, hi, prims).expect("scene is valid")
}

/// Maze cell size and count per side.
pub const MAZE_CELL: f64 = 4.0;
pub const MAZE_CELLS: usize = 5;
pub const MAZE_HEIGHT: f64 = 3.0;
/// Door opening width in internal walls.
pub const MAZE_DOOR: f64 = 2.0;

/// Internal wall segments left without a door. `(i, j)` in `MAZE_WALLS_X`
/// is the wall between cells `(i, j)` and `(i + 1, j)`; in `MAZE_WALLS_Y`
/// between `(i, j)` and `(i, j + 1)`.
const MAZE_WALLS_X: [(usize, usize); 10] = [
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 0),
    (2, 0),
    (2, 1),
    (2, 3),
    (2, 4),
    (3, 1),
    (3, 3),
];
const MAZE_WALLS_Y: [(usize, usize); 6] = [(1, 1), (1, 2), (1, 3), (2, 3), (3, 0), (3, 3)];

/// 20 x 20 x 3 m maze of 4 m cells. Every internal wall segment either is
/// closed or has a centered 2 m door. All faces lie on multiples of 0.2 m.
pub fn box_maze() -> Scene {
    let n = MAZE_CELLS;
    let c = MAZE_CELL;
    let h = MAZE_HEIGHT;
    let side = c * n as f64;
    let mut prims = walled_room(side, side, h);
    let margin = (c - MAZE_DOOR) / 2.0;
    // Walls perpendicular to x at x = c * (i + 1).
    for i in 0..n - 1 {
        let x = c * (i + 1) as f64;
        for j in 0..n {
            let y = c * j as f64;
            if MAZE_WALLS_X.contains(&(i, j)) {
                prims.push(slab(Vec3::new(x, y, 0.0), Vec3::new(x + WALL, y + c, h)));
            } else {
                prims.push(slab(Vec3::new(x, y, 0.0), Vec3::new(x + WALL, y + margin, h)));
                prims.push(slab(Vec3::new(x, y + c - margin, 0.0), Vec3::new(x + WALL, y + c, h)));
            }
        }
    }
    for j in 0..n - 1 {
        let y = c * (j + 1) as f64;
        for i in 0..n {
            let x = c * i as f64;
            if MAZE_WALLS_Y.contains(&(i, j)) {
                prims.push(slab(Vec3::new(x, y, 0.0), Vec3::new(x + c, y + WALL, h)));
            } else {
                prims.push(slab(Vec3::new(x, y, 0.0), Vec3::new(x + margin, y + WALL, h)));
                prims.push(slab(Vec3::new(x + c - margin, y, 0.0), Vec3::new(x + c, y + WALL, h)));
            }
        }
    }
    let (lo, hi) = room_bounds(side, side, h);
    Scene::new(lo, hi, prims).expect("maze is valid")
}

/// Start pose used for the maze: center of the corner cell, facing +x.
pub fn maze_start() -> (Vec3, f64) {
    (Vec3::new(2.0, 2.0, 1.5), 0.0)
}

/// Depth camera shared by all three mounts: 90 x 73.7 deg, 5 m.
///
/// At 40 x 32 pixels read every 4th pixel, a wall filling the view at 1 m
/// sums to roughly the default saturation level. Denser sampling raises the
/// floor and ceiling pull-back seen by the forward camera until the robot
/// cannot leave the center of a 4 m maze cell.
pub fn default_camera() -> CameraIntrinsics {
    CameraIntrinsics::from_fov(40, 32, PI / 2.0, 73.7f64.to_radians(), 5.0)
}

/// Forward-looking mapping fan with the camera's field of view and range.
pub fn camera_fan() -> MappingSensor {
    MappingSensor {
        h_fov: PI / 2.0,
        v_fov: 73.7f64.to_radians(),
        n_h: 64,
        n_v: 48,
        range: 5.0,
    }
}

/// Mission parameters for the maze runs.
pub fn maze_params() -> super::MissionParams {
    let (start, start_yaw) = maze_start();
    super::MissionParams {
        voxel_size: 0.2,
        truncation: 4.0,
        occupancy: OccupancyModel::default(),
        plan: PlanParams::default(),
        apf: ApfParams::default(),
        rig: SensorRig::new(camera_fan(), default_camera(), 4),
        control_rate: 20.0,
        sensor_rate: 10.0,
        replan_period: 2.0,
        time_budget: 900.0,
        body_radius: 0.4,
        start,
        start_yaw,
        arrival_radius: 0.4,
        yaw_tolerance: 0.15,
        max_idle_replans: 3,
    }
}

/// Open scene with a single `1 x 1 x 3 m` box whose center sits `offset`
/// meters to the side of the x axis at `x = 3`.
pub fn box_obstacle(offset: f64) -> Scene {
    let prims = vec![Primitive::Box {
        center: Vec3::new(3.0, offset, 1.5),
        size: Vec3::new(1.0, 1.0, 3.0),
    }];
    Scene::new(Vec3::new(-2.0, -6.0, 0.0), Vec3::new(12.0, 6.0, 3.0), prims)
        .expect("scene is valid")
}

/// Open scene with one thin vertical pole of radius 0.05 m at `(3, offset)`.
pub fn thin_pole(offset: f64) -> Scene {
    let prims = vec![Primitive::Cylinder {
        cx: 3.0,
        cy: offset,
        radius: 0.05,
        height: 3.0,
    }];
    Scene::new(Vec3::new(-2.0, -6.0, 0.0), Vec3::new(12.0, 6.0, 3.0), prims)
        .expect("scene is valid")
}
