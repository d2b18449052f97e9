//! Goal pose sampling around frontier groups and visibility gain.

use std::f64::consts::PI;

use rand::Rng;
use thiserror::Error;

use crate::frontier::{FrontierGroup, FrontierSet};
use crate::voxel_map::{trace_voxels, MapSnapshot, VoxelClass};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    /// Full horizontal field of view, radians.
    pub h_fov: f64,
    /// Full vertical field of view (`2 * alpha_fov`), radians.
    pub v_fov: f64,
    pub range: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            h_fov: PI / 2.0,
            v_fov: 73.7f64.to_radians(),
            range: 5.0,
        }
    }
}

impl SensorModel {
    pub fn alpha_fov(&self) -> f64 {
        self.v_fov / 2.0
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok_angle = |a: f64| a > 0.0 && a <= 2.0 * PI;
        if !ok_angle(self.h_fov) || !ok_angle(self.v_fov) {
            return Err("fields of view must lie in (0, 2pi]".into());
        }
        if !(self.range > 0.0) {
            return Err("sensor range must be positive".into());
        }
        Ok(())
    }
}

/// Polar sampling parameters around a group centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSampling {
    pub r_min: f64,
    pub r_max: f64,
    /// Half-angle of the elevation band, radians.
    pub alpha_fov: f64,
    pub max_tries: usize,
}

impl Default for PoseSampling {
    fn default() -> Self {
        Self {
            r_min: 1.0,
            r_max: 3.0,
            alpha_fov: SensorModel::default().alpha_fov(),
            max_tries: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalPose {
    pub position: Vec3,
    pub yaw: f64,
    /// Number of visible filtered frontier voxels.
    pub gain: usize,
    /// Arrival time at the pose voxel, once the wavefront reaches it.
    pub arrival_time: Option<f64>,
    pub utility: Option<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViewError {
    #[error("no admissible pose after {tries} samples")]
    SamplingExhausted { tries: usize },
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// The pose voxel exists, is free and keeps at least `d_safe` clearance.
pub fn check_admissible(p: &Vec3, snapshot: &MapSnapshot, d_safe: f64) -> bool {
    match snapshot.geometry().world_to_voxel(p) {
        Ok(c) => {
            snapshot.class(c) == VoxelClass::Free && snapshot.esdf.distance(c) >= d_safe
        }
        Err(_) => false,
    }
}

/// True when an occupied voxel lies strictly between `p` and `target`.
/// Unseen voxels do not block.
pub fn check_occlusion(p: &Vec3, target: &Vec3, snapshot: &MapSnapshot) -> bool {
    let g = snapshot.geometry();
    let first = g.nearest_voxel(p);
    let last = g.nearest_voxel(target);
    let clear = trace_voxels(g, p, target, |v| {
        v == first || v == last || snapshot.class(v) != VoxelClass::Occupied
    });
    !clear
}

/// Draw candidate poses around the group centroid until one is admissible
/// with a clear line of sight to the centroid.
///
/// Each try consumes three draws in order: range, azimuth, elevation.
pub fn sample_goal_pose<R: Rng + ?Sized>(
    group: &FrontierGroup,
    sampling: &PoseSampling,
    snapshot: &MapSnapshot,
    d_safe: f64,
    rng: &mut R,
) -> Result<GoalPose, ViewError> {
    assert!(sampling.r_min < sampling.r_max, "r_min must be below r_max");
    let centroid = group.centroid;
    for _ in 0..sampling.max_tries {
        let rho = rng.gen_range(sampling.r_min..sampling.r_max);
        let phi = rng.gen_range(0.0..2.0 * PI);
        let alpha = if sampling.alpha_fov > 0.0 {
            rng.gen_range(-sampling.alpha_fov..sampling.alpha_fov)
        } else {
            0.0
        };
        let dir = Vec3::new(alpha.cos() * phi.cos(), alpha.cos() * phi.sin(), alpha.sin());
        let position = centroid + rho * dir;
        if !check_admissible(&position, snapshot, d_safe) {
            continue;
        }
        if check_occlusion(&position, &centroid, snapshot) {
            continue;
        }
        let yaw = (centroid.y - position.y).atan2(centroid.x - position.x);
        return Ok(GoalPose {
            position,
            yaw,
            gain: 0,
            arrival_time: None,
            utility: None,
        });
    }
    Err(ViewError::SamplingExhausted {
        tries: sampling.max_tries,
    })
}

/// Whether a point is inside the sensor frustum of a pose (range, horizontal
/// and vertical field of view), ignoring occlusion.
pub fn in_field_of_view(position: &Vec3, yaw: f64, point: &Vec3, sensor: &SensorModel) -> bool {
    let v = point - position;
    let dist = v.norm();
    if dist > sensor.range {
        return false;
    }
    if dist == 0.0 {
        return true;
    }
    let horiz = v.x.hypot(v.y);
    let bearing = wrap_angle(v.y.atan2(v.x) - yaw);
    let elevation = v.z.atan2(horiz);
    (horiz == 0.0 || bearing.abs() <= sensor.h_fov / 2.0) && elevation.abs() <= sensor.v_fov / 2.0
}

/// Count filtered frontier voxels visible from the pose.
pub fn compute_gain(
    pose: &GoalPose,
    frontier: &FrontierSet,
    sensor: &SensorModel,
    snapshot: &MapSnapshot,
) -> usize {
    let g = snapshot.geometry();
    frontier
        .voxels
        .iter()
        .filter(|&&c| {
            let q = g.center(c);
            in_field_of_view(&pose.position, pose.yaw, &q, sensor)
                && !check_occlusion(&pose.position, &q, snapshot)
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel_map::{GridGeometry, OccupancyModel, VoxelGrid, VoxelIndex};
    use crate::MissionRng;
    use rand::SeedableRng;

    fn free_grid(n: usize) -> VoxelGrid {
        let g = GridGeometry::new([n, n, n], 0.2, Vec3::zeros()).unwrap();
        let mut grid = VoxelGrid::new(g.clone(), OccupancyModel::default()).unwrap();
        for idx in 0..g.len() {
            grid.set_occupancy(g.index_of(idx), 0.0).unwrap();
        }
        grid
    }

    fn group_at(c: Vec3) -> FrontierGroup {
        FrontierGroup {
            seed: VoxelIndex::new(0, 0, 0),
            members: vec![VoxelIndex::new(0, 0, 0)],
            centroid: c,
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn open_space_sample_construction() {
        let snap = free_grid(30).snapshot(0, 4.0);
        let c = Vec3::new(3.0, 3.0, 3.0);
        let sampling = PoseSampling {
            r_min: 1.0,
            r_max: 2.0,
            ..PoseSampling::default()
        };
        for seed in 0..20 {
            let mut rng = MissionRng::seed_from_u64(seed);
            let pose = sample_goal_pose(&group_at(c), &sampling, &snap, 0.6, &mut rng).unwrap();
            let off = pose.position - c;
            assert!((1.0..=2.0).contains(&off.norm()));
            let elev = off.z.atan2(off.x.hypot(off.y));
            assert!(elev.abs() <= sampling.alpha_fov + 1e-12);
            let bearing = (c.y - pose.position.y).atan2(c.x - pose.position.x);
            assert!(wrap_angle(pose.yaw - bearing).abs() < 1e-12);
            assert!(check_admissible(&pose.position, &snap, 0.6));
        }
        let draw = |s| {
            let mut rng = MissionRng::seed_from_u64(s);
            sample_goal_pose(&group_at(c), &sampling, &snap, 0.6, &mut rng).unwrap()
        };
        assert_eq!(draw(5), draw(5));
    }

    #[test]
    fn enclosed_centroid_exhausts_budget() {
        let g = GridGeometry::new([30, 30, 30], 0.2, Vec3::zeros()).unwrap();
        let mut grid = VoxelGrid::new(g.clone(), OccupancyModel::default()).unwrap();
        for idx in 0..g.len() {
            let c = g.index_of(idx);
            let near_center = [c.i, c.j, c.k].iter().all(|&v| (v - 15).abs() <= 1);
            grid.set_occupancy(c, if near_center { 0.0 } else { 1.0 }).unwrap();
        }
        let snap = grid.snapshot(0, 4.0);
        let mut rng = MissionRng::seed_from_u64(1);
        let r = sample_goal_pose(
            &group_at(Vec3::new(3.0, 3.0, 3.0)),
            &PoseSampling::default(),
            &snap,
            0.6,
            &mut rng,
        );
        assert_eq!(r, Err(ViewError::SamplingExhausted { tries: 100 }));
    }

    #[test]
    fn admissibility_examples() {
        let mut grid = free_grid(20);
        for j in 0..20 {
            for k in 0..20 {
                grid.set_occupancy(VoxelIndex::new(10, j, k), 1.0).unwrap();
            }
        }
        grid.set_occupancy(VoxelIndex::new(2, 2, 2), 0.5).unwrap();
        let snap = grid.snapshot(0, 4.0);
        assert!(!check_admissible(&Vec3::new(1.8, 2.0, 2.0), &snap, 0.6));
        assert!(check_admissible(&Vec3::new(1.0, 2.0, 2.0), &snap, 0.6));
        assert!(!check_admissible(&Vec3::new(0.4, 0.4, 0.4), &snap, 0.6));
        assert!(!check_admissible(&Vec3::new(-1.0, 2.0, 2.0), &snap, 0.0));
    }

    #[test]
    fn occlusion_examples() {
        let mut grid = free_grid(20);
        let a = Vec3::new(0.4, 1.0, 1.0);
        let b = Vec3::new(3.4, 1.0, 1.0);
        assert!(!check_occlusion(&a, &b, &grid.snapshot(0, 4.0)));
        grid.set_occupancy(VoxelIndex::new(9, 5, 5), 1.0).unwrap();
        assert!(check_occlusion(&a, &b, &grid.snapshot(0, 4.0)));
        // Endpoints themselves never occlude.
        let mut grid = free_grid(20);
        grid.set_occupancy(VoxelIndex::new(17, 5, 5), 1.0).unwrap();
        assert!(!check_occlusion(&a, &b, &grid.snapshot(0, 4.0)));
    }

    #[test]
    fn gain_examples() {
        let snap = free_grid(30).snapshot(0, 4.0);
        let pose = GoalPose {
            position: Vec3::new(1.0, 3.0, 3.0),
            yaw: 0.0,
            gain: 0,
            arrival_time: None,
            utility: None,
        };
        let sensor = SensorModel::default();
        let empty = FrontierSet { snapshot_id: 0, voxels: vec![] };
        assert_eq!(compute_gain(&pose, &empty, &sensor, &snap), 0);
        let ahead = FrontierSet {
            snapshot_id: 0,
            voxels: vec![VoxelIndex::new(5 + 12, 15, 15)],
        };
        assert_eq!(compute_gain(&pose, &ahead, &sensor, &snap), 1);
        let behind = FrontierSet {
            snapshot_id: 0,
            voxels: vec![VoxelIndex::new(1, 15, 15)],
        };
        assert_eq!(compute_gain(&pose, &behind, &sensor, &snap), 0);
    }

    #[test]
    fn gain_with_partial_wall_matches_exhaustive_check() {
        // 20 frontier voxels on a plane ahead, 8 of them shadowed by a wall.
        let mut grid = free_grid(40);
        let pose = GoalPose {
            position: Vec3::new(1.0, 4.0, 3.0),
            yaw: 0.0,
            gain: 0,
            arrival_time: None,
            utility: None,
        };
        let mut voxels = Vec::new();
        for j in 18..22 {
            for k in [13, 14, 15, 22, 23] {
                voxels.push(VoxelIndex::new(25, j, k));
            }
        }
        // Slab at x = 3.0 covering z >= 3.5; only the two top rows pass through it.
        for j in 0..40 {
            for k in 18..40 {
                grid.set_occupancy(VoxelIndex::new(15, j, k), 1.0).unwrap();
            }
        }
        let snap = grid.snapshot(0, 4.0);
        let frontier = FrontierSet { snapshot_id: 0, voxels };
        let sensor = SensorModel::default();

        // Oracle: dense-sample the segment and look for occupied voxels.
        let g = snap.geometry();
        let visible = frontier
            .voxels
            .iter()
            .filter(|&&c| {
                let q = g.center(c);
                let v = q - pose.position;
                let in_fov = v.norm() <= sensor.range
                    && v.y.atan2(v.x).abs() <= sensor.h_fov / 2.0
                    && v.z.atan2(v.x.hypot(v.y)).abs() <= sensor.v_fov / 2.0;
                let blocked = (1..1000).any(|n| {
                    let p = pose.position + v * (n as f64 / 1000.0);
                    let cv = g.nearest_voxel(&p);
                    cv != c && snap.class(cv) == VoxelClass::Occupied
                });
                in_fov && !blocked
            })
            .count();
        assert_eq!(visible, 12);
        assert_eq!(compute_gain(&pose, &frontier, &sensor, &snap), 12);
    }
}
