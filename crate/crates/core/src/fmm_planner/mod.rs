//! Global planner: frontier goals scored by utility over a fast-marching
//! arrival-time field, and the descent path to the best one.

mod fmm;
mod path;

use rand::Rng;
use thiserror::Error;

use crate::frontier::{cluster_contiguous, filter_clusters, find_frontier, group_greedy, FrontierSet};
use crate::view_planner::{compute_gain, sample_goal_pose, GoalPose, PoseSampling, SensorModel};
use crate::voxel_map::{MapSnapshot, VoxelClass, VoxelIndex};
use crate::Vec3;

pub use fmm::{
    compute_speed, fmm_exhaustive, fmm_expand, fmm_full, speed_from_distance, ArrivalTimeField,
    FmmOutcome, GoalEvaluation, GoalTarget, SpeedField, T_EPSILON,
};
pub use path::{extract_path, LookaheadPath, TimeSampler};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("robot is not within two voxels of seen free space")]
    RobotInUnknownSpace,
    #[error("goal voxel was never reached by the wavefront")]
    GoalNotReached,
    #[error("gradient descent stalled before reaching the source")]
    DescentStalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanParams {
    pub sensor: SensorModel,
    pub sampling: PoseSampling,
    pub d_safe: f64,
    /// Minimum frontier cluster size.
    pub n_c: usize,
    /// Frontier grouping radius, meters.
    pub r_g: f64,
    /// Speed field offset, meters.
    pub e: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            sensor: SensorModel::default(),
            sampling: PoseSampling::default(),
            d_safe: 0.6,
            n_c: 10,
            r_g: 1.5,
            e: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdleReason {
    /// No frontier cluster survived filtering.
    Explored,
    /// Every group ran out of sampling tries.
    NoAdmissibleGoal,
    /// No sampled goal is connected to the robot through seen free space.
    NoReachableGoal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutcome {
    Path { path: LookaheadPath, goal: usize },
    Idle(IdleReason),
}

/// Everything one planning cycle produced, for execution and for dumps.
#[derive(Debug, Clone)]
pub struct PlanReport {
    pub outcome: PlanOutcome,
    pub robot_voxel: VoxelIndex,
    pub frontier: FrontierSet,
    pub filtered: FrontierSet,
    pub goals: Vec<GoalPose>,
    pub arrival: Option<ArrivalTimeField>,
}

impl PlanReport {
    pub fn path(&self) -> Option<&LookaheadPath> {
        match &self.outcome {
            PlanOutcome::Path { path, .. } => Some(path),
            PlanOutcome::Idle(_) => None,
        }
    }

    pub fn best_goal(&self) -> Option<&GoalPose> {
        match &self.outcome {
            PlanOutcome::Path { goal, .. } => self.goals.get(*goal),
            PlanOutcome::Idle(_) => None,
        }
    }
}

/// The robot's voxel if it is seen free, else the nearest seen-free voxel
/// whose center is within two voxel sizes of the robot.
pub fn snap_robot_voxel(snapshot: &MapSnapshot, position: &Vec3) -> Result<VoxelIndex, PlanError> {
    let g = snapshot.geometry();
    let c = g.nearest_voxel(position);
    if snapshot.class(c) == VoxelClass::Free {
        return Ok(c);
    }
    let limit = 2.0 * g.voxel_size() + 1e-9;
    let mut best: Option<(f64, VoxelIndex)> = None;
    for dk in -2..=2 {
        for dj in -2..=2 {
            for di in -2..=2 {
                let n = c.offset([di, dj, dk]);
                if snapshot.class(n) != VoxelClass::Free {
                    continue;
                }
                let d = (g.center(n) - position).norm();
                if d <= limit && best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, n));
                }
            }
        }
    }
    best.map(|(_, n)| n).ok_or(PlanError::RobotInUnknownSpace)
}

/// One planning cycle on a map snapshot.
///
/// RNG draws: one per frontier group for the seed, then three per sampling
/// try, groups in creation order.
pub fn plan<R: Rng + ?Sized>(
    snapshot: &MapSnapshot,
    robot_position: &Vec3,
    params: &PlanParams,
    rng: &mut R,
) -> Result<PlanReport, PlanError> {
    let robot_voxel = snap_robot_voxel(snapshot, robot_position)?;
    let g = snapshot.geometry();
    let frontier = find_frontier(snapshot);
    let clusters = cluster_contiguous(&frontier);
    let filtered = filter_clusters(&clusters, params.n_c, snapshot.id);
    let mut report = PlanReport {
        outcome: PlanOutcome::Idle(IdleReason::Explored),
        robot_voxel,
        frontier,
        filtered,
        goals: Vec::new(),
        arrival: None,
    };
    if report.filtered.is_empty() {
        return Ok(report);
    }

    let groups = group_greedy(&report.filtered, g, params.r_g, rng);
    for group in &groups {
        if let Ok(mut pose) = sample_goal_pose(group, &params.sampling, snapshot, params.d_safe, rng) {
            pose.gain = compute_gain(&pose, &report.filtered, &params.sensor, snapshot);
            report.goals.push(pose);
        }
    }
    if report.goals.is_empty() {
        report.outcome = PlanOutcome::Idle(IdleReason::NoAdmissibleGoal);
        return Ok(report);
    }

    let speed = compute_speed(&snapshot.esdf, params.e);
    let traversable: Vec<bool> = snapshot.classes.iter().map(|c| *c == VoxelClass::Free).collect();
    let targets: Vec<GoalTarget> = report
        .goals
        .iter()
        .map(|p| GoalTarget {
            voxel: g.nearest_voxel(&p.position),
            gain: p.gain as f64,
        })
        .collect();
    let outcome = fmm_expand(g, &traversable, &speed, robot_voxel, &targets);
    for ev in &outcome.evaluated {
        let pose = &mut report.goals[ev.goal];
        pose.arrival_time = Some(ev.arrival_time);
        pose.utility = Some(ev.utility);
    }
    let field = outcome.field;
    let Some(best) = outcome.best else {
        report.arrival = Some(field);
        report.outcome = PlanOutcome::Idle(IdleReason::NoReachableGoal);
        return Ok(report);
    };
    let path = extract_path(&field, &report.goals[best].position)?;
    report.arrival = Some(field);
    report.outcome = PlanOutcome::Path { path, goal: best };
    Ok(report)
}
