//! Closed-loop mission: sense, map, plan, control, step.

use std::collections::VecDeque;

use super::scene::Scene;
use super::sensors::{check_collision, scan_mapping_sensor_shifted, step_kinematics, RobotState, SensorRig};
use crate::apf_controller::{control_step, ApfParams, BodyCommand, LookaheadTracker};
use crate::fmm_planner::{
    compute_speed, extract_path, fmm_full, plan, IdleReason, LookaheadPath, PlanError, PlanOutcome, PlanParams, PlanReport,
};
use crate::mission::{MissionLog, TerminalStatus, TickRow};
use crate::view_planner::wrap_angle;
use crate::voxel_map::{compute_esdf_from_mask, GridGeometry, MapSnapshot, OccupancyModel, VoxelGrid, VoxelIndex, NEIGHBORS_6};
use crate::{MissionRng, Vec3};
use rand::SeedableRng;

#[derive(Debug, Clone, PartialEq)]
pub struct MissionParams {
    pub voxel_size: f64,
    /// ESDF saturation distance, meters.
    pub truncation: f64,
    pub occupancy: OccupancyModel,
    pub plan: PlanParams,
    pub apf: ApfParams,
    pub rig: SensorRig,
    /// Control ticks per second.
    pub control_rate: f64,
    /// Mapping scans per second.
    pub sensor_rate: f64,
    /// Seconds between replans while following a path.
    pub replan_period: f64,
    /// Simulated seconds before the run is cut off.
    pub time_budget: f64,
    pub body_radius: f64,
    pub start: Vec3,
    pub start_yaw: f64,
    /// Distance to the path end that counts as arrival.
    pub arrival_radius: f64,
    /// Yaw error accepted when turning to face the goal's frontier.
    pub yaw_tolerance: f64,
    /// Consecutive idle replans (with frontier left) before giving up.
    pub max_idle_replans: usize,
}

/// Hooks for per-replan artifacts.
pub trait MissionObserver {
    fn on_replan(&mut self, _index: usize, _t: f64, _snapshot: &MapSnapshot, _report: &PlanReport) {}
    fn on_finish(&mut self, _map: &VoxelGrid) {}
}

impl MissionObserver for () {}

/// GT-free voxels 6-connected to `start` (including `start` if free).
pub fn reachable_free(geometry: &GridGeometry, occupied: &[bool], start: VoxelIndex) -> Vec<usize> {
    let mut out = Vec::new();
    if !geometry.contains(start) || occupied[geometry.linear(start)] {
        return out;
    }
    let mut seen = vec![false; geometry.len()];
    let mut queue = VecDeque::new();
    let s = geometry.linear(start);
    seen[s] = true;
    queue.push_back(s);
    while let Some(i) = queue.pop_front() {
        out.push(i);
        for n in geometry.neighbors(geometry.index_of(i), &NEIGHBORS_6) {
            let ni = geometry.linear(n);
            if !seen[ni] && !occupied[ni] {
                seen[ni] = true;
                queue.push_back(ni);
            }
        }
    }
    out.sort_unstable();
    out
}

enum Phase {
    Follow {
        path: LookaheadPath,
        tracker: LookaheadTracker,
        goal_yaw: f64,
    },
    Align {
        goal_yaw: f64,
    },
    Idle,
}

/// Run one exploration mission.
pub fn run_mission(
    scene: &Scene,
    params: &MissionParams,
    seed: u64,
    observer: &mut dyn MissionObserver,
) -> MissionLog {
    let mut rng = MissionRng::seed_from_u64(seed);
    let geometry = match scene.grid_geometry(params.voxel_size) {
        Ok(g) => g,
        Err(e) => return failed(format!("grid: {e}")),
    };
    let mut grid = match VoxelGrid::new(geometry.clone(), params.occupancy.clone()) {
        Ok(g) => g,
        Err(e) => return failed(format!("grid: {e}")),
    };
    let truth = scene.voxelize(&geometry);
    let start_voxel = geometry.nearest_voxel(&params.start);
    let reachable = reachable_free(&geometry, &truth, start_voxel);
    if reachable.is_empty() {
        return failed("start position is not in free space".into());
    }

    let dt = 1.0 / params.control_rate;
    let ticks_per_scan = ((params.control_rate / params.sensor_rate).round() as usize).max(1);
    let mut state = RobotState {
        position: params.start,
        yaw: wrap_angle(params.start_yaw),
        radius: params.body_radius,
    };
    let mut rows = Vec::new();
    let mut phase = Phase::Idle;
    let mut scans = 0usize;
    let mut replans = 0usize;
    let mut last_replan = f64::NEG_INFINITY;
    let mut replan_now = true;
    let mut idle_streak = 0usize;
    let mut ratio = 0.0;
    let mut status = None;

    for k in 0usize.. {
        let t = k as f64 * dt;

        if k % ticks_per_scan == 0 {
            let rays = scan_mapping_sensor_shifted(&state, &params.rig, scene, fan_shift(scans));
            if grid
                .integrate_scan(rays.iter().map(|r| (&r.origin, &r.endpoint, r.hit)))
                .is_err()
            {
                status = Some(TerminalStatus::Error("robot left the map".into()));
            }
            scans += 1;
            let free = reachable
                .iter()
                .filter(|&&i| grid.class_at(i) == crate::voxel_map::VoxelClass::Free)
                .count();
            ratio = free as f64 / reachable.len() as f64;
        }
        if status.is_some() {
            break;
        }

        let due = match phase {
            Phase::Follow { .. } | Phase::Idle => t - last_replan >= params.replan_period - 1e-9,
            Phase::Align { .. } => false,
        };
        if scans >= 2 && (replan_now || due) {
            replan_now = false;
            last_replan = t;
            let snapshot = grid.snapshot(replans as u64, params.truncation);
            let result = plan(&snapshot, &state.position, &params.plan, &mut rng);
            replans += 1;
            match result {
                Ok(report) => {
                    observer.on_replan(replans, t, &snapshot, &report);
                    match report.outcome {
                        PlanOutcome::Path { path, goal } => {
                            idle_streak = 0;
                            let goal_yaw = report.goals[goal].yaw;
                            phase = Phase::Follow {
                                tracker: LookaheadTracker::new(&path),
                                path,
                                goal_yaw,
                            };
                        }
                        PlanOutcome::Idle(IdleReason::Explored) => {
                            status = Some(TerminalStatus::IdleComplete);
                        }
                        PlanOutcome::Idle(_) => idle_streak += 1,
                    }
                }
                Err(crate::fmm_planner::PlanError::RobotInUnknownSpace) => {
                    status = Some(TerminalStatus::Error("robot in unknown space".into()));
                }
                Err(_) => idle_streak += 1,
            }
            if idle_streak >= params.max_idle_replans && matches!(phase, Phase::Idle) {
                status = Some(TerminalStatus::IdleComplete);
            }
        }

        let images = params.rig.render_all(&state, scene);
        let limits = &params.apf.limits;
        let (cmd, u_rep) = match &mut phase {
            Phase::Follow { path, tracker, goal_yaw } => {
                let target = tracker.advance(path, &state.position, params.apf.lookahead);
                let end = *path.points.last().unwrap();
                if (end - state.position).norm() <= params.arrival_radius {
                    let yaw = *goal_yaw;
                    phase = Phase::Align { goal_yaw: yaw };
                    let out = control_step(&images, &state.position, state.yaw, None, &params.apf);
                    (BodyCommand::default(), out.u_rep.norm())
                } else {
                    let out = control_step(&images, &state.position, state.yaw, Some(&target), &params.apf);
                    (out.command, out.u_rep.norm())
                }
            }
            Phase::Align { goal_yaw } => {
                let err = wrap_angle(*goal_yaw - state.yaw);
                let out = control_step(&images, &state.position, state.yaw, None, &params.apf);
                if err.abs() <= params.yaw_tolerance {
                    phase = Phase::Idle;
                    replan_now = true;
                    (BodyCommand::default(), out.u_rep.norm())
                } else {
                    let w = (2.0 * err).clamp(-limits.v_theta_max, limits.v_theta_max);
                    (BodyCommand { v_x: 0.0, v_z: 0.0, v_theta: w }, out.u_rep.norm())
                }
            }
            Phase::Idle => {
                let out = control_step(&images, &state.position, state.yaw, None, &params.apf);
                let spin = if scans >= 2 { 0.5 * limits.v_theta_max } else { 0.0 };
                (BodyCommand { v_x: 0.0, v_z: 0.0, v_theta: spin }, out.u_rep.norm())
            }
        };

        rows.push(TickRow {
            t,
            position: state.position,
            yaw: state.yaw,
            v_x: cmd.v_x,
            v_z: cmd.v_z,
            v_theta: cmd.v_theta,
            u_rep,
            min_clearance: scene.distance(&state.position),
            explored_ratio: ratio,
        });
        if status.is_some() {
            break;
        }

        state = step_kinematics(&state, &cmd, dt);
        if let Err(ev) = check_collision(scene, &state) {
            rows.push(TickRow {
                t: t + dt,
                position: state.position,
                yaw: state.yaw,
                v_x: 0.0,
                v_z: 0.0,
                v_theta: 0.0,
                u_rep,
                min_clearance: ev.clearance,
                explored_ratio: ratio,
            });
            status = Some(TerminalStatus::Collision);
            break;
        }
        if (k + 1) as f64 * dt >= params.time_budget - 1e-9 {
            status = Some(TerminalStatus::Budget);
            break;
        }
    }
    observer.on_finish(&grid);
    MissionLog {
        rows,
        status: status.unwrap_or(TerminalStatus::Budget),
        replans,
    }
}

/// Sub-step shift of the mapping fan for scan `n`: a 2D low-discrepancy
/// sequence in `[-0.5, 0.5)`, zero for the first scan.
pub fn fan_shift(n: usize) -> (f64, f64) {
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_3;
    let f = |a: f64| (n as f64 * a + 0.5).fract() - 0.5;
    (f(A1), f(A2))
}

fn failed(msg: String) -> MissionLog {
    MissionLog {
        rows: Vec::new(),
        status: TerminalStatus::Error(msg),
        replans: 0,
    }
}

/// Outcome of a scripted path-following run without mapping or planning.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRun {
    pub reached: bool,
    pub collided: bool,
    /// Smallest center-to-primitive distance over the run.
    pub min_clearance: f64,
    pub final_state: RobotState,
    pub duration: f64,
}

/// Path from `start` to `goal` planned on the scene's exact occupancy over
/// `g`, with the mission planner's speed field. Used to script the
/// local avoidance runs.
pub fn plan_on_scene(
    scene: &Scene,
    g: &GridGeometry,
    truncation: f64,
    e: f64,
    start: &Vec3,
    goal: &Vec3,
) -> Result<LookaheadPath, PlanError> {
    let occ = scene.voxelize(g);
    let esdf = compute_esdf_from_mask(g, &occ, truncation);
    let speed = compute_speed(&esdf, e);
    let traversable: Vec<bool> = occ.iter().map(|o| !o).collect();
    let field = fmm_full(g, &traversable, &speed, g.nearest_voxel(start));
    let mut path = extract_path(&field, goal)?;
    path.points[0] = *start;
    Ok(path)
}

/// Follow a fixed path with the potential-field controller until the robot
/// is within `goal_tolerance` of the path end, collides, or `budget`
/// seconds pass.
pub fn run_local_scenario(
    scene: &Scene,
    rig: &SensorRig,
    apf: &ApfParams,
    start: RobotState,
    path: &LookaheadPath,
    goal_tolerance: f64,
    control_rate: f64,
    budget: f64,
) -> LocalRun {
    let dt = 1.0 / control_rate;
    let goal = *path.points.last().expect("non-empty path");
    let mut tracker = LookaheadTracker::new(path);
    let mut state = start;
    let mut min_clearance = scene.distance(&state.position);
    let mut t = 0.0;
    let mut reached = (goal - state.position).norm() <= goal_tolerance;
    let mut collided = false;
    while !reached && t < budget {
        let images = rig.render_all(&state, scene);
        let target = tracker.advance(path, &state.position, apf.lookahead);
        let out = control_step(&images, &state.position, state.yaw, Some(&target), apf);
        state = step_kinematics(&state, &out.command, dt);
        t += dt;
        min_clearance = min_clearance.min(scene.distance(&state.position));
        if check_collision(scene, &state).is_err() {
            collided = true;
            break;
        }
        reached = (goal - state.position).norm() <= goal_tolerance;
    }
    LocalRun {
        reached,
        collided,
        min_clearance,
        final_state: state,
        duration: t,
    }
}
