//! Ground-truth world, robot kinematics, synthetic sensors and the mission
//! loop that ties mapping, planning and control together.

mod mission_loop;
mod scene;
pub mod scenes;
mod sensors;

pub use mission_loop::{
    fan_shift, reachable_free, run_local_scenario, run_mission, LocalRun, MissionObserver, MissionParams,
    plan_on_scene,
};
pub use scene::{Primitive, Scene, SceneError};
pub use sensors::{
    check_collision, render_depth, scan_mapping_sensor, scan_mapping_sensor_shifted, step_kinematics, yaw_rotation, CollisionEvent, MappingSensor,
    RobotState, SensorRay, SensorRig,
};
