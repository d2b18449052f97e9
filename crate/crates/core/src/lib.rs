//! Two-layer exploration stack for a small aerial robot.
//!
//! The global layer finds frontier voxels in an occupancy map, samples one
//! view pose per frontier group, and picks the pose with the best gain per
//! unit of fast-marching travel time over a signed distance field. The local
//! layer follows the resulting path with a potential-field controller that
//! reads depth images directly. [`sim_world`] closes the loop in a simulated
//! voxel world and [`mission`] wraps it for command-line use.

pub mod apf_controller;
pub mod fmm_planner;
pub mod frontier;
pub mod mission;
pub mod sim_world;
pub mod view_planner;
pub mod voxel_map;

/// World-frame 3-vector in meters.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Seeded random stream used for every stochastic choice in a mission.
pub type MissionRng = rand_chacha::ChaCha8Rng;
