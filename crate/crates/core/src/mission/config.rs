//! `key value` mission configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::apf_controller::{ApfParams, CameraIntrinsics, VelocityLimits};
use crate::fmm_planner::PlanParams;
use crate::sim_world::{scenes, MappingSensor, MissionParams, Scene, SensorRig};
use crate::view_planner::{PoseSampling, SensorModel};
use crate::voxel_map::OccupancyModel;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
}

/// Where the scene comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneSource {
    Maze,
    /// Empty room with the given interior size.
    Room(f64, f64, f64),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionConfig {
    pub scene: SceneSource,
    /// Directory for the run log and final map; nothing is written if unset.
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub time_budget: f64,

    pub voxel_size: f64,
    pub truncation: f64,
    pub log_odds_hit: f64,
    pub log_odds_miss: f64,
    pub log_odds_min: f64,
    pub log_odds_max: f64,
    pub occ_thresh: f64,
    pub free_thresh: f64,

    pub d_safe: f64,
    pub n_c: usize,
    pub r_g: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub max_tries: usize,
    pub e: f64,

    pub k_rep: f64,
    pub u_rep_max: f64,
    pub max_depth: f64,
    pub lookahead: f64,
    pub v_x_max: f64,
    pub v_z_max: f64,
    pub v_theta_max: f64,

    pub camera_width: usize,
    pub camera_height: usize,
    /// Degrees.
    pub camera_h_fov: f64,
    /// Degrees.
    pub camera_v_fov: f64,
    pub pixel_stride: usize,

    /// Degrees; 360 for a spinning fan.
    pub mapping_h_fov: f64,
    /// Degrees.
    pub mapping_v_fov: f64,
    pub mapping_n_h: usize,
    pub mapping_n_v: usize,
    pub mapping_range: f64,

    pub control_rate: f64,
    pub sensor_rate: f64,
    pub replan_period: f64,
    pub body_radius: f64,
    pub start: Vec3,
    /// Degrees.
    pub start_yaw: f64,
    pub arrival_radius: f64,
    /// Degrees.
    pub yaw_tolerance: f64,
    pub max_idle_replans: usize,
}

impl Default for MissionConfig {
    fn default() -> Self {
        let occ = OccupancyModel::default();
        let plan = PlanParams::default();
        let apf = ApfParams::default();
        let mapping = scenes::camera_fan();
        let (start, start_yaw) = scenes::maze_start();
        Self {
            scene: SceneSource::Maze,
            output_dir: None,
            seed: 0,
            time_budget: 900.0,
            voxel_size: 0.2,
            truncation: 4.0,
            log_odds_hit: occ.log_odds_hit,
            log_odds_miss: occ.log_odds_miss,
            log_odds_min: occ.log_odds_min,
            log_odds_max: occ.log_odds_max,
            occ_thresh: occ.occ_thresh,
            free_thresh: occ.free_thresh,
            d_safe: plan.d_safe,
            n_c: plan.n_c,
            r_g: plan.r_g,
            r_min: plan.sampling.r_min,
            r_max: plan.sampling.r_max,
            max_tries: plan.sampling.max_tries,
            e: plan.e,
            k_rep: apf.k_rep,
            u_rep_max: apf.u_rep_max,
            max_depth: 5.0,
            lookahead: apf.lookahead,
            v_x_max: apf.limits.v_x_max,
            v_z_max: apf.limits.v_z_max,
            v_theta_max: apf.limits.v_theta_max,
            camera_width: 40,
            camera_height: 32,
            camera_h_fov: 90.0,
            camera_v_fov: 73.7,
            pixel_stride: 4,
            mapping_h_fov: mapping.h_fov.to_degrees(),
            mapping_v_fov: mapping.v_fov.to_degrees(),
            mapping_n_h: mapping.n_h,
            mapping_n_v: mapping.n_v,
            mapping_range: mapping.range,
            control_rate: 20.0,
            sensor_rate: 10.0,
            replan_period: 2.0,
            body_radius: 0.4,
            start,
            start_yaw: start_yaw.to_degrees(),
            arrival_radius: 0.4,
            yaw_tolerance: 0.15f64.to_degrees(),
            max_idle_replans: 3,
        }
    }
}

fn num<T: std::str::FromStr>(v: &str, line: usize, key: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::Parse {
        line,
        msg: format!("bad value {v:?} for {key}"),
    })
}

impl MissionConfig {
    /// Read and validate a config file. Relative scene paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let SceneSource::File(p) = &cfg.scene {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.scene = SceneSource::File(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    /// Parse and validate config text. Blank lines and `#` comments are
    /// ignored; keys not listed here are an error.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap().trim();
            if body.is_empty() {
                continue;
            }
            let mut parts = body.splitn(2, char::is_whitespace);
            let key = parts.next().unwrap();
            let value = parts.next().map(str::trim).unwrap_or("");
            if value.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!("missing value for {key}"),
                });
            }
            let v = value;
            match key {
                "scene" => {
                    c.scene = match v {
                        "maze" => SceneSource::Maze,
                        _ if v.starts_with("room") => {
                            let dims: Vec<f64> = v[4..]
                                .split_whitespace()
                                .map(|x| num(x, line, key))
                                .collect::<Result<_, _>>()?;
                            if dims.len() != 3 {
                                return Err(ConfigError::Parse {
                                    line,
                                    msg: "room needs three sizes".into(),
                                });
                            }
                            SceneSource::Room(dims[0], dims[1], dims[2])
                        }
                        _ => SceneSource::File(PathBuf::from(v)),
                    }
                }
                "output_dir" => c.output_dir = Some(PathBuf::from(v)),
                "seed" => c.seed = num(v, line, key)?,
                "time_budget" => c.time_budget = num(v, line, key)?,
                "voxel_size" => c.voxel_size = num(v, line, key)?,
                "truncation" => c.truncation = num(v, line, key)?,
                "log_odds_hit" => c.log_odds_hit = num(v, line, key)?,
                "log_odds_miss" => c.log_odds_miss = num(v, line, key)?,
                "log_odds_min" => c.log_odds_min = num(v, line, key)?,
                "log_odds_max" => c.log_odds_max = num(v, line, key)?,
                "occ_thresh" => c.occ_thresh = num(v, line, key)?,
                "free_thresh" => c.free_thresh = num(v, line, key)?,
                "d_safe" => c.d_safe = num(v, line, key)?,
                "n_c" => c.n_c = num(v, line, key)?,
                "r_g" => c.r_g = num(v, line, key)?,
                "r_min" => c.r_min = num(v, line, key)?,
                "r_max" => c.r_max = num(v, line, key)?,
                "max_tries" => c.max_tries = num(v, line, key)?,
                "e" => c.e = num(v, line, key)?,
                "k_rep" => c.k_rep = num(v, line, key)?,
                "u_rep_max" => c.u_rep_max = num(v, line, key)?,
                "max_depth" => c.max_depth = num(v, line, key)?,
                "lookahead" => c.lookahead = num(v, line, key)?,
                "v_x_max" => c.v_x_max = num(v, line, key)?,
                "v_z_max" => c.v_z_max = num(v, line, key)?,
                "v_theta_max" => c.v_theta_max = num(v, line, key)?,
                "camera_width" => c.camera_width = num(v, line, key)?,
                "camera_height" => c.camera_height = num(v, line, key)?,
                "camera_h_fov" => c.camera_h_fov = num(v, line, key)?,
                "camera_v_fov" => c.camera_v_fov = num(v, line, key)?,
                "pixel_stride" => c.pixel_stride = num(v, line, key)?,
                "mapping_h_fov" => c.mapping_h_fov = num(v, line, key)?,
                "mapping_v_fov" => c.mapping_v_fov = num(v, line, key)?,
                "mapping_n_h" => c.mapping_n_h = num(v, line, key)?,
                "mapping_n_v" => c.mapping_n_v = num(v, line, key)?,
                "mapping_range" => c.mapping_range = num(v, line, key)?,
                "control_rate" => c.control_rate = num(v, line, key)?,
                "sensor_rate" => c.sensor_rate = num(v, line, key)?,
                "replan_period" => c.replan_period = num(v, line, key)?,
                "body_radius" => c.body_radius = num(v, line, key)?,
                "start" => {
                    let xyz: Vec<f64> = v
                        .split_whitespace()
                        .map(|x| num(x, line, key))
                        .collect::<Result<_, _>>()?;
                    if xyz.len() != 3 {
                        return Err(ConfigError::Parse {
                            line,
                            msg: "start needs x y z".into(),
                        });
                    }
                    c.start = Vec3::new(xyz[0], xyz[1], xyz[2]);
                }
                "start_yaw" => c.start_yaw = num(v, line, key)?,
                "arrival_radius" => c.arrival_radius = num(v, line, key)?,
                "yaw_tolerance" => c.yaw_tolerance = num(v, line, key)?,
                "max_idle_replans" => c.max_idle_replans = num(v, line, key)?,
                _ => {
                    return Err(ConfigError::Parse {
                        line,
                        msg: format!("unknown key {key:?}"),
                    })
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("voxel_size", self.voxel_size),
            ("truncation", self.truncation),
            ("d_safe", self.d_safe),
            ("r_g", self.r_g),
            ("r_min", self.r_min),
            ("r_max", self.r_max),
            ("k_rep", self.k_rep),
            ("u_rep_max", self.u_rep_max),
            ("max_depth", self.max_depth),
            ("lookahead", self.lookahead),
            ("v_x_max", self.v_x_max),
            ("v_z_max", self.v_z_max),
            ("v_theta_max", self.v_theta_max),
            ("camera_h_fov", self.camera_h_fov),
            ("camera_v_fov", self.camera_v_fov),
            ("mapping_h_fov", self.mapping_h_fov),
            ("mapping_range", self.mapping_range),
            ("control_rate", self.control_rate),
            ("sensor_rate", self.sensor_rate),
            ("replan_period", self.replan_period),
            ("body_radius", self.body_radius),
            ("arrival_radius", self.arrival_radius),
            ("yaw_tolerance", self.yaw_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Validation(format!("{name} must be positive")));
            }
        }
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(ConfigError::Validation(msg.into())) };
        check(self.time_budget >= 0.0 && self.time_budget.is_finite(), "time_budget must be non-negative")?;
        check(self.e >= 0.0 && self.e.is_finite(), "e must be non-negative")?;
        check(self.r_min < self.r_max, "r_min must be below r_max")?;
        check(self.occ_thresh > self.free_thresh, "occ_thresh must exceed free_thresh")?;
        check(
            self.free_thresh > 0.0 && self.occ_thresh < 1.0,
            "thresholds must lie in (0, 1)",
        )?;
        check(self.log_odds_hit > 0.0, "log_odds_hit must be positive")?;
        check(self.log_odds_miss < 0.0, "log_odds_miss must be negative")?;
        check(self.log_odds_min < self.log_odds_max, "log_odds_min must be below log_odds_max")?;
        check(self.camera_h_fov < 180.0 && self.camera_v_fov < 180.0, "camera fov must be below 180 degrees")?;
        check(self.mapping_h_fov <= 360.0 && self.mapping_v_fov <= 180.0, "mapping fov out of range")?;
        check(self.camera_width > 0 && self.camera_height > 0, "camera size must be positive")?;
        check(self.pixel_stride > 0, "pixel_stride must be positive")?;
        check(self.mapping_n_h > 0 && self.mapping_n_v > 0, "mapping ray counts must be positive")?;
        check(self.max_tries > 0, "max_tries must be positive")?;
        check(self.d_safe >= self.body_radius, "d_safe must be at least body_radius")?;
        if let SceneSource::Room(x, y, z) = self.scene {
            check(x > 0.0 && y > 0.0 && z > 0.0, "room sizes must be positive")?;
        }
        Ok(())
    }

    pub fn camera(&self) -> CameraIntrinsics {
        CameraIntrinsics::from_fov(
            self.camera_width,
            self.camera_height,
            self.camera_h_fov.to_radians(),
            self.camera_v_fov.to_radians(),
            self.max_depth,
        )
    }

    pub fn mission_params(&self) -> MissionParams {
        let mapping = MappingSensor {
            h_fov: if self.mapping_h_fov >= 360.0 { 2.0 * PI } else { self.mapping_h_fov.to_radians() },
            v_fov: self.mapping_v_fov.to_radians(),
            n_h: self.mapping_n_h,
            n_v: self.mapping_n_v,
            range: self.mapping_range,
        };
        let sensor = SensorModel {
            h_fov: self.camera_h_fov.to_radians(),
            v_fov: self.camera_v_fov.to_radians(),
            range: self.max_depth,
        };
        let sampling = PoseSampling {
            r_min: self.r_min,
            r_max: self.r_max,
            alpha_fov: sensor.alpha_fov(),
            max_tries: self.max_tries,
        };
        MissionParams {
            voxel_size: self.voxel_size,
            truncation: self.truncation,
            occupancy: OccupancyModel {
                log_odds_hit: self.log_odds_hit,
                log_odds_miss: self.log_odds_miss,
                log_odds_min: self.log_odds_min,
                log_odds_max: self.log_odds_max,
                occ_thresh: self.occ_thresh,
                free_thresh: self.free_thresh,
            },
            plan: PlanParams {
                sensor,
                sampling,
                d_safe: self.d_safe,
                n_c: self.n_c,
                r_g: self.r_g,
                e: self.e,
            },
            apf: ApfParams {
                k_rep: self.k_rep,
                u_rep_max: self.u_rep_max,
                lookahead: self.lookahead,
                limits: VelocityLimits {
                    v_x_max: self.v_x_max,
                    v_z_max: self.v_z_max,
                    v_theta_max: self.v_theta_max,
                },
            },
            rig: SensorRig::new(mapping, self.camera(), self.pixel_stride),
            control_rate: self.control_rate,
            sensor_rate: self.sensor_rate,
            replan_period: self.replan_period,
            time_budget: self.time_budget,
            body_radius: self.body_radius,
            start: self.start,
            start_yaw: self.start_yaw.to_radians(),
            arrival_radius: self.arrival_radius,
            yaw_tolerance: self.yaw_tolerance.to_radians(),
            max_idle_replans: self.max_idle_replans,
        }
    }

    /// Build or load the configured scene.
    pub fn load_scene(&self) -> Result<Scene, ConfigError> {
        match &self.scene {
            SceneSource::Maze => Ok(scenes::box_maze()),
            SceneSource::Room(x, y, z) => Ok(scenes::empty_room(*x, *y, *z)),
            SceneSource::File(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.clone(),
                    source,
                })?;
                Scene::parse(&text).map_err(|e| ConfigError::Validation(format!("scene {}: {e}", p.display())))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(MissionConfig::parse("").unwrap(), MissionConfig::default());
        assert_eq!(MissionConfig::parse("# only a comment\n\n").unwrap(), MissionConfig::default());
    }

    #[test]
    fn inverted_radii_rejected() {
        let err = MissionConfig::parse("r_min 3.0\nr_max 2.0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation(m) if m.contains("r_min")));
    }

    #[test]
    fn unknown_key_names_line() {
        let err = MissionConfig::parse("seed 3\nfoo 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
        let err = MissionConfig::parse("seed\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }));
        let err = MissionConfig::parse("seed x\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }));
    }

    #[test]
    fn values_reach_mission_params() {
        let c = MissionConfig::parse("scene room 6 5 3\nk_rep 2\nstart 1 2 1.5\nmapping_h_fov 360\n").unwrap();
        assert_eq!(c.scene, SceneSource::Room(6.0, 5.0, 3.0));
        let p = c.mission_params();
        assert_eq!(p.apf.k_rep, 2.0);
        assert_eq!(p.start, Vec3::new(1.0, 2.0, 1.5));
        assert!((p.rig.mapping.h_fov - 2.0 * PI).abs() < 1e-12);
        assert!(MissionConfig::parse("occ_thresh 0.3\n").is_err());
    }
}
