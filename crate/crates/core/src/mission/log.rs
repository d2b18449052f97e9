//! Per-tick mission log, CSV output and summary report.

use std::fmt::Write as _;

use crate::Vec3;

/// How a mission ended.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalStatus {
    /// The planner ran out of frontier (or of reachable goals).
    IdleComplete,
    Budget,
    Collision,
    Error(String),
}

impl TerminalStatus {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            TerminalStatus::IdleComplete => 0,
            TerminalStatus::Collision => 1,
            TerminalStatus::Budget => 2,
            TerminalStatus::Error(_) => 4,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TerminalStatus::IdleComplete => "idle_complete",
            TerminalStatus::Budget => "budget",
            TerminalStatus::Collision => "collision",
            TerminalStatus::Error(_) => "error",
        }
    }
}

/// Exit code for configuration problems detected before a run.
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRow {
    pub t: f64,
    pub position: Vec3,
    pub yaw: f64,
    pub v_x: f64,
    pub v_z: f64,
    pub v_theta: f64,
    /// Magnitude of the body-frame repulsion.
    pub u_rep: f64,
    /// Distance from the robot center to the nearest primitive.
    pub min_clearance: f64,
    pub explored_ratio: f64,
}

pub const CSV_HEADER: &str = "t,x,y,z,yaw,vx,vz,vtheta,urep,min_clearance,explored_ratio";

#[derive(Debug, Clone, PartialEq)]
pub struct MissionLog {
    pub rows: Vec<TickRow>,
    pub status: TerminalStatus,
    pub replans: usize,
}

impl MissionLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 96 + 64);
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(
                s,
                "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.t,
                r.position.x,
                r.position.y,
                r.position.z,
                r.yaw,
                r.v_x,
                r.v_z,
                r.v_theta,
                r.u_rep,
                r.min_clearance,
                r.explored_ratio
            )
            .unwrap();
        }
        s
    }

    /// Polyline length of the logged positions.
    pub fn distance_traveled(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| (w[1].position - w[0].position).norm())
            .sum()
    }

    pub fn final_ratio(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.explored_ratio)
    }

    pub fn min_clearance(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.min_clearance)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn duration(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }

    /// First logged time at which the explored ratio reached `level`.
    pub fn time_to_ratio(&self, level: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.explored_ratio >= level).map(|r| r.t)
    }

    /// Explored ratio sampled every `interval` seconds, plus the final row.
    pub fn ratio_table(&self, interval: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut next = 0.0;
        for r in &self.rows {
            if r.t + 1e-9 >= next {
                out.push((r.t, r.explored_ratio));
                next += interval;
            }
        }
        if let Some(last) = self.rows.last() {
            if out.last().map_or(true, |(t, _)| *t != last.t) {
                out.push((last.t, last.explored_ratio));
            }
        }
        out
    }

    /// Human-readable summary; `wall_clock` in seconds.
    pub fn report(&self, wall_clock: f64) -> String {
        let mut s = String::new();
        writeln!(s, "status            {}", self.status.label()).unwrap();
        if let TerminalStatus::Error(msg) = &self.status {
            writeln!(s, "error             {msg}").unwrap();
        }
        writeln!(s, "simulated time    {:.2} s", self.duration()).unwrap();
        writeln!(s, "distance traveled {:.2} m", self.distance_traveled()).unwrap();
        writeln!(s, "explored ratio    {:.4}", self.final_ratio()).unwrap();
        writeln!(s, "min clearance     {:.3} m", self.min_clearance()).unwrap();
        writeln!(s, "replans           {}", self.replans).unwrap();
        writeln!(s, "wall clock        {:.2} s", wall_clock).unwrap();
        writeln!(s, "# t explored_ratio").unwrap();
        for (t, r) in self.ratio_table(10.0) {
            writeln!(s, "{t:.1} {r:.4}").unwrap();
        }
        s
    }
}
