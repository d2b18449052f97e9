//! `explore`: run one exploration mission from a config file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use explore_core::fmm_planner::PlanReport;
use explore_core::mission::{MissionConfig, MissionLog, EXIT_CONFIG};
use explore_core::sim_world::{run_mission, MissionObserver};
use explore_core::voxel_map::{write_voxel_dump, MapSnapshot, VoxelGrid};

const EXIT_INTERNAL: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "explore", version, about = "Frontier exploration mission runner")]
struct Args {
    /// Mission config (`key value` per line).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the final map as a voxel dump.
    #[arg(long, value_name = "P")]
    export_map: Option<PathBuf>,
    /// Append each replan's path as `x y z` lines.
    #[arg(long, value_name = "P")]
    dump_path: Option<PathBuf>,
    /// Append each replan's goal poses as `x y z yaw gain` lines.
    #[arg(long, value_name = "P")]
    dump_goals: Option<PathBuf>,
    /// Append each replan's frontier as a voxel dump.
    #[arg(long, value_name = "P")]
    dump_frontier: Option<PathBuf>,
    /// Append each replan's frozen arrival times as `i j k T` lines.
    #[arg(long, value_name = "P")]
    dump_arrival_times: Option<PathBuf>,
    /// Write per-tick control rows as CSV.
    #[arg(long, value_name = "P")]
    log_control: Option<PathBuf>,
}

fn create(path: &Path) -> std::io::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes the per-replan dumps. Each replan starts with `# replan <n> <t>`.
#[derive(Default)]
struct Dumps {
    path: Option<BufWriter<File>>,
    goals: Option<BufWriter<File>>,
    frontier: Option<BufWriter<File>>,
    arrival: Option<BufWriter<File>>,
    final_map: Option<VoxelGrid>,
    error: Option<std::io::Error>,
}

impl Dumps {
    fn open(args: &Args) -> std::io::Result<Self> {
        let open = |p: &Option<PathBuf>| p.as_deref().map(create).transpose();
        Ok(Self {
            path: open(&args.dump_path)?,
            goals: open(&args.dump_goals)?,
            frontier: open(&args.dump_frontier)?,
            arrival: open(&args.dump_arrival_times)?,
            final_map: None,
            error: None,
        })
    }

    fn write_replan(&mut self, n: usize, t: f64, snapshot: &MapSnapshot, report: &PlanReport) -> std::io::Result<()> {
        if let Some(w) = &mut self.path {
            writeln!(w, "# replan {n} {t:.3}")?;
            if let Some(path) = report.path() {
                for p in &path.points {
                    writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
                }
            }
        }
        if let Some(w) = &mut self.goals {
            writeln!(w, "# replan {n} {t:.3}")?;
            for g in &report.goals {
                writeln!(w, "{} {} {} {} {}", g.position.x, g.position.y, g.position.z, g.yaw, g.gain)?;
            }
        }
        if let Some(w) = &mut self.frontier {
            writeln!(w, "# replan {n} {t:.3}")?;
            let entries = report
                .frontier
                .voxels
                .iter()
                .map(|&c| (c, snapshot.grid.occupancy_at(snapshot.geometry().linear(c))));
            write_voxel_dump(w, snapshot.geometry(), entries)?;
        }
        if let Some(w) = &mut self.arrival {
            writeln!(w, "# replan {n} {t:.3}")?;
            if let Some(field) = &report.arrival {
                for (c, time) in field.frozen_entries() {
                    writeln!(w, "{} {} {} {}", c.i, c.j, c.k, time)?;
                }
            }
        }
        Ok(())
    }

    fn finish(mut self) -> std::io::Result<Option<VoxelGrid>> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        for w in [&mut self.path, &mut self.goals, &mut self.frontier, &mut self.arrival]
            .into_iter()
            .flatten()
        {
            w.flush()?;
        }
        Ok(self.final_map)
    }
}

impl MissionObserver for Dumps {
    fn on_replan(&mut self, index: usize, t: f64, snapshot: &MapSnapshot, report: &PlanReport) {
        if self.error.is_none() {
            if let Err(e) = self.write_replan(index, t, snapshot, report) {
                self.error = Some(e);
            }
        }
    }

    fn on_finish(&mut self, map: &VoxelGrid) {
        self.final_map = Some(map.clone());
    }
}

fn control_csv(log: &MissionLog) -> String {
    let mut s = String::from("t,x,y,z,yaw,vx,vz,vtheta,urep,min_clearance\n");
    for r in &log.rows {
        s.push_str(&format!(
            "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.t, r.position.x, r.position.y, r.position.z, r.yaw, r.v_x, r.v_z, r.v_theta, r.u_rep, r.min_clearance
        ));
    }
    s
}

fn write_map(path: &Path, map: &VoxelGrid) -> std::io::Result<()> {
    let mut w = create(path)?;
    map.export(&mut w)?;
    w.flush()
}

fn write_artifacts(args: &Args, cfg: &MissionConfig, log: &MissionLog, map: Option<&VoxelGrid>, report: &str) -> std::io::Result<()> {
    if let Some(p) = &args.log_control {
        create(p)?.write_all(control_csv(log).as_bytes())?;
    }
    if let (Some(p), Some(map)) = (&args.export_map, map) {
        write_map(p, map)?;
    }
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("mission_log.csv"), log.to_csv())?;
        std::fs::write(dir.join("report.txt"), report)?;
        if let Some(map) = map {
            write_map(&dir.join("map.txt"), map)?;
        }
    }
    Ok(())
}

fn run(args: Args) -> u8 {
    let mut cfg = match MissionConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("explore: {e}");
            return EXIT_CONFIG as u8;
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let scene = match cfg.load_scene() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("explore: {e}");
            return EXIT_CONFIG as u8;
        }
    };
    let mut dumps = match Dumps::open(&args) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("explore: cannot open dump file: {e}");
            return EXIT_INTERNAL;
        }
    };

    let started = Instant::now();
    let log = run_mission(&scene, &cfg.mission_params(), cfg.seed, &mut dumps);
    let report = log.report(started.elapsed().as_secs_f64());
    print!("{report}");

    let written = dumps
        .finish()
        .and_then(|map| write_artifacts(&args, &cfg, &log, map.as_ref(), &report));
    if let Err(e) = written {
        eprintln!("explore: cannot write output: {e}");
        return EXIT_INTERNAL;
    }
    log.status.exit_code() as u8
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(run(args))
}
