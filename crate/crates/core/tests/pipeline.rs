use explore_core::mission::TerminalStatus;
use explore_core::sim_world::{plan_on_scene, reachable_free, run_mission, scenes, MissionParams};
use explore_core::Vec3;

fn room_params(budget: f64) -> MissionParams {
    MissionParams {
        start: Vec3::new(2.0, 2.0, 1.5),
        start_yaw: 0.0,
        time_budget: budget,
        ..scenes::maze_params()
    }
}

#[test]
fn room_mission_explores_reachable_volume() {
    let scene = scenes::empty_room(4.0, 4.0, 3.0);
    let params = room_params(300.0);
    let g = scene.grid_geometry(params.voxel_size).unwrap();

    // Voxel centers strictly inside the walls: 0.2 .. 3.8 in x and y,
    // 0.1 .. 2.9 in z.
    let reach = reachable_free(&g, &scene.voxelize(&g), g.nearest_voxel(&params.start));
    assert_eq!(reach.len(), 19 * 19 * 15);

    let log = run_mission(&scene, &params, 11, &mut ());
    assert_eq!(log.status, TerminalStatus::IdleComplete);
    assert!(log.final_ratio() >= 0.95, "ratio {}", log.final_ratio());
    assert!(log.rows.windows(2).all(|w| w[1].explored_ratio >= w[0].explored_ratio));
    assert!(log.rows.iter().all(|r| r.min_clearance > params.body_radius));
}

#[test]
fn runs_repeat_exactly_per_seed() {
    let scene = scenes::empty_room(4.0, 4.0, 3.0);
    let params = room_params(40.0);
    let a = run_mission(&scene, &params, 5, &mut ());
    let b = run_mission(&scene, &params, 5, &mut ());
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.replans, b.replans);
}

#[test]
fn report_min_clearance_matches_rows() {
    let scene = scenes::empty_room(4.0, 4.0, 3.0);
    let log = run_mission(&scene, &room_params(20.0), 1, &mut ());
    let min = log.rows.iter().map(|r| r.min_clearance).fold(f64::INFINITY, f64::min);
    let report = log.report(0.0);
    let line = report.lines().find(|l| l.starts_with("min clearance")).unwrap();
    assert!(line.contains(&format!("{min:.3}")), "{line} vs {min}");
}

#[test]
fn planned_path_keeps_off_the_box() {
    let scene = scenes::box_obstacle(0.0);
    let g = scene.grid_geometry(0.2).unwrap();
    let start = Vec3::new(0.0, 0.0, 1.5);
    let goal = Vec3::new(5.5, 0.0, 1.5);
    let path = plan_on_scene(&scene, &g, 4.0, 0.6, &start, &goal).unwrap();
    assert_eq!(path.points[0], start);
    assert_eq!(*path.points.last().unwrap(), goal);
    assert!(path.points.iter().all(|p| scene.distance(p) > 0.4));
    // It has to go around: some point passes beside the box.
    assert!(path.points.iter().any(|p| p.x > 2.5 && p.x < 3.5 && p.y.abs() > 0.9));
}
