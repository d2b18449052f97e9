//! Run the built-in maze once and print the summary.
//!
//! `cargo run --release -p explore-core --example maze_run -- [seed] [budget]`

use std::time::Instant;

use explore_core::sim_world::{run_mission, scenes};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let mut params = scenes::maze_params();
    if let Some(b) = args.next() {
        params.time_budget = b.parse().expect("budget");
    }
    let scene = scenes::box_maze();
    let t0 = Instant::now();
    let log = run_mission(&scene, &params, seed, &mut ());
    print!("{}", log.report(t0.elapsed().as_secs_f64()));
    match log.time_to_ratio(0.9) {
        Some(t) => println!("reached 0.9 at {t:.1} s"),
        None => println!("never reached 0.9"),
    }
}
