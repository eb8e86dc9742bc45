use nalgebra::Vector2;
use rmpnav_core::config::Config;
use rmpnav_core::planner::{astar, OccupancyGrid};
use rmpnav_core::world::simulate_episode;
use rmpnav_core::worldgen::{derive_seed, generate_world, sample_scenario};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let world_seed: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(101);
    let mut cfg = Config::default();
    for kv in args.iter().skip(2) {
        let (k, v) = kv.split_once('=').unwrap();
        cfg.set_path(k, v).unwrap();
    }
    let geom = cfg.geometry();
    let expert = cfg.expert();
    let env = generate_world(world_seed, &cfg);
    let grid = OccupancyGrid::rasterize(&env, cfg.planner.resolution, cfg.planner.inflation(&geom));
    for e in 0..16u64 {
        let seed = derive_seed(derive_seed(42, world_seed), e);
        let Some(scn) = sample_scenario(&env, &grid, &cfg, seed, 3.0) else {
            println!("ep {e}: infeasible");
            continue;
        };
        let traj = simulate_episode(&scn, &expert, &cfg);
        let fin = traj.final_state();
        println!(
            "ep {e}: start=({:.2},{:.2},th{:.2}) goal=({:.2},{:.2}) -> {:?} t={:.1}s end=({:.2},{:.2}) v={:.2} dist={:.2}",
            scn.start.x, scn.start.y, scn.start.theta, scn.goal.x, scn.goal.y,
            traj.outcome, traj.duration(), fin.x, fin.y, fin.v,
            (Vector2::new(fin.x, fin.y) - scn.goal).norm()
        );
        let path = grid
            .cell_of(&scn.start.position())
            .zip(grid.cell_of(&scn.goal))
            .and_then(|(s, g)| astar(&grid, s, g))
            .map(|p| p.waypoints);
        let svg = rmpnav_core::svg::trajectory_svg(&scn.env, &traj, &scn.goal, cfg.sim.goal_radius, path.as_deref());
        std::fs::write(format!("/tmp/w{world_seed}_ep{e}.svg"), svg).unwrap();
    }
}
