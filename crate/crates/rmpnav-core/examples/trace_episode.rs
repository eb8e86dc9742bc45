use rmpnav_core::config::Config;
use rmpnav_core::planner::OccupancyGrid;
use rmpnav_core::world::simulate_episode_observed;
use rmpnav_core::worldgen::{derive_seed, generate_world, sample_scenario};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let world_seed: u64 = args[1].parse().unwrap();
    let ep: u64 = args[2].parse().unwrap();
    let mut cfg = Config::default();
    for kv in args.iter().skip(3) {
        let (k, v) = kv.split_once('=').unwrap();
        cfg.set_path(k, v).unwrap();
    }
    let geom = cfg.geometry();
    let expert = cfg.expert();
    let env = generate_world(world_seed, &cfg);
    let grid = OccupancyGrid::rasterize(&env, cfg.planner.resolution, cfg.planner.inflation(&geom));
    let seed = derive_seed(derive_seed(42, world_seed), ep);
    let scn = sample_scenario(&env, &grid, &cfg, seed, 3.0).expect("feasible");
    println!("start=({:.2},{:.2},th{:.2}) goal=({:.2},{:.2})", scn.start.x, scn.start.y, scn.start.theta, scn.goal.x, scn.goal.y);
    let mut step = 0usize;
    let traj = simulate_episode_observed(&scn, &expert, &cfg, &mut |obs| {
        if step % 10 == 0 {
            println!(
                "t={:5.2} pos=({:6.2},{:6.2}) th={:6.2} v={:5.2} xi={:5.2} wp=({:5.2},{:5.2}) cmd=({:5.2},{:5.2})",
                obs.t, obs.state.x, obs.state.y, obs.state.theta, obs.state.v, obs.state.xi,
                obs.waypoint.x, obs.waypoint.y, obs.decision.command.dv, obs.decision.command.dxi
            );
        }
        step += 1;
    });
    println!("outcome {:?} t={:.2}", traj.outcome, traj.duration());
}
