use rmpnav_core::config::Config;
use rmpnav_core::eval::{run_suite, NamedWorld};
use rmpnav_core::worldgen::generate_world;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let episodes: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(16);
    let mut cfg = Config::default();
    cfg.controller.goal.beta = 1.8;
    cfg.controller.obstacle.alpha = 1.6;
    cfg.controller.obstacle.beta = 0.05;
    cfg.controller.obstacle.gamma = 0.65;
    cfg.controller.obstacle.d_max = 1.4;
    cfg.controller.obstacle.w_scale = 0.0002;
    cfg.controller.obstacle.w_order = 2.5;
    cfg.controller.yaw_damping_gain = 0.2;
    cfg.planner.inflation_margin = 0.75;
    cfg.validate().unwrap();
    let mut results: Vec<(u64, usize, usize, usize, usize)> = Vec::new();
    for seed in 100..124u64 {
        let world = vec![NamedWorld { name: format!("g{seed}"), env: generate_world(seed, &cfg) }];
        let expert = cfg.expert();
        let r = run_suite(&world, episodes, &expert, "expert", &cfg, 42);
        let a = r.aggregate();
        println!("g{seed}: r{} c{} s{} i{}  walls={}", a.reached, a.collision, a.stuck, a.infeasible,
                 world[0].env.segments.len());
        results.push((seed, a.reached, a.collision, a.stuck, a.infeasible));
    }
    let total: usize = results.iter().map(|r| r.1).sum();
    let n: usize = results.iter().map(|r| r.1 + r.2 + r.3).sum();
    println!("aggregate reached {}/{} = {:.1}%", total, n, 100.0 * total as f64 / n as f64);
}
