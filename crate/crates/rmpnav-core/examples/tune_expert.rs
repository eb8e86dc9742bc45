use rmpnav_core::config::Config;
use rmpnav_core::eval::{run_suite, NamedWorld};
use rmpnav_core::world::{Aabb, Environment};
use rmpnav_core::worldgen::generate_world;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let episodes: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(12);
    let base = Config::default();
    let mut worlds = vec![
        NamedWorld { name: "open".into(), env: Environment::empty_room(Aabb::new(0.0, 0.0, 8.0, 6.0)) },
    ];
    for seed in 100..105u64 {
        worlds.push(NamedWorld { name: format!("g{seed}"), env: generate_world(seed, &base) });
    }

    let mut combos = Vec::new();
    for margin in [0.3, 0.4] {
        for (oa, og, ws) in [(1.2, 0.5, 0.0002), (1.6, 0.65, 0.0002), (1.8, 0.7, 0.0003)] {
            combos.push((3.0, 1.8, oa, 0.05, og, 1.2, ws, 2.5, 0.2, 60usize, margin));
        }
    }
    for (ga, gb, oa, ob, og, dm, ws, wo, yg, beams, margin) in combos {
        let mut cfg = base.clone();
        cfg.controller.goal.alpha = ga;
        cfg.controller.goal.beta = gb;
        cfg.controller.obstacle.alpha = oa;
        cfg.controller.obstacle.beta = ob;
        cfg.controller.obstacle.gamma = og;
        cfg.controller.obstacle.d_max = dm;
        cfg.controller.obstacle.w_scale = ws;
        cfg.controller.obstacle.w_order = wo;
        cfg.controller.yaw_damping_gain = yg;
        cfg.controller.max_obstacle_beams = beams;
        cfg.planner.inflation_margin = margin;
        cfg.validate().unwrap();
        let expert = cfg.expert();
        let result = run_suite(&worlds, episodes, &expert, "expert", &cfg, 42);
        let a = result.aggregate();
        let per: Vec<String> = result
            .per_world
            .iter()
            .map(|w| format!("{}:{}/{}/{}", &w.name, w.reached, w.collision, w.stuck))
            .collect();
        println!(
            "m{margin} ga{ga} oa{oa} ob{ob} og{og} dm{dm} ws{ws} wo{wo} -> R{:.0}% C{:.0}% S{:.0}% | {}",
            a.reached_pct(), a.collision_pct(), a.stuck_pct(), per.join(" ")
        );
    }
}
