use nalgebra::{SMatrix, Vector2};
use rmpnav_core::config::Config;
use rmpnav_core::policies::assemble;
use rmpnav_core::rmp::{pullback, resolve};
use rmpnav_core::vehicle::{kinematic_jacobian, task_jacobian, VehicleState};
use rmpnav_core::world::scan;
use rmpnav_core::worldgen::generate_world;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = Config::default();
    for kv in args.iter().skip(1) {
        let (k, v) = kv.split_once('=').unwrap();
        cfg.set_path(k, v).unwrap();
    }
    let geom = cfg.geometry();
    let env = generate_world(100, &cfg);
    let state = VehicleState::new(5.06, 2.20, 1.54, 0.01, 0.35);
    let s = scan(&env, &state, &geom, &cfg.scanner);
    let wp = Vector2::new(4.25, 3.55);
    let asm = assemble(&state, &s, &wp, &geom, &cfg.controller);
    let jk = kinematic_jacobian(&state, geom.wheelbase).unwrap();
    println!("kinematic J col_v = ({:.3},{:.3},{:.3}) col_xi = ({:.3},{:.3},{:.3})",
        jk[(0,0)], jk[(1,0)], jk[(2,0)], jk[(0,1)], jk[(1,1)], jk[(2,1)]);

    let n = asm.rmps.len();
    let mut total_w = SMatrix::<f64, 2, 2>::zeros();
    let mut total_b = nalgebra::Vector2::zeros();
    // categories: first 3 = goal, last = damper, middle = obstacles
    let mut cat_w = [SMatrix::<f64, 2, 2>::zeros(); 3];
    let mut cat_b = [nalgebra::Vector2::zeros(); 3];
    for (i, (rmp, cp)) in asm.rmps.iter().enumerate() {
        let cat = if i < 3 { 0 } else if i == n - 1 { 2 } else { 1 };
        let p = pullback(rmp, &(task_jacobian(&state, cp) * jk));
        cat_w[cat] += p.weight;
        cat_b[cat] += p.bias;
        total_w += p.weight;
        total_b += p.bias;
    }
    for (name, i) in [("goal", 0), ("obstacle", 1), ("damper", 2)] {
        println!(
            "{name:9} W=[[{:8.3},{:8.3}],[{:8.3},{:8.3}]] b=({:8.3},{:8.3})",
            cat_w[i][(0, 0)], cat_w[i][(0, 1)], cat_w[i][(1, 0)], cat_w[i][(1, 1)], cat_b[i].x, cat_b[i].y
        );
    }
    println!(
        "total     W=[[{:8.3},{:8.3}],[{:8.3},{:8.3}]] b=({:8.3},{:8.3})",
        total_w[(0, 0)], total_w[(0, 1)], total_w[(1, 0)], total_w[(1, 1)], total_b.x, total_b.y
    );
    let all: Vec<_> = asm.rmps.iter().map(|(rmp, cp)| pullback(rmp, &(task_jacobian(&state, cp) * jk))).collect();
    let q = resolve(&all, cfg.controller.solver_tol).unwrap();
    println!("resolved dv={:.4} dxi={:.4}", q.x, q.y);
    let goal_only: Vec<_> = all[..3].to_vec();
    let qg = resolve(&goal_only, cfg.controller.solver_tol).unwrap();
    println!("goal-only dv={:.4} dxi={:.4}", qg.x, qg.y);
    let no_damper: Vec<_> = all[..n - 1].to_vec();
    let qn = resolve(&no_damper, cfg.controller.solver_tol).unwrap();
    println!("no-damper dv={:.4} dxi={:.4}", qn.x, qn.y);
}
