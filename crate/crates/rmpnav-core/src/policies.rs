//! The expert controller: goal, obstacle and yaw-damping policies per
//! control point, assembled and resolved into a steering command.

use crate::rmp::{pullback, resolve, Metric2, Rmp2};
use crate::vehicle::{
    control_point_position, control_point_velocity, kinematic_jacobian, task_jacobian,
    ControlPoint, CpRole, VehicleGeometry, VehicleParams, VehicleState,
};
use crate::world::{scan_to_obstacle_points, ControlDecision, Controller, LaserScan};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("degenerate obstacle")]
    DegenerateObstacle,
}

/// Goal attractor gains. The induced cruise speed is `alpha/beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GoalParams {
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
}

impl Default for GoalParams {
    fn default() -> Self {
        GoalParams { alpha: 3.0, beta: 1.5, eps: 0.1 }
    }
}

/// Obstacle repulsor gains; `w(d) = w_scale / d^w_order` weights the metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObstacleParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub d_max: f64,
    pub w_scale: f64,
    pub w_order: f64,
}

impl Default for ObstacleParams {
    fn default() -> Self {
        ObstacleParams { alpha: 1.5, beta: 2.0, gamma: 1.0, d_max: 2.0, w_scale: 1.0, w_order: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub goal: GoalParams,
    pub obstacle: ObstacleParams,
    pub yaw_damping_gain: f64,
    pub front_accel_scale: f64,
    pub solver_tol: f64,
    /// The scan is downsampled to at most this many beams before the
    /// all-pairs obstacle RMP assembly.
    pub max_obstacle_beams: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            goal: GoalParams::default(),
            obstacle: ObstacleParams::default(),
            yaw_damping_gain: 0.5,
            front_accel_scale: 2.0,
            solver_tol: crate::rmp::DEFAULT_SOLVER_TOL,
            max_obstacle_beams: 60,
        }
    }
}

/// Attractor toward `goal` with velocity damping and the identity metric:
/// `f = α(g−x)/(‖g−x‖+ε) − βẋ`.
pub fn goal_rmp(
    pos: &Vector2<f64>,
    vel: &Vector2<f64>,
    goal: &Vector2<f64>,
    p: &GoalParams,
) -> Rmp2 {
    let delta = goal - pos;
    let f = p.alpha * delta / (delta.norm() + p.eps) - p.beta * vel;
    Rmp2::new(f, Metric2::IDENTITY)
}

/// Repulsor from an obstacle point with a rank-1 metric along the obstacle
/// direction. Returns the zero policy beyond `d_max`.
pub fn obstacle_rmp(
    pos: &Vector2<f64>,
    vel: &Vector2<f64>,
    obstacle: &Vector2<f64>,
    p: &ObstacleParams,
) -> Result<Rmp2, PolicyError> {
    let delta = obstacle - pos;
    let d = delta.norm();
    if d <= 1e-6 {
        return Err(PolicyError::DegenerateObstacle);
    }
    if d > p.d_max {
        return Ok(Rmp2::zero());
    }
    let u = delta / d;
    let magnitude = -(p.alpha / d) * (p.beta * u.dot(vel) + p.gamma);
    let f = magnitude * u;
    let w = p.w_scale / d.powf(p.w_order);
    Ok(Rmp2::new(f, Metric2::scaled_outer(&f, w)))
}

/// Damper on the body-lateral velocity of a point, with a rank-1 metric
/// along the lateral direction; applied to the head point it produces the
/// torque that suppresses yaw oscillation.
pub fn yaw_damping_from_velocity(theta: f64, point_vel: &Vector2<f64>, gain: f64) -> Rmp2 {
    let lateral = Vector2::new(-theta.sin(), theta.cos());
    let f = -gain * lateral.dot(point_vel) * lateral;
    Rmp2::new(f, Metric2::scaled_outer(&lateral, 1.0))
}

/// Yaw damper evaluated at the head control point under the current
/// kinematic velocity.
pub fn yaw_damping_rmp(
    state: &VehicleState,
    head: &ControlPoint,
    gain: f64,
    wheelbase: f64,
) -> Rmp2 {
    debug_assert_eq!(head.role, CpRole::Head);
    let vel = control_point_velocity(state, head, wheelbase).unwrap_or_else(|_| Vector2::zeros());
    yaw_damping_from_velocity(state.theta, &vel, gain)
}

/// The full policy set for one control step.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub rmps: Vec<(Rmp2, ControlPoint)>,
    /// Obstacle points dropped because they coincide with a control point.
    pub skipped_obstacles: usize,
}

/// Builds goal RMPs on the three front points, obstacle RMPs for every
/// in-range (scan point, control point) pair, and the yaw damper on the
/// head; front-corner accelerations are scaled up.
pub fn assemble(
    state: &VehicleState,
    scan: &LaserScan,
    goal_world: &Vector2<f64>,
    geom: &VehicleGeometry,
    cfg: &ControllerConfig,
) -> Assembled {
    let kinematics: Vec<(Vector2<f64>, Vector2<f64>)> = geom
        .control_points
        .iter()
        .map(|cp| {
            let pos = control_point_position(state, cp);
            let vel = control_point_velocity(state, cp, geom.wheelbase)
                .unwrap_or_else(|_| Vector2::zeros());
            (pos, vel)
        })
        .collect();

    let mut rmps = Vec::new();
    for (cp, (pos, vel)) in geom.control_points.iter().zip(&kinematics) {
        if matches!(cp.role, CpRole::FrontLeft | CpRole::Head | CpRole::FrontRight) {
            let mut rmp = goal_rmp(pos, vel, goal_world, &cfg.goal);
            rmp.accel *= cp.accel_scale;
            rmps.push((rmp, *cp));
        }
    }

    let obstacles =
        scan_to_obstacle_points(&scan.downsample(cfg.max_obstacle_beams), state, geom);
    let mut skipped = 0;
    for point in &obstacles {
        if kinematics.iter().any(|(pos, _)| (point - pos).norm() <= 1e-6) {
            skipped += 1;
            continue;
        }
        for (cp, (pos, vel)) in geom.control_points.iter().zip(&kinematics) {
            if (point - pos).norm() > cfg.obstacle.d_max {
                continue;
            }
            let mut rmp = obstacle_rmp(pos, vel, point, &cfg.obstacle)
                .expect("degenerate points were filtered above");
            rmp.accel *= cp.accel_scale;
            rmps.push((rmp, *cp));
        }
    }

    if cfg.yaw_damping_gain > 0.0 {
        let head = geom.head();
        rmps.push((yaw_damping_rmp(state, head, cfg.yaw_damping_gain, geom.wheelbase), *head));
    }

    Assembled { rmps, skipped_obstacles: skipped }
}

/// Pulls every policy through its composite task–kinematic Jacobian and
/// resolves the command-space optimum, clamped to the command limits.
/// Numerical failure degrades to a flagged coast command.
pub fn solve_control(
    state: &VehicleState,
    rmps: &[(Rmp2, ControlPoint)],
    geom: &VehicleGeometry,
    params: &VehicleParams,
    tol: f64,
) -> ControlDecision {
    let kinematic = match kinematic_jacobian(state, geom.wheelbase) {
        Ok(j) => j,
        Err(_) => return ControlDecision::coast(),
    };
    let pulled: Vec<_> = rmps
        .iter()
        .map(|(rmp, cp)| {
            let composite = task_jacobian(state, cp) * kinematic;
            pullback(rmp, &composite)
        })
        .collect();
    match resolve(&pulled, tol) {
        Ok(q) => ControlDecision::ok(crate::vehicle::Command::new(q.x, q.y).clamped(params)),
        Err(_) => ControlDecision::coast(),
    }
}

/// The expert: assembles policies from the live scan and resolves them each
/// control step.
#[derive(Clone, Debug)]
pub struct ExpertController {
    pub geom: VehicleGeometry,
    pub params: VehicleParams,
    pub cfg: ControllerConfig,
}

impl ExpertController {
    pub fn new(params: VehicleParams, cfg: ControllerConfig) -> Self {
        let geom = VehicleGeometry::standard(&params, cfg.front_accel_scale);
        ExpertController { geom, params, cfg }
    }

    pub fn assemble(
        &self,
        state: &VehicleState,
        scan: &LaserScan,
        waypoint: &Vector2<f64>,
    ) -> Assembled {
        assemble(state, scan, waypoint, &self.geom, &self.cfg)
    }
}

impl Controller for ExpertController {
    fn command(
        &self,
        state: &VehicleState,
        scan: &LaserScan,
        waypoint: Vector2<f64>,
    ) -> ControlDecision {
        let assembled = self.assemble(state, scan, &waypoint);
        solve_control(state, &assembled.rmps, &self.geom, &self.params, self.cfg.solver_tol)
    }
}
