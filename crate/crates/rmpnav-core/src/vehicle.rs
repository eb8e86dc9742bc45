//! Ackermann-steering vehicle model: control-point geometry, forward
//! kinematics and Jacobians, the kinematic command Jacobian, and time
//! integration.

use nalgebra::{Matrix2, SMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VehicleError {
    #[error("steering out of range")]
    SteeringOutOfRange,
}

/// Planar pose plus forward speed and steering angle.
/// `v` is signed; negative means reversing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 5]", from = "[f64; 5]")]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub xi: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, theta: f64, v: f64, xi: f64) -> Self {
        VehicleState { x, y, theta, v, xi }
    }

    pub fn at_pose(x: f64, y: f64, theta: f64) -> Self {
        VehicleState { x, y, theta, v: 0.0, xi: 0.0 }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vector2<f64> {
        Vector2::new(self.theta.cos(), self.theta.sin())
    }
}

impl From<VehicleState> for [f64; 5] {
    fn from(s: VehicleState) -> Self {
        [s.x, s.y, s.theta, s.v, s.xi]
    }
}

impl From<[f64; 5]> for VehicleState {
    fn from(a: [f64; 5]) -> Self {
        VehicleState { x: a[0], y: a[1], theta: a[2], v: a[3], xi: a[4] }
    }
}

/// Forward acceleration and steering velocity, the solved command pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", from = "[f64; 2]")]
pub struct Command {
    pub dv: f64,
    pub dxi: f64,
}

impl Command {
    pub const COAST: Command = Command { dv: 0.0, dxi: 0.0 };

    pub fn new(dv: f64, dxi: f64) -> Self {
        Command { dv, dxi }
    }

    pub fn clamped(&self, params: &VehicleParams) -> Command {
        Command {
            dv: self.dv.clamp(-params.dv_max, params.dv_max),
            dxi: self.dxi.clamp(-params.dxi_max, params.dxi_max),
        }
    }
}

impl From<Command> for [f64; 2] {
    fn from(c: Command) -> Self {
        [c.dv, c.dxi]
    }
}

impl From<[f64; 2]> for Command {
    fn from(a: [f64; 2]) -> Self {
        Command { dv: a[0], dxi: a[1] }
    }
}

/// Physical limits and dimensions, sized by default for a 1/10 RC car.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    pub length: f64,
    pub width: f64,
    pub wheelbase: f64,
    pub xi_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub dv_max: f64,
    pub dxi_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            length: 0.40,
            width: 0.25,
            wheelbase: 0.33,
            xi_max: 0.35,
            v_min: -1.5,
            v_max: 2.0,
            dv_max: 4.0,
            dxi_max: 4.0,
        }
    }
}

/// Role of a control point on the bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CpRole {
    Head,
    FrontLeft,
    FrontRight,
    Side,
    Rear,
}

/// A body-frame point on the vehicle bounding box (origin at the box centre,
/// x forward).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlPoint {
    pub local: Vector2<f64>,
    pub role: CpRole,
    pub accel_scale: f64,
}

impl ControlPoint {
    fn new(x: f64, y: f64, role: CpRole, accel_scale: f64) -> Self {
        ControlPoint { local: Vector2::new(x, y), role, accel_scale }
    }
}

/// Bounding box with 12 control points on its perimeter.
#[derive(Clone, Debug)]
pub struct VehicleGeometry {
    pub length: f64,
    pub width: f64,
    pub wheelbase: f64,
    pub control_points: Vec<ControlPoint>,
}

impl VehicleGeometry {
    /// 12 points: 3 front, 3 rear, 2 per side at x = ±l/4, plus the two side
    /// midpoints. `front_accel_scale` is stamped onto FrontLeft/FrontRight.
    pub fn standard(params: &VehicleParams, front_accel_scale: f64) -> Self {
        let hl = params.length / 2.0;
        let hw = params.width / 2.0;
        let ql = params.length / 4.0;
        let s = front_accel_scale;
        let control_points = vec![
            ControlPoint::new(hl, hw, CpRole::FrontLeft, s),
            ControlPoint::new(hl, 0.0, CpRole::Head, 1.0),
            ControlPoint::new(hl, -hw, CpRole::FrontRight, s),
            ControlPoint::new(ql, hw, CpRole::Side, 1.0),
            ControlPoint::new(ql, -hw, CpRole::Side, 1.0),
            ControlPoint::new(0.0, hw, CpRole::Side, 1.0),
            ControlPoint::new(0.0, -hw, CpRole::Side, 1.0),
            ControlPoint::new(-ql, hw, CpRole::Side, 1.0),
            ControlPoint::new(-ql, -hw, CpRole::Side, 1.0),
            ControlPoint::new(-hl, hw, CpRole::Rear, 1.0),
            ControlPoint::new(-hl, 0.0, CpRole::Rear, 1.0),
            ControlPoint::new(-hl, -hw, CpRole::Rear, 1.0),
        ];
        VehicleGeometry {
            length: params.length,
            width: params.width,
            wheelbase: params.wheelbase,
            control_points,
        }
    }

    pub fn head(&self) -> &ControlPoint {
        self.control_points
            .iter()
            .find(|cp| cp.role == CpRole::Head)
            .expect("geometry has a head control point")
    }

    /// Half diagonal of the bounding box; used as the planner inflation base.
    pub fn circumradius(&self) -> f64 {
        ((self.length / 2.0).powi(2) + (self.width / 2.0).powi(2)).sqrt()
    }

    /// Bounding-box corners in world frame, counter-clockwise.
    pub fn corners(&self, state: &VehicleState) -> [Vector2<f64>; 4] {
        let r = rotation(state.theta);
        let p = state.position();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        [
            p + r * Vector2::new(hl, hw),
            p + r * Vector2::new(-hl, hw),
            p + r * Vector2::new(-hl, -hw),
            p + r * Vector2::new(hl, -hw),
        ]
    }
}

pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// World position of a control point: `R(θ)·local + [x, y]`.
pub fn control_point_position(state: &VehicleState, cp: &ControlPoint) -> Vector2<f64> {
    rotation(state.theta) * cp.local + state.position()
}

/// Jacobian of the task map w.r.t. the pose `q = [x, y, θ]`.
pub fn task_jacobian(state: &VehicleState, cp: &ControlPoint) -> SMatrix<f64, 2, 3> {
    let (s, c) = state.theta.sin_cos();
    // third column is dR/dθ · local
    let dx = -s * cp.local.x - c * cp.local.y;
    let dy = c * cp.local.x - s * cp.local.y;
    SMatrix::<f64, 2, 3>::new(1.0, 0.0, dx, 0.0, 1.0, dy)
}

/// Kinematic slip angle of the mid-body bicycle model, `β = arctan(tan ξ / 2)`.
pub fn slip_angle(xi: f64) -> Result<f64, VehicleError> {
    if xi.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(VehicleError::SteeringOutOfRange);
    }
    Ok((xi.tan() / 2.0).atan())
}

/// Pose rates `(ẋ, ẏ, θ̇)` for the current speed and steering angle.
pub fn velocity_map(state: &VehicleState, wheelbase: f64) -> Result<Vector3<f64>, VehicleError> {
    let beta = slip_angle(state.xi)?;
    let (s, c) = state.theta.sin_cos();
    Ok(Vector3::new(state.v * c, state.v * s, state.v * (2.0 * beta).sin() / wheelbase))
}

/// Jacobian of the pose rates w.r.t. the command pair `(v, ξ)` at fixed pose.
pub fn kinematic_jacobian(
    state: &VehicleState,
    wheelbase: f64,
) -> Result<SMatrix<f64, 3, 2>, VehicleError> {
    let beta = slip_angle(state.xi)?;
    let (s, c) = state.theta.sin_cos();
    let s2b = (2.0 * beta).sin();
    let c2b = (2.0 * beta).cos();
    let cxi = state.xi.cos();
    let dtheta_dv = s2b / wheelbase;
    let dtheta_dxi = 4.0 * state.v * c2b / (wheelbase * (3.0 * cxi * cxi + 1.0));
    Ok(SMatrix::<f64, 3, 2>::new(c, 0.0, s, 0.0, dtheta_dv, dtheta_dxi))
}

/// World velocity of a control point under the current pose rates.
pub fn control_point_velocity(
    state: &VehicleState,
    cp: &ControlPoint,
    wheelbase: f64,
) -> Result<Vector2<f64>, VehicleError> {
    Ok(task_jacobian(state, cp) * velocity_map(state, wheelbase)?)
}

/// Semi-implicit Euler step: speed and steering are updated and clamped
/// first, then the pose advances with the updated pair.
pub fn step(state: &VehicleState, cmd: &Command, dt: f64, params: &VehicleParams) -> VehicleState {
    assert!(dt > 0.0 && dt <= 0.1, "dt out of range: {dt}");
    let v = (state.v + cmd.dv * dt).clamp(params.v_min, params.v_max);
    let xi = (state.xi + cmd.dxi * dt).clamp(-params.xi_max, params.xi_max);
    let updated = VehicleState { v, xi, ..*state };
    let qdot = velocity_map(&updated, params.wheelbase)
        .expect("clamped steering is within the kinematic range");
    VehicleState {
        x: state.x + qdot.x * dt,
        y: state.y + qdot.y * dt,
        theta: state.theta + qdot.z * dt,
        v,
        xi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn cp_at(x: f64, y: f64) -> ControlPoint {
        ControlPoint::new(x, y, CpRole::Side, 1.0)
    }

    #[test]
    fn position_identity_pose() {
        let s = VehicleState::at_pose(0.0, 0.0, 0.0);
        let p = control_point_position(&s, &cp_at(1.0, 0.0));
        assert_relative_eq!(p, nalgebra::Vector2::new(1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn position_quarter_turn() {
        let s = VehicleState::at_pose(0.0, 0.0, FRAC_PI_2);
        let p = control_point_position(&s, &cp_at(1.0, 0.0));
        assert_relative_eq!(p, nalgebra::Vector2::new(0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn position_hand_rotated() {
        // (1,1) rotated by 45° is (0, √2)
        let s = VehicleState::at_pose(2.0, 3.0, FRAC_PI_4);
        let p = control_point_position(&s, &cp_at(1.0, 1.0));
        assert_relative_eq!(p, nalgebra::Vector2::new(2.0, 3.0 + 2.0f64.sqrt()), epsilon = 1e-12);
    }

    #[test]
    fn task_jacobian_reference_point() {
        let s = VehicleState::at_pose(1.0, -2.0, 0.7);
        let j = task_jacobian(&s, &cp_at(0.0, 0.0));
        assert_eq!(j, SMatrix::<f64, 2, 3>::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn task_jacobian_third_column_at_zero_heading() {
        let s = VehicleState::at_pose(0.0, 0.0, 0.0);
        let j = task_jacobian(&s, &cp_at(1.0, 0.0));
        assert_relative_eq!(j[(0, 2)], 0.0, epsilon = 1e-15);
        assert_relative_eq!(j[(1, 2)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn task_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for _ in 0..200 {
            let cp = cp_at(rng.random_range(-0.3..0.3), rng.random_range(-0.2..0.2));
            let s = VehicleState::at_pose(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-PI..PI),
            );
            let j = task_jacobian(&s, &cp);
            for col in 0..3 {
                let mut lo = s;
                let mut hi = s;
                match col {
                    0 => {
                        lo.x -= h;
                        hi.x += h;
                    }
                    1 => {
                        lo.y -= h;
                        hi.y += h;
                    }
                    _ => {
                        lo.theta -= h;
                        hi.theta += h;
                    }
                }
                let diff =
                    (control_point_position(&hi, &cp) - control_point_position(&lo, &cp)) / (2.0 * h);
                assert!((diff.x - j[(0, col)]).abs() < 1e-5);
                assert!((diff.y - j[(1, col)]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn slip_angle_values() {
        assert_eq!(slip_angle(0.0).unwrap(), 0.0);
        assert_relative_eq!(slip_angle(FRAC_PI_4).unwrap(), 0.5f64.atan(), epsilon = 1e-15);
        let xi = 0.3;
        assert_eq!(slip_angle(-xi).unwrap(), -slip_angle(xi).unwrap());
        assert_eq!(slip_angle(FRAC_PI_2), Err(VehicleError::SteeringOutOfRange));
    }

    #[test]
    fn kinematic_jacobian_stationary_straight() {
        let s = VehicleState::new(0.0, 0.0, 0.0, 0.0, 0.0);
        let j = kinematic_jacobian(&s, 0.33).unwrap();
        assert_relative_eq!(j, SMatrix::<f64, 3, 2>::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn kinematic_jacobian_steering_rate_entry() {
        let s = VehicleState::new(0.0, 0.0, 0.0, 1.0, 0.0);
        let j = kinematic_jacobian(&s, 0.33).unwrap();
        assert_relative_eq!(j[(2, 1)], 1.0 / 0.33, epsilon = 1e-12);
    }

    #[test]
    fn kinematic_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let wheelbase = 0.33;
        let h = 1e-6;
        for _ in 0..200 {
            let s = VehicleState::new(
                0.0,
                0.0,
                rng.random_range(-PI..PI),
                rng.random_range(-1.5..2.0),
                rng.random_range(-0.35..0.35),
            );
            let j = kinematic_jacobian(&s, wheelbase).unwrap();
            let dv = {
                let mut lo = s;
                let mut hi = s;
                lo.v -= h;
                hi.v += h;
                (velocity_map(&hi, wheelbase).unwrap() - velocity_map(&lo, wheelbase).unwrap())
                    / (2.0 * h)
            };
            let dxi = {
                let mut lo = s;
                let mut hi = s;
                lo.xi -= h;
                hi.xi += h;
                (velocity_map(&hi, wheelbase).unwrap() - velocity_map(&lo, wheelbase).unwrap())
                    / (2.0 * h)
            };
            for row in 0..3 {
                assert!((dv[row] - j[(row, 0)]).abs() < 1e-5, "dv row {row}");
                assert!((dxi[row] - j[(row, 1)]).abs() < 1e-5, "dxi row {row}");
            }
        }
    }

    #[test]
    fn control_point_velocity_at_rest_is_zero() {
        let geom = VehicleGeometry::standard(&VehicleParams::default(), 2.0);
        let s = VehicleState::new(1.0, 2.0, 0.4, 0.0, 0.2);
        for cp in &geom.control_points {
            let vel = control_point_velocity(&s, cp, geom.wheelbase).unwrap();
            assert_eq!(vel, Vector2::zeros());
        }
    }

    #[test]
    fn control_point_velocity_straight_motion() {
        let s = VehicleState::new(0.0, 0.0, 0.0, 2.0, 0.0);
        let vel = control_point_velocity(&s, &cp_at(0.0, 0.0), 0.33).unwrap();
        assert_relative_eq!(vel, Vector2::new(2.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn control_point_velocity_matches_trajectory_differencing() {
        // constant speed and steering; compare against central differences of
        // integrated control-point positions
        let params = VehicleParams::default();
        let dt = 1e-5;
        let outer = cp_at(0.2, -0.125); // outside of a left turn
        let center = cp_at(0.0, 0.0);
        let mut s = VehicleState::new(0.0, 0.0, 0.1, 1.0, 0.3);
        let mut states = Vec::new();
        for _ in 0..3 {
            states.push(s);
            s = step(&s, &Command::COAST, dt, &params);
        }
        let mid = &states[1];
        for cp in [&outer, &center] {
            let fd = (control_point_position(&states[2], cp)
                - control_point_position(&states[0], cp))
                / (2.0 * dt);
            let analytic = control_point_velocity(mid, cp, params.wheelbase).unwrap();
            assert_relative_eq!(fd, analytic, epsilon = 1e-3);
        }
        let v_outer = control_point_velocity(mid, &outer, params.wheelbase).unwrap().norm();
        let v_center = control_point_velocity(mid, &center, params.wheelbase).unwrap().norm();
        assert!(v_outer > v_center, "outer point moves faster while turning");
    }

    #[test]
    fn step_equilibrium() {
        let params = VehicleParams::default();
        let s = VehicleState::new(1.0, 2.0, 0.3, 0.0, 0.1);
        assert_eq!(step(&s, &Command::COAST, 0.04, &params), s);
    }

    #[test]
    fn step_straight_line() {
        let params = VehicleParams::default();
        let s = VehicleState::new(0.0, 0.0, 0.0, 1.0, 0.0);
        let next = step(&s, &Command::COAST, 0.01, &params);
        assert_relative_eq!(next.x, 0.01, epsilon = 1e-15);
        assert_eq!(next.y, 0.0);
        assert_eq!(next.theta, 0.0);
    }

    #[test]
    fn step_circle_closure() {
        let params = VehicleParams::default();
        let dt = 1e-3;
        let xi = params.xi_max;
        let beta = slip_angle(xi).unwrap();
        let radius = params.wheelbase / (2.0 * beta).sin();
        let circumference = 2.0 * PI * radius;
        let mut s = VehicleState::new(0.0, 0.0, 0.0, 1.0, xi);
        let start = s.position();
        while s.theta < 2.0 * PI {
            s = step(&s, &Command::COAST, dt, &params);
        }
        // linear interpolation back to θ = 2π would be tighter; one step of
        // overshoot is already inside the budget
        assert!((s.position() - start).norm() < 1e-3 * circumference);
    }

    #[test]
    fn step_clamps_speed_and_steering() {
        let params = VehicleParams::default();
        let mut s = VehicleState::new(0.0, 0.0, 0.0, 1.9, 0.3);
        for _ in 0..100 {
            s = step(&s, &Command::new(10.0, 10.0), 0.04, &params);
            assert!(s.v <= params.v_max && s.v >= params.v_min);
            assert!(s.xi.abs() <= params.xi_max);
        }
        assert_eq!(s.v, params.v_max);
        assert_eq!(s.xi, params.xi_max);
    }

    #[test]
    fn velocity_map_has_no_lateral_component() {
        // the map is v·(cosθ, sinθ) by construction; spot-check the identity
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let s = VehicleState::new(
                0.0,
                0.0,
                rng.random_range(-PI..PI),
                rng.random_range(-1.5..2.0),
                rng.random_range(-0.35..0.35),
            );
            let qdot = velocity_map(&s, 0.33).unwrap();
            assert_eq!(qdot.x, s.v * s.theta.cos());
            assert_eq!(qdot.y, s.v * s.theta.sin());
        }
    }

    #[test]
    fn turning_circle_radius() {
        let params = VehicleParams::default();
        let xi = params.xi_max;
        let beta = slip_angle(xi).unwrap();
        let analytic = params.wheelbase / (2.0 * beta).sin();
        let dt = 1e-3;
        let mut s = VehicleState::new(0.0, 0.0, 0.0, 1.0, xi);
        let mut points = Vec::new();
        while s.theta < 2.0 * PI {
            points.push(s.position());
            s = step(&s, &Command::COAST, dt, &params);
        }
        let center = points.iter().sum::<Vector2<f64>>() / points.len() as f64;
        let radius = points.iter().map(|p| (p - center).norm()).sum::<f64>() / points.len() as f64;
        assert!((radius - analytic).abs() / analytic < 0.01, "radius {radius} vs {analytic}");
    }

    #[test]
    fn standard_geometry_roles() {
        let geom = VehicleGeometry::standard(&VehicleParams::default(), 2.0);
        assert_eq!(geom.control_points.len(), 12);
        let count = |role: CpRole| geom.control_points.iter().filter(|c| c.role == role).count();
        assert_eq!(count(CpRole::Head), 1);
        assert_eq!(count(CpRole::FrontLeft), 1);
        assert_eq!(count(CpRole::FrontRight), 1);
        assert_eq!(count(CpRole::Rear), 3);
        assert_eq!(count(CpRole::Side), 6);
        for cp in &geom.control_points {
            let scaled = matches!(cp.role, CpRole::FrontLeft | CpRole::FrontRight);
            assert_eq!(cp.accel_scale > 1.0, scaled);
            // every point sits on the bounding-box perimeter
            let on_x = (cp.local.x.abs() - geom.length / 2.0).abs() < 1e-12;
            let on_y = (cp.local.y.abs() - geom.width / 2.0).abs() < 1e-12;
            assert!(on_x || on_y);
        }
        assert_eq!(geom.head().local, Vector2::new(0.2, 0.0));
    }
}
