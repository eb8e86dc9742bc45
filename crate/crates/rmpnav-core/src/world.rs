//! Deterministic 2D environment: segment worlds, raycast laser scanner,
//! collision detection and the closed-loop episode simulator.

use crate::config::Config;
use crate::planner::{self, OccupancyGrid, Path};
use crate::vehicle::{control_point_position, step, Command, VehicleGeometry, VehicleState};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("field `{0}`: {1}")]
    InvalidField(&'static str, String),
}

/// A wall or obstacle edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[[f64; 2]; 2]", from = "[[f64; 2]; 2]")]
pub struct Segment {
    pub a: Vector2<f64>,
    pub b: Vector2<f64>,
}

impl Segment {
    pub fn new(ax: f64, ay: f64, bx: f64, by: f64) -> Self {
        Segment { a: Vector2::new(ax, ay), b: Vector2::new(bx, by) }
    }
}

impl From<Segment> for [[f64; 2]; 2] {
    fn from(s: Segment) -> Self {
        [[s.a.x, s.a.y], [s.b.x, s.b.y]]
    }
}

impl From<[[f64; 2]; 2]> for Segment {
    fn from(v: [[f64; 2]; 2]) -> Self {
        Segment::new(v[0][0], v[0][1], v[1][0], v[1][1])
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[[f64; 2]; 2]", from = "[[f64; 2]; 2]")]
pub struct Aabb {
    pub min: Vector2<f64>,
    pub max: Vector2<f64>,
}

impl Aabb {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Aabb { min: Vector2::new(min_x, min_y), max: Vector2::new(max_x, max_y) }
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

impl From<Aabb> for [[f64; 2]; 2] {
    fn from(b: Aabb) -> Self {
        [[b.min.x, b.min.y], [b.max.x, b.max.y]]
    }
}

impl From<[[f64; 2]; 2]> for Aabb {
    fn from(v: [[f64; 2]; 2]) -> Self {
        Aabb::new(v[0][0], v[0][1], v[1][0], v[1][1])
    }
}

/// Walls and obstacle edges inside an axis-aligned boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub segments: Vec<Segment>,
    pub bounds: Aabb,
}

impl Environment {
    /// Boundary-only environment (four walls).
    pub fn empty_room(bounds: Aabb) -> Self {
        let (lo, hi) = (bounds.min, bounds.max);
        Environment {
            segments: vec![
                Segment::new(lo.x, lo.y, hi.x, lo.y),
                Segment::new(hi.x, lo.y, hi.x, hi.y),
                Segment::new(hi.x, hi.y, lo.x, hi.y),
                Segment::new(lo.x, hi.y, lo.x, lo.y),
            ],
            bounds,
        }
    }
}

/// A world plus one start pose and goal point; the unit of simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct Scenario {
    pub env: Environment,
    pub start: VehicleState,
    pub goal: Vector2<f64>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    seed: u64,
    bounds: [[f64; 2]; 2],
    segments: Vec<[[f64; 2]; 2]>,
    start: [f64; 5],
    goal: [f64; 2],
}

impl From<Scenario> for ScenarioFile {
    fn from(s: Scenario) -> Self {
        ScenarioFile {
            seed: s.seed,
            bounds: s.env.bounds.into(),
            segments: s.env.segments.iter().map(|&seg| seg.into()).collect(),
            start: s.start.into(),
            goal: [s.goal.x, s.goal.y],
        }
    }
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = WorldError;

    fn try_from(f: ScenarioFile) -> Result<Self, Self::Error> {
        if f.segments.is_empty() {
            return Err(WorldError::InvalidField("segments", "must be nonempty".into()));
        }
        let bounds: Aabb = f.bounds.into();
        if bounds.width() <= 0.0 || bounds.height() <= 0.0 {
            return Err(WorldError::InvalidField("bounds", "must have positive extent".into()));
        }
        let goal = Vector2::new(f.goal[0], f.goal[1]);
        if !bounds.contains(&goal) {
            return Err(WorldError::InvalidField("goal", "outside bounds".into()));
        }
        let tol = 1e-9;
        for (i, s) in f.segments.iter().enumerate() {
            for p in s {
                if p[0] < bounds.min.x - tol
                    || p[0] > bounds.max.x + tol
                    || p[1] < bounds.min.y - tol
                    || p[1] > bounds.max.y + tol
                {
                    return Err(WorldError::InvalidField(
                        "segments",
                        format!("segment {i} endpoint outside bounds"),
                    ));
                }
            }
        }
        let start: VehicleState = f.start.into();
        if !start.position().iter().chain(start.heading().iter()).all(|v| v.is_finite()) {
            return Err(WorldError::InvalidField("start", "must be finite".into()));
        }
        let env = Environment { segments: f.segments.into_iter().map(Into::into).collect(), bounds };
        Ok(Scenario { env, start, goal, seed: f.seed })
    }
}

/// Bearing/range pairs from the raycast scanner, bearings in body frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserScan {
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
    pub max_range: f64,
}

impl LaserScan {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Reduces the scan to at most `n_buckets` beams, keeping the
    /// nearest-range beam of each bucket so close obstacles survive.
    pub fn downsample(&self, n_buckets: usize) -> LaserScan {
        if n_buckets == 0 || self.len() <= n_buckets {
            return self.clone();
        }
        let mut angles = Vec::with_capacity(n_buckets);
        let mut ranges = Vec::with_capacity(n_buckets);
        for b in 0..n_buckets {
            let lo = b * self.len() / n_buckets;
            let hi = ((b + 1) * self.len() / n_buckets).max(lo + 1);
            let mut best = lo;
            for i in lo..hi {
                if self.ranges[i] < self.ranges[best] {
                    best = i;
                }
            }
            angles.push(self.angles[best]);
            ranges.push(self.ranges[best]);
        }
        LaserScan { angles, ranges, max_range: self.max_range }
    }
}

/// Raycast scanner parameters; the field of view is stored in degrees for
/// config readability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScannerParams {
    pub n_beams: usize,
    pub max_range: f64,
    pub fov_deg: f64,
}

impl ScannerParams {
    pub fn fov(&self) -> f64 {
        self.fov_deg.to_radians()
    }
}

impl Default for ScannerParams {
    fn default() -> Self {
        ScannerParams { n_beams: 240, max_range: 5.0, fov_deg: 240.0 }
    }
}

/// Episode-loop parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub dt: f64,
    pub max_steps: usize,
    pub goal_radius: f64,
    /// Stuck when the best path-distance to goal improves by less than
    /// `stuck_min_progress` over any window of this many seconds.
    pub stuck_window: f64,
    pub stuck_min_progress: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 0.04,
            max_steps: 1500,
            goal_radius: 0.5,
            stuck_window: 10.0,
            stuck_min_progress: 0.05,
        }
    }
}

fn cross2(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Distance along the ray to the nearest segment intersection, or
/// `max_range` if nothing is hit. Exact ray–segment arithmetic; a ray
/// collinear with a segment hits its nearest forward endpoint.
pub fn raycast(env: &Environment, origin: &Vector2<f64>, bearing: f64, max_range: f64) -> f64 {
    let dir = Vector2::new(bearing.cos(), bearing.sin());
    let mut best = max_range;
    for seg in &env.segments {
        let edge = seg.b - seg.a;
        let to_a = seg.a - origin;
        let denom = cross2(&dir, &edge);
        if denom.abs() > 1e-12 {
            let t = cross2(&to_a, &edge) / denom;
            let s = cross2(&to_a, &dir) / denom;
            if t >= 0.0 && (0.0..=1.0).contains(&s) && t < best {
                best = t;
            }
        } else if cross2(&to_a, &dir).abs() <= 1e-9 {
            // collinear: candidate hits are the segment endpoints ahead of us
            for tt in [to_a.dot(&dir), (seg.b - origin).dot(&dir)] {
                if tt >= 0.0 && tt < best {
                    best = tt;
                }
            }
        }
    }
    best
}

/// Casts `n_beams` evenly spaced over the field of view around the heading,
/// from the head control point.
pub fn scan(
    env: &Environment,
    state: &VehicleState,
    geom: &VehicleGeometry,
    sp: &ScannerParams,
) -> LaserScan {
    assert!(sp.n_beams >= 3, "need at least 3 beams");
    let mount = control_point_position(state, geom.head());
    let fov = sp.fov();
    let mut angles = Vec::with_capacity(sp.n_beams);
    let mut ranges = Vec::with_capacity(sp.n_beams);
    for i in 0..sp.n_beams {
        let ang = -fov / 2.0 + fov * i as f64 / (sp.n_beams - 1) as f64;
        angles.push(ang);
        ranges.push(raycast(env, &mount, state.theta + ang, sp.max_range));
    }
    LaserScan { angles, ranges, max_range: sp.max_range }
}

/// World coordinates of every beam that hit something; max-range beams are
/// dropped.
pub fn scan_to_obstacle_points(
    scan: &LaserScan,
    state: &VehicleState,
    geom: &VehicleGeometry,
) -> Vec<Vector2<f64>> {
    let mount = control_point_position(state, geom.head());
    scan.angles
        .iter()
        .zip(&scan.ranges)
        .filter(|(_, &r)| r < scan.max_range)
        .map(|(&a, &r)| {
            let bearing = state.theta + a;
            mount + r * Vector2::new(bearing.cos(), bearing.sin())
        })
        .collect()
}

fn orient(a: &Vector2<f64>, b: &Vector2<f64>, c: &Vector2<f64>) -> f64 {
    cross2(&(b - a), &(c - a))
}

fn on_segment(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segment–segment intersection (touching counts).
pub fn segments_intersect(
    p1: &Vector2<f64>,
    p2: &Vector2<f64>,
    q1: &Vector2<f64>,
    q2: &Vector2<f64>,
) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// True iff the vehicle bounding box touches any wall segment.
pub fn collision(env: &Environment, state: &VehicleState, geom: &VehicleGeometry) -> bool {
    let corners = geom.corners(state);
    let rot_t = crate::vehicle::rotation(state.theta).transpose();
    let hl = geom.length / 2.0;
    let hw = geom.width / 2.0;
    for seg in &env.segments {
        // segment endpoint inside the box
        for p in [&seg.a, &seg.b] {
            let body = rot_t * (p - state.position());
            if body.x.abs() <= hl && body.y.abs() <= hw {
                return true;
            }
        }
        for i in 0..4 {
            let c1 = &corners[i];
            let c2 = &corners[(i + 1) % 4];
            if segments_intersect(c1, c2, &seg.a, &seg.b) {
                return true;
            }
        }
    }
    false
}

/// Episode outcome; exactly one per trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Reached,
    Collision,
    Stuck,
}

/// One timestamped simulation record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: VehicleState,
    pub cmd: Command,
}

/// The full episode record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub outcome: Outcome,
    pub solver_failures: usize,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn final_state(&self) -> &VehicleState {
        &self.samples.last().expect("trajectory has at least one sample").state
    }

    /// One JSON object per sample line, then a trailer line with the outcome.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("sample serializes"));
            out.push('\n');
        }
        out.push_str(
            &serde_json::json!({
                "outcome": self.outcome,
                "solver_failures": self.solver_failures,
            })
            .to_string(),
        );
        out.push('\n');
        out
    }
}

/// A command plus a flag for solver fallbacks, so episodes can record
/// numerical failures without aborting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlDecision {
    pub command: Command,
    pub solver_failed: bool,
}

impl ControlDecision {
    pub fn ok(command: Command) -> Self {
        ControlDecision { command, solver_failed: false }
    }

    pub fn coast() -> Self {
        ControlDecision { command: Command::COAST, solver_failed: true }
    }
}

/// Closed-loop policy: current state, scan and guidance waypoint to a
/// command.
pub trait Controller: Sync {
    fn command(
        &self,
        state: &VehicleState,
        scan: &LaserScan,
        waypoint: Vector2<f64>,
    ) -> ControlDecision;
}

impl<F> Controller for F
where
    F: Fn(&VehicleState, &LaserScan, Vector2<f64>) -> ControlDecision + Sync,
{
    fn command(
        &self,
        state: &VehicleState,
        scan: &LaserScan,
        waypoint: Vector2<f64>,
    ) -> ControlDecision {
        self(state, scan, waypoint)
    }
}

/// What the observer sees each control step.
pub struct StepObservation<'a> {
    pub t: f64,
    pub state: &'a VehicleState,
    pub scan: &'a LaserScan,
    pub waypoint: Vector2<f64>,
    pub decision: &'a ControlDecision,
}

struct Guidance {
    path: Path,
    /// remaining polyline length from waypoint i to the end
    tail: Vec<f64>,
}

impl Guidance {
    fn new(path: Path) -> Self {
        let n = path.waypoints.len();
        let mut tail = vec![0.0; n];
        for i in (0..n.saturating_sub(1)).rev() {
            tail[i] = tail[i + 1] + (path.waypoints[i + 1] - path.waypoints[i]).norm();
        }
        Guidance { path, tail }
    }

    fn remaining(&self, pos: &Vector2<f64>) -> f64 {
        self.path
            .waypoints
            .iter()
            .zip(&self.tail)
            .map(|(w, t)| (w - pos).norm() + t)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Runs one closed-loop episode: scan → waypoint → controller → step, until
/// the goal is reached, a collision occurs, or progress stalls.
/// Deterministic for a fixed scenario.
pub fn simulate_episode(scn: &Scenario, controller: &dyn Controller, cfg: &Config) -> Trajectory {
    simulate_episode_observed(scn, controller, cfg, &mut |_| {})
}

/// As [`simulate_episode`], invoking `observer` once per commanded step;
/// used by the imitation module to harvest expert labels.
pub fn simulate_episode_observed(
    scn: &Scenario,
    controller: &dyn Controller,
    cfg: &Config,
    observer: &mut dyn FnMut(&StepObservation),
) -> Trajectory {
    let geom = cfg.geometry();
    let grid = OccupancyGrid::rasterize(&scn.env, cfg.planner.resolution, cfg.planner.inflation(&geom));
    let guidance = grid
        .cell_of(&scn.start.position())
        .zip(grid.cell_of(&scn.goal))
        .and_then(|(s, g)| planner::astar(&grid, s, g))
        .map(Guidance::new);

    let remaining = |pos: &Vector2<f64>| match &guidance {
        Some(g) => g.remaining(pos),
        None => (scn.goal - pos).norm(),
    };

    let mut state = scn.start;
    let mut t = 0.0;
    let mut samples: Vec<Sample> = Vec::new();
    let mut solver_failures = 0;
    let mut best_progress = f64::INFINITY;
    let mut last_gain_t = 0.0;

    let outcome = loop {
        if (state.position() - scn.goal).norm() <= cfg.sim.goal_radius {
            samples.push(Sample { t, state, cmd: Command::COAST });
            break Outcome::Reached;
        }
        if collision(&scn.env, &state, &geom) {
            samples.push(Sample { t, state, cmd: Command::COAST });
            break Outcome::Collision;
        }
        if samples.len() >= cfg.sim.max_steps {
            samples.push(Sample { t, state, cmd: Command::COAST });
            break Outcome::Stuck;
        }
        let progress = remaining(&state.position());
        if progress <= best_progress - cfg.sim.stuck_min_progress {
            best_progress = progress;
            last_gain_t = t;
        }
        if t - last_gain_t > cfg.sim.stuck_window {
            samples.push(Sample { t, state, cmd: Command::COAST });
            break Outcome::Stuck;
        }

        let scan_now = scan(&scn.env, &state, &geom, &cfg.scanner);
        let waypoint = match &guidance {
            Some(g) => planner::furthest_visible_waypoint(&g.path, &state.position(), &scn.env),
            None => scn.goal,
        };
        let decision = controller.command(&state, &scan_now, waypoint);
        if decision.solver_failed {
            solver_failures += 1;
        }
        observer(&StepObservation {
            t,
            state: &state,
            scan: &scan_now,
            waypoint,
            decision: &decision,
        });
        samples.push(Sample { t, state, cmd: decision.command });
        state = step(&state, &decision.command, cfg.sim.dt, &cfg.vehicle);
        t += cfg.sim.dt;
    };

    Trajectory { samples, outcome, solver_failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::VehicleParams;
    use approx::assert_relative_eq;

    fn square_room(side: f64) -> Environment {
        Environment::empty_room(Aabb::new(0.0, 0.0, side, side))
    }

    #[test]
    fn raycast_perpendicular_wall() {
        let env = Environment {
            segments: vec![Segment::new(2.0, -1.0, 2.0, 1.0)],
            bounds: Aabb::new(-5.0, -5.0, 5.0, 5.0),
        };
        assert_eq!(raycast(&env, &Vector2::new(0.0, 0.0), 0.0, 5.0), 2.0);
    }

    #[test]
    fn raycast_miss_returns_max_range() {
        let env = Environment {
            segments: vec![Segment::new(2.0, 1.0, 2.0, 3.0)],
            bounds: Aabb::new(-5.0, -5.0, 5.0, 5.0),
        };
        assert_eq!(raycast(&env, &Vector2::new(0.0, 0.0), 0.0, 5.0), 5.0);
    }

    #[test]
    fn raycast_collinear_hits_nearest_endpoint() {
        // ray along +x, segment on the x axis from (3,0) to (4,0)
        let env = Environment {
            segments: vec![Segment::new(3.0, 0.0, 4.0, 0.0)],
            bounds: Aabb::new(-5.0, -5.0, 5.0, 5.0),
        };
        assert_eq!(raycast(&env, &Vector2::new(0.0, 0.0), 0.0, 5.0), 3.0);
        // origin inside the segment span: the far endpoint is the only
        // forward hit
        assert_eq!(raycast(&env, &Vector2::new(3.5, 0.0), 0.0, 5.0), 0.5);
    }

    #[test]
    fn scan_open_room_is_all_max_range() {
        let env = square_room(100.0);
        let geom = VehicleGeometry::standard(&VehicleParams::default(), 2.0);
        let state = VehicleState::at_pose(50.0, 50.0, 0.3);
        let s = scan(&env, &state, &geom, &ScannerParams::default());
        assert_eq!(s.len(), 240);
        assert!(s.ranges.iter().all(|&r| r == 5.0));
    }

    #[test]
    fn scan_square_room_symmetry() {
        let env = square_room(4.0);
        let geom = VehicleGeometry::standard(&VehicleParams::default(), 2.0);
        let state = VehicleState::at_pose(2.0, 2.0, 0.0);
        let sp = ScannerParams { n_beams: 241, max_range: 10.0, fov_deg: 240.0 };
        let s = scan(&env, &state, &geom, &sp);
        for i in 0..s.len() {
            let j = s.len() - 1 - i;
            assert_relative_eq!(s.angles[i], -s.angles[j], epsilon = 1e-12);
            assert_relative_eq!(s.ranges[i], s.ranges[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn scan_center_beam_matches_wall_distance() {
        let env = square_room(4.0);
        let geom = VehicleGeometry::standard(&VehicleParams::default(), 2.0);
        let state = VehicleState::at_pose(1.0, 2.0, 0.0);
        let sp = ScannerParams { n_beams: 241, max_range: 10.0, fov_deg: 240.0 };
        let s = scan(&env, &state, &geom, &sp);
        let mid = s.len() / 2;
        assert_eq!(s.angles[mid], 0.0);
        // scanner sits at the head point, 0.2 m ahead of the box centre
        let mount_x = 1.0 + geom.head().local.x;
        assert_relative_eq!(s.ranges[mid], 4.0 - mount_x, epsilon = 1e-12);
    }

    #[test]
    fn obstacle_points_empty_when_nothing_in_range() {
        let env = square_room(100.0);
        let geom = VehicleGeometry::standard(&VehicleParams::default(), 2.0);
        let state = VehicleState::at_pose(50.0, 50.0, 0.0);
        let s = scan(&env, &state, &geom, &ScannerParams::default());
        assert!(scan_to_obstacle_points(&s, &state, &geom).is_empty());
    }

    #[test]
    fn obstacle_points_single_hit_dead_ahead() {
        let geom = VehicleGeometry::standard(&VehicleParams::default(), 2.0);
        let state = VehicleState::at_pose(-geom.head().local.x, 0.0, 0.0);
        let s = LaserScan { angles: vec![0.0], ranges: vec![1.0], max_range: 5.0 };
        let pts = scan_to_obstacle_points(&s, &state, &geom);
        assert_eq!(pts.len(), 1);
        assert_relative_eq!(pts[0], Vector2::new(1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn obstacle_points_lie_on_segments() {
        let mut env = square_room(6.0);
        env.segments.push(Segment::new(2.5, 1.0, 4.0, 4.5));
        let geom = VehicleGeometry::standard(&VehicleParams::default(), 2.0);
        let state = VehicleState::at_pose(1.0, 2.0, 0.4);
        let s = scan(&env, &state, &geom, &ScannerParams::default());
        let pts = scan_to_obstacle_points(&s, &state, &geom);
        assert!(!pts.is_empty());
        for p in pts {
            // distance to the nearest segment should vanish
            let d = env
                .segments
                .iter()
                .map(|seg| {
                    let e = seg.b - seg.a;
                    let t = ((p - seg.a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
                    (p - (seg.a + t * e)).norm()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9, "scan point {p:?} off-wall by {d}");
        }
    }

    #[test]
    fn collision_cases() {
        let geom = VehicleGeometry::standard(&VehicleParams::default(), 2.0);
        let open = square_room(10.0);
        let state = VehicleState::at_pose(5.0, 5.0, 0.7);
        assert!(!collision(&open, &state, &geom));

        let mut through = square_room(10.0);
        through.segments.push(Segment::new(4.0, 5.0, 6.0, 5.0));
        assert!(collision(&through, &state, &geom));

        // wall exactly tangent to the top edge of an axis-aligned box
        let mut tangent = square_room(10.0);
        tangent.segments.push(Segment::new(4.0, 5.125, 6.0, 5.125));
        let axis_state = VehicleState::at_pose(5.0, 5.0, 0.0);
        assert!(collision(&tangent, &axis_state, &geom));
        // and 1 mm above it: clear
        let mut clear = square_room(10.0);
        clear.segments.push(Segment::new(4.0, 5.126, 6.0, 5.126));
        assert!(!collision(&clear, &axis_state, &geom));
    }

    #[test]
    fn scenario_json_round_trip() {
        let scn = Scenario {
            env: square_room(8.0),
            start: VehicleState::new(1.0, 2.0, 0.5, 0.0, 0.0),
            goal: Vector2::new(6.0, 6.0),
            seed: 42,
        };
        let text = serde_json::to_string_pretty(&scn).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(scn, back);
        // goal outside bounds is rejected with a field name
        let bad = text.replace("6.0,", "60.0,");
        let err = serde_json::from_str::<Scenario>(&bad).unwrap_err().to_string();
        assert!(err.contains("goal"), "error was: {err}");
    }

    #[test]
    fn trajectory_jsonl_has_trailer_line() {
        let traj = Trajectory {
            samples: vec![Sample {
                t: 0.0,
                state: VehicleState::at_pose(0.0, 0.0, 0.0),
                cmd: Command::COAST,
            }],
            outcome: Outcome::Reached,
            solver_failures: 0,
        };
        let text = traj.to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].contains("\"outcome\":\"reached\""));
    }
}
