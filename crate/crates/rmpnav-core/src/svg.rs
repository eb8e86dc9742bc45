//! Static SVG renderings of environments and trajectories: path polyline,
//! red start arrow, cross at the collision point.

use crate::world::{Environment, Outcome, Trajectory};
use nalgebra::Vector2;
use std::fmt::Write;

const SCALE: f64 = 60.0;
const PAD: f64 = 20.0;

struct Frame {
    min: Vector2<f64>,
    max_y: f64,
}

impl Frame {
    fn map(&self, p: &Vector2<f64>) -> (f64, f64) {
        ((p.x - self.min.x) * SCALE + PAD, (self.max_y - p.y) * SCALE + PAD)
    }
}

fn outcome_color(outcome: Outcome) -> &'static str {
    match outcome {
        Outcome::Reached => "#2a9d5c",
        Outcome::Collision => "#d33030",
        Outcome::Stuck => "#e69a10",
    }
}

fn polyline(out: &mut String, frame: &Frame, points: &[Vector2<f64>], style: &str) {
    if points.len() < 2 {
        return;
    }
    let coords: Vec<String> = points
        .iter()
        .map(|p| {
            let (x, y) = frame.map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    writeln!(out, r#"<polyline points="{}" {} fill="none"/>"#, coords.join(" "), style).unwrap();
}

fn start_arrow(out: &mut String, frame: &Frame, pos: &Vector2<f64>, theta: f64) {
    let tip = pos + 0.45 * Vector2::new(theta.cos(), theta.sin());
    let left = tip + 0.14 * Vector2::new((theta + 2.6).cos(), (theta + 2.6).sin());
    let right = tip + 0.14 * Vector2::new((theta - 2.6).cos(), (theta - 2.6).sin());
    let (x0, y0) = frame.map(pos);
    let (x1, y1) = frame.map(&tip);
    let (lx, ly) = frame.map(&left);
    let (rx, ry) = frame.map(&right);
    writeln!(
        out,
        r##"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="#d33030" stroke-width="2.5"/>"##
    )
    .unwrap();
    writeln!(
        out,
        r##"<polygon points="{x1:.2},{y1:.2} {lx:.2},{ly:.2} {rx:.2},{ry:.2}" fill="#d33030"/>"##
    )
    .unwrap();
}

fn cross(out: &mut String, frame: &Frame, pos: &Vector2<f64>) {
    let (x, y) = frame.map(pos);
    let r = 0.12 * SCALE;
    writeln!(
        out,
        r##"<path d="M {:.2} {:.2} L {:.2} {:.2} M {:.2} {:.2} L {:.2} {:.2}" stroke="#d33030" stroke-width="3"/>"##,
        x - r, y - r, x + r, y + r, x - r, y + r, x + r, y - r
    )
    .unwrap();
}

fn scene_open(env: &Environment) -> (String, Frame) {
    let frame = Frame { min: env.bounds.min, max_y: env.bounds.max.y };
    let w = env.bounds.width() * SCALE + 2.0 * PAD;
    let h = env.bounds.height() * SCALE + 2.0 * PAD;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    )
    .unwrap();
    writeln!(out, r##"<rect width="{w:.0}" height="{h:.0}" fill="#ffffff"/>"##).unwrap();
    for seg in &env.segments {
        let (x1, y1) = frame.map(&seg.a);
        let (x2, y2) = frame.map(&seg.b);
        writeln!(
            out,
            r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#222222" stroke-width="2"/>"##
        )
        .unwrap();
    }
    (out, frame)
}

fn draw_goal(out: &mut String, frame: &Frame, goal: &Vector2<f64>, goal_radius: f64) {
    let (gx, gy) = frame.map(goal);
    writeln!(
        out,
        r##"<circle cx="{gx:.2}" cy="{gy:.2}" r="{:.2}" stroke="#2a9d5c" stroke-width="2" fill="none"/>"##,
        goal_radius * SCALE
    )
    .unwrap();
    writeln!(out, r##"<circle cx="{gx:.2}" cy="{gy:.2}" r="3" fill="#2a9d5c"/>"##).unwrap();
}

fn draw_trajectory(out: &mut String, frame: &Frame, traj: &Trajectory) {
    let pts: Vec<Vector2<f64>> = traj.samples.iter().map(|s| s.state.position()).collect();
    let style = format!(r#"stroke="{}" stroke-width="2""#, outcome_color(traj.outcome));
    polyline(out, frame, &pts, &style);
    if let Some(first) = traj.samples.first() {
        start_arrow(out, frame, &first.state.position(), first.state.theta);
    }
    if traj.outcome == Outcome::Collision {
        cross(out, frame, &traj.final_state().position());
    }
}

/// One episode over its environment, with the guidance path if given.
pub fn trajectory_svg(
    env: &Environment,
    traj: &Trajectory,
    goal: &Vector2<f64>,
    goal_radius: f64,
    guidance: Option<&[Vector2<f64>]>,
) -> String {
    let (mut out, frame) = scene_open(env);
    if let Some(path) = guidance {
        polyline(
            &mut out,
            &frame,
            path,
            r##"stroke="#bbbbbb" stroke-width="1.5" stroke-dasharray="6,4""##,
        );
    }
    draw_goal(&mut out, &frame, goal, goal_radius);
    draw_trajectory(&mut out, &frame, traj);
    out.push_str("</svg>\n");
    out
}

/// Several episodes of one world overlaid, colour-coded by outcome.
pub fn gallery_svg(
    env: &Environment,
    episodes: &[(Vector2<f64>, Trajectory)],
    goal_radius: f64,
) -> String {
    let (mut out, frame) = scene_open(env);
    for (goal, traj) in episodes {
        draw_goal(&mut out, &frame, goal, goal_radius);
        draw_trajectory(&mut out, &frame, traj);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::{Command, VehicleState};
    use crate::world::{Aabb, Sample};

    #[test]
    fn svg_contains_expected_elements() {
        let env = Environment::empty_room(Aabb::new(0.0, 0.0, 4.0, 3.0));
        let traj = Trajectory {
            samples: vec![
                Sample { t: 0.0, state: VehicleState::at_pose(1.0, 1.0, 0.0), cmd: Command::COAST },
                Sample { t: 0.04, state: VehicleState::at_pose(1.2, 1.0, 0.0), cmd: Command::COAST },
            ],
            outcome: Outcome::Collision,
            solver_failures: 0,
        };
        let svg = trajectory_svg(&env, &traj, &Vector2::new(3.0, 2.0), 0.5, None);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"), "trajectory polyline");
        assert!(svg.contains("<polygon"), "start arrow head");
        assert!(svg.contains("M "), "collision cross path");
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
