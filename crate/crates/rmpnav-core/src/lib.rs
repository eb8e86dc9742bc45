//! Riemannian-motion-policy navigation for Ackermann vehicles.
//!
//! The crate is organised around a small pipeline: per-control-point
//! acceleration policies with Riemannian metrics ([`rmp`]) are pulled back
//! through task-map and kinematic Jacobians ([`vehicle`]) and resolved in
//! closed form into steering commands ([`policies`]). A deterministic 2D
//! world with a raycast scanner ([`world`]), grid A* guidance ([`planner`]),
//! an imitation learner ([`imitation`]) and a batch evaluation harness
//! ([`eval`]) sit on top.

pub mod config;
pub mod eval;
pub mod imitation;
pub mod planner;
pub mod policies;
pub mod rmp;
pub mod svg;
pub mod vehicle;
pub mod world;
pub mod worldgen;

pub use config::Config;
pub use rmp::{Metric2, Rmp2};
pub use vehicle::{Command, ControlPoint, CpRole, VehicleGeometry, VehicleParams, VehicleState};
pub use world::{Environment, LaserScan, Outcome, Scenario, Trajectory};
