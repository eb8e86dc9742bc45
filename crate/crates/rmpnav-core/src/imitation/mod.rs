//! Imitation learning on the expert controller: scan+odometry features in,
//! either per-control-point RMPs (solved into commands analytically) or raw
//! control commands out.

pub mod mlp;

pub use mlp::{train, Mlp, TrainError, TrainOptions};

use crate::config::Config;
use crate::policies::solve_control;
use crate::rmp::{pseudoinverse, Metric2, Rmp2};
use crate::vehicle::{
    rotation, Command, ControlPoint, VehicleGeometry, VehicleParams, VehicleState,
};
use crate::world::{
    simulate_episode_observed, ControlDecision, Controller, LaserScan, Outcome, Scenario,
};
use crate::worldgen::derive_seed;
use nalgebra::{DMatrix, Vector2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const VALUES_PER_POINT: usize = 5;

/// How predicted metric triples are interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricDecode {
    /// Predict a lower-triangular factor (l11, l21, l22); the metric is its
    /// self-product, PSD by construction.
    CholeskyFactor,
    /// Predict the symmetric entries (a11, a12, a22) directly; no PSD
    /// guarantee. Kept for fidelity experiments.
    DirectSymmetric,
}

/// Network and data-generation hyperparameters; both student heads share
/// everything here except the output dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingParams {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub scan_buckets: usize,
    pub goal_dist_ref: f64,
    pub episodes: usize,
    pub max_samples: usize,
    pub randomize_initial_speed: bool,
    pub waypoint_rotation_samples: usize,
    pub dagger_ratios: Vec<f64>,
    pub metric_decode: MetricDecode,
}

impl Default for TrainingParams {
    fn default() -> Self {
        TrainingParams {
            hidden: vec![128, 128, 128],
            lr: 2e-3,
            momentum: 0.9,
            batch_size: 64,
            epochs: 30,
            scan_buckets: 60,
            goal_dist_ref: 30.0,
            episodes: 500,
            max_samples: 50_000,
            randomize_initial_speed: true,
            waypoint_rotation_samples: 1,
            dagger_ratios: vec![0.2, 0.5, 0.8],
            metric_decode: MetricDecode::CholeskyFactor,
        }
    }
}

impl TrainingParams {
    pub fn feature_dim(&self) -> usize {
        self.scan_buckets + 5
    }

    pub fn options(&self) -> TrainOptions {
        TrainOptions {
            lr: self.lr,
            momentum: self.momentum,
            batch_size: self.batch_size,
            epochs: self.epochs,
        }
    }
}

/// Which quantity a student predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudentHead {
    Rmp,
    Control,
}

/// Normalized observation: downsampled scan ranges, goal direction and
/// log-distance in body frame, and odometry. Every component lies in
/// [−1, 1].
pub fn features(
    scan: &LaserScan,
    state: &VehicleState,
    waypoint: &Vector2<f64>,
    tp: &TrainingParams,
    vp: &VehicleParams,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(tp.feature_dim());
    let ds = scan.downsample(tp.scan_buckets);
    for &r in &ds.ranges {
        out.push((r / ds.max_range).clamp(0.0, 1.0));
    }
    // short scans keep the feature layout by padding with max range
    out.resize(tp.scan_buckets, 1.0);

    let body = rotation(state.theta).transpose() * (waypoint - state.position());
    let d = body.norm();
    if d > 1e-9 {
        out.push(body.x / d);
        out.push(body.y / d);
    } else {
        out.push(0.0);
        out.push(0.0);
    }
    out.push(((1.0 + d).ln() / (1.0 + tp.goal_dist_ref).ln()).clamp(0.0, 1.0));

    let v_scale = vp.v_max.abs().max(vp.v_min.abs());
    out.push((state.v / v_scale).clamp(-1.0, 1.0));
    out.push((state.xi / vp.xi_max).clamp(-1.0, 1.0));
    out
}

/// One control point's combined policy in body frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRmp {
    pub accel: [f64; 2],
    pub metric: [f64; 3],
}

/// The regression target: one combined RMP per control point, 12 × 5
/// scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmpTarget {
    pub points: Vec<PointRmp>,
}

fn cholesky_triple(m: &[f64; 3]) -> [f64; 3] {
    let l11 = m[0].max(0.0).sqrt();
    let l21 = if l11 > 1e-12 { m[1] / l11 } else { 0.0 };
    let l22 = (m[2] - l21 * l21).max(0.0).sqrt();
    [l11, l21, l22]
}

fn triple_from_factor(l: &[f64; 3]) -> [f64; 3] {
    let mut m = Metric2::new(l[0] * l[0], l[0] * l[1], l[1] * l[1] + l[2] * l[2]);
    // nudge away any last-ulp negative eigenvalue from the products
    for _ in 0..3 {
        let lo = m.min_eigenvalue();
        if lo >= 0.0 {
            break;
        }
        m.a11 -= lo;
        m.a22 -= lo;
    }
    [m.a11, m.a12, m.a22]
}

impl RmpTarget {
    pub fn dim(&self) -> usize {
        self.points.len() * VALUES_PER_POINT
    }

    /// Flattens to the training vector; metrics are emitted either as their
    /// symmetric entries or as a Cholesky-style factor.
    pub fn encode(&self, mode: MetricDecode) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for p in &self.points {
            out.extend_from_slice(&p.accel);
            match mode {
                MetricDecode::DirectSymmetric => out.extend_from_slice(&p.metric),
                MetricDecode::CholeskyFactor => out.extend_from_slice(&cholesky_triple(&p.metric)),
            }
        }
        out
    }

    /// Rebuilds per-point policies from a prediction vector. In factor mode
    /// the decoded metrics are PSD by construction.
    pub fn decode(values: &[f64], mode: MetricDecode) -> RmpTarget {
        assert_eq!(values.len() % VALUES_PER_POINT, 0, "malformed prediction length");
        let points = values
            .chunks_exact(VALUES_PER_POINT)
            .map(|c| {
                let triple = [c[2], c[3], c[4]];
                let metric = match mode {
                    MetricDecode::DirectSymmetric => triple,
                    MetricDecode::CholeskyFactor => triple_from_factor(&triple),
                };
                PointRmp { accel: [c[0], c[1]], metric }
            })
            .collect();
        RmpTarget { points }
    }
}

/// Combines every policy acting at each control point into one equivalent
/// policy per point: `A_eq = Σ Aᵢ`, `f_eq = A_eq⁺ Σ Aᵢ fᵢ`. Resolving the
/// 12 combined policies reproduces the resolution of the raw set.
pub fn combine_point_rmps(
    rmps: &[(Rmp2, ControlPoint)],
    geom: &VehicleGeometry,
    tol: f64,
) -> Vec<Rmp2> {
    geom.control_points
        .iter()
        .map(|cp| {
            let mut metric_sum = Metric2::ZERO;
            let mut weighted_accel = Vector2::zeros();
            for (rmp, rcp) in rmps {
                if rcp.local == cp.local && rcp.role == cp.role {
                    metric_sum = metric_sum.add(&rmp.metric);
                    weighted_accel += rmp.metric.to_matrix() * rmp.accel;
                }
            }
            let accel = pseudoinverse(&metric_sum.to_matrix(), tol) * weighted_accel;
            Rmp2::new(accel, metric_sum)
        })
        .collect()
}

/// Expresses the combined world-frame policies in the body frame, which is
/// invariant to the global pose.
pub fn rmp_target_from_world(state: &VehicleState, combined: &[Rmp2]) -> RmpTarget {
    let rot_t = rotation(state.theta).transpose();
    let points = combined
        .iter()
        .map(|rmp| {
            let f = rot_t * rmp.accel;
            let a = rot_t * rmp.metric.to_matrix() * rot_t.transpose();
            let m = Metric2::from_matrix(&a);
            PointRmp { accel: [f.x, f.y], metric: [m.a11, m.a12, m.a22] }
        })
        .collect();
    RmpTarget { points }
}

/// Rotates a body-frame target back into world-frame policies attached to
/// the geometry's control points.
pub fn target_to_world_rmps(
    target: &RmpTarget,
    state: &VehicleState,
    geom: &VehicleGeometry,
) -> Vec<(Rmp2, ControlPoint)> {
    let rot = rotation(state.theta);
    target
        .points
        .iter()
        .zip(&geom.control_points)
        .map(|(p, cp)| {
            let f = rot * Vector2::new(p.accel[0], p.accel[1]);
            let m = Metric2::new(p.metric[0], p.metric[1], p.metric[2]);
            let a = rot * m.to_matrix() * rot.transpose();
            (Rmp2::new(f, Metric2::from_matrix(&a)), *cp)
        })
        .collect()
}

/// One supervised sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub features: Vec<f64>,
    pub target: RmpTarget,
    pub command: Command,
}

/// A stream of supervised samples, stored as JSON lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub points: Vec<DataPoint>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn merge(&mut self, other: Dataset) {
        self.points.extend(other.points);
    }

    pub fn truncate(&mut self, max: usize) {
        self.points.truncate(max);
    }

    pub fn save_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for p in &self.points {
            serde_json::to_writer(&mut w, p)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load_jsonl(r: impl BufRead) -> Result<Dataset, serde_json::Error> {
        let mut points = Vec::new();
        for line in r.lines() {
            let line = line.map_err(serde_json::Error::io)?;
            if line.trim().is_empty() {
                continue;
            }
            points.push(serde_json::from_str(&line)?);
        }
        Ok(Dataset { points })
    }

    /// Column-per-sample feature and target matrices for the given head.
    pub fn to_matrices(&self, head: StudentHead, mode: MetricDecode) -> (DMatrix<f64>, DMatrix<f64>) {
        assert!(!self.is_empty(), "dataset must be nonempty");
        let n = self.len();
        let in_dim = self.points[0].features.len();
        let x = DMatrix::from_fn(in_dim, n, |r, c| self.points[c].features[r]);
        let y = match head {
            StudentHead::Control => {
                DMatrix::from_fn(2, n, |r, c| {
                    let cmd = self.points[c].command;
                    if r == 0 {
                        cmd.dv
                    } else {
                        cmd.dxi
                    }
                })
            }
            StudentHead::Rmp => {
                let encoded: Vec<Vec<f64>> =
                    self.points.iter().map(|p| p.target.encode(mode)).collect();
                DMatrix::from_fn(encoded[0].len(), n, |r, c| encoded[c][r])
            }
        };
        (x, y)
    }
}

/// Data-generation randomization, mirroring the velocity and waypoint
/// randomization of the training protocol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Randomization {
    pub initial_speed: bool,
    pub waypoint_rotation_samples: usize,
}

impl Randomization {
    pub fn from_params(tp: &TrainingParams) -> Self {
        Randomization {
            initial_speed: tp.randomize_initial_speed,
            waypoint_rotation_samples: tp.waypoint_rotation_samples,
        }
    }

    pub fn none() -> Self {
        Randomization { initial_speed: false, waypoint_rotation_samples: 0 }
    }
}

fn expert_data_point(
    state: &VehicleState,
    scan: &LaserScan,
    waypoint: &Vector2<f64>,
    expert: &crate::policies::ExpertController,
    cfg: &Config,
    command: Command,
) -> DataPoint {
    let assembled = expert.assemble(state, scan, waypoint);
    let combined = combine_point_rmps(&assembled.rmps, &expert.geom, cfg.controller.solver_tol);
    DataPoint {
        features: features(scan, state, waypoint, &cfg.training, &cfg.vehicle),
        target: rmp_target_from_world(state, &combined),
        command,
    }
}

/// Expert rollout of one scenario; `None` when the episode fails (only
/// successful demonstrations enter the dataset).
fn expert_episode_points(
    scn: &Scenario,
    cfg: &Config,
    rand: &Randomization,
    episode_seed: u64,
) -> Option<Vec<DataPoint>> {
    let expert = cfg.expert();
    let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
    let mut scn = scn.clone();
    if rand.initial_speed {
        scn.start.v = rng.random_range(0.0_f64..2.0).min(cfg.vehicle.v_max);
    }
    let mut points = Vec::new();
    let traj = simulate_episode_observed(&scn, &expert, cfg, &mut |obs| {
        points.push(expert_data_point(
            obs.state,
            obs.scan,
            &obs.waypoint,
            &expert,
            cfg,
            obs.decision.command,
        ));
        for _ in 0..rand.waypoint_rotation_samples {
            let delta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let pos = obs.state.position();
            let rotated = pos + rotation(delta) * (obs.waypoint - pos);
            let decision = expert.command(obs.state, obs.scan, rotated);
            points.push(expert_data_point(
                obs.state,
                obs.scan,
                &rotated,
                &expert,
                cfg,
                decision.command,
            ));
        }
    });
    (traj.outcome == Outcome::Reached).then_some(points)
}

/// Rolls the expert out over the scenarios and records per-step features,
/// combined per-point RMP targets and the resolved command. Failed episodes
/// are excluded. Parallel over episodes, deterministic in the seed.
pub fn expert_rollout_dataset(
    scenarios: &[Scenario],
    cfg: &Config,
    rand: &Randomization,
    seed: u64,
) -> Dataset {
    let points: Vec<DataPoint> = scenarios
        .par_iter()
        .enumerate()
        .filter_map(|(i, scn)| expert_episode_points(scn, cfg, rand, derive_seed(seed, i as u64)))
        .flatten()
        .collect();
    Dataset { points }
}

/// One DAGGER round: each scenario is rolled out by the student with
/// probability `mix_ratio` (expert otherwise) and every visited state is
/// relabelled with the expert's targets.
pub fn dagger_round(
    model: &Mlp,
    head: StudentHead,
    scenarios: &[Scenario],
    mix_ratio: f64,
    cfg: &Config,
    seed: u64,
) -> Dataset {
    assert!((0.0..=1.0).contains(&mix_ratio), "mix ratio must be in [0, 1]");
    let expert = cfg.expert();
    let points: Vec<DataPoint> = scenarios
        .par_iter()
        .enumerate()
        .filter_map(|(i, scn)| {
            let episode_seed = derive_seed(seed, i as u64);
            let from_student =
                ChaCha8Rng::seed_from_u64(derive_seed(episode_seed, u64::MAX)).random::<f64>()
                    < mix_ratio;
            if from_student {
                let student = student_controller(model.clone(), head, cfg);
                let mut points = Vec::new();
                // student drives, expert labels; failures are kept — the
                // recovery states are the point of the aggregation
                simulate_episode_observed(scn, student.as_ref(), cfg, &mut |obs| {
                    let expert_decision = expert.command(obs.state, obs.scan, obs.waypoint);
                    points.push(expert_data_point(
                        obs.state,
                        obs.scan,
                        &obs.waypoint,
                        &expert,
                        cfg,
                        expert_decision.command,
                    ));
                });
                Some(points)
            } else {
                expert_episode_points(scn, cfg, &Randomization::from_params(&cfg.training), episode_seed)
            }
        })
        .flatten()
        .collect();
    Dataset { points }
}

/// Anything that maps a feature vector to an output vector; implemented by
/// [`Mlp`] and by lookup tables in tests.
pub trait Regressor: Sync {
    fn predict(&self, features: &[f64]) -> Vec<f64>;
}

impl Regressor for Mlp {
    fn predict(&self, features: &[f64]) -> Vec<f64> {
        self.forward(features)
    }
}

/// Student that predicts per-point RMPs and solves them into a command; the
/// solver is not learned.
pub struct RmpStudent<R: Regressor> {
    pub model: R,
    pub geom: VehicleGeometry,
    pub params: VehicleParams,
    pub training: TrainingParams,
    pub solver_tol: f64,
}

impl<R: Regressor> RmpStudent<R> {
    pub fn new(model: R, cfg: &Config) -> Self {
        RmpStudent {
            model,
            geom: cfg.geometry(),
            params: cfg.vehicle,
            training: cfg.training.clone(),
            solver_tol: cfg.controller.solver_tol,
        }
    }
}

impl<R: Regressor> Controller for RmpStudent<R> {
    fn command(
        &self,
        state: &VehicleState,
        scan: &LaserScan,
        waypoint: Vector2<f64>,
    ) -> ControlDecision {
        let x = features(scan, state, &waypoint, &self.training, &self.params);
        let pred = self.model.predict(&x);
        let expected = self.geom.control_points.len() * VALUES_PER_POINT;
        if pred.len() != expected || !pred.iter().all(|v| v.is_finite()) {
            return ControlDecision::coast();
        }
        let target = RmpTarget::decode(&pred, self.training.metric_decode);
        let rmps = target_to_world_rmps(&target, state, &self.geom);
        solve_control(state, &rmps, &self.geom, &self.params, self.solver_tol)
    }
}

/// Student that predicts the command pair directly.
pub struct ControlStudent<R: Regressor> {
    pub model: R,
    pub params: VehicleParams,
    pub training: TrainingParams,
}

impl<R: Regressor> ControlStudent<R> {
    pub fn new(model: R, cfg: &Config) -> Self {
        ControlStudent { model, params: cfg.vehicle, training: cfg.training.clone() }
    }
}

impl<R: Regressor> Controller for ControlStudent<R> {
    fn command(
        &self,
        state: &VehicleState,
        scan: &LaserScan,
        waypoint: Vector2<f64>,
    ) -> ControlDecision {
        let x = features(scan, state, &waypoint, &self.training, &self.params);
        let pred = self.model.predict(&x);
        if pred.len() != 2 || !pred.iter().all(|v| v.is_finite()) {
            return ControlDecision::coast();
        }
        ControlDecision::ok(Command::new(pred[0], pred[1]).clamped(&self.params))
    }
}

/// Boxes the right student around a trained model.
pub fn student_controller(model: Mlp, head: StudentHead, cfg: &Config) -> Box<dyn Controller> {
    match head {
        StudentHead::Rmp => Box::new(RmpStudent::new(model, cfg)),
        StudentHead::Control => Box::new(ControlStudent::new(model, cfg)),
    }
}

/// Builds and trains a fresh model for the given head on the dataset. Both
/// heads share the feature extractor width, hidden sizes and budget; only
/// the output dimension differs.
pub fn train_student(
    dataset: &Dataset,
    head: StudentHead,
    cfg: &Config,
    seed: u64,
) -> Result<(Mlp, Vec<f64>), TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let tp = &cfg.training;
    let (x, y) = dataset.to_matrices(head, tp.metric_decode);
    let mut sizes = vec![x.nrows()];
    sizes.extend_from_slice(&tp.hidden);
    sizes.push(y.nrows());
    let mut model = Mlp::new(&sizes, seed);
    let losses = train(&mut model, &x, &y, &tp.options(), derive_seed(seed, 0x7261_696e))?;
    Ok((model, losses))
}
