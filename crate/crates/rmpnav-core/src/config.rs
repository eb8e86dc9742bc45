//! Aggregate run configuration: one JSON document covering vehicle,
//! controller, scanner, simulator, planner and training parameters.
//! Unknown keys are rejected; fields are overridable by dotted paths.

use crate::imitation::TrainingParams;
use crate::planner::PlannerParams;
use crate::policies::{ControllerConfig, ExpertController};
use crate::vehicle::{VehicleGeometry, VehicleParams};
use crate::world::{ScannerParams, SimParams};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("no such config field: {0}")]
    NoSuchField(String),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, reason: reason.into() }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub vehicle: VehicleParams,
    pub controller: ControllerConfig,
    pub scanner: ScannerParams,
    pub sim: SimParams,
    pub planner: PlannerParams,
    pub training: TrainingParams,
}

impl Config {
    pub fn geometry(&self) -> VehicleGeometry {
        VehicleGeometry::standard(&self.vehicle, self.controller.front_accel_scale)
    }

    pub fn expert(&self) -> ExpertController {
        ExpertController::new(self.vehicle, self.controller)
    }

    pub fn from_json(text: &str) -> Result<Config, ConfigError> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        Config::from_json(&std::fs::read_to_string(path)?)
    }

    /// Overrides one field by dotted path, e.g.
    /// `controller.goal.alpha=2.5`. Unknown paths are rejected.
    pub fn set_path(&mut self, dotted: &str, raw_value: &str) -> Result<(), ConfigError> {
        let mut root = serde_json::to_value(&*self).expect("config serializes");
        let mut node = &mut root;
        let parts: Vec<&str> = dotted.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| ConfigError::NoSuchField(parts[..i].join(".")))?;
            node = obj
                .get_mut(*part)
                .ok_or_else(|| ConfigError::NoSuchField(parts[..=i].join(".")))?;
        }
        *node = serde_json::from_str(raw_value)
            .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
        let cfg: Config = serde_json::from_value(root)?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }

    /// Cross-checks the module invariants at load time.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = &self.vehicle;
        if v.length <= 0.0 || v.width <= 0.0 || v.wheelbase <= 0.0 {
            return Err(invalid("vehicle", "dimensions must be positive"));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&v.xi_max) {
            return Err(invalid("vehicle.xi_max", "must be in (0, π/2)"));
        }
        if v.v_min > 0.0 || v.v_max <= 0.0 {
            return Err(invalid("vehicle", "need v_min ≤ 0 < v_max"));
        }
        if v.dv_max <= 0.0 || v.dxi_max <= 0.0 {
            return Err(invalid("vehicle", "command limits must be positive"));
        }

        let g = &self.controller.goal;
        if g.alpha <= 0.0 || g.beta <= 0.0 || g.eps <= 0.0 {
            return Err(invalid("controller.goal", "gains must be positive"));
        }
        if g.alpha / g.beta > v.v_max + 1e-9 {
            return Err(invalid(
                "controller.goal",
                format!("implied max speed alpha/beta = {} exceeds v_max", g.alpha / g.beta),
            ));
        }
        let o = &self.controller.obstacle;
        if o.alpha <= 0.0 || o.beta <= 0.0 || o.gamma <= 0.0 || o.d_max <= 0.0 {
            return Err(invalid("controller.obstacle", "gains must be positive"));
        }
        if o.w_scale <= 0.0 || o.w_order <= 0.0 {
            return Err(invalid("controller.obstacle", "w(d) must be positive and decreasing"));
        }
        if self.controller.front_accel_scale < 1.0 {
            return Err(invalid("controller.front_accel_scale", "must be ≥ 1"));
        }
        if self.controller.solver_tol <= 0.0 {
            return Err(invalid("controller.solver_tol", "must be positive"));
        }

        if self.scanner.n_beams < 3 {
            return Err(invalid("scanner.n_beams", "need at least 3 beams"));
        }
        if self.scanner.max_range <= 0.0 || self.scanner.fov_deg <= 0.0 {
            return Err(invalid("scanner", "range and field of view must be positive"));
        }

        if !(self.sim.dt > 0.0 && self.sim.dt <= 0.1) {
            return Err(invalid("sim.dt", "must be in (0, 0.1]"));
        }
        if self.sim.goal_radius <= 0.0 || self.sim.max_steps == 0 {
            return Err(invalid("sim", "goal radius and step budget must be positive"));
        }
        if self.sim.stuck_window <= 0.0 || self.sim.stuck_min_progress <= 0.0 {
            return Err(invalid("sim", "stuck thresholds must be positive"));
        }

        if self.planner.resolution <= 0.0 {
            return Err(invalid("planner.resolution", "must be positive"));
        }
        if self.planner.inflation_margin < 0.0 {
            return Err(invalid(
                "planner.inflation_margin",
                "must be non-negative so inflation covers the half diagonal",
            ));
        }

        let t = &self.training;
        if t.hidden.is_empty() || t.hidden.iter().any(|&h| h == 0) {
            return Err(invalid("training.hidden", "need non-empty, non-zero layer sizes"));
        }
        if t.lr <= 0.0 || !(0.0..1.0).contains(&t.momentum) {
            return Err(invalid("training", "need lr > 0 and momentum in [0, 1)"));
        }
        if t.batch_size == 0 || t.epochs == 0 {
            return Err(invalid("training", "batch size and epochs must be positive"));
        }
        if t.scan_buckets == 0 || t.goal_dist_ref <= 0.0 {
            return Err(invalid("training", "feature parameters must be positive"));
        }
        if t.dagger_ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(invalid("training.dagger_ratios", "ratios must be in [0, 1]"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = Config::from_json(r#"{"vehicle": {"lenght": 0.4}}"#).unwrap_err();
        assert!(err.to_string().contains("lenght"), "error was: {err}");
    }

    #[test]
    fn dotted_path_override() {
        let mut cfg = Config::default();
        cfg.set_path("controller.goal.alpha", "2.4").unwrap();
        assert_eq!(cfg.controller.goal.alpha, 2.4);
        cfg.set_path("training.hidden", "[64, 64]").unwrap();
        assert_eq!(cfg.training.hidden, vec![64, 64]);
        let err = cfg.set_path("controller.goal.omega", "1.0").unwrap_err();
        assert!(matches!(err, ConfigError::NoSuchField(ref f) if f == "controller.goal.omega"));
    }

    #[test]
    fn invariants_enforced() {
        let mut cfg = Config::default();
        // alpha/beta above v_max violates the goal-speed invariant
        let err = cfg.set_path("controller.goal.alpha", "100.0").unwrap_err();
        assert!(err.to_string().contains("alpha/beta"), "error was: {err}");
        assert_eq!(cfg.controller.goal.alpha, 3.0, "failed override leaves config untouched");
        let err = cfg.set_path("sim.dt", "0.5").unwrap_err();
        assert!(err.to_string().contains("sim.dt"));
    }
}
