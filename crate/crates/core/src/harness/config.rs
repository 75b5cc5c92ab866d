use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certify::DesignSet;
use crate::error::{Error, Result};
use crate::ilc::IlcWeights;
use crate::l1::{lyapunov_scalar, L1Config, DEFAULT_ADAPTATION_GAIN, DEFAULT_CONTROL_DT};
use crate::lti::TransferFunction;
use crate::plant::{DisturbanceModel, DisturbancePreset, PdConfig, VehicleParams};

use super::trajectory::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    L1Ilc,
    PdIlc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Learning on every iteration; the disturbance switches on at activation.
    Learning,
    /// Learning until activation, then the disturbance is applied and the
    /// learned offset is replayed unchanged.
    RepeatAfterDisturbance,
    /// Learning on every iteration, disturbance from activation onwards.
    LearnThroughDisturbance,
}

/// L1 controller gains; the step size comes from the experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Gains {
    pub m: f64,
    pub gamma: f64,
    pub sigma_max: f64,
    pub epsilon: f64,
    pub filter: TransferFunction,
    pub k: f64,
    /// Right-hand side `Z` of the scalar Lyapunov equation.
    pub lyapunov_z: f64,
}

impl Default for L1Gains {
    fn default() -> Self {
        Self {
            m: 10.0,
            gamma: DEFAULT_ADAPTATION_GAIN,
            sigma_max: 5.0,
            epsilon: 0.1,
            filter: TransferFunction::first_order_lag(30.0),
            k: 2.0,
            lyapunov_z: 1.0,
        }
    }
}

impl L1Gains {
    pub fn controller_config(&self, dt: f64) -> L1Config {
        L1Config {
            m: self.m,
            gamma: self.gamma,
            sigma_max: self.sigma_max,
            epsilon: self.epsilon,
            filter: self.filter.clone(),
            k: self.k,
            p: lyapunov_scalar(self.m, self.lyapunov_z),
            dt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSchedule {
    pub preset: DisturbancePreset,
    /// First iteration (1-based) with the disturbance present.
    pub activation_iteration: usize,
}

impl Default for DisturbanceSchedule {
    fn default() -> Self {
        Self {
            preset: DisturbancePreset::None,
            activation_iteration: 1,
        }
    }
}

/// Additive Gaussian noise on the fed-back position and velocity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub position_std: f64,
    pub velocity_std: f64,
    /// Spread of the initial pendulum angle per horizontal axis (rad).
    pub swing_std: f64,
}

impl NoiseConfig {
    pub fn is_zero(&self) -> bool {
        self.position_std == 0.0 && self.velocity_std == 0.0 && self.swing_std == 0.0
    }
}

/// Pre-trajectory hover phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettleConfig {
    /// Start-tolerance ball radius around the first trajectory point (m).
    pub radius: f64,
    /// Largest speed accepted at the start (m/s).
    pub max_speed: f64,
    pub min_time: f64,
    pub timeout: f64,
    /// Rest position relative to the trajectory start at the beginning of
    /// every iteration.
    pub initial_offset: [f64; 3],
}

impl Default for SettleConfig {
    fn default() -> Self {
        Self {
            radius: 0.5,
            max_speed: 0.05,
            min_time: 3.0,
            timeout: 60.0,
            initial_offset: [0.1, -0.1, 0.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub controller: ControllerKind,
    /// Velocity dynamics of each axis.
    pub plant: TransferFunction,
    pub vehicle: VehicleParams,
    pub l1: L1Gains,
    pub pd: PdConfig,
    pub ilc: IlcWeights,
    pub trajectory: Trajectory,
    /// Controller and plant step (s).
    pub control_dt: f64,
    pub scenario: Scenario,
    pub disturbance: DisturbanceSchedule,
    pub iterations: usize,
    /// Independent repetitions of the iterations from activation onwards.
    pub sets: usize,
    pub seed: u64,
    pub noise: NoiseConfig,
    pub settle: SettleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            controller: ControllerKind::L1Ilc,
            plant: TransferFunction::first_order_lag(3.0),
            vehicle: VehicleParams::default(),
            l1: L1Gains::default(),
            pd: PdConfig::default(),
            ilc: IlcWeights::default(),
            trajectory: Trajectory::default(),
            control_dt: DEFAULT_CONTROL_DT,
            scenario: Scenario::Learning,
            disturbance: DisturbanceSchedule::default(),
            iterations: 10,
            sets: 1,
            seed: 1,
            noise: NoiseConfig::default(),
            settle: SettleConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// ILC sample time.
    pub fn sample_dt(&self) -> f64 {
        self.control_dt * self.trajectory.substeps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("at least one iteration is required".into()));
        }
        if self.sets == 0 {
            return Err(Error::InvalidParameter("at least one set is required".into()));
        }
        let act = self.disturbance.activation_iteration;
        if act == 0 || act > self.iterations {
            return Err(Error::InvalidParameter(format!(
                "activation iteration {act} outside 1..={}",
                self.iterations
            )));
        }
        if !(self.control_dt > 0.0) || !self.control_dt.is_finite() {
            return Err(Error::InvalidParameter(format!("control_dt must be positive, got {}", self.control_dt)));
        }
        if !self.plant.is_strictly_proper() {
            return Err(Error::NotStrictlyProper);
        }
        if !(self.vehicle.mass > 0.0) || !(self.vehicle.accel_per_command > 0.0) {
            return Err(Error::InvalidParameter("vehicle mass and command gain must be positive".into()));
        }
        for v in [self.noise.position_std, self.noise.velocity_std, self.noise.swing_std] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("noise levels must be non-negative, got {v}")));
            }
        }
        let s = &self.settle;
        if !(s.radius > 0.0) || !(s.max_speed > 0.0) || !(s.min_time >= 0.0) || !(s.timeout >= s.min_time) {
            return Err(Error::InvalidParameter("invalid settle configuration".into()));
        }
        self.trajectory.validate()?;
        self.ilc.validate()?;
        match self.controller {
            ControllerKind::L1Ilc => self.l1.controller_config(self.control_dt).validate()?,
            ControllerKind::PdIlc => self.pd.validate()?,
        }
        Ok(())
    }

    /// Design sets for the healthy plant and, when the scheduled disturbance
    /// changes the actuator, for the degraded one.
    pub fn design_sets(&self) -> Result<Vec<DesignSet>> {
        let model = DisturbanceModel::from_preset(self.disturbance.preset);
        let bound = model.lipschitz(&self.vehicle);
        let mut plants = vec![self.plant.clone()];
        let gain = model.actuator_gain();
        if gain != 1.0 {
            plants.push(self.plant.scale(gain));
        }
        plants
            .into_iter()
            .map(|a| DesignSet::new(a, self.l1.m, self.l1.filter.clone(), self.l1.k, bound.l, bound.l0))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"controller": "pd_ilc", "iterations": 3, "disturbance": {"preset": "pendulum_50g_55cm", "activation_iteration": 2}}"#,
        )
        .unwrap();
        assert_eq!(cfg.controller, ControllerKind::PdIlc);
        assert_eq!(cfg.iterations, 3);
        assert_eq!(cfg.plant, TransferFunction::first_order_lag(3.0));
    }

    #[test]
    fn rejects_inconsistent_schedules() {
        let bad = [
            ExperimentConfig {
                iterations: 0,
                ..ExperimentConfig::default()
            },
            ExperimentConfig {
                disturbance: DisturbanceSchedule {
                    preset: DisturbancePreset::WindConst,
                    activation_iteration: 11,
                },
                ..ExperimentConfig::default()
            },
            ExperimentConfig {
                sets: 0,
                ..ExperimentConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn degraded_actuator_adds_a_design_set() {
        let cfg = ExperimentConfig {
            disturbance: DisturbanceSchedule {
                preset: DisturbancePreset::MotorDegraded,
                activation_iteration: 1,
            },
            ..ExperimentConfig::default()
        };
        assert_eq!(cfg.design_sets().unwrap().len(), 2);
        assert_eq!(ExperimentConfig::default().design_sets().unwrap().len(), 1);
    }
}
