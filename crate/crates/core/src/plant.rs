//! Per-axis translational plant, disturbance models and the PD baseline.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{DiscreteStateSpace, StateSpace, TransferFunction};

pub const GRAVITY: f64 = 9.81;

/// Velocity loop `y1 = A (η u + d)` followed by a trapezoid integrator for
/// position. `η` is the actuator gain, 1 when healthy.
#[derive(Clone, Debug)]
pub struct AxisPlant {
    model: DiscreteStateSpace,
    x: DVector<f64>,
    y1: f64,
    y2: f64,
    accel: f64,
    input_gain: f64,
}

impl AxisPlant {
    pub fn new(a: &TransferFunction, dt: f64) -> Result<Self> {
        if !a.is_strictly_proper() {
            return Err(Error::NotStrictlyProper);
        }
        let model = a.to_state_space()?.discretize_zoh(dt)?;
        let x = DVector::zeros(model.order());
        Ok(Self {
            model,
            x,
            y1: 0.0,
            y2: 0.0,
            accel: 0.0,
            input_gain: 1.0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.model.dt
    }

    pub fn velocity(&self) -> f64 {
        self.y1
    }

    pub fn position(&self) -> f64 {
        self.y2
    }

    /// Finite-difference acceleration over the last step.
    pub fn acceleration(&self) -> f64 {
        self.accel
    }

    pub fn input_gain(&self) -> f64 {
        self.input_gain
    }

    pub fn set_input_gain(&mut self, gain: f64) -> Result<()> {
        if !(gain > 0.0) || !gain.is_finite() {
            return Err(Error::InvalidParameter(format!("actuator gain must be positive, got {gain}")));
        }
        self.input_gain = gain;
        Ok(())
    }

    /// Puts the vehicle at rest at `position`.
    pub fn reset(&mut self, position: f64) {
        self.x.fill(0.0);
        self.y1 = 0.0;
        self.y2 = position;
        self.accel = 0.0;
    }

    /// Advances one sample and returns the new `(y1, y2)`.
    pub fn step(&mut self, u: f64, d_ext: f64) -> Result<(f64, f64)> {
        if !u.is_finite() || !d_ext.is_finite() {
            return Err(Error::NonFinite(format!("plant input u={u}, d={d_ext}")));
        }
        let input = self.input_gain * u + d_ext;
        self.model.advance(&mut self.x, input);
        let y1 = self.model.output(&self.x, 0.0);
        let dt = self.model.dt;
        let y2 = self.y2 + 0.5 * dt * (self.y1 + y1);
        if !y1.is_finite() || !y2.is_finite() {
            return Err(Error::Diverged(y2));
        }
        self.accel = (y1 - self.y1) / dt;
        self.y1 = y1;
        self.y2 = y2;
        Ok((y1, y2))
    }
}

/// Conversion from a force on the vehicle to the equivalent velocity-command
/// disturbance `d`.
///
/// For `A = a/(s+a)` the velocity obeys `v' = a(u − v) + F/M`, so `d = F/(aM)`.
/// When `trim_rate > 0` the inner loop also integrates its velocity error, so
/// the force first passes the washout `s/(s + trim_rate)`; forces present
/// when the vehicle took off are already trimmed out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Vehicle mass (kg).
    pub mass: f64,
    /// Initial acceleration per unit command (1/s), the `a` above.
    pub accel_per_command: f64,
    /// Integral rate of the inner velocity loop (rad/s); 0 disables trim.
    pub trim_rate: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 0.42,
            accel_per_command: 3.0,
            trim_rate: 0.5,
        }
    }
}

impl VehicleParams {
    pub fn force_to_input(&self, force: f64) -> f64 {
        force / (self.mass * self.accel_per_command)
    }

    /// L1 norm of the force path: `‖s/(s+ω)‖ = 2` with trim, 1 without.
    pub fn force_path_gain(&self) -> f64 {
        if self.trim_rate > 0.0 {
            2.0
        } else {
            1.0
        }
    }
}

/// Suspended point mass, linearized about the hanging equilibrium, one
/// decoupled swing axis per horizontal direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumDisturbance {
    pub bob_mass: f64,
    pub length: f64,
    /// Horizontal attachment offset from the vehicle center (m), per axis.
    pub offset: [f64; 2],
    pub damping_ratio: f64,
    /// Lateral force per unit offset, per unit bob weight (1/m).
    pub offset_coupling: f64,
    pub gravity: f64,
    /// Swing angle and rate per horizontal axis.
    pub theta: [f64; 2],
    pub rate: [f64; 2],
    #[serde(skip)]
    cache: Option<(f64, DiscreteStateSpace)>,
}

impl PendulumDisturbance {
    pub fn new(bob_mass: f64, length: f64, offset: [f64; 2]) -> Result<Self> {
        if !(length > 0.0) || !(bob_mass >= 0.0) || !length.is_finite() || !bob_mass.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pendulum needs length > 0 and mass >= 0 (got {length}, {bob_mass})"
            )));
        }
        Ok(Self {
            bob_mass,
            length,
            offset,
            damping_ratio: 0.02,
            offset_coupling: 1.0,
            gravity: GRAVITY,
            theta: [0.0; 2],
            rate: [0.0; 2],
            cache: None,
        })
    }

    /// 50 g bob on a 55 cm cable, attached 17 cm from the center.
    pub fn preset_50g_55cm() -> Self {
        let r = 0.17 / std::f64::consts::SQRT_2;
        Self::new(0.05, 0.55, [r, r]).expect("valid preset")
    }

    pub fn natural_frequency(&self) -> f64 {
        (self.gravity / self.length).sqrt()
    }

    pub fn reset(&mut self) {
        self.theta = [0.0; 2];
        self.rate = [0.0; 2];
    }

    /// Swing energy of one axis, per unit bob mass.
    pub fn energy(&self, axis: usize) -> f64 {
        let l = self.length;
        0.5 * l * l * self.rate[axis].powi(2) + 0.5 * self.gravity * l * self.theta[axis].powi(2)
    }

    fn discrete(&mut self, dt: f64) -> Result<&DiscreteStateSpace> {
        let stale = !matches!(&self.cache, Some((h, _)) if *h == dt);
        if stale {
            let w = self.natural_frequency();
            let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -w * w, -2.0 * self.damping_ratio * w]);
            let b = DVector::from_column_slice(&[0.0, -1.0 / self.length]);
            let ss = StateSpace::new(a, b, RowDVector::from_row_slice(&[1.0, 0.0]), 0.0)?;
            self.cache = Some((dt, ss.discretize_zoh(dt)?));
        }
        Ok(&self.cache.as_ref().expect("cache filled").1)
    }

    /// Advances the swing of `axis` under vehicle acceleration `accel` and
    /// returns the horizontal force the cable exerts on the vehicle (N).
    pub fn step(&mut self, axis: usize, accel: f64, dt: f64) -> Result<f64> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {dt}")));
        }
        let mut x = DVector::from_column_slice(&[self.theta[axis], self.rate[axis]]);
        self.discrete(dt)?.advance(&mut x, accel);
        self.theta[axis] = x[0];
        self.rate[axis] = x[1];
        let w = self.natural_frequency();
        let theta_dd = -w * w * x[0] - 2.0 * self.damping_ratio * w * x[1] - accel / self.length;
        // bob momentum rate m_b (a + l θ''), reacted on the vehicle
        let swing = -self.bob_mass * (accel + self.length * theta_dd);
        let bias = -self.bob_mass * self.gravity * self.offset_coupling * self.offset[axis];
        Ok(swing + bias)
    }

    /// Force on the vehicle along the vertical axis.
    pub fn vertical_force(&self) -> f64 {
        -self.bob_mass * self.gravity
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisturbancePreset {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "pendulum_50g_55cm")]
    Pendulum50g55cm,
    #[serde(rename = "wind_const")]
    WindConst,
    #[serde(rename = "motor_degraded")]
    MotorDegraded,
}

/// Lipschitz constants `(L, L0)` of a disturbance map `d = f(t, y1)`:
/// `|f(t,v) − f(t,w)| <= L|v − w|` and `|f(t,0)| <= L0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBound {
    pub l: f64,
    pub l0: f64,
}

/// Largest swing angle assumed when bounding the pendulum force.
pub const PENDULUM_ANGLE_BOUND: f64 = 0.5;

/// Drag toward a constant wind, `F = c (w − v)` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindDisturbance {
    pub drag: f64,
    pub wind: [f64; 3],
}

impl Default for WindDisturbance {
    fn default() -> Self {
        Self {
            drag: 0.1,
            wind: [1.0, 0.0, 0.0],
        }
    }
}

/// Actuator gain once the motor degradation is active.
pub const DEGRADED_MOTOR_GAIN: f64 = 0.7;

#[derive(Clone, Debug)]
pub enum DisturbanceSource {
    None,
    Pendulum(PendulumDisturbance),
    Wind(WindDisturbance),
    MotorDegraded { gain: f64 },
}

/// Stateful disturbance acting on all three axes.
#[derive(Clone, Debug)]
pub struct DisturbanceModel {
    pub source: DisturbanceSource,
    // low-passed force already compensated by the inner-loop trim
    trimmed: Option<[f64; 3]>,
}

impl DisturbanceModel {
    pub fn new(source: DisturbanceSource) -> Self {
        Self { source, trimmed: None }
    }

    pub fn from_preset(preset: DisturbancePreset) -> Self {
        Self::new(match preset {
            DisturbancePreset::None => DisturbanceSource::None,
            DisturbancePreset::Pendulum50g55cm => DisturbanceSource::Pendulum(PendulumDisturbance::preset_50g_55cm()),
            DisturbancePreset::WindConst => DisturbanceSource::Wind(WindDisturbance::default()),
            DisturbancePreset::MotorDegraded => DisturbanceSource::MotorDegraded {
                gain: DEGRADED_MOTOR_GAIN,
            },
        })
    }

    pub fn reset(&mut self) {
        if let DisturbanceSource::Pendulum(p) = &mut self.source {
            p.reset();
        }
        self.trimmed = None;
    }

    /// Actuator gain the plant should apply while this disturbance is active.
    pub fn actuator_gain(&self) -> f64 {
        match self.source {
            DisturbanceSource::MotorDegraded { gain } => gain,
            _ => 1.0,
        }
    }

    /// Forces on the vehicle (N) given its velocity and acceleration.
    pub fn forces(&mut self, velocity: [f64; 3], accel: [f64; 3], dt: f64) -> Result<[f64; 3]> {
        Ok(match &mut self.source {
            DisturbanceSource::None | DisturbanceSource::MotorDegraded { .. } => [0.0; 3],
            DisturbanceSource::Pendulum(p) => [p.step(0, accel[0], dt)?, p.step(1, accel[1], dt)?, p.vertical_force()],
            DisturbanceSource::Wind(w) => {
                let mut f = [0.0; 3];
                for i in 0..3 {
                    f[i] = w.drag * (w.wind[i] - velocity[i]);
                }
                f
            }
        })
    }

    /// Equivalent input disturbance per axis.
    pub fn step(&mut self, vehicle: &VehicleParams, velocity: [f64; 3], accel: [f64; 3], dt: f64) -> Result<[f64; 3]> {
        let forces = self.forces(velocity, accel, dt)?;
        let mut d = [0.0; 3];
        if vehicle.trim_rate > 0.0 {
            let trimmed = self.trimmed.get_or_insert(forces);
            let blend = 1.0 - (-vehicle.trim_rate * dt).exp();
            for i in 0..3 {
                d[i] = vehicle.force_to_input(forces[i] - trimmed[i]);
                trimmed[i] += blend * (forces[i] - trimmed[i]);
            }
        } else {
            for i in 0..3 {
                d[i] = vehicle.force_to_input(forces[i]);
            }
        }
        Ok(d)
    }

    pub fn lipschitz(&self, vehicle: &VehicleParams) -> LipschitzBound {
        let gain = vehicle.force_path_gain();
        match &self.source {
            DisturbanceSource::None | DisturbanceSource::MotorDegraded { .. } => LipschitzBound { l: 0.0, l0: 0.0 },
            DisturbanceSource::Pendulum(p) => {
                let weight = p.bob_mass * p.gravity;
                let lateral = weight * (PENDULUM_ANGLE_BOUND + p.offset_coupling * p.offset[0].abs().max(p.offset[1].abs()));
                LipschitzBound {
                    l: 0.0,
                    l0: gain * vehicle.force_to_input(lateral.max(weight)),
                }
            }
            DisturbanceSource::Wind(w) => {
                let wmax = w.wind.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                LipschitzBound {
                    l: gain * vehicle.force_to_input(w.drag),
                    l0: gain * vehicle.force_to_input(w.drag * wmax),
                }
            }
        }
    }
}

/// Non-adaptive baseline gains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdConfig {
    pub kp: f64,
    pub kd: f64,
}

impl Default for PdConfig {
    fn default() -> Self {
        Self { kp: 2.0, kd: 0.3 }
    }
}

impl PdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp > 0.0) || !(self.kd >= 0.0) || !self.kp.is_finite() || !self.kd.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "PD gains need kp > 0 and kd >= 0 (got {}, {})",
                self.kp, self.kd
            )));
        }
        Ok(())
    }

    /// Closed position loop `A Kp / (s (1 + A Kd) + A Kp)` around plant `a`.
    pub fn closed_loop(&self, a: &TransferFunction) -> Result<TransferFunction> {
        // y2 = (A/s)(Kp (r − y2) − Kd s y2)
        let forward = a.series(&TransferFunction::integrator()).scale(self.kp);
        let loop_gain = TransferFunction::new(vec![self.kd, self.kp], vec![self.kp])?;
        forward.feedback(&loop_gain)
    }
}

/// `u = Kp (r2 − y2) − Kd y1`, derivative acting on the measured velocity.
pub fn pd_step(cfg: &PdConfig, r2: f64, y2: f64, y1: f64) -> f64 {
    cfg.kp * (r2 - y2) - cfg.kd * y1
}
