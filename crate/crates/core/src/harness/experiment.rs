use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{certify, reference_tracking, Certificate, NormOptions};
use crate::error::{Error, Result};
use crate::ilc::{build_lifted, ilc_update, kalman_update, DisturbanceEstimate, LiftedModel};
use crate::l1::L1Controller;
use crate::lti::{SampledSignal, TransferFunction, DEFAULT_STABILITY_TOL};
use crate::plant::{pd_step, AxisPlant, DisturbanceModel, DisturbancePreset, DisturbanceSource, PdConfig};

use super::config::{ControllerKind, ExperimentConfig, Scenario};
use super::error_metric;

pub const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisLearning {
    pub estimate: DisturbanceEstimate,
    pub r_bar: DVector<f64>,
}

/// Learning state carried from one iteration to the next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningState {
    pub axes: Vec<AxisLearning>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisTrace {
    pub desired: Vec<f64>,
    /// True position at each sample.
    pub actual: Vec<f64>,
    /// Applied reference `y2* + r̄`.
    pub reference_input: Vec<f64>,
    /// Disturbance estimate after this iteration.
    pub d_hat: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub error: f64,
    pub learning: bool,
    pub disturbance_active: bool,
    pub settle_time: f64,
    pub axes: Vec<AxisTrace>,
    pub wall_time: f64,
}

impl IterationRecord {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.iteration == other.iteration
            && self.error.to_bits() == other.error.to_bits()
            && self.learning == other.learning
            && self.disturbance_active == other.disturbance_active
            && self.settle_time.to_bits() == other.settle_time.to_bits()
            && self.axes == other.axes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub iteration: Vec<usize>,
    pub mean_error: Vec<f64>,
    pub std_error: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioResult {
    /// Iterations before activation, shared by every set.
    pub prelude: Vec<IterationRecord>,
    /// Iterations from activation onwards, one list per set.
    pub sets: Vec<Vec<IterationRecord>>,
    pub summary: Summary,
}

impl ScenarioResult {
    pub fn record_count(&self) -> usize {
        self.prelude.len() + self.sets.iter().map(Vec::len).sum::<usize>()
    }
}

enum AxisController {
    L1(Box<L1Controller>),
    Pd(PdConfig),
}

impl AxisController {
    fn step(&mut self, r2: f64, y1: f64, y2: f64) -> Result<f64> {
        match self {
            Self::L1(c) => Ok(c.step(r2, y1, y2)?.u),
            Self::Pd(cfg) => Ok(pd_step(cfg, r2, y2, y1)),
        }
    }
}

/// Plant, controllers and disturbance for one iteration.
struct Rig {
    plants: Vec<AxisPlant>,
    controllers: Vec<AxisController>,
    disturbance: DisturbanceModel,
    position_noise: Normal<f64>,
    velocity_noise: Normal<f64>,
}

impl Rig {
    fn step(&mut self, cfg: &ExperimentConfig, r2: &[f64; 3], rng: &mut ChaCha8Rng) -> Result<()> {
        let mut velocity = [0.0; 3];
        let mut accel = [0.0; 3];
        let mut u = [0.0; 3];
        for i in 0..3 {
            let p = &self.plants[i];
            velocity[i] = p.velocity();
            accel[i] = p.acceleration();
            let y2 = p.position() + self.position_noise.sample(rng);
            let y1 = p.velocity() + self.velocity_noise.sample(rng);
            u[i] = self.controllers[i].step(r2[i], y1, y2)?;
        }
        let d = self.disturbance.step(&cfg.vehicle, velocity, accel, cfg.control_dt)?;
        for i in 0..3 {
            self.plants[i].step(u[i], d[i])?;
        }
        Ok(())
    }

    fn position(&self) -> [f64; 3] {
        [self.plants[0].position(), self.plants[1].position(), self.plants[2].position()]
    }

    fn speed(&self) -> f64 {
        self.plants.iter().map(|p| p.velocity().powi(2)).sum::<f64>().sqrt()
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

/// A validated, certified experiment ready to run.
#[derive(Clone, Debug)]
pub struct Experiment {
    cfg: ExperimentConfig,
    desired: [SampledSignal; 3],
    nominal: TransferFunction,
    lifted: LiftedModel,
    certificates: Vec<Certificate>,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let sample_dt = cfg.sample_dt();
        let desired = cfg.trajectory.sample(sample_dt)?;
        let certificates = match cfg.controller {
            ControllerKind::L1Ilc => certify_config(&cfg)?,
            ControllerKind::PdIlc => Vec::new(),
        };
        let nominal = nominal_model(&cfg)?;
        if !nominal.is_stable(DEFAULT_STABILITY_TOL)? {
            return Err(Error::Unstable(format!("nominal closed loop {nominal}")));
        }
        let lifted = build_lifted(
            &nominal.to_state_space()?.discretize_zoh(sample_dt)?,
            cfg.trajectory.samples,
        )?;
        Ok(Self {
            cfg,
            desired,
            nominal,
            lifted,
            certificates,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn desired(&self) -> &[SampledSignal; 3] {
        &self.desired
    }

    /// Continuous closed loop `r2 -> y2` assumed by the learning layer.
    pub fn nominal_model(&self) -> &TransferFunction {
        &self.nominal
    }

    pub fn lifted(&self) -> &LiftedModel {
        &self.lifted
    }

    pub fn certificates(&self) -> &[Certificate] {
        &self.certificates
    }

    pub fn initial_learning(&self) -> LearningState {
        let n = self.cfg.trajectory.samples;
        let axis = AxisLearning {
            estimate: DisturbanceEstimate::initial(n, self.cfg.ilc.initial_covariance),
            r_bar: DVector::zeros(n),
        };
        LearningState {
            axes: vec![axis; 3],
        }
    }

    pub fn disturbance_active(&self, iteration: usize) -> bool {
        self.cfg.disturbance.preset != DisturbancePreset::None && iteration >= self.cfg.disturbance.activation_iteration
    }

    pub fn learning_enabled(&self, iteration: usize) -> bool {
        match self.cfg.scenario {
            Scenario::Learning | Scenario::LearnThroughDisturbance => true,
            Scenario::RepeatAfterDisturbance => iteration < self.cfg.disturbance.activation_iteration,
        }
    }

    fn rig(&self, disturbance_active: bool, rng: &mut ChaCha8Rng) -> Result<Rig> {
        let cfg = &self.cfg;
        let preset = if disturbance_active {
            cfg.disturbance.preset
        } else {
            DisturbancePreset::None
        };
        let mut disturbance = DisturbanceModel::from_preset(preset);
        let swing = Normal::new(0.0, cfg.noise.swing_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        if let DisturbanceSource::Pendulum(p) = &mut disturbance.source {
            p.theta = [swing.sample(rng), swing.sample(rng)];
        }
        let start = cfg.trajectory.start;
        let mut plants = Vec::with_capacity(3);
        let mut controllers = Vec::with_capacity(3);
        for i in 0..3 {
            let mut p = AxisPlant::new(&cfg.plant, cfg.control_dt)?;
            p.set_input_gain(disturbance.actuator_gain())?;
            p.reset(start[i] + cfg.settle.initial_offset[i]);
            plants.push(p);
            controllers.push(match cfg.controller {
                ControllerKind::L1Ilc => AxisController::L1(Box::new(L1Controller::new(
                    cfg.l1.controller_config(cfg.control_dt),
                )?)),
                ControllerKind::PdIlc => AxisController::Pd(cfg.pd),
            });
        }
        let noise = |s: f64| Normal::new(0.0, s).map_err(|e| Error::InvalidParameter(e.to_string()));
        Ok(Rig {
            plants,
            controllers,
            disturbance,
            position_noise: noise(cfg.noise.position_std)?,
            velocity_noise: noise(cfg.noise.velocity_std)?,
        })
    }

    fn rng(&self, set: usize, iteration: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(((set as u64) << 32) | iteration as u64);
        rng
    }

    /// Settles, flies the trajectory once and, if enabled for `iteration`,
    /// updates `learning`.
    pub fn run_iteration(&self, learning: &mut LearningState, iteration: usize, set: usize) -> Result<IterationRecord> {
        let clock = Instant::now();
        let cfg = &self.cfg;
        let active = self.disturbance_active(iteration);
        let learn = self.learning_enabled(iteration);
        let mut rng = self.rng(set, iteration);
        let mut rig = self.rig(active, &mut rng)?;

        let start = cfg.trajectory.start;
        let dt = cfg.control_dt;
        let mut t = 0.0;
        loop {
            rig.step(cfg, &start, &mut rng)?;
            t += dt;
            let dist = distance(&rig.position(), &start);
            if t >= cfg.settle.min_time && dist <= cfg.settle.radius && rig.speed() <= cfg.settle.max_speed {
                break;
            }
            if t > cfg.settle.timeout {
                return Err(Error::SettleTimeout { distance: dist, elapsed: t });
            }
        }
        let settle_time = t;
        debug_assert!(distance(&rig.position(), &start) <= cfg.settle.radius);

        let n = cfg.trajectory.samples;
        let mut actual = (0..3).map(|_| Vec::with_capacity(n)).collect::<Vec<Vec<f64>>>();
        let mut measured = (0..3).map(|_| Vec::with_capacity(n)).collect::<Vec<Vec<f64>>>();
        let mut reference = (0..3).map(|_| Vec::with_capacity(n)).collect::<Vec<Vec<f64>>>();
        for k in 0..n {
            let mut r2 = [0.0; 3];
            for i in 0..3 {
                let y = rig.plants[i].position();
                actual[i].push(y);
                measured[i].push(y + rig.position_noise.sample(&mut rng));
                r2[i] = self.desired[i].values()[k] + learning.axes[i].r_bar[k];
                reference[i].push(r2[i]);
            }
            for _ in 0..cfg.trajectory.substeps {
                rig.step(cfg, &r2, &mut rng)?;
            }
        }
        let sample_dt = cfg.sample_dt();
        let actual_signals = [
            SampledSignal::new(actual[0].clone(), sample_dt)?,
            SampledSignal::new(actual[1].clone(), sample_dt)?,
            SampledSignal::new(actual[2].clone(), sample_dt)?,
        ];
        let error = error_metric(&self.desired, &actual_signals)?;

        if learn {
            for i in 0..3 {
                let desired = DVector::from_column_slice(self.desired[i].values());
                let y_bar = DVector::from_vec(measured[i].clone()) - desired;
                let axis = &mut learning.axes[i];
                let estimate = kalman_update(&axis.estimate, &self.lifted, &axis.r_bar, &y_bar, &cfg.ilc)?;
                axis.r_bar = ilc_update(&self.lifted, &estimate, &cfg.ilc)?;
                axis.estimate = estimate;
            }
        }

        let axes = (0..3)
            .map(|i| AxisTrace {
                desired: self.desired[i].values().to_vec(),
                actual: std::mem::take(&mut actual[i]),
                reference_input: std::mem::take(&mut reference[i]),
                d_hat: learning.axes[i].estimate.d_hat.as_slice().to_vec(),
            })
            .collect();
        Ok(IterationRecord {
            iteration,
            error,
            learning: learn,
            disturbance_active: active,
            settle_time,
            axes,
            wall_time: clock.elapsed().as_secs_f64(),
        })
    }

    /// Shared iterations up to activation, then `sets` independent
    /// continuations run in parallel.
    pub fn run_scenario(&self) -> Result<ScenarioResult> {
        let cfg = &self.cfg;
        let activation = cfg.disturbance.activation_iteration;
        let mut learning = self.initial_learning();
        let mut prelude = Vec::new();
        for j in 1..activation {
            prelude.push(self.run_iteration(&mut learning, j, 0)?);
        }
        let sets: Vec<Vec<IterationRecord>> = (1..=cfg.sets)
            .into_par_iter()
            .map(|s| {
                let mut state = learning.clone();
                (activation..=cfg.iterations)
                    .map(|j| self.run_iteration(&mut state, j, s))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let summary = summarize(&prelude, &sets);
        Ok(ScenarioResult { prelude, sets, summary })
    }
}

fn nominal_model(cfg: &ExperimentConfig) -> Result<TransferFunction> {
    match cfg.controller {
        ControllerKind::L1Ilc => {
            let d = &cfg.design_sets()?[0];
            reference_tracking(d)
        }
        ControllerKind::PdIlc => cfg.pd.closed_loop(&cfg.plant),
    }
}

/// Certificates for every design set of `cfg`, satisfied or not.
pub fn certify_experiment(cfg: &ExperimentConfig) -> Result<Vec<Certificate>> {
    cfg.validate()?;
    let desired = cfg.trajectory.sample(cfg.sample_dt())?;
    let r2_sup = desired.iter().map(|s| s.linf_norm()).fold(0.0, f64::max);
    cfg.design_sets()?
        .iter()
        .map(|d| certify(d, r2_sup, &NormOptions::default()))
        .collect()
}

fn certify_config(cfg: &ExperimentConfig) -> Result<Vec<Certificate>> {
    let certs = certify_experiment(cfg)?;
    for (cert, d) in certs.iter().zip(cfg.design_sets()?) {
        if !cert.is_satisfied() {
            return Err(Error::NotCertified(format!(
                "margin {:.4}, H stable {}, F stable {} for plant {}",
                cert.margin, cert.h_stable, cert.f_stable, d.plant
            )));
        }
    }
    Ok(certs)
}

/// Mean and sample standard deviation of the error per iteration; prelude
/// iterations appear once with zero spread.
pub fn summarize(prelude: &[IterationRecord], sets: &[Vec<IterationRecord>]) -> Summary {
    let mut summary = Summary {
        iteration: Vec::new(),
        mean_error: Vec::new(),
        std_error: Vec::new(),
    };
    for r in prelude {
        summary.iteration.push(r.iteration);
        summary.mean_error.push(r.error);
        summary.std_error.push(0.0);
    }
    let Some(first) = sets.first() else {
        return summary;
    };
    for (k, r) in first.iter().enumerate() {
        let errors: Vec<f64> = sets.iter().map(|s| s[k].error).collect();
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let std = if errors.len() > 1 {
            (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        summary.iteration.push(r.iteration);
        summary.mean_error.push(mean);
        summary.std_error.push(std);
    }
    summary
}
