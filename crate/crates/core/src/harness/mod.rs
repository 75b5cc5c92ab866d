//! Experiment configuration, scenario execution and result persistence.

mod config;
mod experiment;
mod output;
mod trajectory;

pub use config::{
    ControllerKind, DisturbanceSchedule, ExperimentConfig, L1Gains, NoiseConfig, Scenario, SettleConfig,
};
pub use experiment::{
    certify_experiment, summarize, AxisLearning, AxisTrace, Experiment, IterationRecord, LearningState, ScenarioResult, Summary,
    AXIS_NAMES,
};
pub use output::{read_records_csv, replay, write_records_csv, write_run, ReplayReport};
pub use trajectory::Trajectory;

use crate::error::{Error, Result};
use crate::lti::SampledSignal;

/// Mean Euclidean distance between desired and actual 3D positions.
pub fn error_metric(desired: &[SampledSignal; 3], actual: &[SampledSignal; 3]) -> Result<f64> {
    let n = desired[0].len();
    for s in desired.iter().chain(actual) {
        if s.len() != n {
            return Err(Error::Dimension(format!("signal lengths differ ({} vs {n})", s.len())));
        }
    }
    let mut total = 0.0;
    for k in 0..n {
        let sq: f64 = (0..3).map(|i| (desired[i].values()[k] - actual[i].values()[k]).powi(2)).sum();
        total += sq.sqrt();
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(v: Vec<f64>) -> SampledSignal {
        SampledSignal::new(v, 0.1).unwrap()
    }

    #[test]
    fn error_metric_cases() {
        let z = || sig(vec![0.0; 4]);
        let d = [z(), z(), z()];
        assert_eq!(error_metric(&d, &[z(), z(), z()]).unwrap(), 0.0);
        let a = [sig(vec![3.0; 4]), z(), sig(vec![4.0; 4])];
        assert!((error_metric(&d, &a).unwrap() - 5.0).abs() < 1e-15);
        let d2 = [sig(vec![0.0; 2]), sig(vec![0.0; 2]), sig(vec![0.0; 2])];
        let a2 = [sig(vec![1.0, 0.0]), sig(vec![0.0, 2.0]), sig(vec![0.0; 2])];
        assert!((error_metric(&d2, &a2).unwrap() - 1.5).abs() < 1e-15);
        assert!(error_metric(&d2, &a).is_err());
    }
}
