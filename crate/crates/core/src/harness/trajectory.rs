use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::SampledSignal;

/// Horizontal figure-eight with a single altitude bump, traversed once.
///
/// The phase `φ(t) = 2π (t/T − sin(2πt/T)/(2π))` starts and ends at rest, so
/// the curve is closed in position and velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: usize,
    /// Controller steps per trajectory sample.
    pub substeps: usize,
    /// Semi-axes of the figure-eight in x and y, and the altitude swing (m).
    pub amplitude: [f64; 3],
    /// Trajectory start point (m).
    pub start: [f64; 3],
}

impl Default for Trajectory {
    fn default() -> Self {
        Self {
            samples: 300,
            substeps: 3,
            amplitude: [0.6, 0.4, 0.25],
            start: [0.0, 0.0, 1.0],
        }
    }
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 3 {
            return Err(Error::InvalidParameter(format!(
                "trajectory needs at least 3 samples, got {}",
                self.samples
            )));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidParameter("substeps must be at least 1".into()));
        }
        if self.amplitude.iter().chain(&self.start).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory geometry".into()));
        }
        Ok(())
    }

    pub fn duration(&self, sample_dt: f64) -> f64 {
        (self.samples - 1) as f64 * sample_dt
    }

    /// Position at time `t` for a traversal lasting `period`.
    pub fn position(&self, t: f64, period: f64) -> [f64; 3] {
        let u = (t / period).clamp(0.0, 1.0);
        let phi = 2.0 * PI * (u - (2.0 * PI * u).sin() / (2.0 * PI));
        let [ax, ay, az] = self.amplitude;
        [
            self.start[0] + ax * phi.sin(),
            self.start[1] + ay * (2.0 * phi).sin() / 2.0,
            self.start[2] + az * (1.0 - phi.cos()) / 2.0,
        ]
    }

    /// Desired position per axis, sampled at `sample_dt`.
    pub fn sample(&self, sample_dt: f64) -> Result<[SampledSignal; 3]> {
        self.validate()?;
        let period = self.duration(sample_dt);
        let points: Vec<[f64; 3]> = (0..self.samples)
            .map(|k| self.position(k as f64 * sample_dt, period))
            .collect();
        let axis = |i: usize| SampledSignal::new(points.iter().map(|p| p[i]).collect(), sample_dt);
        Ok([axis(0)?, axis(1)?, axis(2)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_and_at_rest_at_both_ends() {
        let traj = Trajectory::default();
        let dt = 0.04;
        let axes = traj.sample(dt).unwrap();
        for (i, s) in axes.iter().enumerate() {
            let v = s.values();
            let n = v.len();
            assert!((v[0] - traj.start[i]).abs() < 1e-12);
            assert!((v[n - 1] - traj.start[i]).abs() < 1e-12);
            // finite-difference velocity vanishes to second order at the ends
            assert!(((v[1] - v[0]) / dt).abs() < 1e-3);
            assert!(((v[n - 1] - v[n - 2]) / dt).abs() < 1e-3);
        }
    }

    #[test]
    fn stays_within_amplitude() {
        let traj = Trajectory::default();
        let axes = traj.sample(0.04).unwrap();
        for i in 0..3 {
            let dev = axes[i].values().iter().fold(0.0f64, |m, v| m.max((v - traj.start[i]).abs()));
            assert!(dev <= traj.amplitude[i] + 1e-12);
        }
    }
}
