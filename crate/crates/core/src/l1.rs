//! Discrete-time extended L1 adaptive output-feedback controller for one axis.
//!
//! Each call to [`L1Controller::step`] runs, in order:
//!
//! 1. prediction error `ỹ = ŷ1 − y1`;
//! 2. adaptation `σ̂ ← σ̂ + Δt·Γ·Proj(σ̂, −m·P·ỹ)`;
//! 3. outer loop `r1 = K (r2 − y2)`;
//! 4. control law `u = C(s)[r1 − σ̂]`, the filter advanced one ZOH step and
//!    its output read after the update;
//! 5. predictor `ŷ1 ← ŷ1 + Δt·(−m ŷ1 + m (u + σ̂))`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certify::check_filter;
use crate::error::{Error, Result};
use crate::lti::{DiscreteStateSpace, TransferFunction};

/// Default adaptation rate, as flown on the vehicle.
pub const DEFAULT_ADAPTATION_GAIN: f64 = 1000.0;

/// Default controller period (AR.Drone-class rate).
pub const DEFAULT_CONTROL_DT: f64 = 1.0 / 70.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Config {
    /// Reference-model pole `m`.
    pub m: f64,
    /// Adaptation rate `Γ`.
    pub gamma: f64,
    /// Half-width of the projection interval.
    pub sigma_max: f64,
    /// Relative width of the projection boundary layer.
    pub epsilon: f64,
    pub filter: TransferFunction,
    /// Outer proportional gain `K`.
    pub k: f64,
    /// Lyapunov scalar `P`.
    pub p: f64,
    pub dt: f64,
}

impl Default for L1Config {
    fn default() -> Self {
        let m = 10.0;
        Self {
            m,
            gamma: DEFAULT_ADAPTATION_GAIN,
            sigma_max: 5.0,
            epsilon: 0.1,
            filter: TransferFunction::first_order_lag(30.0),
            k: 2.0,
            p: lyapunov_scalar(m, 1.0),
            dt: DEFAULT_CONTROL_DT,
        }
    }
}

/// Positive solution of the scalar Lyapunov equation `−m P − P m = −Z`.
pub fn lyapunov_scalar(m: f64, z: f64) -> f64 {
    z / (2.0 * m)
}

impl L1Config {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m", self.m),
            ("gamma", self.gamma),
            ("sigma_max", self.sigma_max),
            ("epsilon", self.epsilon),
            ("k", self.k),
            ("p", self.p),
            ("dt", self.dt),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        check_filter(&self.filter)?;
        let rho = self.adaptation_spectral_radius();
        if !(rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "explicit adaptation step is unstable: spectral radius {rho:.4} for \
                 gamma = {}, m = {}, P = {}, dt = {}",
                self.gamma, self.m, self.p, self.dt
            )));
        }
        Ok(())
    }

    /// Spectral radius of the sampled `(ỹ, σ̃)` error recursion with the
    /// projection inactive (its worst case).
    ///
    /// With the adaptation applied before the predictor update:
    /// `σ̃⁺ = σ̃ − ΓmPΔt ỹ`, `ỹ⁺ = (1 − mΔt) ỹ + mΔt σ̃⁺`.
    pub fn adaptation_spectral_radius(&self) -> f64 {
        let a = self.m * self.dt;
        let g = self.gamma * self.m * self.p * self.dt;
        let mat = DMatrix::from_row_slice(2, 2, &[1.0 - a - a * g, a, -g, 1.0]);
        mat.complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max)
    }

    pub fn reference_model(&self) -> TransferFunction {
        TransferFunction::first_order_lag(self.m)
    }
}

/// Smooth projection of the adaptation direction onto `|σ| <= σ_max(1+ε)`.
///
/// With `p(σ) = (|σ| − σ_max) / (ε σ_max)` the direction passes unchanged in
/// the interior (`p <= 0`) or when it points inward; otherwise it is scaled by
/// `1 − p`, reaching zero on the outer boundary.
pub fn projection(sigma_hat: f64, signal: f64, sigma_max: f64, epsilon: f64) -> f64 {
    let p = (sigma_hat.abs() - sigma_max) / (epsilon * sigma_max);
    if p > 0.0 && signal * sigma_hat > 0.0 {
        signal * (1.0 - p).max(0.0)
    } else {
        signal
    }
}

/// Internal state of one axis controller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1ControllerState {
    /// Predicted velocity `ŷ1`.
    pub y1_hat: f64,
    /// Adaptive estimate `σ̂`.
    pub sigma_hat: f64,
    pub filter_state: DVector<f64>,
    /// Last control output.
    pub u: f64,
}

/// Signals produced by one controller step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Step {
    pub u: f64,
    pub y_tilde: f64,
    pub sigma_hat: f64,
    pub r1: f64,
}

#[derive(Clone, Debug)]
pub struct L1Controller {
    cfg: L1Config,
    filter: DiscreteStateSpace,
    state: L1ControllerState,
}

impl L1Controller {
    /// Validates `cfg` and returns a controller at the zero initial condition.
    pub fn new(cfg: L1Config) -> Result<Self> {
        cfg.validate()?;
        let filter = cfg.filter.to_state_space()?.discretize_zoh(cfg.dt)?;
        let state = L1ControllerState {
            y1_hat: 0.0,
            sigma_hat: 0.0,
            filter_state: DVector::zeros(filter.order()),
            u: 0.0,
        };
        Ok(Self { cfg, filter, state })
    }

    pub fn config(&self) -> &L1Config {
        &self.cfg
    }

    pub fn state(&self) -> &L1ControllerState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.y1_hat = 0.0;
        self.state.sigma_hat = 0.0;
        self.state.filter_state.fill(0.0);
        self.state.u = 0.0;
    }

    pub fn step(&mut self, r2: f64, y1: f64, y2: f64) -> Result<L1Step> {
        if !(r2.is_finite() && y1.is_finite() && y2.is_finite()) {
            return Err(Error::NonFinite(format!("controller inputs r2={r2}, y1={y1}, y2={y2}")));
        }
        let cfg = &self.cfg;
        let st = &mut self.state;
        let bound = cfg.sigma_max * (1.0 + cfg.epsilon);

        let y_tilde = st.y1_hat - y1;
        let direction = projection(st.sigma_hat, -cfg.m * cfg.p * y_tilde, cfg.sigma_max, cfg.epsilon);
        // The Euler step can overshoot the boundary layer; the clamp keeps the
        // sampled estimate inside the same set as the continuous law.
        st.sigma_hat = (st.sigma_hat + cfg.dt * cfg.gamma * direction).clamp(-bound, bound);

        let r1 = cfg.k * (r2 - y2);
        self.filter.advance(&mut st.filter_state, r1 - st.sigma_hat);
        let u = self.filter.output(&st.filter_state, 0.0);

        st.y1_hat += cfg.dt * (-cfg.m * st.y1_hat + cfg.m * (u + st.sigma_hat));
        st.u = u;
        if !st.y1_hat.is_finite() || !u.is_finite() {
            return Err(Error::NonFinite("controller state diverged".into()));
        }
        Ok(L1Step {
            u,
            y_tilde,
            sigma_hat: st.sigma_hat,
            r1,
        })
    }
}

/// Writes a per-step debugging trace as CSV.
pub fn write_trace_csv<W: Write>(writer: W, dt: f64, steps: &[L1Step]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time", "y_tilde", "sigma_hat", "u", "r1"])?;
    for (k, s) in steps.iter().enumerate() {
        w.write_record([
            (k as f64 * dt).to_string(),
            s.y_tilde.to_string(),
            s.sigma_hat.to_string(),
            s.u.to_string(),
            s.r1.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
