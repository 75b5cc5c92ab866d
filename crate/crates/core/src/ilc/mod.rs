//! Optimization-based iterative learning in the lifted (trial) domain.
//!
//! Per axis and iteration `j` the deviation model is
//! `ȳ_j = F r̄_j + d_j`, with `ȳ` the measured position minus the desired
//! trajectory and `r̄` the learned offset added to the reference. `d` is
//! tracked across iterations by a Kalman filter and the next `r̄` solves a
//! QP with bounded second differences.

pub mod qp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::DiscreteStateSpace;

pub use qp::{kkt_residual, qp_solve, qp_solve_with, ActiveConstraint, Bound, QpOptions, QpSolution};

/// Lifted input-output map over one trial of `N` samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedModel {
    pub f: DMatrix<f64>,
    pub dt: f64,
}

impl LiftedModel {
    /// Wraps an explicit square matrix.
    pub fn from_matrix(f: DMatrix<f64>, dt: f64) -> Result<Self> {
        if f.nrows() != f.ncols() || f.nrows() == 0 {
            return Err(Error::Dimension(format!("lifted matrix is {}x{}", f.nrows(), f.ncols())));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {dt}")));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lifted matrix".into()));
        }
        Ok(Self { f, dt })
    }

    pub fn len(&self) -> usize {
        self.f.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Markov-parameter Toeplitz matrix `F(i,k) = h[i−k]` from zero initial state.
pub fn build_lifted(nominal: &DiscreteStateSpace, n: usize) -> Result<LiftedModel> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("lifted dimension must be at least 2, got {n}")));
    }
    let h = nominal.markov_parameters(n);
    let f = DMatrix::from_fn(n, n, |i, k| if i >= k { h[i - k] } else { 0.0 });
    LiftedModel::from_matrix(f, nominal.dt)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEstimate {
    pub d_hat: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub iteration: usize,
}

impl DisturbanceEstimate {
    /// `d̂ = 0` with covariance `p0 · I`.
    pub fn initial(n: usize, p0: f64) -> Self {
        Self {
            d_hat: DVector::zeros(n),
            covariance: DMatrix::identity(n, n) * p0,
            iteration: 0,
        }
    }

    /// Symmetric to `tol` with no eigenvalue below `-tol`.
    pub fn covariance_is_psd(&self, tol: f64) -> bool {
        let p = &self.covariance;
        if (p - p.transpose()).amax() > tol {
            return false;
        }
        p.clone().symmetric_eigenvalues().iter().all(|&l| l >= -tol)
    }
}

/// Scalar multiples of the identity for every weight and noise matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IlcWeights {
    /// Tracking weight `Q = q I`.
    pub q: f64,
    /// Input-size weight `S = s I`.
    pub s: f64,
    /// Second-difference weight `R = r I`.
    pub r: f64,
    /// Bound on every second difference of `r̄`.
    pub a_max: f64,
    /// Iteration-to-iteration disturbance drift `E = e I`.
    pub process_noise: f64,
    /// Measurement noise `V = v I`.
    pub measurement_noise: f64,
    /// Initial covariance `p0 I`.
    pub initial_covariance: f64,
}

impl Default for IlcWeights {
    fn default() -> Self {
        Self {
            q: 1.0,
            s: 1e-4,
            r: 1e-3,
            a_max: 5.0,
            process_noise: 1e-4,
            measurement_noise: 1e-2,
            initial_covariance: 1.0,
        }
    }
}

impl IlcWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q", self.q), ("s", self.s), ("r", self.r), ("a_max", self.a_max)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("process_noise", self.process_noise),
            ("measurement_noise", self.measurement_noise),
            ("initial_covariance", self.initial_covariance),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_len(what: &str, len: usize, n: usize) -> Result<()> {
    if len != n {
        return Err(Error::Dimension(format!("{what} has {len} samples, lifted model has {n}")));
    }
    Ok(())
}

/// One predict/update cycle with random-walk disturbance dynamics.
pub fn kalman_update(
    est: &DisturbanceEstimate,
    lifted: &LiftedModel,
    r_bar: &DVector<f64>,
    y_measured: &DVector<f64>,
    w: &IlcWeights,
) -> Result<DisturbanceEstimate> {
    let n = lifted.len();
    check_len("d̂", est.d_hat.len(), n)?;
    check_len("r̄", r_bar.len(), n)?;
    check_len("ȳ", y_measured.len(), n)?;
    if est.covariance.shape() != (n, n) {
        return Err(Error::Dimension(format!("covariance is {:?}", est.covariance.shape())));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let prior = &est.covariance + &eye * w.process_noise;
    let innovation_cov = &prior + &eye * w.measurement_noise;
    // G = P⁻ S⁻¹, computed as (S⁻¹ P⁻)ᵀ since both are symmetric
    let chol = innovation_cov
        .cholesky()
        .ok_or_else(|| Error::Singular("innovation covariance".into()))?;
    let gain = chol.solve(&prior).transpose();
    let innovation = y_measured - &lifted.f * r_bar - &est.d_hat;
    let d_hat = &est.d_hat + &gain * innovation;
    let post = (&eye - &gain) * &prior;
    let covariance = (&post + post.transpose()) * 0.5;
    Ok(DisturbanceEstimate {
        d_hat,
        covariance,
        iteration: est.iteration + 1,
    })
}

/// `(N−2)×N` matrix of `(1, −2, 1)/Δt²` stencils.
pub fn second_difference_operator(n: usize, dt: f64) -> Result<DMatrix<f64>> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("second differences need N >= 3, got {n}")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {dt}")));
    }
    let c = 1.0 / (dt * dt);
    let mut d = DMatrix::zeros(n - 2, n);
    for i in 0..n - 2 {
        d[(i, i)] = c;
        d[(i, i + 1)] = -2.0 * c;
        d[(i, i + 2)] = c;
    }
    Ok(d)
}

/// Hessian, gradient and constraints of the input update.
#[derive(Clone, Debug)]
pub struct IlcProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constraints: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl IlcProblem {
    /// `ŷᵀQŷ + r̄ᵀSr̄ + (D₂r̄)ᵀR(D₂r̄)` with `ŷ = F r̄ + d̂`, written as
    /// `½ r̄ᵀHr̄ + gᵀr̄ + const`.
    pub fn new(lifted: &LiftedModel, est: &DisturbanceEstimate, w: &IlcWeights) -> Result<Self> {
        w.validate()?;
        let n = lifted.len();
        check_len("d̂", est.d_hat.len(), n)?;
        let d2 = second_difference_operator(n, lifted.dt)?;
        let f = &lifted.f;
        let eye = DMatrix::<f64>::identity(n, n);
        let hessian = (f.tr_mul(f) * w.q + &eye * w.s + d2.tr_mul(&d2) * w.r) * 2.0;
        let hessian = (&hessian + hessian.transpose()) * 0.5;
        let linear = f.tr_mul(&est.d_hat) * (2.0 * w.q);
        let m = d2.nrows();
        Ok(Self {
            hessian,
            linear,
            constraints: d2,
            lower: DVector::from_element(m, -w.a_max),
            upper: DVector::from_element(m, w.a_max),
        })
    }

    /// Cost at `r̄`, including the constant `d̂ᵀQd̂`.
    pub fn cost(&self, r_bar: &DVector<f64>, est: &DisturbanceEstimate, w: &IlcWeights) -> f64 {
        0.5 * r_bar.dot(&(&self.hessian * r_bar)) + self.linear.dot(r_bar) + w.q * est.d_hat.norm_squared()
    }

    pub fn solve(&self) -> Result<QpSolution> {
        qp_solve(&self.hessian, &self.linear, &self.constraints, &self.lower, &self.upper)
    }
}

/// Next reference offset `r̄_{j+1}`.
pub fn ilc_update(lifted: &LiftedModel, est: &DisturbanceEstimate, w: &IlcWeights) -> Result<DVector<f64>> {
    Ok(IlcProblem::new(lifted, est, w)?.solve()?.x)
}
