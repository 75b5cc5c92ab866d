//! Impulse-response L1 norm of stable strictly proper systems.

use nalgebra::{DMatrix, DVector};

use super::transfer_function::{TransferFunction, DEFAULT_STABILITY_TOL};
use crate::error::{Error, Result};

/// Tail bound used when callers do not pick one.
pub const DEFAULT_TAIL_TOL: f64 = 1e-9;

const MAX_STEPS: usize = 20_000_000;

/// Integration step of `1e-3` slowest time constants, capped at `1e-2` of the
/// fastest so trapezoid error on fast modes stays controlled.
pub fn default_norm_step(g: &TransferFunction) -> f64 {
    let rates: Vec<f64> = g.poles().iter().map(|p| p.norm()).filter(|&r| r > 0.0).collect();
    if rates.is_empty() {
        return 1e-3;
    }
    let slowest = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let fastest = rates.iter().cloned().fold(0.0, f64::max);
    (1e-3 / slowest).min(1e-2 / fastest)
}

/// Solves `M^T P + P M = -Q` through the Kronecker-vectorized linear system.
pub fn lyapunov(m: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mt = m.transpose();
    // column-major vec: vec(Mt P) = (I ⊗ Mt) vec(P), vec(P M) = (Mt ⊗ I) vec(P)
    let big = eye.kronecker(&mt) + mt.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let sol = big
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov operator".into()))?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// `∫₀^∞ |g(t)| dt` for stable strictly proper `g`.
///
/// The impulse response `C e^{At} B` is propagated exactly on a grid of step
/// `dt` and integrated with the trapezoid rule. Integration stops once the
/// tail beyond the current time is provably below `tail_tol`: with
/// `β = α/2` (`α` the distance of the dominant pole from the axis) and
/// `P` solving `(A+βI)ᵀP + P(A+βI) = -I`, the weighted energy `xᵀPx` decays
/// at least like `e^{-2βt}`, so the tail is at most
/// `sqrt(C P⁻¹ Cᵀ) · sqrt(xᵀPx) / β`.
pub fn l1_system_norm(g: &TransferFunction, dt: f64, tail_tol: f64) -> Result<f64> {
    if !(dt > 0.0) || !(tail_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt and tail_tol must be positive (dt = {dt}, tail_tol = {tail_tol})"
        )));
    }
    if !g.is_strictly_proper() {
        return Err(Error::NotStrictlyProper);
    }
    if g.is_zero() {
        return Ok(0.0);
    }
    let alpha = -g.spectral_abscissa();
    if !(alpha > DEFAULT_STABILITY_TOL) {
        return Err(Error::Unstable(format!("spectral abscissa {}", -alpha)));
    }
    let ss = g.to_state_space()?;
    let n = ss.order();
    let beta = 0.5 * alpha;
    let shifted = &ss.a + DMatrix::<f64>::identity(n, n) * beta;
    let p = lyapunov(&shifted, &DMatrix::identity(n, n))?;
    let p_inv = p
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("tail-bound Lyapunov matrix is not positive definite".into()))?
        .inverse();
    let output_gain = (&ss.c * &p_inv * ss.c.transpose())[(0, 0)].max(0.0).sqrt();
    let tail = |x: &DVector<f64>| output_gain * x.dot(&(&p * x)).max(0.0).sqrt() / beta;

    let phi = (&ss.a * dt).exp();
    let mut x = ss.b.clone();
    let mut prev = ss.c.dot(&x.transpose()).abs();
    let mut total = 0.0;
    let check_every = 64;
    for step in 1..=MAX_STEPS {
        x = &phi * x;
        let h = ss.c.dot(&x.transpose()).abs();
        total += 0.5 * dt * (prev + h);
        prev = h;
        if step % check_every == 0 && tail(&x) < tail_tol {
            return Ok(total);
        }
    }
    Err(Error::NotConverged(format!(
        "L1 norm tail still above {tail_tol} after {MAX_STEPS} steps"
    )))
}

/// [`l1_system_norm`] at [`default_norm_step`].
pub fn l1_norm(g: &TransferFunction, tail_tol: f64) -> Result<f64> {
    l1_system_norm(g, default_norm_step(g), tail_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_lag_has_unit_norm() {
        for m in [0.5, 1.0, 5.0, 10.0] {
            let g = TransferFunction::first_order_lag(m);
            let v = l1_norm(&g, DEFAULT_TAIL_TOL).unwrap();
            assert!((v - 1.0).abs() < 1e-6, "m = {m}: {v}");
        }
    }

    #[test]
    fn double_pole_has_unit_norm() {
        let g = TransferFunction::new(vec![1.0], vec![1.0, 2.0, 1.0]).unwrap();
        let v = l1_norm(&g, DEFAULT_TAIL_TOL).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn rejects_unstable_and_proper() {
        let unstable = TransferFunction::new(vec![1.0], vec![1.0, -1.0]).unwrap();
        assert!(matches!(l1_norm(&unstable, 1e-6), Err(Error::Unstable(_))));
        assert!(matches!(
            l1_norm(&TransferFunction::integrator(), 1e-6),
            Err(Error::Unstable(_))
        ));
        let proper = TransferFunction::new(vec![1.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(l1_norm(&proper, 1e-6), Err(Error::NotStrictlyProper)));
    }

    #[test]
    fn lyapunov_scalar() {
        let p = lyapunov(&DMatrix::from_element(1, 1, -2.0), &DMatrix::identity(1, 1)).unwrap();
        assert!((p[(0, 0)] - 0.25).abs() < 1e-15);
    }
}
