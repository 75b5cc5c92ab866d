use nalgebra::{DMatrix, DVector, RowDVector};

use super::signal::SampledSignal;
use super::transfer_function::TransferFunction;
use crate::error::{Error, Result};

/// Continuous-time SISO realization `x' = Ax + Bu`, `y = Cx + Du`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>, d: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(Error::Dimension(format!(
                "A is {}x{}, B has {} rows, C has {} columns",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Recovers `C (sI - A)^{-1} B + D` with the Faddeev-LeVerrier recursion.
    pub fn transfer_function(&self) -> TransferFunction {
        let n = self.order();
        let mut charpoly = vec![0.0; n + 1];
        charpoly[0] = 1.0;
        let mut adj_terms = Vec::with_capacity(n);
        let mut m = DMatrix::<f64>::zeros(n, n);
        for k in 1..=n {
            m = &self.a * &m + DMatrix::identity(n, n) * charpoly[k - 1];
            let am = &self.a * &m;
            charpoly[k] = -am.trace() / k as f64;
            adj_terms.push((&self.c * &m * &self.b)[(0, 0)]);
        }
        let mut num: Vec<f64> = charpoly.iter().map(|c| c * self.d).collect();
        for (k, v) in adj_terms.into_iter().enumerate() {
            num[k + 1] += v;
        }
        TransferFunction::new(num, charpoly).expect("monic characteristic polynomial")
    }

    /// Exact zero-order-hold discretization through the exponential of the
    /// augmented matrix `[[A, B], [0, 0]] * dt`.
    pub fn discretize_zoh(&self, dt: f64) -> Result<DiscreteStateSpace> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {dt}"
            )));
        }
        let n = self.order();
        let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&self.a * dt));
        aug.view_mut((0, n), (n, 1)).copy_from(&(&self.b * dt));
        let phi = aug.exp();
        Ok(DiscreteStateSpace {
            ad: phi.view((0, 0), (n, n)).into_owned(),
            bd: phi.view((0, n), (n, 1)).column(0).into_owned(),
            c: self.c.clone(),
            d: self.d,
            dt,
        })
    }
}

/// Sampled realization `x[k+1] = Ad x[k] + Bd u[k]`, `y[k] = C x[k] + D u[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteStateSpace {
    pub ad: DMatrix<f64>,
    pub bd: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
    pub dt: f64,
}

impl DiscreteStateSpace {
    pub fn new(
        ad: DMatrix<f64>,
        bd: DVector<f64>,
        c: RowDVector<f64>,
        d: f64,
        dt: f64,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {dt}"
            )));
        }
        let n = ad.nrows();
        if ad.ncols() != n || bd.len() != n || c.len() != n {
            return Err(Error::Dimension(format!(
                "Ad is {}x{}, Bd has {} rows, C has {} columns",
                ad.nrows(),
                ad.ncols(),
                bd.len(),
                c.len()
            )));
        }
        Ok(Self { ad, bd, c, d, dt })
    }

    pub fn order(&self) -> usize {
        self.ad.nrows()
    }

    pub fn output(&self, x: &DVector<f64>, u: f64) -> f64 {
        self.c.dot(&x.transpose()) + self.d * u
    }

    /// Advances `x` in place by one sample with input `u`.
    pub fn advance(&self, x: &mut DVector<f64>, u: f64) {
        let next = &self.ad * &*x + &self.bd * u;
        x.copy_from(&next);
    }

    pub fn simulate(&self, input: &SampledSignal, x0: &DVector<f64>) -> Result<SampledSignal> {
        if (input.dt() - self.dt).abs() > 1e-12 * self.dt.max(1.0) {
            return Err(Error::StepMismatch {
                expected: self.dt,
                actual: input.dt(),
            });
        }
        if x0.len() != self.order() {
            return Err(Error::Dimension(format!(
                "initial state has {} entries, model order is {}",
                x0.len(),
                self.order()
            )));
        }
        let mut x = x0.clone();
        let mut out = Vec::with_capacity(input.len());
        for &u in input.values() {
            out.push(self.output(&x, u));
            self.advance(&mut x, u);
        }
        SampledSignal::new(out, self.dt)
    }

    /// Markov parameters `h[0] = D`, `h[k] = C Ad^{k-1} Bd`.
    pub fn markov_parameters(&self, count: usize) -> Vec<f64> {
        let mut h = Vec::with_capacity(count);
        if count == 0 {
            return h;
        }
        h.push(self.d);
        let mut x = self.bd.clone();
        for _ in 1..count {
            h.push(self.c.dot(&x.transpose()));
            x = &self.ad * x;
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zoh_of_integrator() {
        let dss = TransferFunction::integrator()
            .to_state_space()
            .unwrap()
            .discretize_zoh(0.1)
            .unwrap();
        assert!((dss.ad[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((dss.bd[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zoh_of_first_order_lag() {
        let ss = TransferFunction::first_order_lag(1.0).to_state_space().unwrap();
        let dss = ss.discretize_zoh(0.1).unwrap();
        assert!((dss.ad[(0, 0)] - (-0.1f64).exp()).abs() < 1e-14);
        assert!((dss.bd[0] - (1.0 - (-0.1f64).exp())).abs() < 1e-14);
        assert!((dss.ad[(0, 0)] - 0.904837).abs() < 1e-6);
        assert!((dss.bd[0] - 0.095163).abs() < 1e-6);
    }

    #[test]
    fn zoh_small_step_limit() {
        let g = TransferFunction::new(vec![1.0, 2.0], vec![1.0, 3.0, 5.0]).unwrap();
        let dss = g.to_state_space().unwrap().discretize_zoh(1e-8).unwrap();
        let eye = DMatrix::<f64>::identity(2, 2);
        assert!((&dss.ad - eye).abs().max() < 1e-7);
        assert!(dss.bd.abs().max() < 1e-7);
    }

    #[test]
    fn zoh_rejects_nonpositive_step() {
        let ss = TransferFunction::integrator().to_state_space().unwrap();
        assert!(ss.discretize_zoh(0.0).is_err());
        assert!(ss.discretize_zoh(-1.0).is_err());
    }

    #[test]
    fn simulate_step_of_lag() {
        let dt = 0.01;
        let dss = TransferFunction::first_order_lag(1.0)
            .to_state_space()
            .unwrap()
            .discretize_zoh(dt)
            .unwrap();
        let u = SampledSignal::new(vec![1.0; 101], dt).unwrap();
        let y = dss.simulate(&u, &DVector::zeros(1)).unwrap();
        // sample 101 sits at t = 1
        assert!((y.get(101) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!((y.get(101) - 0.6321).abs() < 1e-4);
    }

    #[test]
    fn simulate_zero_input_zero_state() {
        let dss = TransferFunction::new(vec![1.0], vec![1.0, 2.0, 1.0])
            .unwrap()
            .to_state_space()
            .unwrap()
            .discretize_zoh(0.05)
            .unwrap();
        let y = dss
            .simulate(&SampledSignal::new(vec![0.0; 50], 0.05).unwrap(), &DVector::zeros(2))
            .unwrap();
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simulate_integrator_ramp() {
        let dss = TransferFunction::integrator()
            .to_state_space()
            .unwrap()
            .discretize_zoh(0.1)
            .unwrap();
        let y = dss
            .simulate(&SampledSignal::new(vec![1.0; 11], 0.1).unwrap(), &DVector::zeros(1))
            .unwrap();
        assert!((y.get(11) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simulate_checks_dimensions() {
        let dss = TransferFunction::integrator()
            .to_state_space()
            .unwrap()
            .discretize_zoh(0.1)
            .unwrap();
        let u = SampledSignal::new(vec![1.0; 3], 0.2).unwrap();
        assert!(matches!(
            dss.simulate(&u, &DVector::zeros(1)),
            Err(Error::StepMismatch { .. })
        ));
        let u = SampledSignal::new(vec![1.0; 3], 0.1).unwrap();
        assert!(matches!(
            dss.simulate(&u, &DVector::zeros(2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn markov_parameters_of_lag() {
        let dss = DiscreteStateSpace::new(
            DMatrix::from_element(1, 1, 0.9),
            DVector::from_element(1, 0.1),
            RowDVector::from_element(1, 1.0),
            0.0,
            1.0,
        )
        .unwrap();
        let h = dss.markov_parameters(4);
        let expect = [0.0, 0.1, 0.09, 0.081];
        for (a, b) in h.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
