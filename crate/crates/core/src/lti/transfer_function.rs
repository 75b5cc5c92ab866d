use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly;
use super::state_space::StateSpace;
use crate::error::{Error, Result};

/// Default stability margin used by [`TransferFunction::is_stable`] callers.
pub const DEFAULT_STABILITY_TOL: f64 = 1e-9;

/// Default root-matching tolerance for [`TransferFunction::minimal_realization`].
pub const DEFAULT_CANCELLATION_TOL: f64 = 1e-8;

/// Rational continuous-time SISO transfer function `num(s) / den(s)`.
///
/// Coefficients are stored in descending powers of `s`. Interconnection
/// operations never cancel common factors; call
/// [`minimal_realization`](Self::minimal_realization) explicitly for that.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TransferFunction {
    pub fn new(num: impl Into<Vec<f64>>, den: impl Into<Vec<f64>>) -> Result<Self> {
        let num = num.into();
        let den = den.into();
        if num.is_empty() || den.is_empty() {
            return Err(Error::InvalidTransferFunction(
                "empty coefficient list".into(),
            ));
        }
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(Error::InvalidTransferFunction(
                "coefficients must be finite".into(),
            ));
        }
        if poly::is_zero(&den) {
            return Err(Error::InvalidTransferFunction(
                "denominator is identically zero".into(),
            ));
        }
        Ok(Self {
            num: poly::trim(&num),
            den: poly::trim(&den),
        })
    }

    /// Static gain `k`.
    pub fn gain(k: f64) -> Self {
        Self {
            num: poly::trim(&[k]),
            den: vec![1.0],
        }
    }

    /// `pole / (s + pole)`: unit DC gain first-order lag.
    pub fn first_order_lag(pole: f64) -> Self {
        Self {
            num: vec![pole],
            den: vec![1.0, pole],
        }
    }

    pub fn integrator() -> Self {
        Self {
            num: vec![1.0],
            den: vec![1.0, 0.0],
        }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    /// Denominator degree.
    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        poly::is_zero(&self.num)
    }

    pub fn is_proper(&self) -> bool {
        self.is_zero() || self.num.len() <= self.den.len()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.is_zero() || self.num.len() < self.den.len()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly::eval_complex(&self.num, s) / poly::eval_complex(&self.den, s)
    }

    pub fn freq_response(&self, omega: f64) -> Complex64 {
        self.eval(Complex64::new(0.0, omega))
    }

    /// Value at `s = 0`; infinite when the denominator vanishes there.
    pub fn dc_gain(&self) -> f64 {
        let n = poly::eval(&self.num, 0.0);
        let d = poly::eval(&self.den, 0.0);
        if d == 0.0 {
            if n == 0.0 {
                f64::NAN
            } else {
                f64::INFINITY.copysign(n)
            }
        } else {
            n / d
        }
    }

    /// `self * other` without cancellation.
    pub fn series(&self, other: &Self) -> Self {
        Self {
            num: poly::mul(&self.num, &other.num),
            den: poly::mul(&self.den, &other.den),
        }
    }

    /// `self + other` over the product denominator.
    pub fn parallel(&self, other: &Self) -> Self {
        Self {
            num: poly::add(
                &poly::mul(&self.num, &other.den),
                &poly::mul(&other.num, &self.den),
            ),
            den: poly::mul(&self.den, &other.den),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.parallel(&other.scale(-1.0))
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            num: poly::scale(&self.num, k),
            den: self.den.clone(),
        }
    }

    /// `1 - self`.
    pub fn one_minus(&self) -> Self {
        Self {
            num: poly::sub(&self.den, &self.num),
            den: self.den.clone(),
        }
    }

    /// Reciprocal `den / num`.
    pub fn inverse(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::Degenerate("inverse of the zero transfer function".into()));
        }
        Ok(Self {
            num: self.den.clone(),
            den: self.num.clone(),
        })
    }

    /// Negative feedback closure `forward / (1 + forward * loop_gain)`.
    pub fn feedback(&self, loop_gain: &Self) -> Result<Self> {
        let open_num = poly::mul(&self.num, &loop_gain.num);
        let open_den = poly::mul(&self.den, &loop_gain.den);
        let den = poly::add(&open_den, &open_num);
        if poly::is_zero(&den) {
            return Err(Error::Degenerate(
                "1 + forward * loop_gain is identically zero".into(),
            ));
        }
        Ok(Self {
            num: poly::mul(&self.num, &loop_gain.den),
            den,
        })
    }

    pub fn poles(&self) -> Vec<Complex64> {
        poly::roots(&self.den)
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        if self.is_zero() {
            return Vec::new();
        }
        poly::roots(&self.num)
    }

    /// Largest real part over the poles; `-inf` for a static gain.
    pub fn spectral_abscissa(&self) -> f64 {
        self.poles()
            .iter()
            .map(|p| p.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True iff every pole has real part below `-tol`.
    pub fn is_stable(&self, tol: f64) -> Result<bool> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "stability margin must be positive, got {tol}"
            )));
        }
        Ok(self.poles().iter().all(|p| p.re < -tol))
    }

    /// Cancels pole/zero pairs closer than `tol * max(1, |pole|)`.
    pub fn minimal_realization(&self, tol: f64) -> Self {
        if self.is_zero() {
            return Self::gain(0.0);
        }
        let mut zeros = self.zeros();
        let mut poles = self.poles();
        let mut kept_zeros = Vec::with_capacity(zeros.len());
        while let Some(z) = zeros.pop() {
            let hit = poles
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - z).norm()))
                .filter(|&(i, d)| d <= tol * poles[i].norm().max(1.0))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match hit {
                Some((i, _)) => {
                    poles.swap_remove(i);
                }
                None => kept_zeros.push(z),
            }
        }
        Self {
            num: poly::from_roots(&kept_zeros, self.num[0]),
            den: poly::from_roots(&poles, self.den[0]),
        }
    }

    /// Controllable canonical realization.
    ///
    /// For `den = s^n + a_1 s^{n-1} + ... + a_n` (after normalization) and a
    /// numerator padded to `b_0 s^n + ... + b_n`, the realization is
    /// `A` with first row `-a_i` and ones on the subdiagonal, `B = e_1`,
    /// `C_i = b_i - b_0 a_i`, `D = b_0`.
    pub fn to_state_space(&self) -> Result<StateSpace> {
        if !self.is_proper() {
            return Err(Error::Improper {
                num: poly::degree(&self.num),
                den: self.order(),
            });
        }
        let n = self.order();
        let lead = self.den[0];
        let den: Vec<f64> = self.den.iter().map(|c| c / lead).collect();
        let num: Vec<f64> = poly::pad(&self.num, n + 1)
            .iter()
            .map(|c| c / lead)
            .collect();
        let d = num[0];
        let mut a = nalgebra::DMatrix::zeros(n, n);
        for j in 0..n {
            a[(0, j)] = -den[j + 1];
        }
        for i in 1..n {
            a[(i, i - 1)] = 1.0;
        }
        let mut b = nalgebra::DVector::zeros(n);
        if n > 0 {
            b[0] = 1.0;
        }
        let c = nalgebra::RowDVector::from_iterator(
            n,
            (0..n).map(|i| num[i + 1] - d * den[i + 1]),
        );
        StateSpace::new(a, b, c, d)
    }
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, p: &[f64]) -> fmt::Result {
            write!(f, "[")?;
            for (i, c) in p.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, "]")
        }
        write!(f, "num: ")?;
        list(f, &self.num)?;
        write!(f, " / den: ")?;
        list(f, &self.den)
    }
}

impl FromStr for TransferFunction {
    type Err = Error;

    /// Parses `num: [c_n, ..., c_0] / den: [d_m, ..., d_0]`.
    fn from_str(s: &str) -> Result<Self> {
        fn coeffs(part: &str, key: &str) -> Result<Vec<f64>> {
            let body = part
                .trim()
                .strip_prefix(key)
                .and_then(|r| r.trim_start().strip_prefix(':'))
                .ok_or_else(|| Error::Parse(format!("expected `{key}:` in `{part}`")))?
                .trim();
            let inner = body
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| Error::Parse(format!("expected [..] after `{key}:`")))?;
            inner
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad coefficient `{t}`: {e}")))
                })
                .collect()
        }
        let (num, den) = s
            .split_once('/')
            .ok_or_else(|| Error::Parse(format!("expected `num: [..] / den: [..]`, got `{s}`")))?;
        Self::new(coeffs(num, "num")?, coeffs(den, "den")?)
    }
}

impl TryFrom<String> for TransferFunction {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TransferFunction> for String {
    fn from(tf: TransferFunction) -> String {
        tf.to_string()
    }
}
