use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled scalar time series.
///
/// Samples are addressed `1..=N` through [`get`](Self::get), sample `i` sitting
/// at time `(i - 1) * dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    values: Vec<f64>,
    dt: f64,
}

impl SampledSignal {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("signal must have at least one sample".into()));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {dt}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample {}", i + 1)));
        }
        Ok(Self { values, dt })
    }

    pub fn from_fn(n: usize, dt: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|k| f(k as f64 * dt)).collect(), dt)
    }

    pub fn constant(n: usize, dt: f64, value: f64) -> Result<Self> {
        Self::new(vec![value; n], dt)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// One-based sample access.
    pub fn get(&self, i: usize) -> f64 {
        assert!(i >= 1 && i <= self.values.len(), "sample index {i} out of 1..={}", self.values.len());
        self.values[i - 1]
    }

    pub fn time(&self, i: usize) -> f64 {
        (i - 1) as f64 * self.dt
    }

    pub fn linf_norm(&self) -> f64 {
        linf_norm(self)
    }

    /// Writes `time,value` rows with a header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "value"])?;
        for (k, v) in self.values.iter().enumerate() {
            w.write_record([(k as f64 * self.dt).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest absolute sample.
pub fn linf_norm(sig: &SampledSignal) -> f64 {
    sig.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linf_examples() {
        assert_eq!(SampledSignal::new(vec![1.0, -3.0, 2.0], 1.0).unwrap().linf_norm(), 3.0);
        assert_eq!(SampledSignal::constant(5, 0.1, 0.0).unwrap().linf_norm(), 0.0);
        let n = 11;
        let ramp = SampledSignal::new((0..n).map(|k| k as f64 / (n - 1) as f64).collect(), 0.1).unwrap();
        assert_eq!(ramp.linf_norm(), 1.0);
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(SampledSignal::new(vec![], 0.1).is_err());
        assert!(SampledSignal::new(vec![f64::NAN], 0.1).is_err());
        assert!(SampledSignal::new(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn one_based_indexing() {
        let s = SampledSignal::new(vec![4.0, 5.0, 6.0], 0.5).unwrap();
        assert_eq!(s.get(1), 4.0);
        assert_eq!(s.get(3), 6.0);
        assert_eq!(s.time(3), 1.0);
    }

    #[test]
    fn csv_columns() {
        let s = SampledSignal::new(vec![1.5, 2.0], 0.25).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "time,value\n0,1.5\n0.25,2\n");
    }
}
