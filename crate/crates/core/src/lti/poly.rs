//! Dense real polynomials stored in descending powers of `s`.
//!
//! `[c_n, ..., c_1, c_0]` represents `c_n s^n + ... + c_1 s + c_0`. The zero
//! polynomial is `[0.0]`.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Drops exact leading zeros, keeping at least one coefficient.
pub fn trim(p: &[f64]) -> Vec<f64> {
    match p.iter().position(|&c| c != 0.0) {
        Some(i) => p[i..].to_vec(),
        None => vec![0.0],
    }
}

pub fn degree(p: &[f64]) -> usize {
    trim(p).len() - 1
}

pub fn is_zero(p: &[f64]) -> bool {
    p.iter().all(|&c| c == 0.0)
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    trim(&out)
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, &c) in a.iter().enumerate() {
        out[n - a.len() + i] += c;
    }
    for (i, &c) in b.iter().enumerate() {
        out[n - b.len() + i] += c;
    }
    trim(&out)
}

pub fn scale(p: &[f64], k: f64) -> Vec<f64> {
    trim(&p.iter().map(|c| c * k).collect::<Vec<_>>())
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    add(a, &scale(b, -1.0))
}

/// Left-pads with zeros to `len` coefficients.
pub fn pad(p: &[f64], len: usize) -> Vec<f64> {
    debug_assert!(len >= p.len());
    let mut out = vec![0.0; len - p.len()];
    out.extend_from_slice(p);
    out
}

pub fn eval(p: &[f64], x: f64) -> f64 {
    p.iter().fold(0.0, |acc, &c| acc * x + c)
}

pub fn eval_complex(p: &[f64], s: Complex64) -> Complex64 {
    p.iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

pub fn derivative(p: &[f64]) -> Vec<f64> {
    let n = p.len() - 1;
    if n == 0 {
        return vec![0.0];
    }
    trim(
        &p[..n]
            .iter()
            .enumerate()
            .map(|(i, &c)| c * (n - i) as f64)
            .collect::<Vec<_>>(),
    )
}

/// Roots from the eigenvalues of the companion matrix.
pub fn roots(p: &[f64]) -> Vec<Complex64> {
    let p = trim(p);
    let n = p.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = p[0];
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        companion[(0, j)] = -p[j + 1] / lead;
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

/// Expands `lead * prod(s - r_i)`; imaginary parts from conjugate pairs are dropped.
pub fn from_roots(roots: &[Complex64], lead: f64) -> Vec<f64> {
    let mut acc = vec![Complex64::new(lead, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (i, &c) in acc.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        acc = next;
    }
    trim(&acc.iter().map(|c| c.re).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiply_first_order_factors() {
        assert_eq!(mul(&[1.0, 1.0], &[1.0, 2.0]), vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn add_aligns_low_order_terms() {
        assert_eq!(add(&[1.0, 0.0, 0.0], &[2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(sub(&[1.0, 2.0], &[1.0, 2.0]), vec![0.0]);
    }

    #[test]
    fn roots_and_expansion_agree() {
        let p = vec![2.0, -4.0, 10.0, -8.0];
        let r = roots(&p);
        let back = from_roots(&r, 2.0);
        for (a, b) in p.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10, "{p:?} vs {back:?}");
        }
    }

    #[test]
    fn derivative_of_cubic() {
        assert_eq!(derivative(&[1.0, 2.0, 3.0, 4.0]), vec![3.0, 4.0, 3.0]);
        assert_eq!(derivative(&[5.0]), vec![0.0]);
    }
}
