//! Dense convex QP `min ½xᵀHx + gᵀx  s.t.  l <= Ax <= u` by a primal
//! active-set method.
//!
//! Equality-constrained subproblems are solved in range space: with
//! `H = LLᵀ` and `M = L⁻¹A_Wᵀ`, the working-set multipliers solve
//! `(MᵀM) μ = −(b_W + A_W H⁻¹ g)`. Columns of `M` are cached per constraint.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    Lower,
    Upper,
    /// `l == u`; the multiplier is sign-free and the row is never dropped.
    Equality,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveConstraint {
    pub index: usize,
    pub bound: Bound,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub active: Vec<ActiveConstraint>,
    /// One entry per constraint row, zero when inactive. Stationarity reads
    /// `Hx + g + Aᵀμ = 0`, so upper bounds carry `μ >= 0` and lower bounds
    /// `μ <= 0`.
    pub multipliers: DVector<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl QpSolution {
    pub fn objective(&self, h: &DMatrix<f64>, g: &DVector<f64>) -> f64 {
        0.5 * self.x.dot(&(h * &self.x)) + g.dot(&self.x)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QpOptions {
    pub max_iterations: Option<usize>,
    /// Relative step length treated as zero.
    pub step_tol: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            max_iterations: None,
            step_tol: 1e-13,
        }
    }
}

struct Working {
    members: Vec<ActiveConstraint>,
    // L⁻¹ aᵢᵀ for each member
    columns: Vec<DVector<f64>>,
    gram: DMatrix<f64>,
}

impl Working {
    fn push(&mut self, c: ActiveConstraint, column: DVector<f64>) {
        let k = self.members.len();
        let mut gram = self.gram.clone().insert_row(k, 0.0).insert_column(k, 0.0);
        for (i, other) in self.columns.iter().enumerate() {
            let v = other.dot(&column);
            gram[(i, k)] = v;
            gram[(k, i)] = v;
        }
        gram[(k, k)] = column.norm_squared();
        self.gram = gram;
        self.members.push(c);
        self.columns.push(column);
    }

    fn remove(&mut self, k: usize) {
        self.members.remove(k);
        self.columns.remove(k);
        self.gram = self.gram.clone().remove_row(k).remove_column(k);
    }
}

/// Solves the QP from the feasible start `x = 0`.
pub fn qp_solve(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<QpSolution> {
    qp_solve_with(h, g, a, lower, upper, &QpOptions::default())
}

pub fn qp_solve_with(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    opts: &QpOptions,
) -> Result<QpSolution> {
    let n = h.nrows();
    let m = a.nrows();
    if h.ncols() != n || g.len() != n || (m > 0 && a.ncols() != n) || lower.len() != m || upper.len() != m {
        return Err(Error::Dimension(format!(
            "H {}x{}, g {}, A {}x{}, l {}, u {}",
            h.nrows(),
            h.ncols(),
            g.len(),
            a.nrows(),
            a.ncols(),
            lower.len(),
            upper.len()
        )));
    }
    for i in 0..m {
        if lower[i].is_nan() || upper[i].is_nan() || lower[i] > upper[i] {
            return Err(Error::InvalidParameter(format!(
                "constraint {i}: bounds [{}, {}]",
                lower[i], upper[i]
            )));
        }
        if lower[i] > 0.0 || upper[i] < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "x = 0 violates constraint {i}; a feasible start is required"
            )));
        }
    }
    let chol = Cholesky::new(h.clone()).ok_or_else(|| Error::Singular("Hessian is not positive definite".into()))?;
    let lg = solve_lower(&chol, g);

    let max_iter = opts.max_iterations.unwrap_or(10 * (n + m) + 50);
    let mut x = DVector::<f64>::zeros(n);
    let mut work = Working {
        members: Vec::new(),
        columns: Vec::new(),
        gram: DMatrix::zeros(0, 0),
    };
    for i in 0..m {
        if lower[i] == upper[i] {
            let c = ActiveConstraint {
                index: i,
                bound: Bound::Equality,
            };
            work.push(c, solve_lower(&chol, &a.row(i).transpose()));
        }
    }
    let mut in_work = vec![false; m];
    for c in &work.members {
        in_work[c.index] = true;
    }

    let target = |c: &ActiveConstraint| match c.bound {
        Bound::Lower | Bound::Equality => lower[c.index],
        Bound::Upper => upper[c.index],
    };

    for iter in 1..=max_iter {
        let (x_eq, mu) = solve_equality(&chol, &lg, &work, &target)?;
        let p = &x_eq - &x;
        let scale = 1.0 + x.amax().max(x_eq.amax());
        if p.amax() <= opts.step_tol * scale {
            x = x_eq;
            // most negative signed multiplier decides which bound to release
            let mut worst: Option<(usize, f64)> = None;
            for (k, c) in work.members.iter().enumerate() {
                let wrong = match c.bound {
                    Bound::Upper => -mu[k],
                    Bound::Lower => mu[k],
                    Bound::Equality => continue,
                };
                if wrong > 0.0 && worst.is_none_or(|(_, w)| wrong > w) {
                    worst = Some((k, wrong));
                }
            }
            let mu_scale = 1.0 + mu.amax();
            match worst {
                Some((k, w)) if w > 1e-14 * mu_scale => {
                    in_work[work.members[k].index] = false;
                    work.remove(k);
                }
                _ => return Ok(finish(h, g, a, lower, upper, x, &work, &mu, iter)),
            }
            continue;
        }

        // ratio test against the constraints outside the working set
        let ap = a * &p;
        let ax = a * &x;
        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..m {
            if in_work[i] {
                continue;
            }
            let (bound, room) = if ap[i] > 0.0 && upper[i].is_finite() {
                (Bound::Upper, (upper[i] - ax[i]).max(0.0))
            } else if ap[i] < 0.0 && lower[i].is_finite() {
                (Bound::Lower, (lower[i] - ax[i]).min(0.0))
            } else {
                continue;
            };
            let t = room / ap[i];
            if t < alpha {
                alpha = t;
                blocking = Some(ActiveConstraint { index: i, bound });
            }
        }
        x += &p * alpha;
        if let Some(c) = blocking {
            in_work[c.index] = true;
            work.push(c, solve_lower(&chol, &a.row(c.index).transpose()));
        }
    }

    let (_, mu) = solve_equality(&chol, &lg, &work, &target)?;
    let best = finish(h, g, a, lower, upper, x, &work, &mu, max_iter);
    Err(Error::QpNotConverged {
        iterations: max_iter,
        kkt_residual: best.kkt_residual,
    })
}

fn solve_lower(chol: &Cholesky<f64, Dyn>, v: &DVector<f64>) -> DVector<f64> {
    chol.l_dirty()
        .solve_lower_triangular(v)
        .expect("Cholesky factor has a positive diagonal")
}

/// Minimizer on the working set and its multipliers.
fn solve_equality(
    chol: &Cholesky<f64, Dyn>,
    lg: &DVector<f64>,
    work: &Working,
    target: &dyn Fn(&ActiveConstraint) -> f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let k = work.members.len();
    let mut z = -lg.clone();
    let mut mu = DVector::zeros(k);
    if k > 0 {
        let mut rhs = DVector::zeros(k);
        for i in 0..k {
            // aᵢ H⁻¹ g = (L⁻¹aᵢ)·(L⁻¹g)
            rhs[i] = -(target(&work.members[i]) + work.columns[i].dot(lg));
        }
        mu = Cholesky::new(work.gram.clone())
            .ok_or_else(|| Error::Singular("working-set constraints are linearly dependent".into()))?
            .solve(&rhs);
        for i in 0..k {
            z -= &work.columns[i] * mu[i];
        }
    }
    let x = chol
        .l_dirty()
        .tr_solve_lower_triangular(&z)
        .expect("Cholesky factor has a positive diagonal");
    Ok((x, mu))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    x: DVector<f64>,
    work: &Working,
    mu: &DVector<f64>,
    iterations: usize,
) -> QpSolution {
    let mut multipliers = DVector::zeros(a.nrows());
    for (k, c) in work.members.iter().enumerate() {
        multipliers[c.index] = mu[k];
    }
    let kkt_residual = kkt_residual(h, g, a, lower, upper, &x, &multipliers);
    QpSolution {
        x,
        active: work.members.clone(),
        multipliers,
        kkt_residual,
        iterations,
    }
}

/// Largest scaled violation among stationarity, primal feasibility, dual
/// sign and complementarity.
pub fn kkt_residual(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    x: &DVector<f64>,
    mu: &DVector<f64>,
) -> f64 {
    let hx = h * x;
    let atmu = a.tr_mul(mu);
    let stat_scale = 1.0 + hx.amax().max(g.amax()).max(atmu.amax());
    let mut res = (&hx + g + &atmu).amax() / stat_scale;
    let ax = a * x;
    for i in 0..a.nrows() {
        let scale = 1.0 + ax[i].abs().max(finite_abs(lower[i])).max(finite_abs(upper[i]));
        let infeas = (lower[i] - ax[i]).max(ax[i] - upper[i]).max(0.0);
        res = res.max(infeas / scale);
        let mu_scale = 1.0 + mu.amax();
        // μ > 0 needs the upper bound active, μ < 0 the lower one
        let comp = if mu[i] > 0.0 {
            mu[i] * (upper[i] - ax[i]).abs() / (mu_scale * scale)
        } else if mu[i] < 0.0 {
            -mu[i] * (ax[i] - lower[i]).abs() / (mu_scale * scale)
        } else {
            0.0
        };
        res = res.max(comp);
    }
    res
}

fn finite_abs(v: f64) -> f64 {
    if v.is_finite() {
        v.abs()
    } else {
        0.0
    }
}
