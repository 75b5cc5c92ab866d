//! Closed-loop transfer functions of the extended L1 architecture and the
//! small-gain certificate that bounds its reference system.
//!
//! With `A = na/da`, `M = nm/dm`, `C = nc/dc` and
//! `Δ = nc·na·dm + (dc − nc)·nm·da`, the quantities below are assembled
//! directly as polynomials (the factors `da·dm` and `dc` that cancel
//! analytically are never introduced):
//!
//! ```text
//! H  = A M / (C A + (1 − C) M)   = na·nm·dc / Δ
//! H0 = A / (C A + (1 − C) M)     = na·dc·dm / Δ
//! H1 = (A − M) C / (C A + (1 − C) M) = (na·dm − nm·da)·nc / Δ
//! F  = 1 / (s + H C K)           = dh·dc / (s·dh·dc + K·nh·nc)
//! G  = H (1 − C) F               = nh·(dc − nc) / (s·dh·dc + K·nh·nc)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{
    l1_system_norm, default_norm_step, poly, SampledSignal, TransferFunction, DEFAULT_STABILITY_TOL,
    DEFAULT_TAIL_TOL,
};

/// Tolerance on `C(0) = 1`.
const DC_GAIN_TOL: f64 = 1e-9;

/// Largest admissible `dt * L` for the sampled reference-system closure.
pub const MAX_DT_LIPSCHITZ: f64 = 0.01;

/// Design quantities the certificate is computed for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSet {
    /// Surrogate for the (unknown) velocity dynamics `A(s)`.
    pub plant: TransferFunction,
    /// Reference-model pole: `M(s) = m / (s + m)`.
    pub m: f64,
    /// Low-pass filter `C(s)`.
    pub filter: TransferFunction,
    /// Outer position-loop gain.
    pub k: f64,
    /// Lipschitz constant `L` of the disturbance map.
    pub lipschitz: f64,
    /// Offset `L0` in `|f(t, w)| <= L |w| + L0`.
    pub lipschitz_offset: f64,
}

impl DesignSet {
    pub fn new(
        plant: TransferFunction,
        m: f64,
        filter: TransferFunction,
        k: f64,
        lipschitz: f64,
        lipschitz_offset: f64,
    ) -> Result<Self> {
        let d = Self {
            plant,
            m,
            filter,
            k,
            lipschitz,
            lipschitz_offset,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(Error::InvalidParameter(format!("m must be positive, got {}", self.m)));
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(Error::InvalidParameter(format!("K must be positive, got {}", self.k)));
        }
        if !(self.lipschitz >= 0.0) || !(self.lipschitz_offset >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Lipschitz constants must be nonnegative, got L = {}, L0 = {}",
                self.lipschitz, self.lipschitz_offset
            )));
        }
        check_filter(&self.filter)?;
        if !self.plant.is_strictly_proper() {
            return Err(Error::InvalidParameter("plant surrogate must be strictly proper".into()));
        }
        Ok(())
    }

    pub fn reference_model(&self) -> TransferFunction {
        TransferFunction::first_order_lag(self.m)
    }

    /// `Δ = nc·na·dm + (dc − nc)·nm·da`.
    fn loop_denominator(&self) -> Result<Vec<f64>> {
        let (na, da) = (self.plant.num(), self.plant.den());
        let m = self.reference_model();
        let (nm, dm) = (m.num(), m.den());
        let (nc, dc) = (self.filter.num(), self.filter.den());
        let delta = poly::add(
            &poly::mul(&poly::mul(nc, na), dm),
            &poly::mul(&poly::mul(&poly::sub(dc, nc), nm), da),
        );
        if poly::is_zero(&delta) {
            return Err(Error::Degenerate("C A + (1 - C) M is identically zero".into()));
        }
        Ok(delta)
    }
}

/// `C` must be strictly proper with unit DC gain.
pub fn check_filter(filter: &TransferFunction) -> Result<()> {
    if !filter.is_strictly_proper() {
        return Err(Error::InvalidParameter("filter C(s) must be strictly proper".into()));
    }
    let dc = filter.dc_gain();
    if !((dc - 1.0).abs() <= DC_GAIN_TOL) {
        return Err(Error::InvalidParameter(format!("filter C(0) must be 1, got {dc}")));
    }
    Ok(())
}

/// `H = A M / (C A + (1 − C) M)`.
pub fn build_h(d: &DesignSet) -> Result<TransferFunction> {
    let m = d.reference_model();
    let num = poly::mul(&poly::mul(d.plant.num(), m.num()), d.filter.den());
    TransferFunction::new(num, d.loop_denominator()?)
}

/// `(H0, H1)` with `H0 = A / (CA + (1−C)M)` and `H1 = (A − M) C / (CA + (1−C)M)`.
pub fn build_h0_h1(d: &DesignSet) -> Result<(TransferFunction, TransferFunction)> {
    let delta = d.loop_denominator()?;
    let m = d.reference_model();
    let (na, da) = (d.plant.num(), d.plant.den());
    let (nm, dm) = (m.num(), m.den());
    let h0 = TransferFunction::new(poly::mul(&poly::mul(na, d.filter.den()), dm), delta.clone())?;
    let h1 = TransferFunction::new(
        poly::mul(&poly::sub(&poly::mul(na, dm), &poly::mul(nm, da)), d.filter.num()),
        delta,
    )?;
    Ok((h0, h1))
}

/// Denominator `s·dh·dc + K·nh·nc` shared by `F`, `G`, `HCF` and `FHC/M`.
fn position_loop_denominator(h: &TransferFunction, c: &TransferFunction, k: f64) -> Result<Vec<f64>> {
    let den = poly::add(
        &poly::mul(&[1.0, 0.0], &poly::mul(h.den(), c.den())),
        &poly::scale(&poly::mul(h.num(), c.num()), k),
    );
    if poly::is_zero(&den) {
        return Err(Error::Degenerate("s + H C K is identically zero".into()));
    }
    Ok(den)
}

/// `F = 1 / (s + H C K)` for arbitrary `H`, `C`.
pub fn position_loop(h: &TransferFunction, c: &TransferFunction, k: f64) -> Result<TransferFunction> {
    TransferFunction::new(poly::mul(h.den(), c.den()), position_loop_denominator(h, c, k)?)
}

/// `F = 1 / (s + H C K)`.
pub fn build_f(d: &DesignSet, h: &TransferFunction) -> Result<TransferFunction> {
    position_loop(h, &d.filter, d.k)
}

/// `G = H (1 − C) F`.
pub fn build_g(d: &DesignSet, h: &TransferFunction) -> Result<TransferFunction> {
    let c = &d.filter;
    TransferFunction::new(
        poly::mul(h.num(), &poly::sub(c.den(), c.num())),
        position_loop_denominator(h, c, d.k)?,
    )
}

/// `H C F`: the reference-system map from `K r2` to `y2`.
pub fn build_hcf(d: &DesignSet, h: &TransferFunction) -> Result<TransferFunction> {
    let c = &d.filter;
    TransferFunction::new(poly::mul(h.num(), c.num()), position_loop_denominator(h, c, d.k)?)
}

/// `F H C / M`, the gain from `ỹ` to the reference-tracking error.
pub fn build_fhc_over_m(d: &DesignSet, h: &TransferFunction) -> Result<TransferFunction> {
    let c = &d.filter;
    let num = poly::scale(&poly::mul(&poly::mul(h.num(), c.num()), &[1.0, d.m]), 1.0 / d.m);
    TransferFunction::new(num, position_loop_denominator(h, c, d.k)?)
}

/// Reference-system transfer function `r2 -> y2,ref` without disturbance:
/// `K F H C`.
pub fn reference_tracking(d: &DesignSet) -> Result<TransferFunction> {
    Ok(build_hcf(d, &build_h(d)?)?.scale(d.k))
}

/// Integration settings for the L1 norms inside a certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    /// Fixed integration step; `None` picks one per transfer function.
    pub dt: Option<f64>,
    pub tail_tol: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            dt: None,
            tail_tol: DEFAULT_TAIL_TOL,
        }
    }
}

impl NormOptions {
    pub fn with_step(dt: f64, tail_tol: f64) -> Self {
        Self { dt: Some(dt), tail_tol }
    }

    fn norm(&self, g: &TransferFunction) -> Result<Option<f64>> {
        let dt = self.dt.unwrap_or_else(|| default_norm_step(g));
        match l1_system_norm(g, dt, self.tail_tol) {
            Ok(v) => Ok(Some(v)),
            Err(Error::Unstable(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Outcome of the L1-norm certification for one design.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub h: TransferFunction,
    pub f: TransferFunction,
    pub g: TransferFunction,
    pub h0: TransferFunction,
    pub h1: TransferFunction,
    pub h_stable: bool,
    pub f_stable: bool,
    /// `‖G‖_L1`; `None` when `G` is unstable.
    pub l1_norm_g: Option<f64>,
    /// `‖H C F‖_L1`.
    pub l1_norm_hcf: Option<f64>,
    /// `‖F H C / M‖_L1`.
    pub l1_norm_fhc_over_m: Option<f64>,
    /// `1 − ‖G‖_L1 · L`; `-inf` when `G` has no finite norm and `L > 0`.
    pub margin: f64,
    /// `sup |r2|` used for `rho_r`.
    pub r2_sup: f64,
    pub rho_r: Option<f64>,
    pub gamma1_per_unit_gamma0: Option<f64>,
}

impl Certificate {
    pub fn is_satisfied(&self) -> bool {
        self.margin > 0.0 && self.h_stable && self.f_stable
    }

    fn require(&self) -> Result<()> {
        if self.is_satisfied() {
            Ok(())
        } else {
            Err(Error::NotCertified(format!(
                "margin {:.6}, H stable: {}, F stable: {}",
                self.margin, self.h_stable, self.f_stable
            )))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Builds every closed-loop transfer function and evaluates the norm condition.
///
/// Instability is reported through the flags and missing norms, never as an
/// error. `r2_sup` feeds the `rho_r` entry.
pub fn certify(d: &DesignSet, r2_sup: f64, opts: &NormOptions) -> Result<Certificate> {
    d.validate()?;
    let h = build_h(d)?;
    let (h0, h1) = build_h0_h1(d)?;
    let f = build_f(d, &h)?;
    let g = build_g(d, &h)?;
    let h_stable = h.is_stable(DEFAULT_STABILITY_TOL)?;
    let f_stable = f.is_stable(DEFAULT_STABILITY_TOL)?;

    let (l1_norm_g, l1_norm_hcf, l1_norm_fhc_over_m) = if h_stable && f_stable {
        (
            opts.norm(&g)?,
            opts.norm(&build_hcf(d, &h)?)?,
            opts.norm(&build_fhc_over_m(d, &h)?)?,
        )
    } else {
        (None, None, None)
    };
    let margin = if d.lipschitz == 0.0 {
        1.0
    } else {
        l1_norm_g.map_or(f64::NEG_INFINITY, |n| 1.0 - n * d.lipschitz)
    };

    let mut cert = Certificate {
        h,
        f,
        g,
        h0,
        h1,
        h_stable,
        f_stable,
        l1_norm_g,
        l1_norm_hcf,
        l1_norm_fhc_over_m,
        margin,
        r2_sup,
        rho_r: None,
        gamma1_per_unit_gamma0: None,
    };
    if cert.is_satisfied() {
        cert.rho_r = rho_r(&cert, r2_sup, d).ok();
        cert.gamma1_per_unit_gamma0 = gamma1(&cert, d, 1.0).ok();
    }
    Ok(cert)
}

fn norms(cert: &Certificate) -> Result<(f64, f64, f64)> {
    match (cert.l1_norm_g, cert.l1_norm_hcf, cert.l1_norm_fhc_over_m) {
        (Some(g), Some(hcf), Some(fhc)) => Ok((g, hcf, fhc)),
        _ => Err(Error::NotCertified("closed-loop norms are unavailable".into())),
    }
}

/// Bound on `‖y2,ref‖_L∞`:
/// `(K ‖HCF‖ r2_sup + ‖G‖ L0) / (1 − ‖G‖ L)`.
pub fn rho_r(cert: &Certificate, r2_sup: f64, d: &DesignSet) -> Result<f64> {
    cert.require()?;
    let (g, hcf, _) = norms(cert)?;
    Ok((d.k * hcf * r2_sup + g * d.lipschitz_offset) / (1.0 - g * d.lipschitz))
}

/// Bound on `‖y2,ref − y2‖_L∞` given `‖ỹ‖_L∞ <= gamma0`:
/// `‖F H C / M‖ / (1 − ‖G‖ L) · gamma0`.
pub fn gamma1(cert: &Certificate, d: &DesignSet, gamma0: f64) -> Result<f64> {
    cert.require()?;
    if !(gamma0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma0 must be nonnegative, got {gamma0}")));
    }
    let (g, _, fhc) = norms(cert)?;
    Ok(fhc / (1.0 - g * d.lipschitz) * gamma0)
}

/// Time-domain simulation of the closed-loop reference system
/// `y2,ref = F H (C K r2 + (1 − C) d_ref)`, `d_ref(t) = f(t, y2,ref(t))`.
///
/// Both linear paths are strictly proper, so the output at sample `k` depends
/// on inputs up to `k − 1` only; `f` is evaluated on that output and held
/// over the following interval.
pub fn simulate_reference_system(
    d: &DesignSet,
    cert: &Certificate,
    r2: &SampledSignal,
    mut f: impl FnMut(f64, f64) -> f64,
) -> Result<SampledSignal> {
    cert.require()?;
    let dt = r2.dt();
    if dt * d.lipschitz > MAX_DT_LIPSCHITZ {
        return Err(Error::InvalidParameter(format!(
            "dt * L = {} exceeds {MAX_DT_LIPSCHITZ}",
            dt * d.lipschitz
        )));
    }
    let tracking = build_hcf(d, &cert.h)?.scale(d.k).to_state_space()?.discretize_zoh(dt)?;
    let disturbance = cert.g.to_state_space()?.discretize_zoh(dt)?;
    let mut x1 = nalgebra::DVector::zeros(tracking.order());
    let mut x2 = nalgebra::DVector::zeros(disturbance.order());
    let mut out = Vec::with_capacity(r2.len());
    for (k, &r) in r2.values().iter().enumerate() {
        let y = tracking.output(&x1, 0.0) + disturbance.output(&x2, 0.0);
        if !y.is_finite() {
            return Err(Error::Diverged(k as f64 * dt));
        }
        out.push(y);
        let dref = f(k as f64 * dt, y);
        tracking.advance(&mut x1, r);
        disturbance.advance(&mut x2, dref);
    }
    SampledSignal::new(out, dt)
}
