use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use proptest::prelude::*;

use l1ilc::certify::{
    build_f, build_g, build_h, build_h0_h1, certify, gamma1, rho_r, DesignSet, NormOptions,
};
use l1ilc::ilc::{
    build_lifted, ilc_update, kalman_update, qp_solve, DisturbanceEstimate, IlcWeights, LiftedModel,
};
use l1ilc::l1::{projection, L1Config, L1Controller};
use l1ilc::lti::{l1_system_norm, poly, DiscreteStateSpace, SampledSignal, TransferFunction, DEFAULT_STABILITY_TOL};

mod oracles {
    use super::*;

    /// Routh–Hurwitz test: every first-column entry strictly positive after
    /// normalizing the leading coefficient.
    pub fn routh_stable(p: &[f64]) -> bool {
        let lead = p[0];
        let p: Vec<f64> = p.iter().map(|c| c / lead).collect();
        let n = p.len();
        if n == 1 {
            return true;
        }
        let width = n.div_ceil(2);
        let mut rows: Vec<Vec<f64>> = vec![vec![0.0; width + 1], vec![0.0; width + 1]];
        for (i, c) in p.iter().enumerate() {
            rows[i % 2][i / 2] = *c;
        }
        for k in 2..n {
            let (a, b) = (&rows[k - 2], &rows[k - 1]);
            if b[0] <= 0.0 {
                return false;
            }
            let mut next = vec![0.0; width + 1];
            for j in 0..width {
                next[j] = (b[0] * a[j + 1] - a[0] * b[j + 1]) / b[0];
            }
            rows.push(next);
        }
        rows.iter().take(n).all(|r| r[0] > 0.0)
    }

    /// `∫|g|` from the partial-fraction impulse response of a strictly proper
    /// `g` with distinct poles, integrated by the trapezoid rule at `dt`.
    pub fn l1_by_residues(g: &TransferFunction, dt: f64) -> f64 {
        let poles = g.poles();
        let dden = poly::derivative(g.den());
        let residues: Vec<Complex64> = poles
            .iter()
            .map(|&p| poly::eval_complex(g.num(), p) / poly::eval_complex(&dden, p))
            .collect();
        let response = |t: f64| -> f64 {
            poles
                .iter()
                .zip(&residues)
                .map(|(p, r)| (r * (p * t).exp()).re)
                .sum()
        };
        let envelope = |t: f64| -> f64 {
            poles
                .iter()
                .zip(&residues)
                .map(|(p, r)| r.norm() * (p.re * t).exp() / -p.re)
                .sum()
        };
        let mut total = 0.0;
        let mut t = 0.0;
        let mut prev = response(0.0).abs();
        while envelope(t) > 1e-11 {
            t += dt;
            let h = response(t).abs();
            total += 0.5 * dt * (prev + h);
            prev = h;
        }
        total
    }

    /// Enumerates every face `A_S x = b_S` of `l <= Ax <= u`, solves its KKT
    /// system and keeps the best primal-feasible stationary point.
    pub fn qp_brute_force(
        h: &DMatrix<f64>,
        g: &DVector<f64>,
        a: &DMatrix<f64>,
        l: &DVector<f64>,
        u: &DVector<f64>,
    ) -> (DVector<f64>, f64) {
        let n = h.nrows();
        let m = a.nrows();
        let mut best: Option<(DVector<f64>, f64)> = None;
        // each row: 0 free, 1 at lower, 2 at upper
        for code in 0..3usize.pow(m as u32) {
            let mut rows = Vec::new();
            let mut c = code;
            for i in 0..m {
                match c % 3 {
                    1 => rows.push((i, l[i])),
                    2 => rows.push((i, u[i])),
                    _ => {}
                }
                c /= 3;
            }
            if rows.len() > n {
                continue;
            }
            let k = rows.len();
            let mut kkt = DMatrix::zeros(n + k, n + k);
            let mut rhs = DVector::zeros(n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(h);
            for j in 0..n {
                rhs[j] = -g[j];
            }
            for (r, &(i, b)) in rows.iter().enumerate() {
                for j in 0..n {
                    kkt[(n + r, j)] = a[(i, j)];
                    kkt[(j, n + r)] = a[(i, j)];
                }
                rhs[n + r] = b;
            }
            let Some(sol) = kkt.lu().solve(&rhs) else {
                continue;
            };
            let x = sol.rows(0, n).into_owned();
            let ax = a * &x;
            if (0..m).any(|i| ax[i] < l[i] - 1e-9 || ax[i] > u[i] + 1e-9) {
                continue;
            }
            let f = 0.5 * x.dot(&(h * &x)) + g.dot(&x);
            if best.as_ref().is_none_or(|(_, b)| f < *b) {
                best = Some((x, f));
            }
        }
        best.expect("x = 0 lies on a feasible face")
    }
}

fn poly_from_real_parts(re: &[f64], im: &[f64]) -> Vec<f64> {
    // one complex pair per entry of `im` that is nonzero, a real root otherwise
    let mut roots = Vec::new();
    for (&r, &i) in re.iter().zip(im) {
        if i.abs() > 0.1 {
            roots.push(Complex64::new(r, i));
            roots.push(Complex64::new(r, -i));
        } else {
            roots.push(Complex64::new(r, 0.0));
        }
    }
    poly::from_roots(&roots, 1.0)
}

fn real_part() -> impl Strategy<Value = f64> {
    prop_oneof![-4.0..-0.05f64, 0.05..4.0f64]
}

fn stable_tf() -> impl Strategy<Value = TransferFunction> {
    (
        prop::collection::vec((-5.0..-0.2f64, -3.0..3.0f64), 1..4),
        prop::collection::vec(-2.0..2.0f64, 1..3),
    )
        .prop_filter_map("strictly proper", |(roots, num)| {
            let re: Vec<f64> = roots.iter().map(|r| r.0).collect();
            let im: Vec<f64> = roots.iter().map(|r| r.1).collect();
            let den = poly_from_real_parts(&re, &im);
            if num.len() >= den.len() || num[0].abs() < 0.1 {
                return None;
            }
            TransferFunction::new(num, den).ok()
        })
}

fn design() -> impl Strategy<Value = DesignSet> {
    (0.5..10.0f64, 0.3..3.0f64, 1.0..20.0f64, 5.0..60.0f64, 0.5..5.0f64)
        .prop_filter_map("certifiable", |(a, b, m, wc, k)| {
            let plant = TransferFunction::first_order_lag(a).scale(b);
            let d = DesignSet::new(plant, m, TransferFunction::first_order_lag(wc), k, 0.0, 0.0).ok()?;
            let h = build_h(&d).ok()?;
            let f = build_f(&d, &h).ok()?;
            let stable = |t: &TransferFunction| t.is_stable(1e-3).unwrap_or(false);
            (stable(&h) && stable(&f)).then_some(d)
        })
}

fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn realization_round_trips(g in stable_tf()) {
        let back = g.to_state_space().unwrap().transfer_function();
        for w in [0.0, 0.1, 1.0, 3.0, 20.0] {
            let s = Complex64::new(0.05, w);
            prop_assert!(rel_err(back.eval(s), g.eval(s)) < 1e-9);
        }
    }

    #[test]
    fn stability_matches_routh_hurwitz(
        roots in prop::collection::vec((real_part(), -3.0..3.0f64), 1..4),
    ) {
        let re: Vec<f64> = roots.iter().map(|r| r.0).collect();
        let im: Vec<f64> = roots.iter().map(|r| r.1).collect();
        let den = poly_from_real_parts(&re, &im);
        let g = TransferFunction::new(vec![1.0], den.clone()).unwrap();
        prop_assert_eq!(g.is_stable(DEFAULT_STABILITY_TOL).unwrap(), oracles::routh_stable(&den));
    }

    #[test]
    fn l1_norm_dominates_every_frequency_gain(g in stable_tf()) {
        let n = l1_system_norm(&g, 1e-3, 1e-10).unwrap();
        prop_assert!(n + 1e-6 >= g.dc_gain().abs());
        for w in [0.3, 1.0, 2.0, 5.0] {
            prop_assert!(n + 1e-6 >= g.freq_response(w).norm());
        }
    }

    #[test]
    fn l1_norm_converges_under_step_halving(g in stable_tf()) {
        let coarse = l1_system_norm(&g, 2e-3, 1e-10).unwrap();
        let fine = l1_system_norm(&g, 1e-3, 1e-10).unwrap();
        prop_assert!((coarse - fine).abs() <= 1e-5 * fine.max(1.0));
    }

    #[test]
    fn l1_norm_matches_residue_integration(g in stable_tf()) {
        let poles = g.poles();
        for i in 0..poles.len() {
            for j in 0..i {
                prop_assume!((poles[i] - poles[j]).norm() > 1e-3);
            }
        }
        let ours = l1_system_norm(&g, 1e-3, 1e-10).unwrap();
        let oracle = oracles::l1_by_residues(&g, 1e-4);
        prop_assert!((ours - oracle).abs() <= 1e-5 * oracle.max(1.0), "{} vs {}", ours, oracle);
    }

    #[test]
    fn zoh_matches_analytic_step_response(p1 in 0.2..5.0f64, gap in 0.1..5.0f64, dt in 0.001..0.2f64) {
        let p2 = p1 + gap;
        let g = TransferFunction::new(vec![1.0], vec![1.0, p1 + p2, p1 * p2]).unwrap();
        let sys = g.to_state_space().unwrap().discretize_zoh(dt).unwrap();
        let input = SampledSignal::constant(50, dt, 1.0).unwrap();
        let y = sys.simulate(&input, &DVector::zeros(2)).unwrap();
        for (k, v) in y.values().iter().enumerate() {
            let t = k as f64 * dt;
            let exact = 1.0 / (p1 * p2) + (-p1 * t).exp() / (p1 * (p1 - p2)) + (-p2 * t).exp() / (p2 * (p2 - p1));
            prop_assert!((v - exact).abs() < 1e-11, "k={} {} vs {}", k, v, exact);
        }
    }

    #[test]
    fn lifted_model_matches_simulation(
        a in 0.0..0.99f64, b in 0.1..2.0f64, c in 0.1..2.0f64,
        u in prop::collection::vec(-1.0..1.0f64, 12),
    ) {
        let sys = DiscreteStateSpace::new(
            DMatrix::from_element(1, 1, a),
            DVector::from_element(1, b),
            RowDVector::from_element(1, c),
            0.0,
            0.05,
        ).unwrap();
        let lifted = build_lifted(&sys, u.len()).unwrap();
        let sim = sys.simulate(&SampledSignal::new(u.clone(), 0.05).unwrap(), &DVector::zeros(1)).unwrap();
        let lifted_out = &lifted.f * DVector::from_vec(u);
        for (x, y) in lifted_out.iter().zip(sim.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_loop_identities_hold(d in design()) {
        let h = build_h(&d).unwrap();
        let (h0, h1) = build_h0_h1(&d).unwrap();
        let m = d.reference_model();
        let c = &d.filter;
        for w in [0.0, 0.2, 1.0, 4.0, 25.0] {
            let s = Complex64::new(0.0, w);
            let (hv, mv, cv) = (h.eval(s), m.eval(s), c.eval(s));
            prop_assert!(rel_err(mv * h0.eval(s), hv) < 1e-10);
            let lhs = mv * (cv + h1.eval(s) * (Complex64::new(1.0, 0.0) - cv));
            prop_assert!(rel_err(lhs, hv * cv) < 1e-10);
        }
    }

    #[test]
    fn certified_g_norm_matches_residue_integration(d in design()) {
        let cert = certify(&d, 1.0, &NormOptions::default()).unwrap();
        let g = build_g(&d, &cert.h).unwrap();
        let poles = g.poles();
        for i in 0..poles.len() {
            for j in 0..i {
                prop_assume!((poles[i] - poles[j]).norm() > 1e-3);
            }
        }
        // the residue oracle at a tenth of the slowest time constant step
        let slowest = poles.iter().map(|p| -p.re).fold(f64::INFINITY, f64::min);
        let fastest = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let dt = (1e-3 / slowest).min(1e-2 / fastest) / 10.0;
        let oracle = oracles::l1_by_residues(&g, dt);
        let ours = cert.l1_norm_g.unwrap();
        prop_assert!((ours - oracle).abs() <= 1e-5 * oracle.max(1e-3), "{} vs {}", ours, oracle);
    }

    #[test]
    fn margin_is_monotone_in_lipschitz(d in design(), l1 in 0.0..5.0f64, extra in 0.0..5.0f64) {
        let at = |l: f64| {
            let d = DesignSet { lipschitz: l, ..d.clone() };
            certify(&d, 1.0, &NormOptions::default()).unwrap().margin
        };
        prop_assert!(at(l1) >= at(l1 + extra));
    }

    #[test]
    fn gamma1_is_linear_and_rho_r_monotone(d in design(), g0 in 0.0..2.0f64, k in 0.0..10.0f64, r in 0.0..3.0f64) {
        let cert = certify(&d, 1.0, &NormOptions::default()).unwrap();
        let one = gamma1(&cert, &d, g0).unwrap();
        let scaled = gamma1(&cert, &d, k * g0).unwrap();
        prop_assert!((scaled - k * one).abs() <= 1e-12 * scaled.abs().max(1.0));
        prop_assert!(rho_r(&cert, r, &d).unwrap() <= rho_r(&cert, r + 0.5, &d).unwrap());
    }

    #[test]
    fn qp_matches_brute_force(
        n in 1usize..5,
        seed in prop::collection::vec(-1.0..1.0f64, 64),
        m in 0usize..5,
    ) {
        let mut it = seed.into_iter().cycle();
        let mut next = || it.next().unwrap();
        let root = DMatrix::from_fn(n, n, |_, _| next());
        let h = &root * root.transpose() + DMatrix::identity(n, n) * 0.1;
        let g = DVector::from_fn(n, |_, _| 3.0 * next());
        let a = DMatrix::from_fn(m, n, |_, _| next());
        let lower = DVector::from_fn(m, |_, _| -0.1 - next().abs());
        let upper = DVector::from_fn(m, |_, _| 0.1 + next().abs());
        let sol = qp_solve(&h, &g, &a, &lower, &upper).unwrap();
        let (x, f) = oracles::qp_brute_force(&h, &g, &a, &lower, &upper);
        prop_assert!((sol.objective(&h, &g) - f).abs() <= 1e-8 * f.abs().max(1.0));
        prop_assert!((&sol.x - x).amax() <= 1e-6);
        prop_assert!(sol.kkt_residual < 1e-8);
    }

    #[test]
    fn ilc_update_is_positively_homogeneous(
        a in 0.0..0.95f64, scale in 0.1..10.0f64,
        d in prop::collection::vec(-1.0..1.0f64, 10),
    ) {
        let sys = DiscreteStateSpace::new(
            DMatrix::from_element(1, 1, a),
            DVector::from_element(1, 1.0 - a),
            RowDVector::from_element(1, 1.0),
            0.0,
            0.1,
        ).unwrap();
        let lifted = build_lifted(&sys, d.len()).unwrap();
        let w = IlcWeights { a_max: 20.0, ..IlcWeights::default() };
        let mut est = DisturbanceEstimate::initial(d.len(), 1.0);
        est.d_hat = DVector::from_vec(d);
        let base = ilc_update(&lifted, &est, &w).unwrap();
        let mut scaled_est = est.clone();
        scaled_est.d_hat *= scale;
        let scaled_w = IlcWeights { a_max: w.a_max * scale, ..w };
        let scaled = ilc_update(&lifted, &scaled_est, &scaled_w).unwrap();
        prop_assert!((scaled - base * scale).amax() <= 1e-7 * scale.max(1.0));
    }

    #[test]
    fn kalman_covariance_shrinks_without_drift(
        f in prop::collection::vec(-1.0..1.0f64, 16),
        y in prop::collection::vec(-1.0..1.0f64, 4),
        v in 1e-4..1.0f64,
    ) {
        let lifted = LiftedModel::from_matrix(DMatrix::from_column_slice(4, 4, &f), 0.1).unwrap();
        let w = IlcWeights { process_noise: 0.0, measurement_noise: v, ..IlcWeights::default() };
        let mut est = DisturbanceEstimate::initial(4, 1.0);
        let r = DVector::from_element(4, 0.3);
        let y = DVector::from_vec(y);
        for _ in 0..20 {
            let next = kalman_update(&est, &lifted, &r, &y, &w).unwrap();
            prop_assert!(next.covariance.trace() <= est.covariance.trace() + 1e-12);
            prop_assert!(next.covariance_is_psd(1e-12));
            est = next;
        }
    }

    #[test]
    fn projection_never_pushes_outward_harder(
        sigma in -7.0..7.0f64, signal in -10.0..10.0f64,
        sigma_max in 0.5..5.0f64, eps in 0.01..0.5f64,
    ) {
        let out = projection(sigma, signal, sigma_max, eps);
        prop_assert!(out * signal >= 0.0);
        prop_assert!(out.abs() <= signal.abs());
        if sigma.abs() >= sigma_max * (1.0 + eps) && signal * sigma > 0.0 {
            prop_assert_eq!(out, 0.0);
        }
        if sigma.abs() <= sigma_max {
            prop_assert_eq!(out, signal);
        }
    }

    #[test]
    fn adaptive_estimate_stays_in_the_projection_set(
        inputs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64), 1..200),
    ) {
        let cfg = L1Config::default();
        let bound = cfg.sigma_max * (1.0 + cfg.epsilon);
        let mut c = L1Controller::new(cfg).unwrap();
        for (r2, y1, y2) in inputs {
            let step = c.step(r2, y1, y2).unwrap();
            prop_assert!(step.sigma_hat.abs() <= bound);
        }
    }
}

#[test]
fn routh_oracle_sanity() {
    assert!(oracles::routh_stable(&[1.0, 3.0, 3.0, 1.0]));
    assert!(!oracles::routh_stable(&[1.0, 0.0, 1.0]));
    assert!(!oracles::routh_stable(&[1.0, -1.0]));
    // s^3 + s^2 + s + 2 has a right-half-plane pair
    assert!(!oracles::routh_stable(&[1.0, 1.0, 1.0, 2.0]));
}

#[test]
fn derivative_of_double_lag_has_norm_two_over_e() {
    let g = TransferFunction::new(vec![1.0, 0.0], vec![1.0, 2.0, 1.0]).unwrap();
    let n = l1_system_norm(&g, 1e-4, 1e-12).unwrap();
    assert!((n - 2.0 / std::f64::consts::E).abs() < 1e-6, "{n}");
}
