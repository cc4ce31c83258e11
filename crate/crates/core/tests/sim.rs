use ltp_harmonic::case_study::{self, Reading};
use ltp_harmonic::control::*;
use ltp_harmonic::floquet::{self, FloquetFactorization};
use ltp_harmonic::scalar::{CMatrix, CVector};
use ltp_harmonic::signals::*;
use ltp_harmonic::sim::*;
use ltp_harmonic::sylvester::{self, scalar};
use ltp_harmonic::{linalg, Error};
use nalgebra::Complex;

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn cmat(rows: usize, cols: usize, re: &[f64]) -> CMatrix<f64> {
    CMatrix::from_row_slice(rows, cols, &re.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
}

fn konst(m: CMatrix<f64>) -> PeriodicMatrixFunction<f64> {
    PeriodicMatrixFunction::constant(m, 1.0)
}

fn example_system() -> (
    PeriodicMatrixFunction<f64>,
    PeriodicMatrixFunction<f64>,
    FloquetFactorization<f64>,
) {
    let (a, b) = case_study::system::<f64>(Reading::Sawtooth);
    let fl = floquet::factorize(&a, 20000).unwrap();
    (a, b, fl)
}

fn alpha_one(
    m: usize,
) -> (
    PeriodicMatrixFunction<f64>,
    PeriodicMatrixFunction<f64>,
    ltp_harmonic::GainSchedule,
) {
    let (a, b, fl) = example_system();
    let gain = design_sufficient_with(&a, &b, &fl, 1.0, m, DesignOptions::default()).unwrap();
    (a, b, gain)
}

#[test]
fn zero_system_is_constant() {
    let z = PeriodicMatrixFunction::zeros(2, 2, 1.0);
    let b = PeriodicMatrixFunction::zeros(2, 1, 1.0);
    let x0 = complex_state(&[0.4, -2.0]);
    let res = simulate_open_loop(&z, &b, &x0, (0.0, 2.0), 0.01).unwrap();
    assert!(res.x.iter().all(|x| x == &x0));
    assert_eq!(res.times.len(), 201);
}

#[test]
fn scalar_exponential() {
    let a = -0.8;
    let res = simulate_open_loop(
        &konst(scalar(a)),
        &konst(scalar(0.0)),
        &complex_state(&[1.5]),
        (0.0, 2.0),
        1e-4,
    )
    .unwrap();
    for (t, x) in res.times.iter().zip(&res.x).step_by(997) {
        assert!((x[0].re - 1.5 * (a * t).exp()).abs() < 1e-8);
    }
}

#[test]
fn open_loop_case_study_system_diverges() {
    let (a, b) = case_study::system::<f64>(Reading::Sawtooth);
    for x0 in [[1.0, 0.0], [0.0, 1e-3]] {
        let x0 = complex_state(&x0);
        let res = simulate_open_loop(&a, &b, &x0, (0.0, 4.0), 1e-3).unwrap();
        let growth = res.x.last().unwrap().norm() / x0.norm();
        assert!(growth > 10.0, "growth {growth}");
        assert!(res.imag_residue() == 0.0);
    }
}

#[test]
fn step_must_divide_period() {
    let a = konst(scalar(-1.0));
    assert!(simulate_open_loop(&a, &konst(scalar(0.0)), &complex_state(&[1.0]), (0.0, 1.0), 0.3).is_err());
}

#[test]
fn rk4_is_fourth_order() {
    let a = waveform_trig_polynomial(-0.3, &[(1, 1.0)], &[(2, 0.5)], 1.0, 2);
    let b = konst(scalar(0.0));
    // stop at t = 0.7 so that no full-period cancellation hides the order
    let w = 2.0 * std::f64::consts::PI;
    let t1 = 0.7;
    let exact = (-0.3 * t1 + (w * t1).sin() / w + 0.5 * (1.0 - (2.0 * w * t1).cos()) / (2.0 * w)).exp();
    let err = |h: f64| {
        let r = simulate_open_loop(&a, &b, &complex_state(&[1.0]), (0.0, t1), h).unwrap();
        (r.x.last().unwrap()[0].re - exact).abs()
    };
    let (e1, e2, e3) = (err(0.02), err(0.01), err(0.005));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((ratio.log2() - 4.0).abs() < 0.3, "ratio {ratio}");
    }
}

#[test]
fn step_doubling_certificate() {
    let (a, b) = case_study::system::<f64>(Reading::Sawtooth);
    let law = |_: f64, _: &CVector<f64>| Ok(CVector::zeros(1));
    let d = step_doubling_delta(&a, &b, law, &complex_state(&[1.0, 1.0]), (0.0, 1.0), 1e-3).unwrap();
    assert!(d < 1e-6, "delta {d}");
}

#[test]
fn z_dynamics_constant_system() {
    let a = cmat(2, 2, &[0.0, 1.0, 2.0, -1.0]);
    let b = cmat(2, 1, &[0.0, 1.0]);
    let gain = design_direct(
        &konst(a.clone()),
        &konst(b.clone()),
        &konst(cmat(1, 2, &[1.0, 1.0])),
        &cmat(2, 2, &[-5.0, 0.0, 0.0, -7.0]),
        2,
    )
    .unwrap();
    let r = verify_z_dynamics(
        &gain,
        &konst(a.clone()),
        &konst(b.clone()),
        &complex_state(&[1.0, -0.5]),
        (0.0, 3.0),
        1e-3,
    )
    .unwrap();
    assert!(r.relative_to_z0 < 1e-9, "{r:?}");
    let zero = verify_z_dynamics(
        &gain,
        &konst(a),
        &konst(b),
        &complex_state(&[0.0, 0.0]),
        (0.0, 1.0),
        1e-3,
    )
    .unwrap();
    assert_eq!(zero.relative_to_z0, 0.0);
    assert_eq!(zero.relative_to_x0, 0.0);
}

#[test]
fn z_dynamics_case_study_regression() {
    let (a, b, gain) = alpha_one(10);
    // regression bound pinned from the first run; truncation at m = 10 dominates
    for x0 in [[1.0, 0.0], [0.0, 1.0], [1.0, -1.0]] {
        let r = verify_z_dynamics(&gain, &a, &b, &complex_state(&x0), (0.0, 3.0), 1e-4).unwrap();
        assert!(r.relative_to_z0 < 0.2, "{x0:?}: {r:?}");
    }
}

#[test]
fn z_dynamics_improves_with_order() {
    let (a, b, g10) = alpha_one(10);
    let (_, _, g14) = alpha_one(14);
    let x0 = complex_state(&[1.0, 0.0]);
    let r10 = verify_z_dynamics(&g10, &a, &b, &x0, (0.0, 3.0), 1e-4).unwrap();
    let r14 = verify_z_dynamics(&g14, &a, &b, &x0, (0.0, 3.0), 1e-4).unwrap();
    assert!(r14.relative_to_z0 < r10.relative_to_z0);
}

#[test]
fn control_law_equivalence() {
    // bandlimited A so that A − B K_m is exact in phasor form
    let a = PeriodicMatrixFunction::from_phasors(
        1.0,
        vec![
            cmat(2, 2, &[0.0, 0.0, 0.5, 0.0]),
            cmat(2, 2, &[0.2, 1.0, -1.0, 0.1]),
            cmat(2, 2, &[0.0, 0.0, 0.5, 0.0]),
        ],
    )
    .unwrap();
    let b = konst(cmat(2, 1, &[0.0, 1.0]));
    let gain = design_sufficient(&a, &b, 1.0, 6).unwrap();
    let km = &gain.k_m;
    let kk = km.harmonics() as i64;
    let closed: Vec<CMatrix<f64>> = (-kk..=kk)
        .map(|k| {
            let ak = a.phasor(k).unwrap_or_else(|_| CMatrix::zeros(2, 2));
            ak - b.phasor(0).unwrap() * km.phasor(k).unwrap()
        })
        .collect();
    let closed = PeriodicMatrixFunction::from_phasors(1.0, closed).unwrap();
    let x0 = complex_state(&[1.0, 0.5]);
    let fb = simulate_closed_loop(&gain, &a, &b, &x0, (0.0, 2.0), 1e-3, GainPath::Phasors).unwrap();
    let auto = simulate_open_loop(
        &closed,
        &PeriodicMatrixFunction::zeros(2, 1, 1.0),
        &x0,
        (0.0, 2.0),
        1e-3,
    )
    .unwrap();
    for (x, y) in fb.x.iter().zip(&auto.x) {
        assert!((x - y).norm() < 1e-10);
    }
}

#[test]
fn closed_loop_multipliers_match_lambda() {
    let (a, b, gain) = alpha_one(10);
    let r = multiplier_check(&gain, &a, &b, 10000, GainPath::Pointwise).unwrap();
    for (mu, e) in r.moduli.iter().zip(&r.expected) {
        assert!((mu - e).abs() < 1e-3, "{r:?}");
    }
}

#[test]
fn closed_loop_multipliers_converge_with_order() {
    let (a, b, gain) = alpha_one(14);
    let r = multiplier_check(&gain, &a, &b, 10000, GainPath::Pointwise).unwrap();
    for (mu, e) in r.moduli.iter().zip(&r.expected) {
        assert!((mu - e).abs() < 1e-3, "{r:?}");
    }
}

#[test]
fn tracking_invariance_constant_system() {
    let a = konst(cmat(2, 2, &[0.0, 1.0, 2.0, -1.0]));
    let b = konst(cmat(2, 1, &[0.0, 1.0]));
    let gain = design_direct(
        &a,
        &b,
        &konst(cmat(1, 2, &[1.0, 1.0])),
        &cmat(2, 2, &[-5.0, 0.0, 0.0, -7.0]),
        2,
    )
    .unwrap();
    let eq = harmonic_equilibrium(&a, &b, &konst(scalar(0.7)), 2).unwrap();
    let x0 = CVector::from_column_slice(eq.x_ref.evaluate(0.0).as_slice());
    let seg = vec![Segment {
        t_start: 0.0,
        equilibrium: eq,
    }];
    let (res, metrics) = tracking_scenario(&gain, &a, &b, &seg, &x0, 2.0, 1e-3, GainPath::Pointwise).unwrap();
    assert!(res.e.unwrap().iter().all(|e| e.norm() < 1e-10));
    assert_eq!(metrics.len(), 1);
}

#[test]
fn tracking_scenario_case_study() {
    let (a, b, gain) = alpha_one(10);
    let segs = case_study::tracking_segments(&a, &b, 10).unwrap();
    let x0 = complex_state(&[1.0, 1.0]);
    let (res, metrics) = tracking_scenario(&gain, &a, &b, &segs, &x0, 9.0, 1e-3, GainPath::Pointwise).unwrap();
    assert_eq!(metrics.len(), 3);
    assert_eq!(
        res.events.iter().filter(|e| matches!(e, Event::Switch { .. })).count(),
        3
    );
    for m in &metrics {
        assert!(m.error_at_end < m.error_at_start, "{m:?}");
        // three periods per segment: the last-period sup error shrinks by about e^{-2·2}
        assert!(m.last_period_sup <= 5.0 * (-4.0f64).exp() * m.first_period_sup, "{m:?}");
    }
    assert!(res.imag_residue() < 1e-8);
}

#[test]
fn assigned_poles_settle_faster() {
    let (a, b, fl) = example_system();
    let base = design_sufficient_with(&a, &b, &fl, 1.0, 10, DesignOptions::default()).unwrap();
    let g = sufficient_g(&b, &fl, 10).unwrap();
    let fast = design_direct(&a, &b, &g, &case_study::diag_lambda(&[-10.0, -12.0]), 10).unwrap();
    let segs = case_study::tracking_segments(&a, &b, 10).unwrap();
    let x0 = complex_state(&[1.0, 1.0]);
    let settle = |gain| {
        let (_, m) = tracking_scenario(gain, &a, &b, &segs[..1], &x0, 3.0, 1e-3, GainPath::Pointwise).unwrap();
        m[0].settling_time.unwrap_or(f64::INFINITY)
    };
    let (slow, quick) = (settle(&base), settle(&fast));
    assert!(quick < slow, "{quick} vs {slow}");
}

#[test]
fn decay_rate_scalar() {
    let alpha = 0.7;
    let res = simulate_open_loop(
        &konst(scalar(-alpha)),
        &konst(scalar(0.0)),
        &complex_state(&[2.0]),
        (0.0, 6.0),
        1e-3,
    )
    .unwrap();
    let g = decay_rate(&res, 0.0, 6, 1.0).unwrap();
    assert!((g / (-alpha).exp() - 1.0).abs() < 0.01);
    let zero = simulate_open_loop(
        &konst(scalar(-alpha)),
        &konst(scalar(0.0)),
        &complex_state(&[0.0]),
        (0.0, 3.0),
        1e-3,
    )
    .unwrap();
    assert!(matches!(decay_rate(&zero, 0.0, 3, 1.0), Err(Error::Undefined(_))));
}

#[test]
fn decay_rate_case_study_alpha_one() {
    let (a, b, gain) = alpha_one(10);
    let res = simulate_closed_loop(
        &gain,
        &a,
        &b,
        &complex_state(&[1.0, 1.0]),
        (0.0, 6.0),
        1e-3,
        GainPath::Pointwise,
    )
    .unwrap();
    let g = decay_rate(&res, 0.0, 6, 1.0).unwrap();
    assert!((g / (-2.0f64).exp() - 1.0).abs() < 0.1, "gamma {g}");
}

#[test]
fn riccati_linear_case_does_not_escape() {
    let (a, b) = case_study::system::<f64>(Reading::Sawtooth);
    let r = riccati_escape_probe(
        &a,
        &b,
        &PeriodicMatrixFunction::zeros(1, 2, 1.0),
        &cmat(2, 2, &[-5.0, 0.0, 0.0, -7.0]),
        &CMatrix::identity(2, 2),
        1e-4,
    )
    .unwrap();
    assert!(!r.escaped && r.escape_time.is_none());
}

#[test]
fn riccati_scalar_escape_time() {
    // ẏ = y², y(0) = 1 blows up at t = 1; a period of 2 keeps t = 1 inside the probe window
    let one = PeriodicMatrixFunction::constant(scalar(1.0), 2.0);
    let zero = PeriodicMatrixFunction::constant(scalar(0.0), 2.0);
    let r = riccati_escape_probe(&zero, &one, &one, &scalar(0.0), &scalar(1.0), 1e-4).unwrap();
    assert!(r.escaped);
    assert!((r.escape_time.unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn riccati_counter_example_escapes() {
    let (a, b) = case_study::system::<f64>(Reading::Sawtooth);
    let g = case_study::counter_example_g();
    let lambda = case_study::counter_example_lambda();
    let sol = sylvester::solve_truncated(&a, &b, &g, &lambda, 10).unwrap();
    let p0_inv = linalg::inverse(&sol.p.evaluate(0.0)).unwrap();
    let r = riccati_escape_probe(&a, &b, &g, &lambda, &p0_inv, 1e-4).unwrap();
    assert!(r.escaped);
    assert!(r.escape_time.unwrap() < 1.0);
}

#[test]
fn escape_guard_stops_simulation() {
    let res = simulate_open_loop(
        &konst(scalar(40.0)),
        &konst(scalar(0.0)),
        &complex_state(&[1.0]),
        (0.0, 2.0),
        1e-3,
    )
    .unwrap();
    let t = res.escaped().unwrap();
    // ‖x‖ = e^{40t} crosses the 1e12 guard at t = 12 ln 10 / 40
    assert!((t - 12.0 * 10f64.ln() / 40.0).abs() < 2e-3);
}

#[test]
fn csv_columns() {
    let (a, b, gain) = alpha_one(4);
    let res = simulate_closed_loop(
        &gain,
        &a,
        &b,
        &complex_state(&[1.0, 0.0]),
        (0.0, 0.01),
        1e-3,
        GainPath::Pointwise,
    )
    .unwrap();
    let mut buf = Vec::new();
    res.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().next().unwrap();
    // z = P⁻¹x is complex for a complex Λ, so every series gets `_im` columns
    assert_eq!(header, "t,x1,x1_im,x2,x2_im,u1,u1_im,z1,z1_im,z2,z2_im");
    assert_eq!(text.lines().count(), 12);
}
