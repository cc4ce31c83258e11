use std::f64::consts::PI;

use ltp_harmonic::case_study::{self, Reading};
use ltp_harmonic::scalar::CMatrix;
use ltp_harmonic::signals::*;
use ltp_harmonic::Error;
use nalgebra::{Complex, DMatrix, DVector};

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn s(f: &PeriodicMatrixFunction<f64>, k: i64) -> Complex<f64> {
    f.phasor(k).unwrap()[(0, 0)]
}

/// Midpoint quadrature of `(1/T)∫ f e^{-jωkt}` on a fine grid.
fn quad(f: impl Fn(f64) -> f64, k: i64, n: usize) -> Complex<f64> {
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        let t = (i as f64 + 0.5) / n as f64;
        acc += Complex::from_polar(f(t), -2.0 * PI * k as f64 * t);
    }
    acc / n as f64
}

#[test]
fn square_phasors() {
    let f = waveform_square(1.0, 1.0, 1.0, 8);
    let tol = 1e-14;
    assert!((s(&f, 0) - c(1.0, 0.0)).norm() < tol);
    assert!((s(&f, 1) - c(0.0, -2.0 / PI)).norm() < tol);
    assert!(s(&f, 2).norm() < tol);
    assert!((s(&f, 3) - c(0.0, -2.0 / (3.0 * PI))).norm() < tol);
    let sq = |t: f64| 1.0 + (2.0 * PI * t).sin().signum();
    for k in 0..=5 {
        assert!((s(&f, k) - quad(sq, k, 200_000)).norm() < 1e-5, "k = {k}");
    }
}

#[test]
fn square_zero_amplitude_is_constant() {
    let f = waveform_square(2.5, 0.0, 1.0, 6);
    assert!((s(&f, 0) - c(2.5, 0.0)).norm() < 1e-15);
    for k in 1..=6 {
        assert!(s(&f, k).norm() < 1e-15 && s(&f, -k).norm() < 1e-15);
    }
}

#[test]
fn square_exact_evaluation() {
    let f = waveform_square(1.0, 1.0, 1.0, 4);
    assert!((f.evaluate(0.25)[(0, 0)] - c(2.0, 0.0)).norm() < 1e-15);
    assert!((f.evaluate(0.75)[(0, 0)] - c(0.0, 0.0)).norm() < 1e-15);
    assert!((f.evaluate_side(0.5, Side::Left)[(0, 0)] - c(2.0, 0.0)).norm() < 1e-15);
    assert!((f.evaluate_side(0.5, Side::Right)[(0, 0)] - c(0.0, 0.0)).norm() < 1e-15);
    assert!((f.evaluate(0.25) - f.evaluate(1.25)).norm() < 1e-15);
}

#[test]
fn triangle_and_sawtooth_match_quadrature() {
    let tri = waveform_triangle(2.0, 2.0, 1.0, 8);
    // closed form of the cosine series: 1 - 4|t| on [-1/2, 1/2]
    let sum = |t: f64| {
        let x = t - t.round();
        2.0 + 2.0 * (1.0 - 4.0 * x.abs())
    };
    for t in [0.0, 0.1, 0.37, 0.5, 0.9] {
        assert!((tri.evaluate(t)[(0, 0)].re - sum(t)).abs() < 1e-12, "t = {t}");
    }
    let saw = waveform_sawtooth(-1.0, 1.0, PI / 4.0, 1.0, 8);
    let f = |t: f64| saw.evaluate(t)[(0, 0)].re;
    for k in -5..=5 {
        assert!((s(&saw, k) - quad(f, k, 400_000)).norm() < 1e-5, "k = {k}");
    }
    // rising ramp with the jump at t = 7/8
    assert!((saw.evaluate_side(0.875, Side::Left)[(0, 0)].re - 0.0).abs() < 1e-12);
    assert!((saw.evaluate_side(0.875, Side::Right)[(0, 0)].re + 2.0).abs() < 1e-12);
}

#[test]
fn every_constructor_is_conjugate_symmetric() {
    let fs = [
        waveform_square(1.0, 1.0, 1.0, 16),
        waveform_triangle(2.0, 2.0, 1.0, 16),
        waveform_sawtooth(-1.0, 1.0, PI / 4.0, 1.0, 16),
        waveform_trig_polynomial(1.0, &[(3, 2.0), (5, 2.0)], &[(1, -2.0), (3, -2.0)], 1.0, 16),
    ];
    for f in &fs {
        assert!(f.conjugate_symmetry_defect() < 1e-15);
    }
    let (a, b) = case_study::system::<f64>(Reading::Sawtooth);
    assert!(a.conjugate_symmetry_defect() < 1e-15);
    assert!(b.conjugate_symmetry_defect() < 1e-15);
    let q = PeriodicMatrixFunction::phasors_of(|t| a.evaluate(t), 1.0, 8, 256).unwrap();
    assert!(q.conjugate_symmetry_defect() < 1e-14);
}

#[test]
fn quadrature_cosine() {
    let f = PeriodicMatrixFunction::phasors_of(
        |t: f64| CMatrix::from_element(1, 1, c((2.0 * PI * t).cos(), 0.0)),
        1.0,
        2,
        64,
    )
    .unwrap();
    for k in -2i64..=2 {
        let want = if k.abs() == 1 { 0.5 } else { 0.0 };
        assert!((s(&f, k) - c(want, 0.0)).norm() < 1e-12, "k = {k}");
    }
}

#[test]
fn quadrature_b11() {
    let b = |t: f64| 1.0 + 2.0 * (4.0 * PI * t).cos() + 4.0 * (12.0 * PI * t).sin();
    let f = PeriodicMatrixFunction::phasors_of(|t: f64| CMatrix::from_element(1, 1, c(b(t), 0.0)), 1.0, 6, 64).unwrap();
    let tol = 1e-12;
    assert!((s(&f, 0) - c(1.0, 0.0)).norm() < tol);
    assert!((s(&f, 2) - c(1.0, 0.0)).norm() < tol);
    assert!((s(&f, -2) - c(1.0, 0.0)).norm() < tol);
    assert!((s(&f, 6) - c(0.0, -2.0)).norm() < tol);
    assert!((s(&f, -6) - c(0.0, 2.0)).norm() < tol);
    for k in [1, 3, 4, 5] {
        assert!(s(&f, k).norm() < tol);
    }
    // closed-form constructor agrees
    let g = waveform_trig_polynomial(1.0, &[(2, 2.0)], &[(6, 4.0)], 1.0, 6);
    for k in -6..=6 {
        assert!((s(&f, k) - s(&g, k)).norm() < tol);
    }
}

#[test]
fn quadrature_constant_matrix() {
    let cm = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(-3.0, 0.0), c(0.5, 0.0)]);
    let f = PeriodicMatrixFunction::phasors_of(|_| cm.clone(), 1.0, 3, 16).unwrap();
    assert!((f.phasor(0).unwrap() - &cm).norm() < 1e-14);
    for k in 1..=3 {
        assert!(f.phasor(k).unwrap().norm() < 1e-14);
        assert!(f.phasor(-k).unwrap().norm() < 1e-14);
    }
}

#[test]
fn quadrature_refuses_aliasing() {
    let r = PeriodicMatrixFunction::phasors_of(|_: f64| CMatrix::from_element(1, 1, c(1.0, 0.0)), 1.0, 4, 19);
    assert!(matches!(r, Err(Error::Aliasing { required: 20, .. })));
    assert!(PeriodicMatrixFunction::phasors_of(|_: f64| CMatrix::from_element(1, 1, c(1.0, 0.0)), 1.0, 4, 20).is_ok());
}

#[test]
fn evaluation_examples() {
    let cm = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
    let f = PeriodicMatrixFunction::constant_real(&cm, 1.0);
    for t in [0.0, 0.3, 7.1] {
        let (v, imag) = f.evaluate_real(t);
        assert_eq!(v, cm);
        assert_eq!(imag, 0.0);
    }
    let cos = waveform_trig_polynomial(0.0, &[(1, 1.0)], &[], 1.0, 1);
    assert!((cos.evaluate(0.0)[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    let (a, _) = case_study::system::<f64>(Reading::Sawtooth);
    assert!((a.evaluate(0.0)[(1, 1)] - c(5.0, 0.0)).norm() < 1e-13);
    // synthesis of a real function reports its imaginary residue
    let (_, imag) = a.evaluate_real(0.123);
    assert!(imag < 1e-10);
}

#[test]
fn phasor_beyond_stored_range() {
    let q = PeriodicMatrixFunction::phasors_of(|t: f64| CMatrix::from_element(1, 1, c(t, 0.0)), 1.0, 3, 64).unwrap();
    assert!(matches!(q.phasor(4), Err(Error::MissingPhasors { .. })));
    let closed = waveform_square(0.0, 1.0, 1.0, 3);
    assert!((s(&closed, 101) - c(0.0, -2.0 / (101.0 * PI))).norm() < 1e-15);
    let band = waveform_trig_polynomial(0.0, &[(1, 1.0)], &[], 1.0, 1);
    assert_eq!(s(&band, 50), c(0.0, 0.0));
}

fn samples(f: impl Fn(f64) -> f64, t0: f64, step: f64, n: usize) -> Vec<DVector<f64>> {
    (0..n)
        .map(|j| DVector::from_element(1, f(t0 + j as f64 * step)))
        .collect()
}

#[test]
fn sliding_constant() {
    let x = samples(|_| 3.0, 0.0, 0.01, 301);
    let tr = sliding_fourier(&x, 0.0, 0.01, 1.0, 3).unwrap();
    assert!(tr.at(50).is_none());
    for j in [100, 200, 300] {
        assert!((tr.phasor(j, 0).unwrap()[0] - c(3.0, 0.0)).norm() < 1e-12);
        for k in 1..=3 {
            assert!(tr.phasor(j, k).unwrap()[0].norm() < 1e-12);
        }
    }
    let r = tr.reconstruct(2.0).unwrap();
    assert!((r.value[0] - 3.0).abs() < 1e-12);
}

#[test]
fn sliding_exponential_and_cosine() {
    let step = 1e-3;
    let n = 2501;
    let re: Vec<DVector<f64>> = samples(|t| (2.0 * PI * t).cos(), 0.0, step, n);
    let tr = sliding_fourier(&re, 0.0, step, 1.0, 2).unwrap();
    for j in [1000, 1777, 2500] {
        assert!((tr.phasor(j, 1).unwrap()[0] - c(0.5, 0.0)).norm() < 1e-10);
        assert!((tr.phasor(j, -1).unwrap()[0] - c(0.5, 0.0)).norm() < 1e-10);
        assert!(tr.phasor(j, 0).unwrap()[0].norm() < 1e-10);
        assert!(tr.phasor(j, 2).unwrap()[0].norm() < 1e-10);
    }
    // e^{jωt} = cos + j sin: combine the two real channels
    let im: Vec<DVector<f64>> = samples(|t| (2.0 * PI * t).sin(), 0.0, step, n);
    let ti = sliding_fourier(&im, 0.0, step, 1.0, 2).unwrap();
    for j in [1000, 2000] {
        let x1 = tr.phasor(j, 1).unwrap()[0] + c(0.0, 1.0) * ti.phasor(j, 1).unwrap()[0];
        let x0 = tr.phasor(j, 0).unwrap()[0] + c(0.0, 1.0) * ti.phasor(j, 0).unwrap()[0];
        let xm = tr.phasor(j, -1).unwrap()[0] + c(0.0, 1.0) * ti.phasor(j, -1).unwrap()[0];
        assert!((x1 - c(1.0, 0.0)).norm() < 1e-10);
        assert!(x0.norm() < 1e-10 && xm.norm() < 1e-10);
    }
}

#[test]
fn reconstruct_examples() {
    let step = 1e-3;
    let x = samples(|t| (2.0 * PI * t).cos(), 0.0, step, 2001);
    let tr = sliding_fourier(&x, 0.0, step, 1.0, 1).unwrap();
    for j in (1000..=2000).step_by(37) {
        let r = tr.reconstruct_at(j).unwrap();
        let t = tr.time(j);
        assert!((r.value[0] - (2.0 * PI * t).cos()).abs() <= 10.0 * step * step);
    }
    assert!(tr.reconstruct_at(2000).unwrap().one_sided);
    assert!(tr.coincidence_defect() < 1e-6);
    let z = samples(|_| 0.0, 0.0, step, 1500);
    let tz = sliding_fourier(&z, 0.0, step, 1.0, 2).unwrap();
    assert_eq!(tz.reconstruct_at(1200).unwrap().value[0], 0.0);
    assert!(matches!(tz.reconstruct_at(10), Err(Error::Undefined(_))));
}

#[test]
fn sliding_requires_dividing_step() {
    let x = samples(|_| 1.0, 0.0, 0.3, 10);
    assert!(sliding_fourier(&x, 0.0, 0.3, 1.0, 1).is_err());
}

#[test]
fn json_description_round_trip() {
    let text = r#"{"rows": 1, "cols": 1, "T": 1.0, "terms": [
        {"kind": "const", "row": 0, "col": 0, "value": 1.0},
        {"kind": "square", "row": 0, "col": 0, "amplitude": 1.0}]}"#;
    let spec = SignalSpec::from_json(text).unwrap();
    let f = PeriodicMatrixFunction::from_waveforms(spec.to_waveforms::<f64>().unwrap(), 4);
    let g = waveform_square(1.0, 1.0, 1.0, 4);
    for k in -4..=4 {
        assert!((s(&f, k) - s(&g, k)).norm() < 1e-15);
    }
    assert!(SignalSpec::from_json(r#"{"rows":1,"cols":1,"T":1,"terms":[],"x":1}"#).is_err());
    assert!(SignalSpec::from_json(r#"{"rows":1,"cols":1,"T":-1,"terms":[]}"#).is_err());
    let (a, _) = case_study::system_specs(Reading::Sawtooth);
    let back = SignalSpec::from_json(&serde_json::to_string(&a).unwrap()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn single_precision_instance() {
    let f = waveform_square(1.0f32, 1.0, 1.0, 4);
    assert!((f.phasor(1).unwrap()[(0, 0)].im + 2.0 / std::f32::consts::PI).abs() < 1e-6);
    let q = ltp_harmonic::PeriodicMatrix32::phasors_of(
        |t: f32| CMatrix::from_element(1, 1, Complex::new((2.0 * std::f32::consts::PI * t).cos(), 0.0)),
        1.0,
        2,
        32,
    )
    .unwrap();
    assert!((q.phasor(1).unwrap()[(0, 0)].re - 0.5).abs() < 1e-6);
}
