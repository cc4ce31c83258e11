//! Acceptance suite: one line per criterion, then a nonzero exit if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use ltp_harmonic::case_study::{self, CaseStudySummary, RunOptions};
use ltp_harmonic::linalg;
use ltp_harmonic::operators::{FrequencyShift, TruncatedBlockToeplitz};
use ltp_harmonic::scalar::CMatrix;
use ltp_harmonic::signals::{waveform_trig_polynomial, PeriodicMatrixFunction};
use ltp_harmonic::sim;
use ltp_harmonic::sylvester::solve_truncated;
use nalgebra::{Complex, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0;

struct Line {
    id: usize,
    pass: bool,
    text: String,
}

fn line(id: usize, pass: bool, text: String) -> Line {
    Line { id, pass, text }
}

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> CMatrix<f64> {
    CMatrix::from_fn(r, cols, |_, _| c(rng.gen_range(-1.0..1.0), 0.0))
}

fn criterion_1(s: &CaseStudySummary) -> Line {
    let want = [c(1.0, 1.64), c(1.0, -1.64)];
    let got: Vec<Complex<f64>> = s.floquet_exponents.iter().map(|z| c(z.re, z.im)).collect();
    let err = want
        .iter()
        .map(|w| got.iter().map(|g| (g - w).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let rt = s.floquet.runtime_s;
    let pass = got.len() == 2 && err <= 0.02 && rt < 10.0;
    line(
        1,
        pass,
        format!(
            "Floquet exponents {:.4}{:+.4}j, {:.4}{:+.4}j; max error {err:.2e} (tol 0.02); runtime {rt:.3} s (limit 10 s)",
            got[0].re, got[0].im, got[1].re, got[1].im
        ),
    )
}

fn criterion_2(s: &CaseStudySummary) -> Line {
    let h = s.harmonic_spectrum.as_ref().expect("spectrum stage ran");
    let pass = !h.central.is_empty() && h.max_deviation <= 0.05;
    line(
        2,
        pass,
        format!(
            "harmonic spectrum m={}: {} central eigenvalues with |Im| <= {:.3}, max distance to 1±1.64j+jωk {:.2e} (tol 0.05)",
            h.m,
            h.central.len(),
            h.band,
            h.max_deviation
        ),
    )
}

/// `AX − XΛ = C` through `(I⊗A − Λᵀ⊗I) vec X = vec C`.
fn kron_solve(a: &CMatrix<f64>, lambda: &CMatrix<f64>, cm: &CMatrix<f64>) -> CMatrix<f64> {
    let (n, q) = cm.shape();
    let big = linalg::kron(&CMatrix::identity(q, q), a) - linalg::kron(&lambda.transpose(), &CMatrix::identity(n, n));
    let lu = big.lu();
    let v = lu
        .solve(&CMatrix::from_column_slice(n * q, 1, cm.as_slice()))
        .expect("regular");
    CMatrix::from_column_slice(n, q, v.as_slice())
}

fn criterion_3() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..20 {
        let n = rng.gen_range(1..=3);
        let p = rng.gen_range(1..=n);
        let a = random_matrix(&mut rng, n, n);
        let b = random_matrix(&mut rng, n, p);
        let g = random_matrix(&mut rng, p, n);
        let lambda = CMatrix::from_diagonal(&DVector::from_fn(n, |_, _| c(rng.gen_range(-8.0..-4.0), 0.0)));
        let want = kron_solve(&a, &lambda, &(&b * &g));
        let konst = |x: &CMatrix<f64>| PeriodicMatrixFunction::constant(x.clone(), 1.0);
        for m in [0usize, 2, 5] {
            match solve_truncated(&konst(&a), &konst(&b), &konst(&g), &lambda, m) {
                Ok(sol) => {
                    let mut err = (sol.p.phasor(0).unwrap() - &want).norm();
                    for k in 1..=m as i64 {
                        err += sol.p.phasor(k).unwrap().norm() + sol.p.phasor(-k).unwrap().norm();
                    }
                    worst = worst.max(err / want.norm().max(f64::MIN_POSITIVE));
                }
                Err(_) => failures += 1,
            }
        }
    }
    line(
        3,
        failures == 0 && worst <= 1e-10,
        format!("Sylvester oracle: 20 random constant instances x m in {{0,2,5}}, worst relative error {worst:.2e} (tol 1e-10), solver failures {failures}"),
    )
}

fn criterion_4(s: &CaseStudySummary) -> Line {
    let sw = s.sweep.as_ref().expect("sweep stage ran");
    let rows: Vec<_> = sw.report.rows.iter().filter(|r| [4, 6, 8, 10].contains(&r.m)).collect();
    let decreasing = rows.len() == 4 && rows.windows(2).all(|w| w[1].delta_to_finest < w[0].delta_to_finest);
    let deltas: Vec<String> = rows
        .iter()
        .map(|r| format!("m={}: {:.3e}", r.m, r.delta_to_finest))
        .collect();
    line(
        4,
        decreasing && sw.tail_ratio <= 1e-2,
        format!(
            "truncation convergence vs m=12: [{}] decreasing={decreasing}; |k|>8 tail at m={} is {:.2e} of max (tol 1e-2)",
            deltas.join(", "),
            sw.tail_order,
            sw.tail_ratio
        ),
    )
}

fn criterion_5(s: &CaseStudySummary) -> Line {
    let d = s
        .designs
        .iter()
        .find(|d| d.label == "lambda")
        .expect("assigned design ran");
    let poles = d.poles.as_ref();
    let mult = d.multipliers.as_ref();
    let (dev, miss) = poles
        .map(|p| (p.max_deviation, p.max_miss))
        .unwrap_or((f64::INFINITY, f64::INFINITY));
    let log_err = mult.map(|m| m.max_log_error).unwrap_or(f64::INFINITY);
    let pass = dev <= 0.1 && miss <= 0.1 && log_err <= 0.05;
    line(
        5,
        pass,
        format!(
            "pole placement diag(-10,-12), m=10: central eigenvalue deviation {dev:.3e}, unmatched target {miss:.3e} (tol 0.1); multiplier log error {:.2}% (tol 5%)",
            100.0 * log_err
        ),
    )
}

fn criterion_6(s: &CaseStudySummary) -> Line {
    let d = &s.designs[0];
    let worst = d.z_dynamics.iter().map(|z| z.relative_to_x0).fold(0.0, f64::max);
    let all: Vec<String> = d
        .z_dynamics
        .iter()
        .map(|z| format!("{:.2e}", z.relative_to_x0))
        .collect();
    line(
        6,
        d.z_dynamics.len() == 5 && worst <= 1e-2,
        format!(
            "z-dynamics ({}), m=10, step 1e-4, 5 random x0: sup deviation / |x0| = [{}], worst {worst:.2e} (tol 1e-2)",
            d.label,
            all.join(", ")
        ),
    )
}

fn criterion_7(s: &CaseStudySummary) -> Line {
    let d = &s.designs[0];
    let ratios: Vec<String> = d
        .tracking
        .iter()
        .map(|m| format!("{:.2e}", m.error_at_end / m.error_at_start.max(f64::MIN_POSITIVE)))
        .collect();
    let worst = d.tracking_worst_ratio.unwrap_or(f64::INFINITY);
    let other = s
        .designs
        .iter()
        .skip(1)
        .map(|o| {
            format!(
                "; {} worst {:.2e}",
                o.label,
                o.tracking_worst_ratio.unwrap_or(f64::INFINITY)
            )
        })
        .collect::<String>();
    line(
        7,
        d.tracking.len() == 3 && worst <= 1e-3,
        format!(
            "tracking ({}), three segments: end/start error ratios [{}] (tol 1e-3){other}",
            d.label,
            ratios.join(", ")
        ),
    )
}

fn criterion_8(s: &CaseStudySummary) -> Line {
    let ce = &s.counter_example;
    let cert_fails = !ce.certificate.invertible
        && ce.certificate.min_abs_det < ce.certificate.threshold
        && ce.certificate.sign_changes >= 1;
    let obs = ce.observability.passes;
    let escape = ce.escape.escaped && ce.escape.escape_time.map(|t| t < 1.0).unwrap_or(false);
    line(
        8,
        cert_fails && obs && escape,
        format!(
            "counter-example: certificate fails={cert_fails} (min|det P| {:.2e} < {:.2e}, {} sign changes); observability passes={obs} (min/max {:.2e}); Riccati escape at t={}",
            ce.certificate.min_abs_det,
            ce.certificate.threshold,
            ce.certificate.sign_changes,
            ce.observability.min_eigenvalue / ce.observability.max_eigenvalue,
            ce.escape.escape_time.map(|t| format!("{t:.4}")).unwrap_or_else(|| "none".into())
        ),
    )
}

fn criterion_9(s: &CaseStudySummary) -> Line {
    let d = &s.designs[0];
    let want = (-2.0f64).exp();
    let g = d.decay_rate.unwrap_or(f64::NAN);
    let rel = (g / want - 1.0).abs();
    line(
        9,
        rel <= 0.1,
        format!(
            "decay rate ({}): fitted {g:.4} vs e^-2 = {want:.4}, relative error {:.1}% (tol 10%)",
            d.label,
            100.0 * rel
        ),
    )
}

fn criterion_10(elapsed: f64) -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let mut sym = true;
    let mut parseval = true;
    let mut toeplitz = true;
    let mut skew = true;
    for _ in 0..50 {
        let cs: Vec<(u32, f64)> = (1..=2).map(|h| (h, rng.gen_range(-1.0..1.0))).collect();
        let ss: Vec<(u32, f64)> = (1..=2).map(|h| (h, rng.gen_range(-1.0..1.0))).collect();
        let f = waveform_trig_polynomial(rng.gen_range(-1.0..1.0), &cs, &ss, 1.0, 2);
        let q = PeriodicMatrixFunction::phasors_of(|t| f.evaluate(t), 1.0, 6, 64).unwrap();
        sym &= q.conjugate_symmetry_defect() < 1e-14;
        let n = 128;
        let ms = (0..n)
            .map(|i| f.evaluate(i as f64 / n as f64)[(0, 0)].norm_sqr())
            .sum::<f64>()
            / n as f64;
        parseval &= (ms - f.phasor_energy()).abs() < 1e-12 * (1.0 + ms);
        let g = waveform_trig_polynomial(0.5, &ss, &cs, 1.0, 2);
        let m = 4;
        let fg = f.product(&g, 2 * m, 64).unwrap().truncated();
        let lf = TruncatedBlockToeplitz::lift(&f, m).unwrap().dense();
        let lg = TruncatedBlockToeplitz::lift(&g, m).unwrap().dense();
        let lfg = TruncatedBlockToeplitz::lift(&fg, m).unwrap().dense();
        let prod = lf * lg;
        for r in (m - m / 2)..=(m + m / 2) {
            for col in 0..(2 * m + 1) {
                toeplitz &= (prod[(r, col)] - lfg[(r, col)]).norm() < 1e-10;
            }
        }
        let s = FrequencyShift::new(rng.gen_range(1..4), rng.gen_range(0..6), rng.gen_range(0.1..20.0)).dense();
        skew &= s.adjoint() == -s;
    }
    // RK4 order from three step sizes on a smooth scalar LTP equation
    let a = waveform_trig_polynomial(-0.3, &[(1, 1.0)], &[(2, 0.5)], 1.0, 2);
    let zero = PeriodicMatrixFunction::zeros(1, 1, 1.0);
    let w = 2.0 * PI;
    let t1 = 0.7;
    let exact = (-0.3 * t1 + (w * t1).sin() / w + 0.5 * (1.0 - (2.0 * w * t1).cos()) / (2.0 * w)).exp();
    let err = |h: f64| {
        let r = sim::simulate_open_loop(&a, &zero, &sim::complex_state(&[1.0]), (0.0, t1), h).unwrap();
        (r.x.last().unwrap()[0].re - exact).abs()
    };
    let (e1, e2, e3) = (err(0.02), err(0.01), err(0.005));
    let orders = [(e1 / e2).log2(), (e2 / e3).log2()];
    let rk4 = orders.iter().all(|o| (o - 4.0).abs() < 0.3);
    checks.extend([
        ("conjugate symmetry", sym),
        ("Parseval", parseval),
        ("Toeplitz product", toeplitz),
        ("skew-adjoint N", skew),
        ("RK4 order", rk4),
    ]);
    let ok = checks.iter().all(|c| c.1) && elapsed <= 300.0;
    let desc: Vec<String> = checks
        .iter()
        .map(|(n, p)| format!("{n}={}", if *p { "ok" } else { "FAIL" }))
        .collect();
    line(
        10,
        ok,
        format!(
            "property checks: {}; observed RK4 orders {:.2}, {:.2}; acceptance runtime {elapsed:.1} s (limit 300 s)",
            desc.join(", "),
            orders[0],
            orders[1]
        ),
    )
}

fn main() {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let z_states: Vec<Vec<f64>> = (0..5)
        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let opts = RunOptions {
        z_initial_states: z_states,
        ..RunOptions::default()
    };
    let summary =
        case_study::run(&opts, None).unwrap_or_else(|e| panic!("case study failed at stage {}: {}", e.stage, e.error));
    let mut lines = vec![
        criterion_1(&summary),
        criterion_2(&summary),
        criterion_3(),
        criterion_4(&summary),
        criterion_5(&summary),
        criterion_6(&summary),
        criterion_7(&summary),
        criterion_8(&summary),
        criterion_9(&summary),
    ];
    lines.push(criterion_10(clock.elapsed().as_secs_f64()));
    for l in &lines {
        println!(
            "criterion {:>2} {}: {}",
            l.id,
            if l.pass { "PASS" } else { "FAIL" },
            l.text
        );
    }
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!(
        "acceptance: {} passed, {} failed",
        lines.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
