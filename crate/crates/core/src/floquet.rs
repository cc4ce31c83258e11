//! Floquet factorization `A(t) = V(t) J V(t)⁻¹ + V̇(t) V(t)⁻¹` computed from
//! the monodromy matrix: `Φ(T,0) = W diag(μ) W⁻¹`, `J = diag(ln μ)/T`
//! (principal branch) and `V(t) = Φ(t,0) W e^{−Jt}`.

use std::io::Write;

use nalgebra::{Complex, ComplexField};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::ode;
use crate::scalar::{cexp, cln, creal, fro, lit, max_abs, to_f64, CMatrix, Real};
use crate::serial::{matrix_to_json, ComplexJson, MatrixJson, PeriodicJson};
use crate::signals::PeriodicMatrixFunction;

/// Eigenvector matrices with a larger condition number are treated as defective.
const DEFECTIVE_CONDITION: f64 = 1e10;

#[derive(Clone, Copy, Debug)]
pub struct FloquetOptions {
    /// RK4 steps per period.
    pub steps: usize,
    /// Grid points per period at which `V` is stored; must divide `steps`.
    pub samples: usize,
    /// Harmonics kept in the phasor form of `V`.
    pub harmonics: usize,
    /// Accepted change of `Φ(T,0)` under step halving (relative).
    pub tolerance: f64,
    /// Step doublings attempted before giving up.
    pub max_refinements: usize,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        FloquetOptions {
            steps: 20_000,
            samples: 1000,
            harmonics: 64,
            tolerance: 1e-8,
            max_refinements: 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Monodromy<T: Real> {
    pub matrix: CMatrix<T>,
    /// Steps per period of the accepted result.
    pub steps: usize,
    /// Relative change against the result with half as many steps.
    pub delta: T,
}

/// `Φ(T,0)` by RK4, doubling `steps` until halving the step changes the
/// result by less than `tolerance` (relative to `1 + ‖Φ‖`).
pub fn monodromy<T: Real>(a: &PeriodicMatrixFunction<T>, steps: usize) -> Result<Monodromy<T>> {
    let o = FloquetOptions {
        steps,
        ..FloquetOptions::default()
    };
    monodromy_with(a, o.steps, o.tolerance, o.max_refinements)
}

pub fn monodromy_with<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    steps: usize,
    tolerance: f64,
    max_refinements: usize,
) -> Result<Monodromy<T>> {
    if a.rows() != a.cols() {
        return Err(Error::Dimension(format!("state matrix is {}x{}", a.rows(), a.cols())));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be positive".into()));
    }
    let mut coarse = ode::transition(a, steps);
    let mut s = steps;
    let mut delta = f64::INFINITY;
    for _ in 0..=max_refinements {
        let fine = ode::transition(a, 2 * s);
        delta = to_f64(max_abs(&(&fine - &coarse)) / (T::one() + max_abs(&fine)));
        if delta < tolerance {
            return Ok(Monodromy {
                matrix: fine,
                steps: 2 * s,
                delta: lit(delta),
            });
        }
        coarse = fine;
        s *= 2;
    }
    Err(Error::NotConverged { delta, tolerance })
}

#[derive(Clone, Debug)]
pub struct FloquetFactorization<T: Real> {
    pub period: T,
    pub monodromy: CMatrix<T>,
    /// Characteristic multipliers `μ_p`, ordered like `exponents`.
    pub multipliers: Vec<Complex<T>>,
    /// `λ_p = ln(μ_p)/T`, sorted by decreasing imaginary part.
    pub exponents: Vec<Complex<T>>,
    /// Unit-norm monodromy eigenvectors as columns, `W = V(0)`.
    pub w: CMatrix<T>,
    /// `V(t_i)` on `t_i = iT/samples`, `i = 0..=samples`.
    pub v_samples: Vec<CMatrix<T>>,
    /// Phasor form of `V` (quadrature from `v_samples`).
    pub v: PeriodicMatrixFunction<T>,
    pub steps: usize,
    pub monodromy_delta: T,
    /// `‖V(T) − V(0)‖`.
    pub periodicity_defect: T,
    /// `‖W⁻¹ Φ(T,0) W − e^{JT}‖`.
    pub similarity_defect: T,
    pub eigenvector_condition: T,
}

impl<T: Real> FloquetFactorization<T> {
    pub fn j(&self) -> CMatrix<T> {
        let n = self.exponents.len();
        CMatrix::from_fn(n, n, |r, c| if r == c { self.exponents[r] } else { creal(T::zero()) })
    }

    pub fn omega(&self) -> T {
        T::two_pi() / self.period
    }

    /// Grid time of sample `i`.
    pub fn sample_time(&self, i: usize) -> T {
        self.period * lit::<T>(i as f64) / lit::<T>((self.v_samples.len() - 1) as f64)
    }

    /// `V(t) e^{Jt}`, which equals `Φ(t,0) V(0)`, on the sample grid.
    pub fn flow_samples(&self) -> Vec<CMatrix<T>> {
        self.v_samples
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let t = self.sample_time(i);
                let e = CMatrix::from_fn(v.ncols(), v.ncols(), |r, c| {
                    if r == c {
                        cexp(self.exponents[r] * creal(t))
                    } else {
                        creal(T::zero())
                    }
                });
                v * e
            })
            .collect()
    }
}

/// Floquet factorization with default options and `steps` RK4 steps.
pub fn factorize<T: Real>(a: &PeriodicMatrixFunction<T>, steps: usize) -> Result<FloquetFactorization<T>> {
    factorize_with(
        a,
        FloquetOptions {
            steps,
            ..FloquetOptions::default()
        },
    )
}

pub fn factorize_with<T: Real>(a: &PeriodicMatrixFunction<T>, opts: FloquetOptions) -> Result<FloquetFactorization<T>> {
    let mono = monodromy_with(a, opts.steps, opts.tolerance, opts.max_refinements)?;
    let n = a.rows();
    let period = a.period();
    let m = &mono.matrix;
    let scale = max_abs(m);

    let mut mus = linalg::eigenvalues(m)?;
    if mus.iter().any(|mu| mu.modulus() <= T::default_epsilon() * scale) {
        return Err(Error::SingularMonodromy);
    }
    let exps: Vec<Complex<T>> = mus.iter().map(|mu| cln(*mu) / creal(period)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        exps[y]
            .im
            .partial_cmp(&exps[x].im)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(exps[y].re.partial_cmp(&exps[x].re).unwrap_or(std::cmp::Ordering::Equal))
    });
    mus = order.iter().map(|&i| mus[i]).collect();
    let exponents: Vec<Complex<T>> = order.iter().map(|&i| exps[i]).collect();

    let mut w = CMatrix::zeros(n, n);
    for (c, mu) in mus.iter().enumerate() {
        let shifted = m - CMatrix::identity(n, n) * *mu;
        let v = normalize_phase(linalg::null_vector(&shifted)?);
        w.set_column(c, &v);
    }
    let cond = linalg::condition_number(&w);
    if to_f64(cond) > DEFECTIVE_CONDITION || !cond.is_finite() {
        return Err(Error::DefectiveMonodromy {
            condition: to_f64(cond),
        });
    }

    if opts.samples == 0 || mono.steps % opts.samples != 0 {
        return Err(Error::InvalidInput(format!(
            "V grid of {} samples must divide {} steps",
            opts.samples, mono.steps
        )));
    }
    let phis = ode::transition_samples(a, mono.steps, mono.steps / opts.samples);
    let v_samples: Vec<CMatrix<T>> = phis
        .iter()
        .enumerate()
        .map(|(i, phi)| {
            let t = period * lit::<T>(i as f64) / lit::<T>(opts.samples as f64);
            let decay = CMatrix::from_fn(n, n, |r, c| {
                if r == c {
                    cexp(-exponents[r] * creal(t))
                } else {
                    creal(T::zero())
                }
            });
            phi * &w * decay
        })
        .collect();
    let v = PeriodicMatrixFunction::from_samples(period, &v_samples[..opts.samples], opts.harmonics)?;

    let periodicity_defect = fro(&(&v_samples[opts.samples] - &v_samples[0]));
    let winv = linalg::inverse(&w)?;
    let ejt = CMatrix::from_fn(n, n, |r, c| if r == c { mus[r] } else { creal(T::zero()) });
    let similarity_defect = fro(&(&winv * m * &w - ejt));

    Ok(FloquetFactorization {
        period,
        monodromy: mono.matrix.clone(),
        multipliers: mus,
        exponents,
        w,
        v_samples,
        v,
        steps: mono.steps,
        monodromy_delta: mono.delta,
        periodicity_defect,
        similarity_defect,
        eigenvector_condition: cond,
    })
}

/// Unit norm with the largest-modulus component real and positive.
fn normalize_phase<T: Real>(v: crate::scalar::CVector<T>) -> crate::scalar::CVector<T> {
    let norm = linalg::vec_norm(&v);
    let mut big = 0;
    for i in 1..v.len() {
        if v[i].modulus() > v[big].modulus() {
            big = i;
        }
    }
    let phase = v[big] / creal(v[big].modulus());
    v.map(|z| z / phase / creal(norm))
}

/// `{λ_p + jωk}` for every exponent and every `k` in `ks`.
pub fn harmonic_spectrum_prediction<T: Real>(
    f: &FloquetFactorization<T>,
    ks: impl IntoIterator<Item = i64>,
) -> Vec<Complex<T>> {
    let omega = f.omega();
    ks.into_iter()
        .flat_map(|k| {
            f.exponents
                .iter()
                .map(move |l| *l + Complex::new(T::zero(), omega * lit::<T>(k as f64)))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FloquetJson {
    #[serde(rename = "T")]
    pub period: f64,
    pub exponents: Vec<ComplexJson>,
    pub multipliers: Vec<ComplexJson>,
    #[serde(rename = "J")]
    pub j: MatrixJson,
    pub monodromy: MatrixJson,
    #[serde(rename = "V0")]
    pub v0: MatrixJson,
    #[serde(rename = "V")]
    pub v: PeriodicJson,
    pub steps: usize,
    pub monodromy_delta: f64,
    pub periodicity_defect: f64,
    pub similarity_defect: f64,
}

impl<T: Real> FloquetFactorization<T> {
    pub fn to_json(&self) -> FloquetJson {
        let cj = |v: &[Complex<T>]| v.iter().map(|z| ComplexJson::from_complex(*z)).collect();
        FloquetJson {
            period: to_f64(self.period),
            exponents: cj(&self.exponents),
            multipliers: cj(&self.multipliers),
            j: matrix_to_json(&self.j()),
            monodromy: matrix_to_json(&self.monodromy),
            v0: matrix_to_json(&self.w),
            v: PeriodicJson::from_function(&self.v),
            steps: self.steps,
            monodromy_delta: to_f64(self.monodromy_delta),
            periodicity_defect: to_f64(self.periodicity_defect),
            similarity_defect: to_f64(self.similarity_defect),
        }
    }

    /// `t, re_V11, im_V11, re_V12, ...` on the stored grid.
    pub fn write_v_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix_trace(
            self.v_samples
                .iter()
                .enumerate()
                .map(|(i, v)| (self.sample_time(i), v.clone())),
            "V",
            out,
        )
    }
}

/// CSV trace `t, re_X11, im_X11, ...` of a matrix-valued time series.
pub fn write_matrix_trace<T: Real, W: Write>(
    rows: impl Iterator<Item = (T, CMatrix<T>)>,
    name: &str,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header_done = false;
    for (t, m) in rows {
        if !header_done {
            let mut h = vec!["t".to_string()];
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    h.push(format!("re_{name}{}{}", r + 1, c + 1));
                    h.push(format!("im_{name}{}{}", r + 1, c + 1));
                }
            }
            w.write_record(&h)?;
            header_done = true;
        }
        let mut rec = vec![format!("{}", to_f64(t))];
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                rec.push(format!("{:e}", to_f64(m[(r, c)].re)));
                rec.push(format!("{:e}", to_f64(m[(r, c)].im)));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
