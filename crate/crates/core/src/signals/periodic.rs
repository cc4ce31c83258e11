use std::sync::Arc;

use nalgebra::{Complex, ComplexField, DMatrix};

use super::waveform::{Side, Term, WaveformMatrix};
use crate::error::{Error, Result};
use crate::scalar::{cis, creal, fro, lit, max_imag, real_part, CMatrix, Real};

/// What the phasors beyond the stored range are.
#[derive(Clone, Debug)]
enum Tail<T> {
    /// Exactly zero: the function is bandlimited to the stored range.
    Zero,
    /// Given by closed-form formulas; also supplies exact time evaluation.
    Exact(Arc<WaveformMatrix<T>>),
    /// Not known (e.g. obtained by quadrature); requests beyond the range fail.
    Unknown,
}

/// A `T`-periodic matrix function held as Fourier phasors `F_k`, `|k| ≤ K`,
/// with `f(t) = Σ F_k e^{jωkt}`.
#[derive(Clone, Debug)]
pub struct PeriodicMatrixFunction<T: Real> {
    rows: usize,
    cols: usize,
    period: T,
    phasors: Vec<CMatrix<T>>,
    tail: Tail<T>,
}

/// Minimum quadrature points per period for `harmonics` phasors.
pub fn min_resolution(harmonics: usize) -> usize {
    4 * harmonics + 4
}

impl<T: Real> PeriodicMatrixFunction<T> {
    /// Bandlimited function from phasors `F_{-K}..=F_K` (length `2K+1`).
    pub fn from_phasors(period: T, phasors: Vec<CMatrix<T>>) -> Result<Self> {
        Self::with_tail(period, phasors, Tail::Zero)
    }

    /// Phasors whose continuation beyond `K` is unknown (e.g. quadrature output).
    pub fn from_partial_phasors(period: T, phasors: Vec<CMatrix<T>>) -> Result<Self> {
        Self::with_tail(period, phasors, Tail::Unknown)
    }

    fn with_tail(period: T, phasors: Vec<CMatrix<T>>, tail: Tail<T>) -> Result<Self> {
        if phasors.len() % 2 != 1 {
            return Err(Error::Dimension(format!(
                "phasor list must have odd length 2K+1, got {}",
                phasors.len()
            )));
        }
        if !(period > T::zero()) {
            return Err(Error::InvalidInput("period must be positive".into()));
        }
        let (rows, cols) = phasors[0].shape();
        if phasors.iter().any(|p| p.shape() != (rows, cols)) {
            return Err(Error::Dimension("phasors of differing shapes".into()));
        }
        Ok(PeriodicMatrixFunction {
            rows,
            cols,
            period,
            phasors,
            tail,
        })
    }

    /// Closed-form waveform matrix with phasors materialized up to `harmonics`.
    pub fn from_waveforms(w: WaveformMatrix<T>, harmonics: usize) -> Self {
        let k = harmonics as i64;
        let phasors = (-k..=k).map(|i| w.phasor(i)).collect();
        let (rows, cols, period) = (w.rows, w.cols, w.period);
        let tail = match w.bandwidth() {
            Some(b) if b <= harmonics => Tail::Zero,
            _ => Tail::Exact(Arc::new(w)),
        };
        PeriodicMatrixFunction {
            rows,
            cols,
            period,
            phasors,
            tail,
        }
    }

    pub fn constant(value: CMatrix<T>, period: T) -> Self {
        PeriodicMatrixFunction {
            rows: value.nrows(),
            cols: value.ncols(),
            period,
            phasors: vec![value],
            tail: Tail::Zero,
        }
    }

    pub fn constant_real(value: &DMatrix<T>, period: T) -> Self {
        Self::constant(value.map(creal), period)
    }

    pub fn zeros(rows: usize, cols: usize, period: T) -> Self {
        Self::constant(CMatrix::zeros(rows, cols), period)
    }

    /// Phasors of `f` by uniform (periodic trapezoidal) quadrature on
    /// `resolution` points `t_i = iT/resolution`.
    pub fn phasors_of<F>(f: F, period: T, harmonics: usize, resolution: usize) -> Result<Self>
    where
        F: Fn(T) -> CMatrix<T>,
    {
        let samples: Vec<CMatrix<T>> = (0..resolution)
            .map(|i| f(period * lit::<T>(i as f64) / lit::<T>(resolution as f64)))
            .collect();
        Self::from_samples(period, &samples, harmonics)
    }

    /// Phasors from samples on the grid `t_i = iT/N`, `N = samples.len()`.
    pub fn from_samples(period: T, samples: &[CMatrix<T>], harmonics: usize) -> Result<Self> {
        let n = samples.len();
        let required = min_resolution(harmonics);
        if n < required {
            return Err(Error::Aliasing {
                resolution: n,
                harmonics,
                required,
            });
        }
        let (rows, cols) = samples[0].shape();
        if samples.iter().any(|s| s.shape() != (rows, cols)) {
            return Err(Error::Dimension("samples of differing shapes".into()));
        }
        let nf: T = lit(n as f64);
        let k = harmonics as i64;
        let phasors = (-k..=k)
            .map(|h| {
                let mut acc = CMatrix::zeros(rows, cols);
                for (i, s) in samples.iter().enumerate() {
                    // index arithmetic mod n keeps the phase exact for large i·h
                    let idx = ((i as i64 * h).rem_euclid(n as i64)) as f64;
                    let w = cis(-T::two_pi() * lit::<T>(idx) / nf);
                    acc += s * w;
                }
                acc / creal(nf)
            })
            .collect();
        Self::with_tail(period, phasors, Tail::Unknown)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn omega(&self) -> T {
        T::two_pi() / self.period
    }

    /// Highest stored harmonic `K`.
    pub fn harmonics(&self) -> usize {
        (self.phasors.len() - 1) / 2
    }

    /// Stored phasors in order `k = -K..=K`.
    pub fn phasors(&self) -> &[CMatrix<T>] {
        &self.phasors
    }

    pub fn is_bandlimited(&self) -> bool {
        matches!(self.tail, Tail::Zero)
    }

    pub fn has_closed_form(&self) -> bool {
        matches!(self.tail, Tail::Exact(_))
    }

    /// Phasor of index `k`; beyond the stored range it is taken from the
    /// closed form or is zero for bandlimited functions, otherwise refused.
    pub fn phasor(&self, k: i64) -> Result<CMatrix<T>> {
        let kk = self.harmonics() as i64;
        if k.abs() <= kk {
            return Ok(self.phasors[(k + kk) as usize].clone());
        }
        match &self.tail {
            Tail::Zero => Ok(CMatrix::zeros(self.rows, self.cols)),
            Tail::Exact(w) => Ok(w.phasor(k)),
            Tail::Unknown => Err(Error::MissingPhasors {
                required: k.unsigned_abs() as usize,
                available: self.harmonics(),
            }),
        }
    }

    /// Same function with phasors stored up to `harmonics`. Truncating a
    /// function drops its closed form and yields the bandlimited partial sum.
    pub fn materialize(&self, harmonics: usize) -> Result<Self> {
        let k = harmonics as i64;
        if harmonics < self.harmonics() {
            let phasors = (-k..=k).map(|i| self.phasor(i)).collect::<Result<Vec<_>>>()?;
            return Self::with_tail(self.period, phasors, Tail::Zero);
        }
        let phasors = (-k..=k).map(|i| self.phasor(i)).collect::<Result<Vec<_>>>()?;
        Self::with_tail(self.period, phasors, self.tail.clone())
    }

    /// Bandlimited partial sum `Σ_{|k|≤K} F_k e^{jωkt}` of the stored phasors.
    pub fn truncated(&self) -> Self {
        PeriodicMatrixFunction {
            tail: Tail::Zero,
            ..self.clone()
        }
    }

    /// Finite Fourier synthesis of the stored phasors.
    pub fn synthesize(&self, t: T) -> CMatrix<T> {
        let kk = self.harmonics() as i64;
        let w = self.omega();
        let mut acc = self.phasors[kk as usize].clone();
        for k in 1..=kk {
            let e = cis(w * lit::<T>(k as f64) * t);
            acc += &self.phasors[(kk + k) as usize] * e;
            acc += &self.phasors[(kk - k) as usize] * e.conj();
        }
        acc
    }

    /// Value at `t`: exact when a closed form is attached, else the synthesis.
    /// At jump discontinuities the closed form returns the midpoint.
    pub fn evaluate(&self, t: T) -> CMatrix<T> {
        self.evaluate_side(t, Side::Mid)
    }

    /// One-sided value for jump discontinuities of closed-form terms.
    pub fn evaluate_side(&self, t: T, side: Side) -> CMatrix<T> {
        match &self.tail {
            Tail::Exact(w) => w.value(t, side),
            _ => self.synthesize(t),
        }
    }

    /// Real part of [`evaluate`](Self::evaluate) together with the largest
    /// imaginary magnitude that was discarded.
    pub fn evaluate_real(&self, t: T) -> (DMatrix<T>, T) {
        let v = self.evaluate(t);
        (real_part(&v), max_imag(&v))
    }

    /// Exact derivative of the stored partial sum, `Σ jωk F_k e^{jωkt}`.
    pub fn derivative(&self, t: T) -> CMatrix<T> {
        let kk = self.harmonics() as i64;
        let w = self.omega();
        let mut acc = CMatrix::zeros(self.rows, self.cols);
        for k in 1..=kk {
            let kw = w * lit::<T>(k as f64);
            let e = cis(kw * t);
            let jkw = Complex::new(T::zero(), kw);
            acc += &self.phasors[(kk + k) as usize] * (jkw * e);
            acc -= &self.phasors[(kk - k) as usize] * (jkw * e.conj());
        }
        acc
    }

    /// Values on the uniform grid `t_i = iT/n`.
    pub fn sample_grid(&self, n: usize) -> Vec<CMatrix<T>> {
        (0..n)
            .map(|i| self.evaluate(self.period * lit::<T>(i as f64) / lit::<T>(n as f64)))
            .collect()
    }

    /// Pointwise conjugate transpose `f(t)*`.
    pub fn adjoint(&self) -> Self {
        let phasors = self.phasors.iter().rev().map(|p| p.adjoint()).collect();
        let tail = match &self.tail {
            Tail::Exact(w) => Tail::Exact(Arc::new(w.transpose())),
            other => other.clone(),
        };
        PeriodicMatrixFunction {
            rows: self.cols,
            cols: self.rows,
            period: self.period,
            phasors,
            tail,
        }
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        PeriodicMatrixFunction {
            phasors: self.phasors.iter().map(|p| p * c).collect(),
            tail: match &self.tail {
                Tail::Exact(_) => Tail::Unknown,
                other => other.clone(),
            },
            ..self.clone()
        }
    }

    /// Pointwise product `self(t)·rhs(t)` with `harmonics` phasors. Exact
    /// convolution when both factors are bandlimited, quadrature otherwise.
    pub fn product(&self, rhs: &Self, harmonics: usize, resolution: usize) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "product of {}x{} and {}x{} functions",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        if self.is_bandlimited() && rhs.is_bandlimited() {
            let k = harmonics as i64;
            let (ka, kb) = (self.harmonics() as i64, rhs.harmonics() as i64);
            let mut phasors = Vec::with_capacity(2 * harmonics + 1);
            for h in -k..=k {
                let mut acc = CMatrix::zeros(self.rows, rhs.cols);
                for a in -ka..=ka {
                    let b = h - a;
                    if b.abs() <= kb {
                        acc += &self.phasors[(a + ka) as usize] * &rhs.phasors[(b + kb) as usize];
                    }
                }
                phasors.push(acc);
            }
            let exact = harmonics as i64 >= ka + kb;
            let tail = if exact { Tail::Zero } else { Tail::Unknown };
            return Self::with_tail(self.period, phasors, tail);
        }
        Self::phasors_of(
            |t| self.evaluate(t) * rhs.evaluate(t),
            self.period,
            harmonics,
            resolution,
        )
    }

    /// Mean over one period by uniform quadrature (compare with `F_0`).
    pub fn mean(&self, resolution: usize) -> CMatrix<T> {
        let samples = self.sample_grid(resolution);
        let mut acc = CMatrix::zeros(self.rows, self.cols);
        for s in &samples {
            acc += s;
        }
        acc / creal(lit::<T>(resolution as f64))
    }

    /// Largest `‖F_{-k} − conj(F_k)‖` over the stored range; zero for real functions.
    pub fn conjugate_symmetry_defect(&self) -> T {
        let kk = self.harmonics();
        (0..=kk).fold(T::zero(), |acc, k| {
            let d = &self.phasors[kk - k] - self.phasors[kk + k].map(|z| z.conj());
            acc.max(fro(&d))
        })
    }

    /// `Σ_k ‖F_k‖_F²` over the stored range.
    pub fn phasor_energy(&self) -> T {
        self.phasors.iter().fold(T::zero(), |acc, p| {
            acc + p.iter().fold(T::zero(), |a, z| a + z.modulus_squared())
        })
    }

    /// Largest entry modulus of each phasor, ordered `k = -K..=K`.
    pub fn phasor_magnitudes(&self) -> Vec<T> {
        self.phasors
            .iter()
            .map(|p| p.iter().fold(T::zero(), |a, z| a.max(z.modulus())))
            .collect()
    }
}

fn scalar_waveform<T: Real>(period: T, offset: T, term: Term<T>) -> WaveformMatrix<T> {
    WaveformMatrix::new(1, 1, period)
        .with(0, 0, Term::Const { value: offset })
        .with(0, 0, term)
}

/// `offset + amplitude·sgn(sin ωt)` with phasors up to `harmonics`.
pub fn waveform_square<T: Real>(offset: T, amplitude: T, period: T, harmonics: usize) -> PeriodicMatrixFunction<T> {
    PeriodicMatrixFunction::from_waveforms(scalar_waveform(period, offset, Term::Square { amplitude }), harmonics)
}

/// `offset + amplitude·(8/π²)Σ cos((2k+1)ωt)/(2k+1)²`.
pub fn waveform_triangle<T: Real>(offset: T, amplitude: T, period: T, harmonics: usize) -> PeriodicMatrixFunction<T> {
    PeriodicMatrixFunction::from_waveforms(scalar_waveform(period, offset, Term::Triangle { amplitude }), harmonics)
}

/// `offset` plus a rising sawtooth of peak `amplitude` in the phase `ωt + phase`.
pub fn waveform_sawtooth<T: Real>(
    offset: T,
    amplitude: T,
    phase: T,
    period: T,
    harmonics: usize,
) -> PeriodicMatrixFunction<T> {
    PeriodicMatrixFunction::from_waveforms(
        scalar_waveform(period, offset, Term::Sawtooth { amplitude, phase }),
        harmonics,
    )
}

/// `c + Σ a_h cos(hωt) + Σ b_h sin(hωt)`.
pub fn waveform_trig_polynomial<T: Real>(
    constant: T,
    cosines: &[(u32, T)],
    sines: &[(u32, T)],
    period: T,
    harmonics: usize,
) -> PeriodicMatrixFunction<T> {
    let mut w = WaveformMatrix::new(1, 1, period).with(0, 0, Term::Const { value: constant });
    for &(harmonic, amplitude) in cosines {
        w.push(
            0,
            0,
            Term::Cos {
                amplitude,
                harmonic,
                phase: T::zero(),
            },
        );
    }
    for &(harmonic, amplitude) in sines {
        w.push(
            0,
            0,
            Term::Sin {
                amplitude,
                harmonic,
                phase: T::zero(),
            },
        );
    }
    PeriodicMatrixFunction::from_waveforms(w, harmonics)
}
