//! Closed-form periodic waveforms with exact per-harmonic phasors.
//!
//! Every term knows both its time-domain value and its `k`-th Fourier
//! coefficient `(1/T)∫ f(τ) e^{-jωkτ} dτ`, so an arbitrary truncation order can
//! be materialized without quadrature.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cis, cplx, creal, lit, CMatrix, Real};

/// Which one-sided limit to take at a jump discontinuity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Side {
    /// Average of the two limits (what the Fourier series converges to).
    #[default]
    Mid,
    /// Limit from the left, `f(t⁻)`.
    Left,
    /// Limit from the right, `f(t⁺)`.
    Right,
}

/// Jumps closer than this (in fractions of a period) are treated as hit.
const JUMP_TOL: f64 = 1e-9;

/// Scalar periodic waveform primitive, all sharing the fundamental `ω = 2π/T`.
#[derive(Clone, Debug, PartialEq)]
pub enum Term<T> {
    Const {
        value: T,
    },
    /// `A cos(hωt + φ)`
    Cos {
        amplitude: T,
        harmonic: u32,
        phase: T,
    },
    /// `A sin(hωt + φ)`
    Sin {
        amplitude: T,
        harmonic: u32,
        phase: T,
    },
    /// `A sgn(sin ωt) = A (4/π) Σ sin((2k+1)ωt)/(2k+1)`
    Square {
        amplitude: T,
    },
    /// `A (8/π²) Σ cos((2k+1)ωt)/(2k+1)²`, peak `A` at `t = 0`
    Triangle {
        amplitude: T,
    },
    /// Rising ramp from `-A` to `A` over one period of the phase `ωt + φ`,
    /// `A·(-(2/π) Σ sin(k(ωt + φ))/k)`; jumps where `ωt + φ ≡ 0 (mod 2π)`.
    Sawtooth {
        amplitude: T,
        phase: T,
    },
    /// `A (2/π) Σ_{k≥1} (-1)^k/k · sin(kωt + φ)` with one phase shared by all
    /// harmonics. For `sin φ ≠ 0` this has a logarithmic peak at `ωt ≡ π`.
    AlternatingSine {
        amplitude: T,
        phase: T,
    },
}

fn frac<T: Real>(x: T) -> T {
    x - x.floor()
}

/// `true` when `u` (a fraction of a period in `[0,1)`) sits on `at`.
fn near<T: Real>(u: T, at: f64) -> bool {
    let d = (u - lit::<T>(at)).abs();
    d < lit(JUMP_TOL) || (at == 0.0 && (T::one() - u) < lit(JUMP_TOL))
}

impl<T: Real> Term<T> {
    /// Highest harmonic index with a nonzero phasor, `None` for infinite series.
    pub fn bandwidth(&self) -> Option<usize> {
        match self {
            Term::Const { .. } => Some(0),
            Term::Cos { harmonic, .. } | Term::Sin { harmonic, .. } => Some(*harmonic as usize),
            _ => None,
        }
    }

    /// Exact Fourier coefficient of index `k`.
    pub fn phasor(&self, k: i64) -> Complex<T> {
        let pi = T::pi();
        let zero = Complex::new(T::zero(), T::zero());
        match *self {
            Term::Const { value } => {
                if k == 0 {
                    creal(value)
                } else {
                    zero
                }
            }
            Term::Cos {
                amplitude,
                harmonic,
                phase,
            } => {
                let h = harmonic as i64;
                if h == 0 {
                    if k == 0 {
                        creal(amplitude * phase.cos())
                    } else {
                        zero
                    }
                } else if k == h {
                    cis(phase) * lit::<T>(0.5) * amplitude
                } else if k == -h {
                    cis(-phase) * lit::<T>(0.5) * amplitude
                } else {
                    zero
                }
            }
            Term::Sin {
                amplitude,
                harmonic,
                phase,
            } => {
                let h = harmonic as i64;
                let half = lit::<T>(0.5) * amplitude;
                if h == 0 {
                    if k == 0 {
                        creal(amplitude * phase.sin())
                    } else {
                        zero
                    }
                } else if k == h {
                    cis(phase) * cplx(T::zero(), -half)
                } else if k == -h {
                    cis(-phase) * cplx(T::zero(), half)
                } else {
                    zero
                }
            }
            Term::Square { amplitude } => {
                if k % 2 == 0 {
                    zero
                } else {
                    let kf: T = lit(k as f64);
                    cplx(T::zero(), -lit::<T>(2.0) * amplitude / (pi * kf))
                }
            }
            Term::Triangle { amplitude } => {
                if k % 2 == 0 {
                    zero
                } else {
                    let kf: T = lit(k as f64);
                    creal(lit::<T>(4.0) * amplitude / (pi * pi * kf * kf))
                }
            }
            Term::Sawtooth { amplitude, phase } => {
                if k == 0 {
                    zero
                } else {
                    let kf: T = lit(k as f64);
                    cis(kf * phase) * cplx(T::zero(), amplitude / (pi * kf))
                }
            }
            Term::AlternatingSine { amplitude, phase } => {
                if k == 0 {
                    return zero;
                }
                let ka = k.unsigned_abs() as f64;
                let sign: T = if k.unsigned_abs() % 2 == 0 { T::one() } else { -T::one() };
                let c = cis(phase) * cplx(T::zero(), -sign * amplitude / (pi * lit::<T>(ka)));
                if k > 0 {
                    c
                } else {
                    c.conj()
                }
            }
        }
    }

    /// Time-domain value at `t` for period `period`.
    pub fn value(&self, t: T, period: T, side: Side) -> T {
        let pi = T::pi();
        let omega = T::two_pi() / period;
        match *self {
            Term::Const { value } => value,
            Term::Cos {
                amplitude,
                harmonic,
                phase,
            } => amplitude * (lit::<T>(harmonic as f64) * omega * t + phase).cos(),
            Term::Sin {
                amplitude,
                harmonic,
                phase,
            } => amplitude * (lit::<T>(harmonic as f64) * omega * t + phase).sin(),
            Term::Square { amplitude } => {
                let u = frac(t / period);
                let half: T = lit(0.5);
                if near(u, 0.0) {
                    match side {
                        Side::Mid => T::zero(),
                        Side::Left => -amplitude,
                        Side::Right => amplitude,
                    }
                } else if near(u, 0.5) {
                    match side {
                        Side::Mid => T::zero(),
                        Side::Left => amplitude,
                        Side::Right => -amplitude,
                    }
                } else if u < half {
                    amplitude
                } else {
                    -amplitude
                }
            }
            Term::Triangle { amplitude } => {
                // distance to the nearest period multiple, in fractions of T
                let u = frac(t / period);
                let d = u.min(T::one() - u);
                amplitude * (T::one() - lit::<T>(4.0) * d)
            }
            Term::Sawtooth { amplitude, phase } => {
                let u = frac((omega * t + phase) / T::two_pi());
                if near(u, 0.0) {
                    match side {
                        Side::Mid => T::zero(),
                        Side::Left => amplitude,
                        Side::Right => -amplitude,
                    }
                } else {
                    amplitude * (lit::<T>(2.0) * u - T::one())
                }
            }
            Term::AlternatingSine { amplitude, phase } => {
                // x = ωt wrapped into (-π, π]; closed forms of the two series:
                //   Σ (-1)^k sin(kx)/k = -x/2,  Σ (-1)^k cos(kx)/k = -ln(2 cos(x/2))
                let u = frac(t / period + lit::<T>(0.5));
                let at_wrap = near(u, 0.0);
                let x = if at_wrap {
                    match side {
                        Side::Left => pi,
                        Side::Right => -pi,
                        Side::Mid => T::zero(),
                    }
                } else {
                    T::two_pi() * u - pi
                };
                let ramp = if at_wrap && side == Side::Mid {
                    T::zero()
                } else {
                    -x / lit::<T>(2.0)
                };
                let c = if at_wrap { T::zero() } else { (x / lit::<T>(2.0)).cos() };
                let log_part = -(lit::<T>(2.0) * c.max(T::default_epsilon())).ln();
                lit::<T>(2.0) / pi * amplitude * (ramp * phase.cos() + log_part * phase.sin())
            }
        }
    }
}

/// A `rows × cols` matrix whose entries are sums of [`Term`]s.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveformMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub period: T,
    pub terms: Vec<PlacedTerm<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlacedTerm<T> {
    pub row: usize,
    pub col: usize,
    pub term: Term<T>,
}

impl<T: Real> WaveformMatrix<T> {
    pub fn new(rows: usize, cols: usize, period: T) -> Self {
        WaveformMatrix {
            rows,
            cols,
            period,
            terms: Vec::new(),
        }
    }

    pub fn with(mut self, row: usize, col: usize, term: Term<T>) -> Self {
        self.push(row, col, term);
        self
    }

    pub fn push(&mut self, row: usize, col: usize, term: Term<T>) {
        assert!(row < self.rows && col < self.cols, "term outside matrix");
        self.terms.push(PlacedTerm { row, col, term });
    }

    /// Constant real matrix.
    pub fn constant(values: &nalgebra::DMatrix<T>, period: T) -> Self {
        let mut w = WaveformMatrix::new(values.nrows(), values.ncols(), period);
        for r in 0..values.nrows() {
            for c in 0..values.ncols() {
                if values[(r, c)] != T::zero() {
                    w.push(r, c, Term::Const { value: values[(r, c)] });
                }
            }
        }
        w
    }

    pub fn bandwidth(&self) -> Option<usize> {
        self.terms
            .iter()
            .try_fold(0usize, |acc, p| p.term.bandwidth().map(|b| acc.max(b)))
    }

    pub fn phasor(&self, k: i64) -> CMatrix<T> {
        let mut m = CMatrix::zeros(self.rows, self.cols);
        for p in &self.terms {
            m[(p.row, p.col)] += p.term.phasor(k);
        }
        m
    }

    pub fn value(&self, t: T, side: Side) -> CMatrix<T> {
        let mut m = CMatrix::zeros(self.rows, self.cols);
        for p in &self.terms {
            m[(p.row, p.col)] += creal(p.term.value(t, self.period, side));
        }
        m
    }

    pub fn transpose(&self) -> Self {
        WaveformMatrix {
            rows: self.cols,
            cols: self.rows,
            period: self.period,
            terms: self
                .terms
                .iter()
                .map(|p| PlacedTerm {
                    row: p.col,
                    col: p.row,
                    term: p.term.clone(),
                })
                .collect(),
        }
    }
}

/// JSON description of a periodic matrix:
/// `{rows, cols, T, terms: [{row, col, kind, ...params}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub rows: usize,
    pub cols: usize,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
}

fn one() -> f64 {
    1.0
}

fn first() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermSpec {
    Const {
        row: usize,
        col: usize,
        value: f64,
    },
    Cos {
        row: usize,
        col: usize,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "first")]
        harmonic: u32,
        #[serde(default)]
        phase: f64,
    },
    Sin {
        row: usize,
        col: usize,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "first")]
        harmonic: u32,
        #[serde(default)]
        phase: f64,
    },
    Square {
        row: usize,
        col: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Triangle {
        row: usize,
        col: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Sawtooth {
        row: usize,
        col: usize,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    AlternatingSine {
        row: usize,
        col: usize,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl TermSpec {
    fn place<T: Real>(&self) -> (usize, usize, Term<T>) {
        match *self {
            TermSpec::Const { row, col, value } => (row, col, Term::Const { value: lit(value) }),
            TermSpec::Cos {
                row,
                col,
                amplitude,
                harmonic,
                phase,
            } => (
                row,
                col,
                Term::Cos {
                    amplitude: lit(amplitude),
                    harmonic,
                    phase: lit(phase),
                },
            ),
            TermSpec::Sin {
                row,
                col,
                amplitude,
                harmonic,
                phase,
            } => (
                row,
                col,
                Term::Sin {
                    amplitude: lit(amplitude),
                    harmonic,
                    phase: lit(phase),
                },
            ),
            TermSpec::Square { row, col, amplitude } => (
                row,
                col,
                Term::Square {
                    amplitude: lit(amplitude),
                },
            ),
            TermSpec::Triangle { row, col, amplitude } => (
                row,
                col,
                Term::Triangle {
                    amplitude: lit(amplitude),
                },
            ),
            TermSpec::Sawtooth {
                row,
                col,
                amplitude,
                phase,
            } => (
                row,
                col,
                Term::Sawtooth {
                    amplitude: lit(amplitude),
                    phase: lit(phase),
                },
            ),
            TermSpec::AlternatingSine {
                row,
                col,
                amplitude,
                phase,
            } => (
                row,
                col,
                Term::AlternatingSine {
                    amplitude: lit(amplitude),
                    phase: lit(phase),
                },
            ),
        }
    }
}

impl SignalSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SignalSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidInput(
                "signal must have at least one row and column".into(),
            ));
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::InvalidInput(format!(
                "period T must be positive, got {}",
                self.period
            )));
        }
        for t in &self.terms {
            let (r, c, _) = t.place::<f64>();
            if r >= self.rows || c >= self.cols {
                return Err(Error::InvalidInput(format!(
                    "term at ({r}, {c}) lies outside a {}x{} matrix",
                    self.rows, self.cols
                )));
            }
        }
        Ok(())
    }

    pub fn to_waveforms<T: Real>(&self) -> Result<WaveformMatrix<T>> {
        self.validate()?;
        let mut w = WaveformMatrix::new(self.rows, self.cols, lit(self.period));
        for t in &self.terms {
            let (r, c, term) = t.place();
            w.push(r, c, term);
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Midpoint-rule Fourier coefficient of a scalar term over one period.
    fn quad_phasor(term: &Term<f64>, k: i64, n: usize) -> Complex<f64> {
        let period = 1.0;
        let w = 2.0 * PI / period;
        let mut acc = Complex::new(0.0, 0.0);
        for i in 0..n {
            let t = (i as f64 + 0.5) * period / n as f64;
            acc += Complex::new(term.value(t, period, Side::Mid), 0.0) * Complex::from_polar(1.0, -w * k as f64 * t);
        }
        acc / n as f64
    }

    #[test]
    fn closed_form_phasors_match_quadrature() {
        let terms = [
            Term::Square { amplitude: 1.0 },
            Term::Triangle { amplitude: 2.0 },
            Term::Sawtooth {
                amplitude: 1.0,
                phase: PI / 4.0,
            },
            Term::Cos {
                amplitude: 2.0,
                harmonic: 3,
                phase: 0.3,
            },
            Term::Sin {
                amplitude: 4.0,
                harmonic: 6,
                phase: 0.0,
            },
        ];
        for term in &terms {
            for k in -7..=7 {
                let exact = term.phasor(k);
                let quad = quad_phasor(term, k, 200_000);
                assert!((exact - quad).norm() < 2e-5, "{term:?} k={k}: {exact} vs {quad}");
            }
        }
    }

    #[test]
    fn alternating_sine_matches_partial_sums_away_from_peak() {
        let term = Term::AlternatingSine {
            amplitude: 1.0,
            phase: PI / 4.0,
        };
        for &t in &[0.05, 0.2, 0.33, 0.71, 0.9] {
            let mut series = 0.0;
            for k in 1..200_000 {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                series += s / k as f64 * (2.0 * PI * k as f64 * t + PI / 4.0).sin();
            }
            series *= 2.0 / PI;
            assert!((series - term.value(t, 1.0, Side::Mid)).abs() < 1e-4, "t={t}");
        }
        let exact = term.phasor(3);
        assert!((exact - quad_phasor(&term, 3, 400_000)).norm() < 1e-4);
    }

    #[test]
    fn square_one_sided_limits() {
        let sq = Term::Square { amplitude: 1.0 };
        assert_eq!(sq.value(0.5, 1.0, Side::Left), 1.0);
        assert_eq!(sq.value(0.5, 1.0, Side::Right), -1.0);
        assert_eq!(sq.value(0.5, 1.0, Side::Mid), 0.0);
        assert_eq!(sq.value(1.0, 1.0, Side::Right), 1.0);
        assert_eq!(sq.value(0.25, 1.0, Side::Mid), 1.0);
    }

    #[test]
    fn spec_rejects_unknown_fields_and_kinds() {
        let ok = r#"{"rows":1,"cols":1,"T":1.0,"terms":[{"row":0,"col":0,"kind":"square","amplitude":1.0}]}"#;
        assert!(SignalSpec::from_json(ok).is_ok());
        let extra = r#"{"rows":1,"cols":1,"T":1.0,"terms":[],"bogus":1}"#;
        assert!(SignalSpec::from_json(extra).is_err());
        let bad_kind = r#"{"rows":1,"cols":1,"T":1.0,"terms":[{"row":0,"col":0,"kind":"wobble"}]}"#;
        assert!(SignalSpec::from_json(bad_kind).is_err());
        let bad_param = r#"{"rows":1,"cols":1,"T":1.0,"terms":[{"row":0,"col":0,"kind":"square","freq":2}]}"#;
        assert!(SignalSpec::from_json(bad_param).is_err());
        let outside = r#"{"rows":1,"cols":1,"T":1.0,"terms":[{"row":1,"col":0,"kind":"const","value":1}]}"#;
        assert!(SignalSpec::from_json(outside).is_err());
    }
}
