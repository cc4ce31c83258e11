//! Sliding Fourier decomposition over a backward window `[t-T, t]` and the
//! inverse reconstruction `x(t) = Σ X_p(t) e^{jωpt} + (T/2) Ẋ_0(t)`.

use nalgebra::{Complex, DVector};

use crate::error::{Error, Result};
use crate::scalar::{cis, creal, lit, to_f64, CMatrix, Real};

/// Time-varying phasors `X_{i,k}(t_j)` on a uniform grid.
#[derive(Clone, Debug)]
pub struct PhasorTrajectory<T: Real> {
    pub n: usize,
    pub m: usize,
    pub period: T,
    pub t0: T,
    pub step: T,
    /// `n × (2m+1)` matrices, column `k+m`; `None` before a full window exists.
    pub samples: Vec<Option<CMatrix<T>>>,
}

#[derive(Clone, Debug)]
pub struct Reconstruction<T: Real> {
    pub value: DVector<T>,
    /// Largest imaginary magnitude discarded from the complex synthesis.
    pub imag_residue: T,
    /// `Ẋ_0` came from a one-sided difference (trajectory boundary).
    pub one_sided: bool,
}

/// Computes `X_{i,k}(t_j) = (1/T)∫_{t_j-T}^{t_j} x_i(τ)e^{-jωkτ}dτ` for `|k| ≤ m`
/// by trapezoidal quadrature on the sample grid `t_j = t0 + j·step`.
pub fn sliding_fourier<T: Real>(x: &[DVector<T>], t0: T, step: T, period: T, m: usize) -> Result<PhasorTrajectory<T>> {
    let window = steps_per_period(step, period)?;
    let n = x.first().map(|v| v.len()).unwrap_or(0);
    if x.iter().any(|v| v.len() != n) {
        return Err(Error::Dimension("samples of differing lengths".into()));
    }
    let width = 2 * m + 1;
    let omega = T::two_pi() / period;
    let len = x.len();

    // prefix[j] = Σ_{l<j} x_l e^{-jωk t_l}; the phase uses l mod N exactly
    let mut prefix: Vec<CMatrix<T>> = Vec::with_capacity(len + 1);
    prefix.push(CMatrix::zeros(n, width));
    let weights = |l: usize| -> Vec<Complex<T>> {
        let base = omega * t0;
        let frac = lit::<T>((l % window) as f64) / lit::<T>(window as f64);
        (0..width)
            .map(|c| {
                let k: T = lit(c as f64 - m as f64);
                cis(-k * (base + T::two_pi() * frac))
            })
            .collect()
    };
    let mut f_vals: Vec<CMatrix<T>> = Vec::with_capacity(len);
    for (l, xl) in x.iter().enumerate() {
        let w = weights(l);
        let mut f = CMatrix::zeros(n, width);
        for i in 0..n {
            for c in 0..width {
                f[(i, c)] = w[c] * xl[i];
            }
        }
        let next = &prefix[l] + &f;
        prefix.push(next);
        f_vals.push(f);
    }

    let scale = creal(step / period);
    let half = creal(lit::<T>(0.5));
    let samples = (0..len)
        .map(|j| {
            if j < window {
                return None;
            }
            let sum = &prefix[j + 1] - &prefix[j - window];
            let ends = (&f_vals[j - window] + &f_vals[j]) * half;
            Some((sum - ends) * scale)
        })
        .collect();
    Ok(PhasorTrajectory {
        n,
        m,
        period,
        t0,
        step,
        samples,
    })
}

fn steps_per_period<T: Real>(step: T, period: T) -> Result<usize> {
    if !(step > T::zero()) || !(period > T::zero()) {
        return Err(Error::InvalidInput("step and period must be positive".into()));
    }
    let ratio = to_f64(period / step);
    let window = ratio.round();
    if window < 1.0 || (ratio - window).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "grid step must divide the period (T/step = {ratio})"
        )));
    }
    Ok(window as usize)
}

impl<T: Real> PhasorTrajectory<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, j: usize) -> T {
        self.t0 + self.step * lit::<T>(j as f64)
    }

    /// Grid index of `t`, if `t` is (to rounding) a grid point.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let r = to_f64((t - self.t0) / self.step);
        let j = r.round();
        if j < 0.0 || (r - j).abs() > 1e-6 || j as usize >= self.len() {
            None
        } else {
            Some(j as usize)
        }
    }

    pub fn at(&self, j: usize) -> Option<&CMatrix<T>> {
        self.samples.get(j).and_then(|s| s.as_ref())
    }

    /// Phasor vector `X_k(t_j)` of length `n`.
    pub fn phasor(&self, j: usize, k: i64) -> Option<DVector<Complex<T>>> {
        if k.unsigned_abs() as usize > self.m {
            return None;
        }
        self.at(j).map(|x| x.column((k + self.m as i64) as usize).into_owned())
    }

    /// Inverse of the sliding decomposition at grid time `t`.
    pub fn reconstruct(&self, t: T) -> Result<Reconstruction<T>> {
        let j = self
            .index_of(t)
            .ok_or_else(|| Error::InvalidInput(format!("t = {} is not a grid time", to_f64(t))))?;
        self.reconstruct_at(j)
    }

    pub fn reconstruct_at(&self, j: usize) -> Result<Reconstruction<T>> {
        let x = self
            .at(j)
            .ok_or_else(|| Error::Undefined(format!("phasors unavailable at sample {j}")))?;
        let mid = self.m;
        let prev = j.checked_sub(1).and_then(|i| self.at(i));
        let next = self.at(j + 1);
        let (dx0, one_sided) = match (prev, next) {
            (Some(p), Some(q)) => (
                (q.column(mid) - p.column(mid)) / creal(lit::<T>(2.0) * self.step),
                false,
            ),
            (None, Some(q)) => ((q.column(mid) - x.column(mid)) / creal(self.step), true),
            (Some(p), None) => ((x.column(mid) - p.column(mid)) / creal(self.step), true),
            (None, None) => {
                return Err(Error::Undefined(format!(
                    "no neighbouring phasors to differentiate at sample {j}"
                )))
            }
        };
        let t = self.time(j);
        let omega = T::two_pi() / self.period;
        let mut acc = dx0 * creal(self.period / lit::<T>(2.0));
        for c in 0..(2 * self.m + 1) {
            let k: T = lit(c as f64 - self.m as f64);
            acc += x.column(c) * cis(omega * k * t);
        }
        let imag_residue = acc.iter().fold(T::zero(), |a, z| a.max(z.im.abs()));
        Ok(Reconstruction {
            value: acc.map(|z| z.re),
            imag_residue,
            one_sided,
        })
    }

    /// Largest sampled violation of `Ẋ_k = Ẋ_0 e^{-jωkt}` over consecutive
    /// available samples, using forward differences and midpoint phase.
    pub fn coincidence_defect(&self) -> T {
        let omega = T::two_pi() / self.period;
        let mut worst = T::zero();
        for j in 0..self.len().saturating_sub(1) {
            let (Some(a), Some(b)) = (self.at(j), self.at(j + 1)) else {
                continue;
            };
            let tm = self.time(j) + self.step / lit::<T>(2.0);
            let d0 = (b.column(self.m) - a.column(self.m)) / creal(self.step);
            for c in 0..(2 * self.m + 1) {
                let k: T = lit(c as f64 - self.m as f64);
                let dk = (b.column(c) - a.column(c)) / creal(self.step);
                let defect = dk - &d0 * cis(-omega * k * tm);
                let norm = defect.iter().fold(T::zero(), |s, z| s.max(z.norm_sqr().sqrt()));
                worst = worst.max(norm);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(f: impl Fn(f64) -> f64, n_per: usize, periods: usize) -> Vec<DVector<f64>> {
        (0..=n_per * periods)
            .map(|j| DVector::from_element(1, f(j as f64 / n_per as f64)))
            .collect()
    }

    #[test]
    fn startup_phasors_are_unavailable() {
        let x = grid(|_| 1.0, 50, 2);
        let tr = sliding_fourier(&x, 0.0, 0.02, 1.0, 2).unwrap();
        assert!(tr.at(49).is_none());
        assert!(tr.at(50).is_some());
    }

    #[test]
    fn step_must_divide_period() {
        let x = grid(|_| 1.0, 50, 2);
        assert!(sliding_fourier(&x, 0.0, 0.03, 1.0, 2).is_err());
    }

    #[test]
    fn cosine_has_half_amplitude_phasors() {
        let x = grid(|t| (2.0 * PI * t).cos(), 64, 2);
        let tr = sliding_fourier(&x, 0.0, 1.0 / 64.0, 1.0, 2).unwrap();
        let j = 100;
        for k in -2..=2i64 {
            let v = tr.phasor(j, k).unwrap()[0];
            let want = if k.abs() == 1 { 0.5 } else { 0.0 };
            assert!((v.re - want).abs() < 1e-12 && v.im.abs() < 1e-12, "k={k}: {v}");
        }
    }
}
