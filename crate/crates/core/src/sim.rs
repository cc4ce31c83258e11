//! Fixed-step RK4 simulation of `ẋ = A(t)x + B(t)u` with state-feedback laws,
//! the `z = P⁻¹x` check, reference tracking, decay-rate fits and the
//! finite-escape probe for `d(P⁻¹)/dt = −P⁻¹A + ΛP⁻¹ + P⁻¹BGP⁻¹`.

use std::io::Write;

use nalgebra::{Complex, ComplexField};
use serde::{Deserialize, Serialize};

use crate::control::{GainPath, GainSchedule, HarmonicEquilibrium};
use crate::error::{Error, Result};
use crate::linalg;
use crate::ode::rk4_step;
use crate::scalar::{creal, lit, to_f64, CMatrix, CVector, Real};
use crate::signals::{PeriodicMatrixFunction, Side};

/// States with a larger norm count as escaped.
pub const ESCAPE_GUARD: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Switch { t: f64, segment: usize },
    Escape { t: f64, norm: f64 },
}

#[derive(Clone, Debug)]
pub struct SimulationResult<T: Real> {
    pub times: Vec<T>,
    pub x: Vec<CVector<T>>,
    pub u: Vec<CVector<T>>,
    /// `P(t)⁻¹x(t)` when a gain schedule was involved.
    pub z: Option<Vec<CVector<T>>>,
    /// Tracking error `x − x_ref` for tracking runs.
    pub e: Option<Vec<CVector<T>>>,
    pub events: Vec<Event>,
    pub step: T,
}

impl<T: Real> SimulationResult<T> {
    pub fn escaped(&self) -> Option<T> {
        self.events.iter().find_map(|e| match e {
            Event::Escape { t, .. } => Some(lit(*t)),
            _ => None,
        })
    }

    /// Largest imaginary part in the state trajectory.
    pub fn imag_residue(&self) -> T {
        self.x
            .iter()
            .flat_map(|v| v.iter())
            .fold(T::zero(), |a, z| a.max(z.im.abs()))
    }

    /// Index of the sample at time `t` (nearest grid point).
    pub fn index_at(&self, t: T) -> usize {
        let t0 = self.times[0];
        let j = to_f64((t - t0) / self.step).round().max(0.0) as usize;
        j.min(self.times.len() - 1)
    }

    /// CSV with columns `t, x_i, u_i[, z_i][, e_i]` (real parts; imaginary
    /// parts are appended as `*_im` columns when any is nonzero).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_csv_every(out, 1)
    }

    /// As [`write_csv`](Self::write_csv), keeping every `stride`-th sample.
    pub fn write_csv_every<W: Write>(&self, out: W, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        let mut w = csv::Writer::from_writer(out);
        let complex = self.imag_residue() > T::zero()
            || self
                .z
                .iter()
                .flatten()
                .chain(self.u.iter())
                .any(|v| v.iter().any(|z| z.im != T::zero()));
        let mut cols: Vec<(&str, &Vec<CVector<T>>)> = vec![("x", &self.x), ("u", &self.u)];
        if let Some(z) = &self.z {
            cols.push(("z", z));
        }
        if let Some(e) = &self.e {
            cols.push(("e", e));
        }
        let mut header = vec!["t".to_string()];
        for (name, series) in &cols {
            let dim = series.first().map(|v| v.len()).unwrap_or(0);
            for i in 0..dim {
                header.push(format!("{name}{}", i + 1));
                if complex {
                    header.push(format!("{name}{}_im", i + 1));
                }
            }
        }
        w.write_record(&header)?;
        for (j, t) in self.times.iter().enumerate().step_by(stride) {
            let mut rec = vec![format!("{}", to_f64(*t))];
            for (_, series) in &cols {
                for z in series[j].iter() {
                    rec.push(format!("{:e}", to_f64(z.re)));
                    if complex {
                        rec.push(format!("{:e}", to_f64(z.im)));
                    }
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Checks that `step` divides the period and returns the number of steps to
/// cover `[t0, t1]`.
fn grid_steps<T: Real>(period: T, step: T, t0: T, t1: T) -> Result<usize> {
    if !(step > T::zero()) || !(t1 >= t0) {
        return Err(Error::InvalidInput("need step > 0 and t1 >= t0".into()));
    }
    let per = to_f64(period / step);
    if (per - per.round()).abs() > 1e-6 * per.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "step must divide the period (T/step = {per})"
        )));
    }
    let n = to_f64((t1 - t0) / step);
    if (n - n.round()).abs() > 1e-6 * n.max(1.0) {
        return Err(Error::InvalidInput(format!("step must divide the horizon ({n} steps)")));
    }
    Ok(n.round() as usize)
}

fn to_vec<T: Real>(m: CMatrix<T>) -> CVector<T> {
    CVector::from_column_slice(m.as_slice())
}

/// Integrates `ẋ = A(t)x + B(t)u(t, x)` from `x0` over `[t0, t1]`.
pub fn simulate<T, U>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    law: U,
    x0: &CVector<T>,
    t_span: (T, T),
    step: T,
) -> Result<SimulationResult<T>>
where
    T: Real,
    U: Fn(T, &CVector<T>) -> Result<CVector<T>>,
{
    let n = a.rows();
    if x0.len() != n || b.rows() != n {
        return Err(Error::Dimension(format!("x0 has {} entries, A is {n}x{n}", x0.len())));
    }
    let (t0, t1) = t_span;
    let steps = grid_steps(a.period(), step, t0, t1)?;
    let failure = std::cell::RefCell::new(None);
    let f = |t: T, side: Side, y: &CMatrix<T>| -> CMatrix<T> {
        let xv = to_vec(y.clone());
        let u = match law(t, &xv) {
            Ok(u) => u,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                CVector::zeros(b.cols())
            }
        };
        a.evaluate_side(t, side) * y + b.evaluate_side(t, side) * CMatrix::from_column_slice(u.len(), 1, u.as_slice())
    };
    let mut x = CMatrix::from_column_slice(n, 1, x0.as_slice());
    let mut times = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut us = Vec::with_capacity(steps + 1);
    let mut events = Vec::new();
    for s in 0..=steps {
        let t = t0 + step * lit::<T>(s as f64);
        let xv = to_vec(x.clone());
        us.push(law(t, &xv)?);
        times.push(t);
        xs.push(xv);
        if s == steps {
            break;
        }
        x = rk4_step(&f, t, step, &x);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        let norm = to_f64(linalg::vec_norm(&to_vec(x.clone())));
        if !norm.is_finite() || norm > ESCAPE_GUARD {
            events.push(Event::Escape {
                t: to_f64(t + step),
                norm,
            });
            break;
        }
    }
    Ok(SimulationResult {
        times,
        x: xs,
        u: us,
        z: None,
        e: None,
        events,
        step,
    })
}

/// Open-loop run, `u = 0`.
pub fn simulate_open_loop<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    x0: &CVector<T>,
    t_span: (T, T),
    step: T,
) -> Result<SimulationResult<T>> {
    let p = b.cols();
    simulate(a, b, |_, _| Ok(CVector::zeros(p)), x0, t_span, step)
}

/// Closed loop `u = −K(t)x`.
pub fn simulate_closed_loop<T: Real>(
    gain: &GainSchedule<T>,
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    x0: &CVector<T>,
    t_span: (T, T),
    step: T,
    path: GainPath,
) -> Result<SimulationResult<T>> {
    let mut res = simulate(a, b, |t, x| Ok(-(gain.gain(t, path)? * x)), x0, t_span, step)?;
    let z = res
        .times
        .iter()
        .zip(&res.x)
        .map(|(t, x)| Ok(gain.p_inverse(*t)? * x))
        .collect::<Result<Vec<_>>>()?;
    res.z = Some(z);
    Ok(res)
}

/// `e^{Λt}` for a constant square `Λ`.
pub fn lambda_flow<T: Real>(lambda: &CMatrix<T>, t: T) -> CMatrix<T> {
    linalg::expm(&(lambda * creal(t)))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ZReport {
    /// `sup ‖z(t) − e^{Λt}z(0)‖ / ‖z(0)‖`.
    pub relative_to_z0: f64,
    /// `sup ‖z(t) − e^{Λt}z(0)‖ / ‖x0‖`.
    pub relative_to_x0: f64,
}

/// Simulates `ẋ = (A − BK)x` and compares `z = P⁻¹x` with `e^{Λt}z(0)`.
pub fn verify_z_dynamics<T: Real>(
    gain: &GainSchedule<T>,
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    x0: &CVector<T>,
    t_span: (T, T),
    step: T,
) -> Result<ZReport> {
    let res = simulate_closed_loop(gain, a, b, x0, t_span, step, GainPath::Pointwise)?;
    let z = res.z.as_ref().expect("closed-loop runs record z");
    let z0 = &z[0];
    let mut worst = T::zero();
    for (t, zt) in res.times.iter().zip(z) {
        let pred = lambda_flow(&gain.lambda, *t - t_span.0) * z0;
        worst = worst.max(linalg::vec_norm(&(zt - pred)));
    }
    let nz = to_f64(linalg::vec_norm(z0));
    let nx = to_f64(linalg::vec_norm(x0));
    let w = to_f64(worst);
    let ratio = |d: f64| if d > 0.0 { w / d } else { 0.0 };
    Ok(ZReport {
        relative_to_z0: ratio(nz),
        relative_to_x0: ratio(nx),
    })
}

/// Monodromy of the closed loop `A − BK` over one period.
pub fn closed_loop_monodromy<T: Real>(
    gain: &GainSchedule<T>,
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    steps: usize,
    path: GainPath,
) -> Result<CMatrix<T>> {
    let n = a.rows();
    let h = a.period() / lit::<T>(steps as f64);
    let failure = std::cell::RefCell::new(None);
    let f = |t: T, side: Side, y: &CMatrix<T>| -> CMatrix<T> {
        let k = match gain.gain(t, path) {
            Ok(k) => k,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                CMatrix::zeros(b.cols(), n)
            }
        };
        (a.evaluate_side(t, side) - b.evaluate_side(t, side) * k) * y
    };
    let mut phi = CMatrix::identity(n, n);
    for s in 0..steps {
        phi = rk4_step(&f, h * lit::<T>(s as f64), h, &phi);
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(phi)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MultiplierReport {
    /// `|μ|` sorted ascending.
    pub moduli: Vec<f64>,
    /// `e^{Re λ T}` for `λ ∈ σ(Λ)`, sorted ascending.
    pub expected: Vec<f64>,
    /// Largest `|ln|μ| − Re λ T| / |Re λ T|` after pairing in sorted order.
    pub max_log_error: f64,
}

/// Compares closed-loop multiplier moduli with `e^{Re σ(Λ) T}`.
pub fn multiplier_check<T: Real>(
    gain: &GainSchedule<T>,
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    steps: usize,
    path: GainPath,
) -> Result<MultiplierReport> {
    let phi = closed_loop_monodromy(gain, a, b, steps, path)?;
    let mut moduli: Vec<f64> = linalg::eigenvalues(&phi)?.iter().map(|z| to_f64(z.modulus())).collect();
    let mut expected: Vec<f64> = linalg::eigenvalues(&gain.lambda)?
        .iter()
        .map(|l| (to_f64(l.re) * to_f64(a.period())).exp())
        .collect();
    moduli.sort_by(|x, y| x.total_cmp(y));
    expected.sort_by(|x, y| x.total_cmp(y));
    let max_log_error = moduli
        .iter()
        .zip(&expected)
        .map(|(mu, e)| {
            let le = e.ln();
            if le == 0.0 {
                mu.ln().abs()
            } else {
                ((mu.ln() - le) / le).abs()
            }
        })
        .fold(0.0, f64::max);
    Ok(MultiplierReport {
        moduli,
        expected,
        max_log_error,
    })
}

/// One reference segment, active from `t_start` until the next one.
#[derive(Clone, Debug)]
pub struct Segment<T: Real> {
    pub t_start: T,
    pub equilibrium: HarmonicEquilibrium<T>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SegmentMetrics {
    pub t_start: f64,
    pub t_end: f64,
    pub error_at_start: f64,
    pub error_at_end: f64,
    /// `sup ‖e‖` over the first period of the segment.
    pub first_period_sup: f64,
    /// `sup ‖e‖` over the last period of the segment.
    pub last_period_sup: f64,
    /// Time from the segment start after which `‖e‖` stays at or below
    /// `SETTLING_FRACTION · error_at_start`; `None` if it never does.
    pub settling_time: Option<f64>,
}

pub const SETTLING_FRACTION: f64 = 0.05;

/// Tracking run with `u = −K(t)(x − x_ref(t)) + u_ref(t)`, switching the
/// reference at each segment start; returns the run and per-segment metrics.
#[allow(clippy::too_many_arguments)]
pub fn tracking_scenario<T: Real>(
    gain: &GainSchedule<T>,
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    segments: &[Segment<T>],
    x0: &CVector<T>,
    t_end: T,
    step: T,
    path: GainPath,
) -> Result<(SimulationResult<T>, Vec<SegmentMetrics>)> {
    if segments.is_empty() || segments.windows(2).any(|w| w[0].t_start >= w[1].t_start) {
        return Err(Error::InvalidInput(
            "segments must be non-empty with ascending start times".into(),
        ));
    }
    let t0 = segments[0].t_start;
    // the switch to segment i happens on its start grid point; left limits
    // (RK4's last stage) still see the previous reference
    let active = |t: T, side: Side| -> usize {
        let mut idx = 0;
        for (i, s) in segments.iter().enumerate() {
            let d = to_f64((t - s.t_start) / step);
            let reached = match side {
                Side::Left => d > 1e-6,
                _ => d > -1e-6,
            };
            if reached {
                idx = i;
            }
        }
        idx
    };
    let x_ref = |i: usize, t: T| to_vec(segments[i].equilibrium.x_ref.synthesize(t));
    let u_ref = |i: usize, t: T| to_vec(segments[i].equilibrium.u_ref.synthesize(t));

    let n = a.rows();
    let steps = grid_steps(a.period(), step, t0, t_end)?;
    let failure = std::cell::RefCell::new(None);
    let control = |t: T, side: Side, x: &CVector<T>| -> CVector<T> {
        let i = active(t, side);
        match gain.gain(t, path) {
            Ok(k) => -(k * (x - x_ref(i, t))) + u_ref(i, t),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                CVector::zeros(b.cols())
            }
        }
    };
    let f = |t: T, side: Side, y: &CMatrix<T>| -> CMatrix<T> {
        let xv = to_vec(y.clone());
        let u = control(t, side, &xv);
        a.evaluate_side(t, side) * y + b.evaluate_side(t, side) * CMatrix::from_column_slice(u.len(), 1, u.as_slice())
    };

    let mut x = CMatrix::from_column_slice(n, 1, x0.as_slice());
    let mut res = SimulationResult {
        times: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        z: Some(Vec::with_capacity(steps + 1)),
        e: Some(Vec::with_capacity(steps + 1)),
        events: Vec::new(),
        step,
    };
    let mut current = usize::MAX;
    for s in 0..=steps {
        let t = t0 + step * lit::<T>(s as f64);
        let i = active(t, Side::Right);
        if i != current {
            res.events.push(Event::Switch {
                t: to_f64(t),
                segment: i,
            });
            current = i;
        }
        let xv = to_vec(x.clone());
        res.u.push(control(t, Side::Right, &xv));
        res.e.as_mut().expect("set").push(&xv - x_ref(i, t));
        res.z
            .as_mut()
            .expect("set")
            .push(gain.p_inverse(t)? * (&xv - x_ref(i, t)));
        res.times.push(t);
        res.x.push(xv);
        if s == steps {
            break;
        }
        x = rk4_step(&f, t, step, &x);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        let norm = to_f64(linalg::vec_norm(&to_vec(x.clone())));
        if !norm.is_finite() || norm > ESCAPE_GUARD {
            res.events.push(Event::Escape {
                t: to_f64(t + step),
                norm,
            });
            break;
        }
    }
    let metrics = segment_metrics(&res, segments, t_end, a.period())?;
    Ok((res, metrics))
}

fn segment_metrics<T: Real>(
    res: &SimulationResult<T>,
    segments: &[Segment<T>],
    t_end: T,
    period: T,
) -> Result<Vec<SegmentMetrics>> {
    let e = res.e.as_ref().expect("tracking runs record e");
    let norms: Vec<f64> = e.iter().map(|v| to_f64(linalg::vec_norm(v))).collect();
    let last = res.times.len() - 1;
    let mut out = Vec::with_capacity(segments.len());
    for (i, s) in segments.iter().enumerate() {
        let end = segments.get(i + 1).map(|n| n.t_start).unwrap_or(t_end);
        let j0 = res.index_at(s.t_start);
        // the end sample belongs to the next segment; take the one before it
        let j1 = if i + 1 < segments.len() {
            res.index_at(end).saturating_sub(1).min(last)
        } else {
            res.index_at(end).min(last)
        };
        let per = (to_f64(period / res.step)).round() as usize;
        let sup = |lo: usize, hi: usize| norms[lo..=hi.max(lo)].iter().copied().fold(0.0, f64::max);
        let level = SETTLING_FRACTION * norms[j0];
        let settling_time = if norms[j1] > level {
            None
        } else {
            let last_above = (j0..=j1).rev().find(|&j| norms[j] > level);
            let js = last_above.map(|j| j + 1).unwrap_or(j0);
            Some(to_f64(res.times[js] - res.times[j0]))
        };
        out.push(SegmentMetrics {
            t_start: to_f64(s.t_start),
            t_end: to_f64(end),
            error_at_start: norms[j0],
            error_at_end: norms[j1],
            first_period_sup: sup(j0, (j0 + per).min(j1)),
            last_period_sup: sup(j1.saturating_sub(per).max(j0), j1),
            settling_time,
        });
    }
    Ok(out)
}

/// Fits `‖x(t0 + kT)‖ ≈ c·γ^k`, `k = 0..=n_periods`, by log-linear least
/// squares and returns `γ̂`. Samples at or below `1e-12` are dropped.
pub fn decay_rate<T: Real>(res: &SimulationResult<T>, t0: T, n_periods: usize, period: T) -> Result<T> {
    let mut ks = Vec::new();
    let mut logs = Vec::new();
    for k in 0..=n_periods {
        let t = t0 + period * lit::<T>(k as f64);
        let j = res.index_at(t);
        if to_f64((res.times[j] - t).abs()) > to_f64(res.step) {
            break;
        }
        let norm = to_f64(linalg::vec_norm(&res.x[j]));
        if norm <= 1e-12 {
            break;
        }
        ks.push(k as f64);
        logs.push(norm.ln());
    }
    if ks.len() < 2 {
        return Err(Error::Undefined(
            "decay rate needs at least two periods above the numerical floor".into(),
        ));
    }
    let nk = ks.len() as f64;
    let mk = ks.iter().sum::<f64>() / nk;
    let ml = logs.iter().sum::<f64>() / nk;
    let sxy: f64 = ks.iter().zip(&logs).map(|(k, l)| (k - mk) * (l - ml)).sum();
    let sxx: f64 = ks.iter().map(|k| (k - mk) * (k - mk)).sum();
    Ok(lit((sxy / sxx).exp()))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EscapeReport {
    pub escaped: bool,
    pub escape_time: Option<f64>,
    /// `‖P⁻¹‖_F` at the last accepted step.
    pub final_norm: f64,
}

/// Integrates `Ẏ = −YA + ΛY + YBGY` (with `Y = P⁻¹`) from `Y(0)` over one
/// period, stopping at the escape guard.
pub fn riccati_escape_probe<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    g: &PeriodicMatrixFunction<T>,
    lambda: &CMatrix<T>,
    p0_inverse: &CMatrix<T>,
    step: T,
) -> Result<EscapeReport> {
    let period = a.period();
    let steps = grid_steps(period, step, T::zero(), period)?;
    let f = |t: T, side: Side, y: &CMatrix<T>| -> CMatrix<T> {
        let bg = b.evaluate_side(t, side) * g.evaluate_side(t, side);
        -(y * a.evaluate_side(t, side)) + lambda * y + y * bg * y
    };
    let mut y = p0_inverse.clone();
    let mut last = crate::scalar::fro(&y);
    for s in 0..steps {
        let t = step * lit::<T>(s as f64);
        let next = rk4_step(&f, t, step, &y);
        let norm = crate::scalar::fro(&next);
        if !norm.is_finite() || to_f64(norm) > ESCAPE_GUARD {
            return Ok(EscapeReport {
                escaped: true,
                escape_time: Some(to_f64(t + step)),
                final_norm: to_f64(last),
            });
        }
        y = next;
        last = norm;
    }
    Ok(EscapeReport {
        escaped: false,
        escape_time: None,
        final_norm: to_f64(last),
    })
}

/// Endpoint difference between runs with `step` and `step/2`.
pub fn step_doubling_delta<T, U>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    law: U,
    x0: &CVector<T>,
    t_span: (T, T),
    step: T,
) -> Result<T>
where
    T: Real,
    U: Fn(T, &CVector<T>) -> Result<CVector<T>> + Copy,
{
    let coarse = simulate(a, b, law, x0, t_span, step)?;
    let fine = simulate(a, b, law, x0, t_span, step / lit::<T>(2.0))?;
    let xc = coarse.x.last().expect("non-empty");
    let xf = fine.x.last().expect("non-empty");
    Ok(linalg::vec_norm(&(xc - xf)))
}

/// Real vector as a complex state.
pub fn complex_state<T: Real>(x: &[T]) -> CVector<T> {
    CVector::from_iterator(x.len(), x.iter().map(|v| Complex::new(*v, T::zero())))
}
