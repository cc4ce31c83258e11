//! Fixed-step classical Runge–Kutta for piecewise-continuous right-hand sides.
//!
//! The first stage sees the right limit at `t_n` and the last stage the left
//! limit at `t_{n+1}`, so a coefficient jump that falls on a grid point is
//! integrated as two smooth pieces.

use crate::scalar::{creal, lit, CMatrix, Real};
use crate::signals::{PeriodicMatrixFunction, Side};

/// One RK4 step of `ẏ = f(t, side, y)`.
pub fn rk4_step<T, F>(f: &F, t: T, h: T, y: &CMatrix<T>) -> CMatrix<T>
where
    T: Real,
    F: Fn(T, Side, &CMatrix<T>) -> CMatrix<T>,
{
    let half = h / lit::<T>(2.0);
    let k1 = f(t, Side::Right, y);
    let k2 = f(t + half, Side::Mid, &(y + &k1 * creal(half)));
    let k3 = f(t + half, Side::Mid, &(y + &k2 * creal(half)));
    let k4 = f(t + h, Side::Left, &(y + &k3 * creal(h)));
    let sixth = creal(h / lit::<T>(6.0));
    y + (k1 + (k2 + k3) * creal(lit::<T>(2.0)) + k4) * sixth
}

/// State transition `Φ(t, 0)` of `Φ̇ = A(t)Φ` over one period with `steps`
/// RK4 steps; returns `Φ` at every `record_every`-th step (including `t = 0`
/// and `t = T`).
pub fn transition_samples<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    steps: usize,
    record_every: usize,
) -> Vec<CMatrix<T>> {
    let n = a.rows();
    let h = a.period() / lit::<T>(steps as f64);
    let f = |t: T, side: Side, y: &CMatrix<T>| a.evaluate_side(t, side) * y;
    let mut phi = CMatrix::identity(n, n);
    let mut out = vec![phi.clone()];
    for s in 0..steps {
        let t = h * lit::<T>(s as f64);
        phi = rk4_step(&f, t, h, &phi);
        if (s + 1) % record_every == 0 {
            out.push(phi.clone());
        }
    }
    out
}

/// `Φ(T, 0)` with `steps` RK4 steps.
pub fn transition<T: Real>(a: &PeriodicMatrixFunction<T>, steps: usize) -> CMatrix<T> {
    transition_samples(a, steps, steps)
        .pop()
        .expect("at least the initial sample")
}
