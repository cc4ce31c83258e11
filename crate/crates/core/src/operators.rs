//! Truncated harmonic operators: block-Toeplitz lifts, the frequency shift
//! `𝒩 = Id_n ⊗ diag(jωk)`, the `∘` product and spectral queries.
//!
//! A harmonic vector of `n` components truncated at order `m` is laid out
//! component-major: entry `(i, k)` sits at index `i(2m+1) + (k+m)`.

use std::io::Write;

use nalgebra::{Complex, ComplexField};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{creal, lit, to_f64, CMatrix, Real};
use crate::signals::PeriodicMatrixFunction;

/// `m`-truncation of the block-Toeplitz lift of a periodic matrix function.
#[derive(Clone, Debug)]
pub struct TruncatedBlockToeplitz<T: Real> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub m: usize,
    pub period: T,
    /// Row-major `n_rows × n_cols` grid of `(2m+1)²` Toeplitz blocks.
    blocks: Vec<CMatrix<T>>,
}

impl<T: Real> TruncatedBlockToeplitz<T> {
    /// Lifts `f`; needs phasors `|k| ≤ 2m` stored (or a bandlimited `f`).
    pub fn lift(f: &PeriodicMatrixFunction<T>, m: usize) -> Result<Self> {
        let need = 2 * m;
        if f.harmonics() < need && !f.is_bandlimited() {
            return Err(Error::MissingPhasors {
                required: need,
                available: f.harmonics(),
            });
        }
        let w = 2 * m + 1;
        let phasors: Vec<CMatrix<T>> = (-(need as i64)..=need as i64)
            .map(|k| f.phasor(k))
            .collect::<Result<_>>()?;
        let (nr, nc) = f.shape();
        let mut blocks = Vec::with_capacity(nr * nc);
        for i in 0..nr {
            for j in 0..nc {
                blocks.push(CMatrix::from_fn(w, w, |r, c| phasors[r + need - c][(i, j)]));
            }
        }
        Ok(TruncatedBlockToeplitz {
            n_rows: nr,
            n_cols: nc,
            m,
            period: f.period(),
            blocks,
        })
    }

    /// Lift of a constant matrix: block `(i,j)` is `c_ij·Id_{2m+1}`.
    pub fn constant(c: &CMatrix<T>, m: usize, period: T) -> Self {
        let w = 2 * m + 1;
        let mut blocks = Vec::with_capacity(c.len());
        for i in 0..c.nrows() {
            for j in 0..c.ncols() {
                blocks.push(CMatrix::identity(w, w) * c[(i, j)]);
            }
        }
        TruncatedBlockToeplitz {
            n_rows: c.nrows(),
            n_cols: c.ncols(),
            m,
            period,
            blocks,
        }
    }

    pub fn width(&self) -> usize {
        2 * self.m + 1
    }

    pub fn block(&self, i: usize, j: usize) -> &CMatrix<T> {
        &self.blocks[i * self.n_cols + j]
    }

    /// Assembled `n_rows(2m+1) × n_cols(2m+1)` matrix.
    pub fn dense(&self) -> CMatrix<T> {
        let w = self.width();
        let mut out = CMatrix::zeros(self.n_rows * w, self.n_cols * w);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                out.view_mut((i * w, j * w), (w, w)).copy_from(self.block(i, j));
            }
        }
        out
    }

    /// Largest deviation of any block from exact Toeplitz structure.
    pub fn toeplitz_defect(&self) -> T {
        let w = self.width();
        let mut worst = T::zero();
        for b in &self.blocks {
            for r in 1..w {
                for c in 1..w {
                    worst = worst.max((b[(r, c)] - b[(r - 1, c - 1)]).modulus());
                }
            }
        }
        worst
    }
}

/// `Id_n ⊗ diag(jωk, |k| ≤ m)`.
#[derive(Clone, Copy, Debug)]
pub struct FrequencyShift<T: Real> {
    pub n: usize,
    pub m: usize,
    pub omega: T,
}

impl<T: Real> FrequencyShift<T> {
    pub fn new(n: usize, m: usize, omega: T) -> Self {
        FrequencyShift { n, m, omega }
    }

    pub fn diagonal(&self) -> Vec<Complex<T>> {
        let w = 2 * self.m + 1;
        (0..self.n * w)
            .map(|idx| {
                let k = (idx % w) as f64 - self.m as f64;
                Complex::new(T::zero(), self.omega * lit::<T>(k))
            })
            .collect()
    }

    pub fn dense(&self) -> CMatrix<T> {
        let d = self.diagonal();
        CMatrix::from_fn(d.len(), d.len(), |r, c| {
            if r == c {
                d[r]
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
    }
}

/// The `∘` product: block `(i,j)` of the result is `B ⊗ A_ij`.
pub fn circ_product<T: Real>(b: &CMatrix<T>, a: &TruncatedBlockToeplitz<T>) -> CMatrix<T> {
    let w = a.width();
    let (p, q) = b.shape();
    let mut out = CMatrix::zeros(a.n_rows * p * w, a.n_cols * q * w);
    for i in 0..a.n_rows {
        for j in 0..a.n_cols {
            let kb = linalg::kron(b, a.block(i, j));
            out.view_mut((i * p * w, j * q * w), (p * w, q * w)).copy_from(&kb);
        }
    }
    out
}

/// `𝒜_m − 𝒩_m` for the state matrix `A`.
pub fn harmonic_state_operator<T: Real>(a: &PeriodicMatrixFunction<T>, m: usize) -> Result<CMatrix<T>> {
    if a.rows() != a.cols() {
        return Err(Error::Dimension(format!("state matrix is {}x{}", a.rows(), a.cols())));
    }
    let lifted = TruncatedBlockToeplitz::lift(a, m)?.dense();
    let shift = FrequencyShift::new(a.rows(), m, a.omega()).diagonal();
    let mut out = lifted;
    for (i, s) in shift.into_iter().enumerate() {
        out[(i, i)] -= s;
    }
    Ok(out)
}

/// Eigenvalues of `mat` with `|Im λ| ≤ keep·ω/2`, sorted by imaginary then
/// real part. Truncation-edge eigenvalues fall outside the band for
/// `keep ≤ m`; values inside are approximations of the infinite spectrum.
pub fn central_spectrum<T: Real>(mat: &CMatrix<T>, m: usize, keep: usize, omega: T) -> Result<Vec<Complex<T>>> {
    if keep > 2 * m + 1 {
        return Err(Error::InvalidInput(format!(
            "keep = {keep} exceeds 2m+1 = {}",
            2 * m + 1
        )));
    }
    let band = omega * lit::<T>(keep as f64 / 2.0);
    let mut ev: Vec<Complex<T>> = linalg::eigenvalues(mat)?
        .into_iter()
        .filter(|z| z.im.abs() <= band * (T::one() + lit(1e-12)))
        .collect();
    ev.sort_by(|a, b| {
        (a.im, a.re)
            .partial_cmp(&(b.im, b.re))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(ev)
}

/// Outcome of the pointwise invertibility test of a square periodic matrix.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InvertibilityCertificate {
    pub invertible: bool,
    pub min_abs_det: f64,
    pub argmin_t: f64,
    pub threshold: f64,
    pub grid_max_abs_det: f64,
    pub grid: usize,
    /// Sign changes of `Re det f(t)` around the periodic grid.
    pub sign_changes: usize,
}

pub const DEFAULT_CERTIFICATE_GRID: usize = 1024;
pub const CERTIFICATE_RELATIVE_THRESHOLD: f64 = 1e-8;

/// Samples `|det f(t)|` on `grid` points, refines every local minimum by
/// golden-section search and compares the smallest value against
/// `γ = 1e-8·max_grid |det f|`.
pub fn invertibility_certificate<T: Real>(
    f: &PeriodicMatrixFunction<T>,
    grid: usize,
) -> Result<InvertibilityCertificate> {
    invertibility_certificate_with(|t| f.evaluate(t), f.rows(), f.cols(), f.period(), grid)
}

/// Same test for a pointwise evaluator `eval` on one period.
pub fn invertibility_certificate_with<T, F>(
    eval: F,
    rows: usize,
    cols: usize,
    period: T,
    grid: usize,
) -> Result<InvertibilityCertificate>
where
    T: Real,
    F: Fn(T) -> CMatrix<T>,
{
    if rows != cols {
        return Err(Error::Dimension(format!("determinant of a {rows}x{cols} function")));
    }
    if grid < 3 {
        return Err(Error::InvalidInput("certificate grid needs at least 3 points".into()));
    }
    let h = to_f64(period) / grid as f64;
    let det = |t: f64| linalg::determinant(&eval(lit(t)));
    let dets: Vec<Complex<T>> = (0..grid).map(|i| det(i as f64 * h)).collect();
    let mags: Vec<f64> = dets.iter().map(|d| to_f64(d.modulus())).collect();
    let grid_max = mags.iter().copied().fold(0.0, f64::max);

    let mut sign_changes = 0;
    for i in 0..grid {
        let a = to_f64(dets[i].re);
        let b = to_f64(dets[(i + 1) % grid].re);
        if (a < 0.0 && b >= 0.0) || (a >= 0.0 && b < 0.0) {
            sign_changes += 1;
        }
    }

    let (mut best, mut best_t) = (f64::INFINITY, 0.0);
    for i in 0..grid {
        let prev = mags[(i + grid - 1) % grid];
        let next = mags[(i + 1) % grid];
        if mags[i] <= prev && mags[i] <= next {
            let t_mid = i as f64 * h;
            let (t, v) = golden_min(|t| to_f64(det(t).modulus()), t_mid - h, t_mid + h);
            let (t, v) = if v < mags[i] { (t, v) } else { (t_mid, mags[i]) };
            if v < best {
                best = v;
                best_t = t.rem_euclid(to_f64(period));
            }
        }
    }
    if !best.is_finite() {
        // constant |det|: every point is a minimum of the flat profile
        best = mags[0];
    }
    let threshold = CERTIFICATE_RELATIVE_THRESHOLD * grid_max;
    Ok(InvertibilityCertificate {
        invertible: best > threshold && grid_max > 0.0,
        min_abs_det: best,
        argmin_t: best_t,
        threshold,
        grid_max_abs_det: grid_max,
        grid,
        sign_changes,
    })
}

/// Golden-section minimization of `f` on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Writes a complex matrix as CSV, one row per matrix row, `re,im` pairs.
pub fn write_matrix_csv<T: Real, W: Write>(m: &CMatrix<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (0..m.ncols())
        .flat_map(|c| [format!("re{c}"), format!("im{c}")])
        .collect();
    w.write_record(&header)?;
    for r in 0..m.nrows() {
        let rec: Vec<String> = (0..m.ncols())
            .flat_map(|c| {
                let z = m[(r, c)];
                [format!("{:e}", to_f64(z.re)), format!("{:e}", to_f64(z.im))]
            })
            .collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Kronecker-embedded constant `c ⊗ Id_{2m+1}`, the lift of a constant matrix.
pub fn constant_lift<T: Real>(c: &CMatrix<T>, m: usize) -> CMatrix<T> {
    linalg::kron(c, &CMatrix::identity(2 * m + 1, 2 * m + 1))
}

/// Helper shared by tests and callers: real scalar as a 1×1 complex matrix.
pub fn scalar_matrix<T: Real>(x: T) -> CMatrix<T> {
    CMatrix::from_element(1, 1, creal(x))
}
