//! Truncated harmonic Sylvester equation
//! `(𝒜−𝒩)𝒫 − 𝒫(Λ⊗𝓘 − 𝒩) = ℬ𝒢`, i.e. per phasor
//! `Σ_l A_{k−l} P_l − jωk P_k − P_k Λ = Q_k` with `Q = phasors(BG)`,
//! equivalently the periodic differential equation `Ṗ = AP − PΛ − BG`.
//!
//! Vectorization: `P_{ij,k}` is unknown number `(j·n + i)(2m+1) + k + m`, so
//! each column of `P` forms one harmonic vector in the layout of
//! [`crate::operators`]. The system matrix is
//! `Id_q ⊗ (𝒜_m − 𝒩_m) − Id_n ∘ 𝒯_m(Λᵀ)`, where the `∘` term equals
//! `Λᵀ ⊗ Id_{n(2m+1)}`: the starred factor acts as a block transpose of `Λ`.
//! No complex conjugation enters; that would be wrong for complex `Λ`.
//! The orientation is re-verified on every solve against the matrix form.

use std::io::Write;

use nalgebra::{Complex, ComplexField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::{circ_product, harmonic_state_operator, TruncatedBlockToeplitz};
use crate::scalar::{c64, creal, fro, lit, tiny, to_f64, CMatrix, CVector, Real};
use crate::serial::{matrix_to_json, ComplexJson, MatrixJson};
use crate::signals::{min_resolution, PeriodicMatrixFunction};

/// Relative Galerkin residual above which the assembled solve is rejected.
const SELF_CHECK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub struct SylvesterOptions {
    /// Quadrature points for `phasors(BG)` when `B` or `G` is not bandlimited.
    pub quadrature: usize,
    /// Time grid for the differential residual.
    pub residual_grid: usize,
}

impl Default for SylvesterOptions {
    fn default() -> Self {
        SylvesterOptions {
            quadrature: 2048,
            residual_grid: 512,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HarmonicSylvesterSolution<T: Real> {
    pub n: usize,
    pub m: usize,
    pub lambda: CMatrix<T>,
    /// `P̃_m` as a bandlimited function with phasors `|k| ≤ m`.
    pub p: PeriodicMatrixFunction<T>,
    /// Matrix-form residual on the central window `|k|,|l| ≤ m/2`, relative
    /// to the norm of the `BG` lift there.
    pub algebraic_residual: T,
    /// Residual of the solved central column, relative (orientation guard).
    pub galerkin_residual: T,
    /// `sup_t ‖Ṗ − AP + PΛ + BG‖_F`.
    pub differential_residual: T,
}

/// Phasors `|k| ≤ harmonics` of the product `B(t)G(t)`.
pub fn forcing<T: Real>(
    b: &PeriodicMatrixFunction<T>,
    g: &PeriodicMatrixFunction<T>,
    harmonics: usize,
    quadrature: usize,
) -> Result<PeriodicMatrixFunction<T>> {
    let resolution = quadrature.max(min_resolution(harmonics));
    b.product(g, harmonics, resolution)
}

/// Solves the `m`-truncated harmonic Sylvester equation.
pub fn solve_truncated<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    g: &PeriodicMatrixFunction<T>,
    lambda: &CMatrix<T>,
    m: usize,
) -> Result<HarmonicSylvesterSolution<T>> {
    solve_truncated_with(a, b, g, lambda, m, SylvesterOptions::default())
}

pub fn solve_truncated_with<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    g: &PeriodicMatrixFunction<T>,
    lambda: &CMatrix<T>,
    m: usize,
    opts: SylvesterOptions,
) -> Result<HarmonicSylvesterSolution<T>> {
    let n = a.rows();
    let q = lambda.nrows();
    if a.cols() != n || b.rows() != n || g.rows() != b.cols() || g.cols() != q || lambda.ncols() != q {
        return Err(Error::Dimension(format!(
            "A {:?}, B {:?}, G {:?}, Lambda {:?}",
            a.shape(),
            b.shape(),
            g.shape(),
            lambda.shape()
        )));
    }
    let w = 2 * m + 1;
    let h = harmonic_state_operator(a, m)?;
    let bg = forcing(b, g, 2 * m, opts.quadrature)?;

    let lam_t = TruncatedBlockToeplitz::constant(&lambda.transpose(), m, a.period());
    let system = linalg::kron(&CMatrix::identity(q, q), &h) - circ_product(&CMatrix::identity(n, n), &lam_t);

    let dim = n * q * w;
    let mut rhs = CVector::zeros(dim);
    for j in 0..q {
        for i in 0..n {
            for (c, k) in (-(m as i64)..=m as i64).enumerate() {
                rhs[(j * n + i) * w + c] = bg.phasor(k)?[(i, j)];
            }
        }
    }

    let lu = system.clone().lu();
    let sol = lu.solve(&rhs);
    let sol = match sol {
        Some(x) if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => x,
        _ => return Err(collision(&h, lambda)),
    };
    let pivot_ratio = smallest_pivot_ratio(&lu.u());
    if pivot_ratio < lit::<T>(1e3) * T::default_epsilon() {
        return Err(collision(&h, lambda));
    }

    let mut phasors = vec![CMatrix::zeros(n, q); w];
    for j in 0..q {
        for i in 0..n {
            for (c, ph) in phasors.iter_mut().enumerate() {
                ph[(i, j)] = sol[(j * n + i) * w + c];
            }
        }
    }
    let p = PeriodicMatrixFunction::from_phasors(a.period(), phasors)?;

    let galerkin = {
        let r = &system * &sol - &rhs;
        let scale = linalg::vec_norm(&rhs).max(tiny::<T>());
        linalg::vec_norm(&r) / scale
    };
    let (algebraic, galerkin_matrix) = matrix_form_residuals(&h, &p, lambda, &bg, m)?;
    let galerkin = galerkin.max(galerkin_matrix);
    if to_f64(galerkin) > SELF_CHECK_TOL || !galerkin.is_finite() {
        return Err(Error::SelfCheck {
            residual: to_f64(galerkin),
        });
    }

    let mut out = HarmonicSylvesterSolution {
        n,
        m,
        lambda: lambda.clone(),
        p,
        algebraic_residual: algebraic,
        galerkin_residual: galerkin,
        differential_residual: T::zero(),
    };
    out.differential_residual = differential_residual(&out, a, b, g, opts.residual_grid);
    Ok(out)
}

fn smallest_pivot_ratio<T: Real>(u: &CMatrix<T>) -> T {
    let d: Vec<T> = (0..u.nrows().min(u.ncols())).map(|i| u[(i, i)].modulus()).collect();
    let hi = d.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let lo = d.iter().copied().fold(hi, |a, b| a.min(b));
    if hi == T::zero() {
        T::zero()
    } else {
        lo / hi
    }
}

/// Nearest pair between `σ(Λ)` and the truncated harmonic spectrum.
fn collision<T: Real>(h: &CMatrix<T>, lambda: &CMatrix<T>) -> Error {
    let hs = linalg::eigenvalues(h).unwrap_or_default();
    let ls = linalg::eigenvalues(lambda).unwrap_or_default();
    let mut best = (f64::INFINITY, Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
    for l in &ls {
        for s in &hs {
            let d = to_f64((*l - *s).modulus());
            if d < best.0 {
                best = (d, c64(*l), c64(*s));
            }
        }
    }
    Error::SpectralCollision {
        lambda: best.1,
        harmonic: best.2,
        distance: best.0,
    }
}

/// Residuals of the matrix form `(𝒜_m−𝒩_m)𝒫_m − 𝒫_m(Λ⊗𝓘_m − 𝒩_m) − (ℬ𝒢)_m`:
/// on the central window `|r|,|c| ≤ m/2` and on the central column `c = 0`
/// (the equations actually solved), both relative to the forcing lift.
fn matrix_form_residuals<T: Real>(
    h: &CMatrix<T>,
    p: &PeriodicMatrixFunction<T>,
    lambda: &CMatrix<T>,
    bg: &PeriodicMatrixFunction<T>,
    m: usize,
) -> Result<(T, T)> {
    let period = p.period();
    let (n, q) = p.shape();
    let w = 2 * m + 1;
    let pl = TruncatedBlockToeplitz::lift(p, m)?.dense();
    let mut lam_minus_n = TruncatedBlockToeplitz::constant(lambda, m, period).dense();
    let omega = p.omega();
    for idx in 0..q * w {
        let k = (idx % w) as f64 - m as f64;
        lam_minus_n[(idx, idx)] -= Complex::new(T::zero(), omega * lit::<T>(k));
    }
    let forcing = TruncatedBlockToeplitz::lift(bg, m)?.dense();
    let resid = h * &pl - &pl * &lam_minus_n - &forcing;

    let half = m / 2;
    let central = |blocks: usize| -> Vec<usize> {
        (0..blocks)
            .flat_map(|b| (m - half..=m + half).map(move |c| b * w + c))
            .collect()
    };
    let rows = central(n);
    let cols = central(q);
    let window =
        |mat: &CMatrix<T>, cols: &[usize]| CMatrix::from_fn(rows.len(), cols.len(), |r, c| mat[(rows[r], cols[c])]);
    let floor = tiny::<T>();
    let algebraic = fro(&window(&resid, &cols)) / fro(&window(&forcing, &cols)).max(floor);

    let all_rows: Vec<usize> = (0..n * w).collect();
    let center_cols: Vec<usize> = (0..q).map(|b| b * w + m).collect();
    let col_view = |mat: &CMatrix<T>| {
        CMatrix::from_fn(all_rows.len(), center_cols.len(), |r, c| {
            mat[(all_rows[r], center_cols[c])]
        })
    };
    let scale = fro(&col_view(&forcing)).max(fro(&col_view(&(h * &pl))));
    let galerkin = fro(&col_view(&resid)) / scale.max(floor);
    Ok((algebraic, galerkin))
}

/// `sup_t ‖Ṗ(t) − A(t)P(t) + P(t)Λ + B(t)G(t)‖_F` on `grid` uniform points,
/// with `Ṗ` differentiated exactly from the phasors.
pub fn differential_residual<T: Real>(
    sol: &HarmonicSylvesterSolution<T>,
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    g: &PeriodicMatrixFunction<T>,
    grid: usize,
) -> T {
    let period = sol.p.period();
    (0..grid)
        .map(|i| {
            let t = period * lit::<T>(i as f64) / lit::<T>(grid as f64);
            let p = sol.p.synthesize(t);
            let r = sol.p.derivative(t) - a.evaluate(t) * &p + &p * &sol.lambda + b.evaluate(t) * g.evaluate(t);
            fro(&r)
        })
        .fold(T::zero(), |acc, x| acc.max(x))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub m: usize,
    /// `‖col(P̃_m − P̃_{m_max})‖_{ℓ²}` with zero-extended phasors.
    pub delta_to_finest: f64,
    pub algebraic_residual: f64,
    pub differential_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `delta_to_finest` strictly decreases along the sweep.
    pub monotone: bool,
}

/// Solves at every order in `m_list` (in parallel) and compares each solution
/// with the one at the largest order.
pub fn convergence_sweep<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    g: &PeriodicMatrixFunction<T>,
    lambda: &CMatrix<T>,
    m_list: &[usize],
) -> Result<(SweepReport, Vec<HarmonicSylvesterSolution<T>>)> {
    if m_list.is_empty() || m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "m list must be non-empty and strictly ascending".into(),
        ));
    }
    let sols: Vec<HarmonicSylvesterSolution<T>> = m_list
        .par_iter()
        .map(|&m| solve_truncated(a, b, g, lambda, m))
        .collect::<Result<_>>()?;
    let finest = sols.last().expect("non-empty");
    let rows: Vec<SweepRow> = sols
        .iter()
        .map(|s| SweepRow {
            m: s.m,
            delta_to_finest: to_f64(phasor_distance(&s.p, &finest.p)),
            algebraic_residual: to_f64(s.algebraic_residual),
            differential_residual: to_f64(s.differential_residual),
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].delta_to_finest < w[0].delta_to_finest);
    Ok((SweepReport { rows, monotone }, sols))
}

/// `ℓ²` distance between two bandlimited phasor sets (zero-extended).
pub fn phasor_distance<T: Real>(x: &PeriodicMatrixFunction<T>, y: &PeriodicMatrixFunction<T>) -> T {
    let kk = x.harmonics().max(y.harmonics()) as i64;
    let zero = CMatrix::zeros(x.rows(), x.cols());
    let mut acc = T::zero();
    for k in -kk..=kk {
        let px = x.phasor(k).unwrap_or_else(|_| zero.clone());
        let py = y.phasor(k).unwrap_or_else(|_| zero.clone());
        let f = fro(&(px - py));
        acc += f * f;
    }
    acc.sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SylvesterJson {
    #[serde(rename = "T")]
    pub period: f64,
    pub m: usize,
    #[serde(rename = "Lambda")]
    pub lambda: MatrixJson,
    pub phasors: Vec<crate::serial::PhasorJson>,
    pub algebraic_residual: f64,
    pub galerkin_residual: f64,
    pub differential_residual: f64,
}

impl<T: Real> HarmonicSylvesterSolution<T> {
    pub fn to_json(&self) -> SylvesterJson {
        let pj = crate::serial::PeriodicJson::from_function(&self.p);
        SylvesterJson {
            period: pj.period,
            m: self.m,
            lambda: matrix_to_json(&self.lambda),
            phasors: pj.phasors,
            algebraic_residual: to_f64(self.algebraic_residual),
            galerkin_residual: to_f64(self.galerkin_residual),
            differential_residual: to_f64(self.differential_residual),
        }
    }

    /// CSV table `k, |P_11,k|, |P_12,k|, ...` (row-major entries).
    pub fn write_magnitudes_csv<W: Write>(&self, out: W) -> Result<()> {
        write_phasor_magnitudes(&self.p, out)
    }
}

/// CSV table of entrywise phasor magnitudes of a periodic matrix.
pub fn write_phasor_magnitudes<T: Real, W: Write>(f: &PeriodicMatrixFunction<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let (r, c) = f.shape();
    let mut header = vec!["k".to_string()];
    for i in 0..r {
        for j in 0..c {
            header.push(format!("abs_{}{}", i + 1, j + 1));
        }
    }
    w.write_record(&header)?;
    let kk = f.harmonics() as i64;
    for (idx, p) in f.phasors().iter().enumerate() {
        let mut rec = vec![(idx as i64 - kk).to_string()];
        for i in 0..r {
            for j in 0..c {
                rec.push(format!("{:e}", to_f64(p[(i, j)].modulus())));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Classical Sylvester solve `A X − X Λ = C` via `(Id⊗A − Λᵀ⊗Id) vec X = vec C`.
pub fn classical_sylvester<T: Real>(a: &CMatrix<T>, lambda: &CMatrix<T>, c: &CMatrix<T>) -> Result<CMatrix<T>> {
    let (n, q) = c.shape();
    let sys = linalg::kron(&CMatrix::identity(q, q), a) - linalg::kron(&lambda.transpose(), &CMatrix::identity(n, n));
    let rhs = CMatrix::from_column_slice(n * q, 1, c.as_slice());
    let x = linalg::solve(&sys, &rhs)?;
    Ok(CMatrix::from_column_slice(n, q, x.as_slice()))
}

/// Convenience for JSON output of a complex scalar list.
pub fn complex_list<T: Real>(v: &[Complex<T>]) -> Vec<ComplexJson> {
    v.iter().map(|z| ComplexJson::from_complex(*z)).collect()
}

/// Real scalar as the `1×1` complex matrix used by scalar examples.
pub fn scalar<T: Real>(x: T) -> CMatrix<T> {
    CMatrix::from_element(1, 1, creal(x))
}
