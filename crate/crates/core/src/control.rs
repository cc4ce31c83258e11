//! Periodic pole placement `K(t) = G(t) P(t)⁻¹` from the truncated harmonic
//! Sylvester solution, invertibility certificates, harmonic equilibria and
//! truncated-Gramian heuristics.

use std::io::Write;

use nalgebra::{Complex, ComplexField};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{factorize_with, FloquetFactorization, FloquetOptions};
use crate::linalg;
use crate::operators::{
    central_spectrum, harmonic_state_operator, invertibility_certificate_with, InvertibilityCertificate,
    TruncatedBlockToeplitz, DEFAULT_CERTIFICATE_GRID,
};
use crate::scalar::{c64, creal, fro, lit, max_abs, max_imag, to_f64, CMatrix, CVector, Real};
use crate::serial::{matrix_to_json, ComplexJson, MatrixJson, PeriodicJson};
use crate::signals::{min_resolution, PeriodicMatrixFunction};
use crate::sylvester::{solve_truncated_with, HarmonicSylvesterSolution, SylvesterOptions};

/// `Λ` eigenvalues closer than this to some `λ_p + jωk` count as colliding.
const DISJOINT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct DesignOptions {
    pub sylvester: SylvesterOptions,
    /// Grid for the invertibility certificate.
    pub certificate_grid: usize,
    /// Samples per period on which `K = G P⁻¹` is formed and re-phasorized.
    pub gain_grid: usize,
    pub floquet: FloquetOptions,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            sylvester: SylvesterOptions::default(),
            certificate_grid: DEFAULT_CERTIFICATE_GRID,
            gain_grid: 1000,
            floquet: FloquetOptions::default(),
        }
    }
}

/// How `K(t)` is evaluated between grid points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GainPath {
    /// `G(t) P(t)⁻¹` by pointwise LU.
    #[default]
    Pointwise,
    /// Synthesis of the re-phasorized `K` truncated at order `m`.
    Phasors,
}

#[derive(Clone, Debug)]
pub struct GainSchedule<T: Real> {
    pub period: T,
    pub m: usize,
    pub lambda: CMatrix<T>,
    pub g: PeriodicMatrixFunction<T>,
    pub p: PeriodicMatrixFunction<T>,
    /// `K` re-phasorized from the pointwise product, harmonics `2m`.
    pub k: PeriodicMatrixFunction<T>,
    /// `K` truncated at order `m`.
    pub k_m: PeriodicMatrixFunction<T>,
    pub certificate: InvertibilityCertificate,
    pub sylvester: HarmonicSylvesterSolution<T>,
    /// Largest `|Im K(t)|` on the gain grid.
    pub imag_residue: T,
}

impl<T: Real> GainSchedule<T> {
    /// `P(t)⁻¹`.
    pub fn p_inverse(&self, t: T) -> Result<CMatrix<T>> {
        linalg::inverse(&self.p.synthesize(t))
    }

    /// `K(t)` along the chosen path.
    pub fn gain(&self, t: T, path: GainPath) -> Result<CMatrix<T>> {
        match path {
            GainPath::Pointwise => Ok(self.g.evaluate(t) * self.p_inverse(t)?),
            GainPath::Phasors => Ok(self.k_m.synthesize(t)),
        }
    }

    /// `K` is real to within `1e-8` relative.
    pub fn is_real(&self) -> bool {
        to_f64(self.imag_residue) <= 1e-8 * (1.0 + to_f64(self.k_max()))
    }

    fn k_max(&self) -> T {
        self.k.phasor_magnitudes().into_iter().fold(T::zero(), |a, b| a.max(b))
    }

    /// Largest `‖P⁻¹(A − BK)P − P⁻¹Ṗ − Λ‖_F` on `grid` points.
    pub fn similarity_defect(
        &self,
        a: &PeriodicMatrixFunction<T>,
        b: &PeriodicMatrixFunction<T>,
        grid: usize,
    ) -> Result<T> {
        let mut worst = T::zero();
        for i in 0..grid {
            let t = self.period * lit::<T>(i as f64) / lit::<T>(grid as f64);
            let p = self.p.synthesize(t);
            let pinv = linalg::inverse(&p)?;
            let k = self.g.evaluate(t) * &pinv;
            let closed = a.evaluate(t) - b.evaluate(t) * k;
            let lhs = &pinv * closed * &p - &pinv * self.p.derivative(t);
            worst = worst.max(fro(&(lhs - &self.lambda)));
        }
        Ok(worst)
    }

    pub fn to_json(&self) -> GainJson {
        GainJson {
            period: to_f64(self.period),
            m: self.m,
            lambda: matrix_to_json(&self.lambda),
            k_phasors: PeriodicJson::from_function(&self.k),
            p_phasors: PeriodicJson::from_function(&self.p),
            g_phasors: PeriodicJson::from_function(&self.g),
            certificate: self.certificate.clone(),
            imag_residue: to_f64(self.imag_residue),
        }
    }

    /// Rebuilds a schedule from its JSON form; `P` and `G` are taken as the
    /// bandlimited functions of their stored phasors.
    pub fn from_json(j: &GainJson) -> Result<Self> {
        let p: PeriodicMatrixFunction<T> = j.p_phasors.to_function()?;
        let g: PeriodicMatrixFunction<T> = j.g_phasors.to_function()?;
        let k: PeriodicMatrixFunction<T> = j.k_phasors.to_function()?;
        let lambda = crate::serial::matrix_from_json(&j.lambda)?;
        let sylvester = HarmonicSylvesterSolution {
            n: p.rows(),
            m: j.m,
            lambda: lambda.clone(),
            p: p.clone(),
            algebraic_residual: T::zero(),
            galerkin_residual: T::zero(),
            differential_residual: T::zero(),
        };
        let k_m = k.materialize(j.m)?;
        Ok(GainSchedule {
            period: lit(j.period),
            m: j.m,
            lambda,
            g,
            p,
            k,
            k_m,
            certificate: j.certificate.clone(),
            sylvester,
            imag_residue: lit(j.imag_residue),
        })
    }

    /// Dense samples `t, re_K11, im_K11, ...` over one period.
    pub fn write_k_csv<W: Write>(&self, samples: usize, path: GainPath, out: W) -> Result<()> {
        let rows = (0..=samples)
            .map(|i| {
                let t = self.period * lit::<T>(i as f64) / lit::<T>(samples as f64);
                self.gain(t, path).map(|k| (t, k))
            })
            .collect::<Result<Vec<_>>>()?;
        crate::floquet::write_matrix_trace(rows.into_iter(), "K", out)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GainJson {
    #[serde(rename = "T")]
    pub period: f64,
    pub m: usize,
    #[serde(rename = "Lambda")]
    pub lambda: MatrixJson,
    #[serde(rename = "K_phasors")]
    pub k_phasors: PeriodicJson,
    #[serde(rename = "P_phasors")]
    pub p_phasors: PeriodicJson,
    #[serde(rename = "G_phasors")]
    pub g_phasors: PeriodicJson,
    pub certificate: InvertibilityCertificate,
    pub imag_residue: f64,
}

/// Outcome of a direct design: the Sylvester solution and its certificate,
/// plus the gain when `P` is invertible.
#[derive(Clone, Debug)]
pub struct DirectDesign<T: Real> {
    pub solution: HarmonicSylvesterSolution<T>,
    pub certificate: InvertibilityCertificate,
    pub gain: Option<GainSchedule<T>>,
}

/// Solves for `P` with the supplied `G` and `Λ`, certifies `P(t)` and forms
/// `K = G P⁻¹` when the certificate passes.
pub fn design_direct_report<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    g: &PeriodicMatrixFunction<T>,
    lambda: &CMatrix<T>,
    m: usize,
    opts: DesignOptions,
) -> Result<DirectDesign<T>> {
    let solution = solve_truncated_with(a, b, g, lambda, m, opts.sylvester)?;
    let p = solution.p.clone();
    let certificate = invertibility_certificate_with(
        |t| p.synthesize(t),
        p.rows(),
        p.cols(),
        p.period(),
        opts.certificate_grid,
    )?;
    let gain = if certificate.invertible {
        Some(build_gain(g, &solution, certificate.clone(), opts)?)
    } else {
        None
    };
    Ok(DirectDesign {
        solution,
        certificate,
        gain,
    })
}

/// Direct design; a failed certificate is an error carrying it.
pub fn design_direct<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    g: &PeriodicMatrixFunction<T>,
    lambda: &CMatrix<T>,
    m: usize,
) -> Result<GainSchedule<T>> {
    let d = design_direct_report(a, b, g, lambda, m, DesignOptions::default())?;
    d.gain.ok_or_else(|| Error::NotInvertible(Box::new(d.certificate)))
}

fn build_gain<T: Real>(
    g: &PeriodicMatrixFunction<T>,
    sol: &HarmonicSylvesterSolution<T>,
    certificate: InvertibilityCertificate,
    opts: DesignOptions,
) -> Result<GainSchedule<T>> {
    let m = sol.m;
    let period = sol.p.period();
    let grid = opts.gain_grid.max(min_resolution(2 * m));
    let mut samples = Vec::with_capacity(grid);
    let mut imag = T::zero();
    for i in 0..grid {
        let t = period * lit::<T>(i as f64) / lit::<T>(grid as f64);
        let k = g.evaluate(t) * linalg::inverse(&sol.p.synthesize(t))?;
        imag = imag.max(max_imag(&k));
        samples.push(k);
    }
    let k = PeriodicMatrixFunction::from_samples(period, &samples, 2 * m)?;
    let k_m = k.materialize(m)?;
    Ok(GainSchedule {
        period,
        m,
        lambda: sol.lambda.clone(),
        g: g.clone(),
        p: sol.p.clone(),
        k,
        k_m,
        certificate,
        sylvester: sol.clone(),
        imag_residue: imag,
    })
}

/// `G(t) = B(t)* (V(t)*)⁻¹` on the Floquet grid, re-phasorized with `2m` harmonics.
pub fn sufficient_g<T: Real>(
    b: &PeriodicMatrixFunction<T>,
    floquet: &FloquetFactorization<T>,
    m: usize,
) -> Result<PeriodicMatrixFunction<T>> {
    let s = floquet.v_samples.len() - 1;
    let samples = (0..s)
        .map(|i| {
            let t = floquet.sample_time(i);
            let vh_inv = linalg::inverse(&floquet.v_samples[i].adjoint())?;
            Ok(b.evaluate(t).adjoint() * vh_inv)
        })
        .collect::<Result<Vec<_>>>()?;
    PeriodicMatrixFunction::from_samples(floquet.period, &samples, 2 * m)
}

/// `Λ = −J* − α·Id`.
pub fn sufficient_lambda<T: Real>(floquet: &FloquetFactorization<T>, alpha: T) -> CMatrix<T> {
    let n = floquet.exponents.len();
    -floquet.j().adjoint() - CMatrix::identity(n, n) * creal(alpha)
}

/// Nearest pair `(λ ∈ σ(Λ), λ_p + jωk)` and its distance.
pub fn spectral_gap<T: Real>(
    lambda: &CMatrix<T>,
    exponents: &[Complex<T>],
    omega: T,
) -> Result<(Complex<T>, Complex<T>, T)> {
    let ls = linalg::eigenvalues(lambda)?;
    let mut best: Option<(Complex<T>, Complex<T>, T)> = None;
    for l in &ls {
        for p in exponents {
            let k = ((l.im - p.im) / omega).round();
            let shifted = *p + Complex::new(T::zero(), omega * k);
            let d = (*l - shifted).modulus();
            if best.map_or(true, |b| d < b.2) {
                best = Some((*l, shifted, d));
            }
        }
    }
    best.ok_or_else(|| Error::InvalidInput("empty spectrum".into()))
}

/// Fails with the offending pair when `σ(Λ)` meets `{λ_p + jωk}`.
pub fn check_disjoint<T: Real>(lambda: &CMatrix<T>, exponents: &[Complex<T>], omega: T) -> Result<()> {
    let (l, h, d) = spectral_gap(lambda, exponents, omega)?;
    if to_f64(d) < DISJOINT_TOL {
        return Err(Error::SpectralCollision {
            lambda: c64(l),
            harmonic: c64(h),
            distance: to_f64(d),
        });
    }
    Ok(())
}

/// Design with `G = B*V*⁻¹` and `Λ = −J* − αId`; `P` is then invertible for
/// the exact operators, so a failing certificate means `m` is too small.
pub fn design_sufficient<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    alpha: T,
    m: usize,
) -> Result<GainSchedule<T>> {
    let opts = DesignOptions::default();
    let fl = factorize_with(a, opts.floquet)?;
    design_sufficient_with(a, b, &fl, alpha, m, opts)
}

pub fn design_sufficient_with<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    floquet: &FloquetFactorization<T>,
    alpha: T,
    m: usize,
    opts: DesignOptions,
) -> Result<GainSchedule<T>> {
    let lambda = sufficient_lambda(floquet, alpha);
    check_disjoint(&lambda, &floquet.exponents, floquet.omega())?;
    let g = sufficient_g(b, floquet, m)?;
    let d = design_direct_report(a, b, &g, &lambda, m, opts)?;
    d.gain.ok_or_else(|| Error::NotInvertible(Box::new(d.certificate)))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PoleReport {
    pub central: Vec<ComplexJson>,
    /// Largest distance from a central eigenvalue to `σ(Λ) + jωk`.
    pub max_deviation: f64,
    /// Largest distance from an in-band `σ(Λ) + jωk` to the nearest eigenvalue.
    pub max_miss: f64,
    pub band: f64,
}

/// Central eigenvalues (`|Im| ≤ keep·ω/2`) of `𝒜_m − 𝒩_m − ℬ_m𝒦_m` against
/// the assigned `σ(Λ) + jωk`.
pub fn closed_loop_pole_check<T: Real>(
    gain: &GainSchedule<T>,
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    m: usize,
    keep: usize,
) -> Result<PoleReport> {
    let h = harmonic_state_operator(a, m)?;
    let bl = TruncatedBlockToeplitz::lift(b, m)?.dense();
    let kl = TruncatedBlockToeplitz::lift(&gain.k, m)?.dense();
    let closed = h - bl * kl;
    let omega = a.omega();
    let central = central_spectrum(&closed, m, keep, omega)?;
    let targets = linalg::eigenvalues(&gain.lambda)?;
    let band = omega * lit::<T>(keep as f64 / 2.0);
    let kmax = (to_f64(band / omega).ceil() as i64) + 1;
    let shifted: Vec<Complex<T>> = targets
        .iter()
        .flat_map(|l| (-kmax..=kmax).map(move |k| *l + Complex::new(T::zero(), omega * lit::<T>(k as f64))))
        .collect();
    let dist = |z: &Complex<T>, set: &[Complex<T>]| {
        set.iter()
            .map(|s| to_f64((*z - *s).modulus()))
            .fold(f64::INFINITY, f64::min)
    };
    let max_deviation = central.iter().map(|z| dist(z, &shifted)).fold(0.0, f64::max);
    let in_band: Vec<Complex<T>> = shifted.iter().copied().filter(|s| s.im.abs() <= band).collect();
    let max_miss = in_band.iter().map(|s| dist(s, &central)).fold(0.0, f64::max);
    Ok(PoleReport {
        central: central.iter().map(|z| ComplexJson::from_complex(*z)).collect(),
        max_deviation,
        max_miss,
        band: to_f64(band),
    })
}

/// Truncated periodic steady state `0 = (𝒜_m−𝒩_m)X + ℬ_m U`.
#[derive(Clone, Debug)]
pub struct HarmonicEquilibrium<T: Real> {
    pub m: usize,
    /// Layout `i(2m+1) + k + m`.
    pub x_phasors: CVector<T>,
    pub u_phasors: CVector<T>,
    pub x_ref: PeriodicMatrixFunction<T>,
    pub u_ref: PeriodicMatrixFunction<T>,
    pub residual: T,
    pub min_singular_value: T,
    /// Least-squares equilibria only: `‖X_d − X_ref‖`.
    pub distance: Option<T>,
    /// Least-squares equilibria only: `U_ref` is a minimum-norm choice.
    pub rank_deficient: bool,
}

/// Stacks phasors `|k| ≤ m` of a column-vector function into `i(2m+1)+k+m` order.
pub fn phasor_vector<T: Real>(f: &PeriodicMatrixFunction<T>, m: usize) -> Result<CVector<T>> {
    if f.cols() != 1 {
        return Err(Error::Dimension(format!(
            "expected a column function, got {:?}",
            f.shape()
        )));
    }
    let w = 2 * m + 1;
    let mut v = CVector::zeros(f.rows() * w);
    for (c, k) in (-(m as i64)..=m as i64).enumerate() {
        let p = f.phasor(k)?;
        for i in 0..f.rows() {
            v[i * w + c] = p[(i, 0)];
        }
    }
    Ok(v)
}

/// Inverse of [`phasor_vector`]: a bandlimited column function.
pub fn vector_function<T: Real>(v: &CVector<T>, m: usize, period: T) -> Result<PeriodicMatrixFunction<T>> {
    let w = 2 * m + 1;
    if v.len() % w != 0 {
        return Err(Error::Dimension(format!("length {} is not a multiple of {w}", v.len())));
    }
    let n = v.len() / w;
    let phasors = (0..w).map(|c| CMatrix::from_fn(n, 1, |i, _| v[i * w + c])).collect();
    PeriodicMatrixFunction::from_phasors(period, phasors)
}

fn equilibrium_operators<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    m: usize,
) -> Result<(CMatrix<T>, CMatrix<T>, T)> {
    let h = harmonic_state_operator(a, m)?;
    let bl = TruncatedBlockToeplitz::lift(b, m)?.dense();
    let s = linalg::singular_values(&h);
    let smin = s.last().copied().unwrap_or_else(T::zero);
    let smax = s.first().copied().unwrap_or_else(T::zero);
    if smin <= lit::<T>(1e-10) * smax {
        return Err(Error::Singular(format!(
            "harmonic state operator is resonant (smallest singular value {:e})",
            to_f64(smin)
        )));
    }
    Ok((h, bl, smin))
}

/// Solves `(𝒜_m−𝒩_m) X = −ℬ_m U` for the given input phasors.
pub fn harmonic_equilibrium<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    u_ref: &PeriodicMatrixFunction<T>,
    m: usize,
) -> Result<HarmonicEquilibrium<T>> {
    let (h, bl, smin) = equilibrium_operators(a, b, m)?;
    let u = phasor_vector(u_ref, m)?;
    let rhs = -(&bl * &u);
    let x = linalg::solve(&h, &CMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))?;
    let x = CVector::from_column_slice(x.as_slice());
    finish_equilibrium(&h, &bl, x, u, m, a.period(), smin, None, false)
}

#[allow(clippy::too_many_arguments)]
fn finish_equilibrium<T: Real>(
    h: &CMatrix<T>,
    bl: &CMatrix<T>,
    x: CVector<T>,
    u: CVector<T>,
    m: usize,
    period: T,
    smin: T,
    distance: Option<T>,
    rank_deficient: bool,
) -> Result<HarmonicEquilibrium<T>> {
    let residual = linalg::vec_norm(&(h * &x + bl * &u));
    Ok(HarmonicEquilibrium {
        m,
        x_ref: vector_function(&x, m, period)?,
        u_ref: vector_function(&u, m, period)?,
        x_phasors: x,
        u_phasors: u,
        residual,
        min_singular_value: smin,
        distance,
        rank_deficient,
    })
}

/// Equilibrium closest to the desired phasors `X_d` in `ℓ²`:
/// `min_U ‖X_d + (𝒜_m−𝒩_m)⁻¹ℬ_m U‖`.
pub fn nearest_equilibrium<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    x_desired: &PeriodicMatrixFunction<T>,
    m: usize,
) -> Result<HarmonicEquilibrium<T>> {
    let (h, bl, smin) = equilibrium_operators(a, b, m)?;
    let xd = phasor_vector(x_desired, m)?;
    let map = -linalg::solve(&h, &bl)?;
    let (u, rank) = linalg::lstsq(&map, &xd, lit(1e-12))?;
    let x = &map * &u;
    let distance = linalg::vec_norm(&(&xd - &x));
    let deficient = rank < map.ncols();
    finish_equilibrium(&h, &bl, x, u, m, a.period(), smin, Some(distance), deficient)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GramianReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `min/max ≥ 1e-8`; a heuristic indicator only.
    pub passes: bool,
}

const GRAMIAN_NODES: usize = 512;
const GRAMIAN_RATIO: f64 = 1e-8;

/// `∫₀^h e^{Fτ} C C* e^{F*τ} dτ` by composite Simpson on `GRAMIAN_NODES` intervals.
fn gramian<T: Real>(f: &CMatrix<T>, c: &CMatrix<T>, horizon: T) -> GramianReport {
    let nodes = GRAMIAN_NODES;
    let dt = horizon / lit::<T>(nodes as f64);
    let step = linalg::expm(&(f * creal(dt)));
    let cc = c * c.adjoint();
    let mut e = CMatrix::identity(f.nrows(), f.ncols());
    let mut acc = CMatrix::zeros(f.nrows(), f.ncols());
    for i in 0..=nodes {
        let w = if i == 0 || i == nodes {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += (&e * &cc * e.adjoint()) * creal(lit::<T>(w));
        e = &step * e;
    }
    let gram = acc * creal(dt / lit::<T>(3.0));
    let herm = (&gram + gram.adjoint()) * creal(lit::<T>(0.5));
    let eig = nalgebra::SymmetricEigen::new(herm);
    let lo = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, |a, x| a.min(to_f64(x)));
    let hi = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, |a, x| a.max(to_f64(x)));
    GramianReport {
        min_eigenvalue: lo,
        max_eigenvalue: hi,
        passes: hi > 0.0 && lo >= GRAMIAN_RATIO * hi,
    }
}

/// Truncated controllability Gramian of `(𝒜_m−𝒩_m, ℬ_m)` over `[0, horizon]`.
/// A positive smallest eigenvalue hints at, but does not prove, exact
/// controllability of the infinite-dimensional model.
pub fn controllability_heuristic<T: Real>(
    a: &PeriodicMatrixFunction<T>,
    b: &PeriodicMatrixFunction<T>,
    m: usize,
    horizon: T,
) -> Result<GramianReport> {
    let h = harmonic_state_operator(a, m)?;
    let bl = TruncatedBlockToeplitz::lift(b, m)?.dense();
    Ok(gramian(&h, &bl, horizon))
}

/// Truncated observability Gramian of the pair `(G, Λ)`, i.e. of
/// `(Λ⊗𝓘_m − 𝒩_m, 𝒢_m)`, over `[0, horizon]`.
pub fn observability_heuristic<T: Real>(
    g: &PeriodicMatrixFunction<T>,
    lambda: &CMatrix<T>,
    m: usize,
    horizon: T,
) -> Result<GramianReport> {
    let q = lambda.nrows();
    if g.cols() != q {
        return Err(Error::Dimension(format!(
            "G has {} columns, Lambda is {q}x{q}",
            g.cols()
        )));
    }
    let mut l = TruncatedBlockToeplitz::constant(lambda, m, g.period()).dense();
    let w = 2 * m + 1;
    for idx in 0..q * w {
        let k = (idx % w) as f64 - m as f64;
        l[(idx, idx)] -= Complex::new(T::zero(), g.omega() * lit::<T>(k));
    }
    let gl = TruncatedBlockToeplitz::lift(g, m)?.dense();
    // observability of (L, 𝒢) is controllability of (L*, 𝒢*)
    Ok(gramian(&l.adjoint(), &gl.adjoint(), horizon))
}

/// Largest `|x|` of a matrix; re-exported for reports.
pub fn max_entry<T: Real>(m: &CMatrix<T>) -> T {
    max_abs(m)
}
