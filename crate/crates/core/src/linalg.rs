//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, CMatrix, CVector, Real};

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of a general complex square matrix (complex Schur form).
pub fn eigenvalues<T: Real>(m: &CMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension(format!("eigenvalues of a {}x{} matrix", n, m.ncols())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let eps = T::default_epsilon();
    let schur = nalgebra::Schur::try_new(m.clone(), eps, SCHUR_MAX_ITER).ok_or(Error::EigenFailure(n))?;
    let (_, t) = schur.unpack();
    // For complex fields the quasi-triangular form is fully triangular.
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Eigenvalues of a real square matrix.
pub fn real_eigenvalues<T: Real>(m: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur =
        nalgebra::Schur::try_new(m.clone(), T::default_epsilon(), SCHUR_MAX_ITER).ok_or(Error::EigenFailure(n))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Unit-norm vector spanning (approximately) the null space of `m`, taken as
/// the right singular vector of the smallest singular value.
pub fn null_vector<T: Real>(m: &CMatrix<T>) -> Result<CVector<T>> {
    let n = m.ncols();
    let svd = SVD::new(m.clone(), false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Singular("SVD failed to produce right singular vectors".into()))?;
    let mut best = 0;
    for i in 1..svd.singular_values.len() {
        if svd.singular_values[i] < svd.singular_values[best] {
            best = i;
        }
    }
    // rows of v_t are conjugated right singular vectors
    Ok(CVector::from_iterator(n, v_t.row(best).iter().map(|z| z.conj())))
}

/// Singular values of a complex matrix, sorted descending.
pub fn singular_values<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    let svd = SVD::new(m.clone(), false, false);
    let mut s: Vec<T> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub fn spectral_norm<T: Real>(m: &CMatrix<T>) -> T {
    singular_values(m).first().copied().unwrap_or_else(T::zero)
}

pub fn condition_number<T: Real>(m: &CMatrix<T>) -> T {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > T::zero() => hi / lo,
        _ => T::max_value().unwrap_or_else(|| lit(f64::MAX)),
    }
}

/// Solves `m x = b` by LU with partial pivoting.
pub fn solve<T: Real>(m: &CMatrix<T>, b: &CMatrix<T>) -> Result<CMatrix<T>> {
    if m.nrows() != m.ncols() || m.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "solve with {}x{} system and {} right-hand rows",
            m.nrows(),
            m.ncols(),
            b.nrows()
        )));
    }
    m.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(format!("{}x{} LU factorization", m.nrows(), m.ncols())))
}

pub fn inverse<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("inverse of {}x{} matrix", m.nrows(), m.ncols())))
}

pub fn determinant<T: Real>(m: &CMatrix<T>) -> Complex<T> {
    match m.nrows() {
        0 => Complex::new(T::one(), T::zero()),
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.clone().lu().determinant(),
    }
}

/// Kronecker product.
pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::identity(n, n)
}

pub fn expm<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m.exp()
}

/// Smallest eigenvalue of a Hermitian matrix (input is symmetrized first).
pub fn hermitian_min_eigenvalue<T: Real>(m: &CMatrix<T>) -> T {
    let h = (m + m.adjoint()).scale(lit(0.5));
    let eig = SymmetricEigen::new(h);
    eig.eigenvalues
        .iter()
        .copied()
        .fold(T::max_value().unwrap_or_else(|| lit(f64::MAX)), |a, b| a.min(b))
}

/// Minimum-norm least-squares solution of `m x ≈ b`, plus the numerical rank.
pub fn lstsq<T: Real>(m: &CMatrix<T>, b: &CVector<T>, rtol: T) -> Result<(CVector<T>, usize)> {
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(T::zero(), |a, s| a.max(s));
    if smax == T::zero() {
        return Ok((CVector::zeros(m.ncols()), 0));
    }
    let eps = rtol * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let x = svd.solve(b, eps).map_err(|e| Error::Singular(e.to_string()))?;
    Ok((x, rank))
}

pub fn max_abs_diff<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).modulus()))
}

pub fn vec_norm<T: Real>(v: &CVector<T>) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.modulus_squared()).sqrt()
}

pub fn real_vec_norm<T: Real>(v: &DVector<T>) -> T {
    v.norm()
}

/// Relative distance used by tests and diagnostics: `|a-b| / max(|b|, floor)`.
pub fn rel_err<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>, floor: T) -> f64 {
    let num = crate::scalar::fro(&(a - b));
    let den = crate::scalar::fro(b).max(floor);
    to_f64(num / den)
}
