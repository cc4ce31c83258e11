//! JSON helpers: complex numbers travel as `{"re": .., "im": ..}` and
//! matrices as row-major nested arrays of them.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, CMatrix, Real};
use crate::signals::PeriodicMatrixFunction;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

impl ComplexJson {
    pub fn from_complex<T: Real>(z: Complex<T>) -> Self {
        ComplexJson {
            re: to_f64(z.re),
            im: to_f64(z.im),
        }
    }

    pub fn to_complex<T: Real>(self) -> Complex<T> {
        Complex::new(lit(self.re), lit(self.im))
    }
}

pub type MatrixJson = Vec<Vec<ComplexJson>>;

pub fn matrix_to_json<T: Real>(m: &CMatrix<T>) -> MatrixJson {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| ComplexJson::from_complex(m[(r, c)])).collect())
        .collect()
}

pub fn matrix_from_json<T: Real>(rows: &MatrixJson) -> Result<CMatrix<T>> {
    let nr = rows.len();
    let nc = rows.first().map(|r| r.len()).unwrap_or(0);
    if nr == 0 || nc == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(Error::InvalidInput(
            "matrix must be a non-empty rectangular array".into(),
        ));
    }
    Ok(CMatrix::from_fn(nr, nc, |r, c| rows[r][c].to_complex()))
}

/// One phasor `F_k` of a periodic matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasorJson {
    pub k: i64,
    pub value: MatrixJson,
}

/// Bandlimited periodic matrix as a phasor list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicJson {
    #[serde(rename = "T")]
    pub period: f64,
    pub phasors: Vec<PhasorJson>,
}

impl PeriodicJson {
    pub fn from_function<T: Real>(f: &PeriodicMatrixFunction<T>) -> Self {
        let kk = f.harmonics() as i64;
        PeriodicJson {
            period: to_f64(f.period()),
            phasors: f
                .phasors()
                .iter()
                .enumerate()
                .map(|(i, p)| PhasorJson {
                    k: i as i64 - kk,
                    value: matrix_to_json(p),
                })
                .collect(),
        }
    }

    pub fn to_function<T: Real>(&self) -> Result<PeriodicMatrixFunction<T>> {
        let kk = self.phasors.iter().map(|p| p.k.unsigned_abs()).max().unwrap_or(0) as i64;
        let first = self
            .phasors
            .first()
            .ok_or_else(|| Error::InvalidInput("empty phasor list".into()))?;
        let shape = matrix_from_json::<T>(&first.value)?.shape();
        let mut list = vec![CMatrix::zeros(shape.0, shape.1); (2 * kk + 1) as usize];
        for p in &self.phasors {
            let v = matrix_from_json::<T>(&p.value)?;
            if v.shape() != shape {
                return Err(Error::Dimension("phasors of differing shapes".into()));
            }
            list[(p.k + kk) as usize] = v;
        }
        PeriodicMatrixFunction::from_phasors(lit(self.period), list)
    }
}
