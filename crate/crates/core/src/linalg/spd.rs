use serde::{Deserialize, Serialize};

use super::decomp::{spd_sqrt, sym_eig, SYM_TOL};
use super::matrix::RealMatrix;
use crate::error::{Error, Result};

/// A symmetric positive definite matrix.
///
/// Construction checks symmetry (relative tolerance 1e-12) and positivity of
/// every eigenvalue, then stores the exactly symmetrised matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RealMatrix", into = "RealMatrix")]
pub struct SpdMatrix(RealMatrix);

impl TryFrom<RealMatrix> for SpdMatrix {
    type Error = Error;
    fn try_from(m: RealMatrix) -> Result<Self> {
        SpdMatrix::new(m)
    }
}

impl From<SpdMatrix> for RealMatrix {
    fn from(s: SpdMatrix) -> Self {
        s.0
    }
}

impl SpdMatrix {
    pub fn new(m: RealMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        let asym = m.asymmetry();
        if asym > SYM_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        let sym = m.symmetrize();
        let eig = sym_eig(&sym)?;
        let smallest = *eig.values.last().expect("nonempty");
        if smallest.is_nan() || smallest <= 0.0 {
            return Err(Error::NotSpd(smallest));
        }
        Ok(Self(sym))
    }

    /// Wraps a matrix known to be SPD by construction; it is symmetrised.
    pub(crate) fn new_unchecked(m: RealMatrix) -> Self {
        Self(m.symmetrize())
    }

    /// `c * I_m`.
    pub fn scalar(m: usize, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::NotSpd(c));
        }
        Ok(Self(RealMatrix::identity(m).scale(c)))
    }

    /// Builds from the upper triangle listed row by row:
    /// `a11, a12, ..., a1m, a22, ..., amm`.
    pub fn from_upper(m: usize, upper: &[f64]) -> Result<Self> {
        let want = m * (m + 1) / 2;
        if upper.len() != want {
            return Err(Error::InvalidData(format!(
                "an {m}x{m} symmetric matrix needs {want} upper-triangle entries, got {}",
                upper.len()
            )));
        }
        let mut a = RealMatrix::zeros(m, m);
        let mut it = upper.iter();
        for i in 0..m {
            for j in i..m {
                let v = *it.next().expect("length checked");
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        Self::new(RealMatrix::new(m, m, a.as_slice().to_vec())?)
    }

    /// Upper triangle in row order, the inverse of [`SpdMatrix::from_upper`].
    pub fn upper(&self) -> Vec<f64> {
        let m = self.dim();
        let mut out = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in i..m {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> RealMatrix {
        self.0
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sym_eig(&self.0).expect("symmetric").values
    }

    pub fn inverse(&self) -> SpdMatrix {
        let eig = sym_eig(&self.0).expect("symmetric");
        Self(eig.reconstruct_with(|x| 1.0 / x))
    }

    pub fn sqrt(&self) -> SpdMatrix {
        spd_sqrt(self)
    }

    /// `ln |A|` from the Cholesky factor.
    pub fn log_det(&self) -> f64 {
        match self.0.cholesky() {
            Ok(l) => (0..self.dim()).map(|i| 2.0 * l[(i, i)].ln()).sum(),
            // cholesky can fail right at the edge of positivity; eigenvalues are authoritative
            Err(_) => self.eigenvalues().iter().map(|x| x.ln()).sum(),
        }
    }

    /// `C' A C` for any square `C` of matching size (SPD when `C` is invertible).
    pub fn congruence(&self, c: &RealMatrix) -> Result<SpdMatrix> {
        Self::new((&(&c.transpose() * &self.0) * c).symmetrize())
    }

    /// `B A B` for a symmetric `B`.
    pub fn sandwich(&self, b: &SpdMatrix) -> SpdMatrix {
        Self::new_unchecked(&(&b.0 * &self.0) * &b.0)
    }
}
