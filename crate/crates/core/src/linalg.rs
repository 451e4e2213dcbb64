//! Fixed-size complex linear algebra for the 6-dimensional composite space.

use nalgebra::{Matrix2, Matrix3, SMatrix, SVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DIM: usize = 6;

pub type Operator6 = SMatrix<Complex64, DIM, DIM>;
pub type Amplitudes = SVector<Complex64, DIM>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `a ⊗ b` with the qutrit factor as the slow index.
pub fn kron(a: &Matrix3<Complex64>, b: &Matrix2<Complex64>) -> Operator6 {
    let mut out = Operator6::zeros();
    for (ra, ca) in (0..3).flat_map(|r| (0..3).map(move |c| (r, c))) {
        let x = a[(ra, ca)];
        if x == ZERO {
            continue;
        }
        for (rb, cb) in (0..2).flat_map(|r| (0..2).map(move |c| (r, c))) {
            out[(2 * ra + rb, 2 * ca + cb)] = x * b[(rb, cb)];
        }
    }
    out
}

pub fn commutator(a: &Operator6, b: &Operator6) -> Operator6 {
    a * b - b * a
}

/// `⟨ψ|Q|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn expectation(op: &Operator6, psi: &Amplitudes) -> Complex64 {
    psi.dotc(&(op * psi)) / psi.norm_squared()
}

pub fn projector(psi: &Amplitudes) -> Operator6 {
    psi * psi.adjoint()
}

pub fn trace(op: &Operator6) -> Complex64 {
    (0..DIM).map(|i| op[(i, i)]).sum()
}

/// Max-abs entry of `a - a†`.
pub fn hermiticity_defect(a: &Operator6) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &Operator6) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: &Operator6) -> Result<[f64; DIM]> {
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, 1e-15, 10_000).ok_or(Error::EigenSolver)?;
    let mut vals = [0.0; DIM];
    vals.copy_from_slice(eig.eigenvalues.as_slice());
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm(a: &Operator6) -> Result<f64> {
    Ok(hermitian_eigenvalues(a)?.iter().map(|x| x.abs()).sum())
}

/// A 6×6 operator stored as its nonzero entries, applied in the trajectory hot loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    pub fn from_dense(op: &Operator6) -> Self {
        let entries = (0..DIM)
            .flat_map(|r| (0..DIM).map(move |c| (r, c)))
            .filter_map(|(r, c)| {
                let v = op[(r, c)];
                (v != ZERO).then_some((r, c, v))
            })
            .collect();
        Self { entries }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect(),
        }
    }

    #[inline]
    pub fn apply(&self, v: &Amplitudes) -> Amplitudes {
        let mut out = Amplitudes::zeros();
        for &(r, c, x) in &self.entries {
            out[r] += x * v[c];
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> Operator6 {
        let mut out = Operator6::zeros();
        for &(r, c, v) in &self.entries {
            out[(r, c)] += v;
        }
        out
    }
}
