//! Small self-contained linear-algebra kernels: dense symmetric eigensolver,
//! Cholesky, CSR storage, preconditioned conjugate gradient and Lanczos.

mod cg;
mod dense;
mod lanczos;
mod sparse;

pub use cg::{conjugate_gradient, CgOptions, CgOutcome};
pub use dense::{cholesky, cholesky_solve, sym_eigen, DenseMatrix, SymEigen};
pub use lanczos::{lanczos_smallest, LanczosOutcome};
pub use sparse::CsrMatrix;

use crate::Scalar;

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub(crate) fn weighted_norm<T: Scalar>(a: &[T], w: Option<&[T]>) -> T {
    match w {
        Some(w) => a
            .iter()
            .zip(w)
            .fold(T::zero(), |acc, (&x, &wi)| acc + wi * x * x)
            .sqrt(),
        None => dot(a, a).sqrt(),
    }
}
