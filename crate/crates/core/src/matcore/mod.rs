//! Dense and factored matrix primitives.
//!
//! Dense matrices are plain [`DMatrix<f64>`]. Low-rank matrices are stored
//! as compact SVD triples ([`FactoredMatrix`]) and never densified outside of
//! tests and desk-scale fallbacks.

mod ambient;
mod factored;
pub mod io;
mod mask;
mod svd;

pub use ambient::{frob_inner, Ambient};
pub use factored::FactoredMatrix;
pub use mask::{mask_apply, IndexSet, MaskApply, SparseOnMask};
pub use svd::{numerical_rank, svd, truncate, Truncate, DEFAULT_RANK_TOL};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub(crate) fn check_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

/// Frobenius norm of a dense matrix.
pub fn frob_norm(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

/// Max-abs deviation of `QᵀQ` from the identity.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let gram = q.tr_mul(q);
    let mut err = 0.0_f64;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((gram[(i, j)] - target).abs());
        }
    }
    err
}

/// Removes the components of the columns of `a` along the orthonormal columns
/// of `basis`, with one reorthogonalization pass.
pub(crate) fn project_out(a: &mut DMatrix<f64>, basis: &DMatrix<f64>) {
    if basis.ncols() == 0 || a.ncols() == 0 {
        return;
    }
    for _ in 0..2 {
        let coeffs = basis.tr_mul(a);
        *a -= basis * coeffs;
    }
}

/// Horizontal concatenation; all blocks must share the row count.
pub(crate) fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}
