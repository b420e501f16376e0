use nalgebra::DMatrix;

use super::{FactoredMatrix, MaskApply, SparseOnMask};
use crate::error::{check_dims, Result};

/// An m×n matrix in whatever structured form it naturally comes in.
///
/// Objectives return gradients in this form. Consumers only need products
/// with thin factors (`F·W`, `Fᵀ·W`) and Frobenius inner products, all of
/// which are computed without assembling the dense matrix.
#[derive(Clone, Debug)]
pub enum Ambient {
    Dense(DMatrix<f64>),
    Sparse(SparseOnMask),
    Factored(FactoredMatrix),
    /// `Σ cᵢ·Tᵢ`.
    Sum(Vec<(f64, Ambient)>),
}

impl Ambient {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Ambient::Dense(d) => d.shape(),
            Ambient::Sparse(s) => s.dims(),
            Ambient::Factored(f) => f.shape(),
            Ambient::Sum(terms) => terms.first().map_or((0, 0), |(_, t)| t.dims()),
        }
    }

    pub fn scaled(&self, c: f64) -> Ambient {
        match self {
            Ambient::Dense(d) => Ambient::Dense(d * c),
            Ambient::Sparse(s) => Ambient::Sparse(s.scaled(c)),
            Ambient::Factored(f) => Ambient::Factored(f.scaled(c)),
            Ambient::Sum(terms) => Ambient::Sum(terms.iter().map(|(w, t)| (c * w, t.clone())).collect()),
        }
    }

    /// `F·W` with `W` of shape n×p.
    pub fn mul_right(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Ambient::Dense(d) => d * w,
            Ambient::Sparse(s) => s.mul_right(w),
            Ambient::Factored(f) => f.u_scaled() * f.v().tr_mul(w),
            Ambient::Sum(terms) => {
                let mut out = DMatrix::zeros(self.dims().0, w.ncols());
                for (c, t) in terms {
                    out += t.mul_right(w) * *c;
                }
                out
            }
        }
    }

    /// `Fᵀ·W` with `W` of shape m×p.
    pub fn tr_mul_right(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Ambient::Dense(d) => d.tr_mul(w),
            Ambient::Sparse(s) => s.tr_mul_right(w),
            Ambient::Factored(f) => f.v() * f.u_scaled().tr_mul(w),
            Ambient::Sum(terms) => {
                let mut out = DMatrix::zeros(self.dims().1, w.ncols());
                for (c, t) in terms {
                    out += t.tr_mul_right(w) * *c;
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Ambient::Dense(d) => d.clone(),
            Ambient::Sparse(s) => s.to_dense(),
            Ambient::Factored(f) => f.to_dense(),
            Ambient::Sum(terms) => {
                let (m, n) = self.dims();
                let mut out = DMatrix::zeros(m, n);
                for (c, t) in terms {
                    out += t.to_dense() * *c;
                }
                out
            }
        }
    }

    pub fn frob_norm_sq(&self) -> f64 {
        match self {
            Ambient::Dense(d) => d.norm_squared(),
            Ambient::Sparse(s) => s.frob_norm_sq(),
            Ambient::Factored(f) => f.frob_norm_sq(),
            Ambient::Sum(_) => frob_inner(self, self).expect("same shape").max(0.0),
        }
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }
}

impl From<DMatrix<f64>> for Ambient {
    fn from(d: DMatrix<f64>) -> Self {
        Ambient::Dense(d)
    }
}

impl From<SparseOnMask> for Ambient {
    fn from(s: SparseOnMask) -> Self {
        Ambient::Sparse(s)
    }
}

impl From<FactoredMatrix> for Ambient {
    fn from(f: FactoredMatrix) -> Self {
        Ambient::Factored(f)
    }
}

fn dense_factored_inner(d: &DMatrix<f64>, f: &FactoredMatrix) -> f64 {
    // Σₗ σₗ uₗᵀ D vₗ
    let dv = d * f.v();
    (0..f.rank()).map(|l| f.sigma()[l] * f.u().column(l).dot(&dv.column(l))).sum()
}

fn dense_sparse_inner(d: &DMatrix<f64>, s: &SparseOnMask) -> f64 {
    s.iter().map(|((i, j), v)| v * d[(i, j)]).sum()
}

/// `⟨A, B⟩_F = tr(AᵀB)` for any mix of representations; factored operands are
/// never densified.
pub fn frob_inner(a: &Ambient, b: &Ambient) -> Result<f64> {
    use Ambient::*;
    check_dims(a.dims(), b.dims())?;
    Ok(match (a, b) {
        (Sum(terms), other) | (other, Sum(terms)) => {
            let mut acc = 0.0;
            for (c, t) in terms {
                acc += c * frob_inner(t, other)?;
            }
            acc
        }
        (Dense(x), Dense(y)) => x.dot(y),
        (Dense(d), Sparse(s)) | (Sparse(s), Dense(d)) => dense_sparse_inner(d, s),
        (Dense(d), Factored(f)) | (Factored(f), Dense(d)) => dense_factored_inner(d, f),
        (Sparse(x), Sparse(y)) => x.inner(y)?,
        (Sparse(s), Factored(f)) | (Factored(f), Sparse(s)) => {
            let sampled = f.mask_apply(s.mask())?;
            s.values().iter().zip(sampled.values()).map(|(p, q)| p * q).sum()
        }
        (Factored(x), Factored(y)) => x.inner(y)?,
    })
}
