use nalgebra::{DMatrix, DVector, QR};

use super::svd::check_rank_arg;
use super::{check_finite, hstack, numerical_rank, orthonormality_error, svd};
use crate::error::{check_dims, Error, Result};

/// Tolerance on `UᵀU = I` and `VᵀV = I` accepted by [`FactoredMatrix::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-12;

/// A rank-`r` matrix `U·diag(σ)·Vᵀ` with column-orthonormal `U` (m×r),
/// `V` (n×r) and descending nonnegative `σ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredMatrix {
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
}

impl FactoredMatrix {
    /// Validating constructor.
    pub fn new(u: DMatrix<f64>, sigma: DVector<f64>, v: DMatrix<f64>) -> Result<Self> {
        let r = sigma.len();
        if u.ncols() != r || v.ncols() != r {
            return Err(Error::InvalidArgument(format!(
                "factor widths {} and {} do not match {} singular values",
                u.ncols(),
                v.ncols(),
                r
            )));
        }
        check_finite(&u, "left factor")?;
        check_finite(&v, "right factor")?;
        if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidInput("singular values must be finite and nonnegative".into()));
        }
        if sigma.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("singular values must be sorted descending".into()));
        }
        if orthonormality_error(&u) > ORTHONORMAL_TOL || orthonormality_error(&v) > ORTHONORMAL_TOL {
            return Err(Error::InvalidInput("factors are not column-orthonormal".into()));
        }
        Ok(Self { u, sigma, v })
    }

    pub(crate) fn from_parts(u: DMatrix<f64>, sigma: DVector<f64>, v: DMatrix<f64>) -> Self {
        debug_assert_eq!(u.ncols(), sigma.len());
        debug_assert_eq!(v.ncols(), sigma.len());
        Self { u, sigma, v }
    }

    /// The m×n zero matrix, stored with rank 0.
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            u: DMatrix::zeros(m, 0),
            sigma: DVector::zeros(0),
            v: DMatrix::zeros(n, 0),
        }
    }

    /// Full thin SVD of a dense matrix.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        svd(a)
    }

    /// Compact SVD of `left · core · rightᵀ` through two thin QRs and an SVD
    /// of the small middle factor. Never forms the m×n product.
    pub fn from_thin_product(left: &DMatrix<f64>, core: &DMatrix<f64>, right: &DMatrix<f64>) -> Self {
        let (m, n) = (left.nrows(), right.nrows());
        debug_assert_eq!(core.shape(), (left.ncols(), right.ncols()));
        if left.ncols() == 0 || right.ncols() == 0 || m == 0 || n == 0 {
            return Self::zeros(m, n);
        }
        let ql = QR::new(left.clone());
        let qr = QR::new(right.clone());
        let small = ql.r() * core * qr.r().transpose();
        let (w, sigma, z) = super::svd::thin_svd(&small).expect("finite factors");
        Self {
            u: ql.q() * w,
            sigma,
            v: qr.q() * z,
        }
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    /// Number of stored singular triplets (may include zeros).
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        (self.u, self.sigma, self.v)
    }

    /// `U·diag(σ)`.
    pub fn u_scaled(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.u_scaled() * self.v.transpose()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        (0..self.rank())
            .map(|l| self.u[(i, l)] * self.sigma[l] * self.v[(j, l)])
            .sum()
    }

    /// Keeps the leading `r` triplets. Deterministic under ties.
    pub fn truncate(&self, r: usize) -> Result<Self> {
        check_rank_arg(self.shape(), r)?;
        if r >= self.rank() {
            return Ok(self.clone());
        }
        Ok(Self {
            u: self.u.columns(0, r).into_owned(),
            sigma: self.sigma.rows(0, r).into_owned(),
            v: self.v.columns(0, r).into_owned(),
        })
    }

    /// Drops trailing triplets at or below `tol_rel·σ₁`.
    pub fn trimmed(&self, tol_rel: f64) -> Self {
        let s = numerical_rank(self.sigma.as_slice(), tol_rel);
        if s == self.rank() {
            return self.clone();
        }
        Self {
            u: self.u.columns(0, s).into_owned(),
            sigma: self.sigma.rows(0, s).into_owned(),
            v: self.v.columns(0, s).into_owned(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        if c >= 0.0 {
            Self {
                sigma: &self.sigma * c,
                ..self.clone()
            }
        } else {
            Self {
                u: -&self.u,
                sigma: &self.sigma * (-c),
                v: self.v.clone(),
            }
        }
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.sigma.norm_squared()
    }

    pub fn frob_norm(&self) -> f64 {
        self.sigma.norm()
    }

    /// `⟨X, Y⟩_F = Σᵢⱼ σˣᵢ σʸⱼ (UₓᵀU_y)ᵢⱼ (VₓᵀV_y)ᵢⱼ`, from the two r×r Gram blocks.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        check_dims(self.shape(), other.shape())?;
        let gu = self.u.tr_mul(&other.u);
        let gv = self.v.tr_mul(&other.v);
        let mut acc = 0.0;
        for j in 0..other.rank() {
            for i in 0..self.rank() {
                acc += self.sigma[i] * other.sigma[j] * gu[(i, j)] * gv[(i, j)];
            }
        }
        Ok(acc)
    }

    /// `‖X − Y‖_F` without densifying.
    ///
    /// Stacks both factorizations and reduces them by QR, so the absolute error
    /// is of order `ε·max(‖X‖, ‖Y‖)` rather than the `√ε` that the expanded Gram
    /// identity `‖X‖² − 2⟨X,Y⟩ + ‖Y‖²` would give for nearby matrices.
    pub fn diff_norm(&self, other: &Self) -> Result<f64> {
        check_dims(self.shape(), other.shape())?;
        let (r1, r2) = (self.rank(), other.rank());
        if r1 + r2 == 0 {
            return Ok(0.0);
        }
        let left = hstack(&[&self.u, &other.u]);
        let right = hstack(&[&self.v, &other.v]);
        let mut core = DMatrix::zeros(r1 + r2, r1 + r2);
        for i in 0..r1 {
            core[(i, i)] = self.sigma[i];
        }
        for i in 0..r2 {
            core[(r1 + i, r1 + i)] = -other.sigma[i];
        }
        let rl = QR::new(left).r();
        let rr = QR::new(right).r();
        Ok((rl * core * rr.transpose()).norm())
    }
}
