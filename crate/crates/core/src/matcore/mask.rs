use std::sync::Arc;

use nalgebra::DMatrix;

use super::FactoredMatrix;
use crate::error::{check_dims, Error, Result};

/// A sampling set Ω: distinct `(row, col)` pairs sorted row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    nrows: usize,
    ncols: usize,
    pairs: Vec<(usize, usize)>,
}

impl IndexSet {
    /// Sorts `pairs` and rejects duplicates or out-of-range coordinates.
    pub fn new(nrows: usize, ncols: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= nrows || j >= ncols) {
            return Err(Error::InvalidArgument(format!(
                "index ({i}, {j}) out of bounds for {nrows}x{ncols}"
            )));
        }
        pairs.sort_unstable();
        if let Some(w) = pairs.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate index {:?}", w[0])));
        }
        Ok(Self { nrows, ncols, pairs })
    }

    pub fn full(nrows: usize, ncols: usize) -> Self {
        let pairs = (0..nrows).flat_map(|i| (0..ncols).map(move |j| (i, j))).collect();
        Self { nrows, ncols, pairs }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// A matrix supported on Ω; `values[p]` sits at `mask.pairs()[p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOnMask {
    mask: Arc<IndexSet>,
    values: Vec<f64>,
}

impl SparseOnMask {
    pub fn new(mask: Arc<IndexSet>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a mask of {} entries",
                values.len(),
                mask.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sparse value".into()));
        }
        Ok(Self { mask, values })
    }

    pub fn zeros(mask: Arc<IndexSet>) -> Self {
        let values = vec![0.0; mask.len()];
        Self { mask, values }
    }

    pub fn mask(&self) -> &Arc<IndexSet> {
        &self.mask
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.mask.pairs().iter().copied().zip(self.values.iter().copied())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mask: Arc::clone(&self.mask),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (m, n) = self.dims();
        let mut out = DMatrix::zeros(m, n);
        for ((i, j), v) in self.iter() {
            out[(i, j)] = v;
        }
        out
    }

    /// `S·W` for `W` of shape n×p.
    pub fn mul_right(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let (m, n) = self.dims();
        debug_assert_eq!(w.nrows(), n);
        let p = w.ncols();
        let wt = w.transpose();
        let mut out_t = DMatrix::zeros(p, m);
        for ((i, j), v) in self.iter() {
            out_t.column_mut(i).axpy(v, &wt.column(j), 1.0);
        }
        out_t.transpose()
    }

    /// `Sᵀ·W` for `W` of shape m×p.
    pub fn tr_mul_right(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let (m, n) = self.dims();
        debug_assert_eq!(w.nrows(), m);
        let p = w.ncols();
        let wt = w.transpose();
        let mut out_t = DMatrix::zeros(p, n);
        for ((i, j), v) in self.iter() {
            out_t.column_mut(j).axpy(v, &wt.column(i), 1.0);
        }
        out_t.transpose()
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        check_dims(self.dims(), other.dims())?;
        if Arc::ptr_eq(&self.mask, &other.mask) || self.mask == other.mask {
            return Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum());
        }
        // sorted merge over the two supports
        let (pa, pb) = (self.mask.pairs(), other.mask.pairs());
        let (mut a, mut b, mut acc) = (0, 0, 0.0);
        while a < pa.len() && b < pb.len() {
            match pa[a].cmp(&pb[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        Ok(acc)
    }
}

/// Sources that can be sampled on an index set.
pub trait MaskApply {
    fn mask_apply(&self, mask: &Arc<IndexSet>) -> Result<SparseOnMask>;
}

impl MaskApply for DMatrix<f64> {
    fn mask_apply(&self, mask: &Arc<IndexSet>) -> Result<SparseOnMask> {
        check_dims(mask.dims(), self.shape())?;
        let values = mask.pairs().iter().map(|&(i, j)| self[(i, j)]).collect();
        Ok(SparseOnMask { mask: Arc::clone(mask), values })
    }
}

impl MaskApply for FactoredMatrix {
    /// Row-times-row products, O(|Ω|·r); the matrix is never densified.
    fn mask_apply(&self, mask: &Arc<IndexSet>) -> Result<SparseOnMask> {
        check_dims(mask.dims(), self.shape())?;
        let left_t = self.u_scaled().transpose();
        let right_t = self.v().transpose();
        let values = mask
            .pairs()
            .iter()
            .map(|&(i, j)| left_t.column(i).dot(&right_t.column(j)))
            .collect();
        Ok(SparseOnMask { mask: Arc::clone(mask), values })
    }
}

/// `P_Ω(X)`.
pub fn mask_apply<X: MaskApply + ?Sized>(x: &X, mask: &Arc<IndexSet>) -> Result<SparseOnMask> {
    x.mask_apply(mask)
}
