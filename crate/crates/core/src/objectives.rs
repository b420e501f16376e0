//! Cost functions: value plus structured ambient gradient.

use std::sync::Arc;

use crate::error::{check_dims, Error, Result};
use crate::matcore::{mask_apply, Ambient, FactoredMatrix, IndexSet, SparseOnMask};

/// A smooth cost function on m×n matrices, bounded below.
pub trait Objective: Sync {
    fn dims(&self) -> (usize, usize);

    fn value(&self, x: &FactoredMatrix) -> Result<f64>;

    /// Euclidean gradient in structured form.
    fn gradient(&self, x: &FactoredMatrix) -> Result<Ambient>;
}

/// `f(X) = ½‖P_Ω(A − X)‖²_F` with `P_Ω(A)` as the only stored data.
#[derive(Clone, Debug)]
pub struct MatrixCompletion {
    data: SparseOnMask,
}

impl MatrixCompletion {
    pub fn new(data: SparseOnMask) -> Self {
        Self { data }
    }

    pub fn from_parts(mask: Arc<IndexSet>, values: Vec<f64>) -> Result<Self> {
        Ok(Self::new(SparseOnMask::new(mask, values)?))
    }

    pub fn mask(&self) -> &Arc<IndexSet> {
        self.data.mask()
    }

    /// `P_Ω(A)`.
    pub fn data(&self) -> &SparseOnMask {
        &self.data
    }

    /// `P_Ω(X − A)` as values on Ω.
    fn residual(&self, x: &FactoredMatrix) -> Result<Vec<f64>> {
        let sampled = mask_apply(x, self.mask())?;
        Ok(sampled.values().iter().zip(self.data.values()).map(|(x, a)| x - a).collect())
    }
}

impl Objective for MatrixCompletion {
    fn dims(&self) -> (usize, usize) {
        self.data.dims()
    }

    fn value(&self, x: &FactoredMatrix) -> Result<f64> {
        Ok(0.5 * self.residual(x)?.iter().map(|r| r * r).sum::<f64>())
    }

    fn gradient(&self, x: &FactoredMatrix) -> Result<Ambient> {
        let values = self.residual(x)?;
        Ok(Ambient::Sparse(SparseOnMask::new(Arc::clone(self.mask()), values)?))
    }
}

/// `f(X) = ½‖X − A‖²_F`. Its global minimizer on the rank-`k` variety is a
/// truncated SVD of `A`, which makes it a convenient oracle problem.
#[derive(Clone, Debug)]
pub struct QuadraticDistance {
    target: FactoredMatrix,
}

impl QuadraticDistance {
    pub fn new(target: FactoredMatrix) -> Self {
        Self { target }
    }

    pub fn target(&self) -> &FactoredMatrix {
        &self.target
    }
}

impl Objective for QuadraticDistance {
    fn dims(&self) -> (usize, usize) {
        self.target.shape()
    }

    fn value(&self, x: &FactoredMatrix) -> Result<f64> {
        let d = x.diff_norm(&self.target)?;
        Ok(0.5 * d * d)
    }

    fn gradient(&self, x: &FactoredMatrix) -> Result<Ambient> {
        check_dims(self.dims(), x.shape())?;
        Ok(Ambient::Sum(vec![
            (1.0, Ambient::Factored(x.clone())),
            (-1.0, Ambient::Factored(self.target.clone())),
        ]))
    }
}

pub(crate) fn require_dims(obj: &dyn Objective, dims: (usize, usize)) -> Result<()> {
    check_dims(obj.dims(), dims).map_err(|_| {
        Error::InvalidArgument(format!("objective is {:?}, point is {:?}", obj.dims(), dims))
    })
}
