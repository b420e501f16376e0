use nalgebra::{DMatrix, DVector};

use super::{check_finite, FactoredMatrix};
use crate::error::{Error, Result};

/// Relative singular-value threshold below which a direction counts as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-14;

/// Thin SVD `A = U·diag(σ)·Vᵀ` with `σ` sorted descending.
///
/// Ties keep the order produced by the backend, which is deterministic.
pub fn svd(a: &DMatrix<f64>) -> Result<FactoredMatrix> {
    check_finite(a, "svd input")?;
    let (u, sigma, v) = thin_svd(a)?;
    Ok(FactoredMatrix::from_parts(u, sigma, v))
}

/// Dense thin SVD through faer, whose bidiagonal divide-and-conquer stays
/// accurate on rank-deficient input.
pub(crate) fn thin_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    let p = m.min(n);
    if p == 0 {
        return Ok((DMatrix::zeros(m, 0), DVector::zeros(0), DMatrix::zeros(n, 0)));
    }
    let fa = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let dec = fa
        .thin_svd()
        .map_err(|e| Error::InvalidInput(format!("svd did not converge: {e:?}")))?;
    let (fu, fs, fv) = (dec.U(), dec.S().column_vector(), dec.V());
    let u = DMatrix::from_fn(m, p, |i, j| fu[(i, j)]);
    let sigma = DVector::from_fn(p, |i, _| fs[i]);
    let v = DMatrix::from_fn(n, p, |i, j| fv[(i, j)]);
    Ok((u, sigma, v))
}

/// Number of singular values strictly above `tol_rel·σ₁` (0 when `σ₁ = 0`).
pub fn numerical_rank(sigma: &[f64], tol_rel: f64) -> usize {
    match sigma.first() {
        Some(&s1) if s1 > 0.0 => sigma.iter().take_while(|&&s| s > tol_rel * s1).count(),
        _ => 0,
    }
}

/// Best Frobenius-norm approximation of rank at most `r`.
pub trait Truncate {
    fn truncate(&self, r: usize) -> Result<FactoredMatrix>;
}

impl Truncate for DMatrix<f64> {
    fn truncate(&self, r: usize) -> Result<FactoredMatrix> {
        check_rank_arg(self.shape(), r)?;
        svd(self)?.truncate(r)
    }
}

impl Truncate for FactoredMatrix {
    fn truncate(&self, r: usize) -> Result<FactoredMatrix> {
        FactoredMatrix::truncate(self, r)
    }
}

pub fn truncate<A: Truncate + ?Sized>(a: &A, r: usize) -> Result<FactoredMatrix> {
    a.truncate(r)
}

pub(crate) fn check_rank_arg((m, n): (usize, usize), r: usize) -> Result<()> {
    if r > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} exceeds min dimension of {m}x{n}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_matrix_has_zero_spectrum() {
        let f = svd(&DMatrix::zeros(3, 2)).unwrap();
        assert!(f.sigma().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn diagonal_spectrum() {
        let a = DMatrix::from_diagonal(&nalgebra::dvector![3.0, 1.0]);
        let f = svd(&a).unwrap();
        assert_eq!(f.sigma().as_slice(), &[3.0, 1.0]);
        for j in 0..2 {
            assert!((f.u()[(j, j)].abs() - 1.0).abs() < 1e-15);
            assert!((f.v()[(j, j)].abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reconstruction_residual() {
        for seed in 0..20 {
            let a = random(5, 3, seed);
            let f = svd(&a).unwrap();
            let back = f.to_dense();
            assert!((&a - &back).norm() <= 1e-12 * a.norm());
            assert!(f.sigma().as_slice().windows(2).all(|w| w[0] >= w[1]));
            assert!(super::super::orthonormality_error(f.u()) < 1e-12);
            assert!(super::super::orthonormality_error(f.v()) < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rank_thresholds() {
        assert_eq!(numerical_rank(&[3.0, 1.0, 1e-18], 1e-14), 2);
        assert_eq!(numerical_rank(&[0.0, 0.0], 1e-14), 0);
        assert_eq!(numerical_rank(&[1.0, 1.0, 1.0], 1e-14), 3);
        assert_eq!(numerical_rank(&[], 1e-14), 0);
    }

    #[test]
    fn truncation_of_diag() {
        let a = DMatrix::from_diagonal(&nalgebra::dvector![3.0, 1.0]);
        let t = truncate(&a, 1).unwrap().to_dense();
        let expected = DMatrix::from_diagonal(&nalgebra::dvector![3.0, 0.0]);
        assert!((t - expected).norm() < 1e-15);
    }

    #[test]
    fn truncation_of_identity_has_unit_distance() {
        let a = DMatrix::<f64>::identity(2, 2);
        let t = truncate(&a, 1).unwrap();
        assert_eq!(t.rank(), 1);
        assert!(((&a - t.to_dense()).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_above_rank_is_noop() {
        let a = random(4, 6, 3);
        let t = truncate(&a, 4).unwrap();
        assert!((a - t.to_dense()).norm() < 1e-12);
    }

    #[test]
    fn truncation_rank_out_of_range() {
        let a = random(3, 2, 1);
        assert!(matches!(truncate(&a, 3), Err(Error::InvalidArgument(_))));
        let f = svd(&a).unwrap();
        assert!(matches!(truncate(&f, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn truncation_residual_is_tail_energy() {
        let a = random(6, 5, 9);
        let full = svd(&a).unwrap();
        for r in 0..=5 {
            let t = truncate(&a, r).unwrap();
            let tail: f64 = full.sigma().iter().skip(r).map(|s| s * s).sum::<f64>().sqrt();
            let res = (&a - t.to_dense()).norm();
            assert!((res - tail).abs() <= 1e-12 * a.norm());
        }
    }
}
