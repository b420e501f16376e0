#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rankopt::{Ambient, FactoredMatrix, VarietyPoint};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random m×n matrix of rank exactly `r` (with probability one).
pub fn random_rank<R: Rng>(m: usize, n: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    gaussian(m, r, rng) * gaussian(r, n, rng)
}

pub fn random_point<R: Rng>(m: usize, n: usize, s: usize, k: usize, rng: &mut R) -> VarietyPoint {
    let x = FactoredMatrix::from_dense(&random_rank(m, n, s, rng)).unwrap();
    VarietyPoint::new(x, k).unwrap()
}

/// Singular values of a dense matrix, descending (independent of the crate's
/// own wrapper).
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn dense_rank(a: &DMatrix<f64>, tol_rel: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().filter(|&&x| x > tol_rel * s1).count(),
        _ => 0,
    }
}

/// Best rank-r approximation computed directly with nalgebra.
pub fn dense_truncate(a: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for &i in idx.iter().take(r) {
        out += u.column(i) * vt.row(i) * svd.singular_values[i];
    }
    out
}

/// Orthogonal projector onto the complement of the column space of `q`
/// (orthonormal columns).
pub fn complement_projector(q: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::identity(q.nrows(), q.nrows()) - q * q.transpose()
}

/// Dense random element of the tangent cone at `x`: random tangent-space
/// part plus a random rank-(k − s) matrix on the orthogonal complements.
pub fn random_cone_element<R: Rng>(x: &VarietyPoint, rng: &mut R) -> DMatrix<f64> {
    let (m, n) = x.dims();
    let (u, v) = (x.u(), x.v());
    let f = gaussian(m, n, rng);
    let pu = complement_projector(u);
    let pv = complement_projector(v);
    let tangent = &f - &pu * &f * &pv;
    let budget = x.budget() - x.rank();
    let perp = if budget == 0 {
        DMatrix::zeros(m, n)
    } else {
        let r = rng.random_range(0..=budget);
        &pu * random_rank(m, n, r, rng) * &pv
    };
    tangent + perp
}

pub fn dense(a: &Ambient) -> DMatrix<f64> {
    a.to_dense()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
