mod common;

use std::sync::Arc;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use rankopt::{frob_inner, Ambient, FactoredMatrix, IndexSet, MatrixCompletion, Objective, QuadraticDistance};

const H: f64 = 1e-6;

/// Central difference of `f` at `x` along `xi` against `⟨∇f(x), xi⟩`,
/// relative to the scale `‖∇f(x)‖·‖xi‖` of the directional derivative.
fn fd_relative_error(obj: &dyn Objective, x: &DMatrix<f64>, xi: &DMatrix<f64>) -> f64 {
    let f = |y: DMatrix<f64>| obj.value(&FactoredMatrix::from_dense(&y).unwrap()).unwrap();
    let fd = (f(x + xi * H) - f(x - xi * H)) / (2.0 * H);
    let grad = obj.gradient(&FactoredMatrix::from_dense(x).unwrap()).unwrap();
    let exact = frob_inner(&grad, &Ambient::Dense(xi.clone())).unwrap();
    (fd - exact).abs() / (grad.frob_norm() * xi.norm())
}

fn random_completion<R: Rng>(rng: &mut R) -> MatrixCompletion {
    let pairs: Vec<(usize, usize)> = (0..10).flat_map(|i| (0..8).map(move |j| (i, j))).filter(|_| rng.random_bool(0.5)).collect();
    let mask = Arc::new(IndexSet::new(10, 8, pairs).unwrap());
    let values = (0..mask.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
    MatrixCompletion::from_parts(mask, values).unwrap()
}

#[test]
fn completion_gradient_matches_finite_differences() {
    let mut rng = rng(31);
    for _ in 0..100 {
        let p = random_completion(&mut rng);
        let x = random_rank(10, 8, rng.random_range(1..=8), &mut rng);
        let xi = gaussian(10, 8, &mut rng);
        let e = fd_relative_error(&p, &x, &xi);
        assert!(e < 1e-6, "{e}");
    }
}

#[test]
fn quadratic_gradient_matches_finite_differences() {
    let mut rng = rng(32);
    for _ in 0..100 {
        let a = FactoredMatrix::from_dense(&random_rank(10, 8, rng.random_range(1..=8), &mut rng)).unwrap();
        let q = QuadraticDistance::new(a);
        let x = random_rank(10, 8, rng.random_range(1..=8), &mut rng);
        let xi = gaussian(10, 8, &mut rng);
        let e = fd_relative_error(&q, &x, &xi);
        assert!(e < 1e-6, "{e}");
    }
}

#[test]
fn completion_value_at_zero_and_bounded_below() {
    let mut rng = rng(33);
    for _ in 0..20 {
        let p = random_completion(&mut rng);
        let zero = FactoredMatrix::zeros(10, 8);
        assert!(rel_close(p.value(&zero).unwrap(), 0.5 * p.data().frob_norm_sq(), 1e-14));
        let x = FactoredMatrix::from_dense(&gaussian(10, 8, &mut rng)).unwrap();
        assert!(p.value(&x).unwrap() >= 0.0);
        // −∇f(0) = +P_Ω(A)
        let g = p.gradient(&zero).unwrap().to_dense();
        assert!((g + p.data().to_dense()).norm() < 1e-14);
    }
}
