//! Geometry of the variety of m×n matrices of rank at most k.
//!
//! At a point `X = U·S·Vᵀ` of rank `s ≤ k` the tangent cone splits into four
//! mutually orthogonal pieces:
//!
//! ```text
//! Ξ = U·C·Vᵀ + Uₚ·Vᵀ + U·Vₚᵀ + Ξ⊥,     UᵀUₚ = 0,  VᵀVₚ = 0,
//! ```
//!
//! where the first three form the tangent space of the rank-`s` manifold and
//! `Ξ⊥` has rank at most `k − s` with row and column spaces orthogonal to
//! those of `X`. [`ConeTangentVector`] stores exactly these blocks.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dims, Error, Result};
use crate::matcore::{
    frob_inner, hstack, project_out, Ambient, FactoredMatrix, DEFAULT_RANK_TOL,
};

/// `1/√2`: angle constant of the retraction-free directions and the
/// retraction stability bound.
pub const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Relative mass a rank-preserving affine step may discard before it is
/// rejected as leaving the variety.
const AFFINE_TAIL_TOL: f64 = 1e-10;

/// A point of rank `s` on the variety of matrices of rank at most `k`.
#[derive(Clone, Debug)]
pub struct VarietyPoint {
    x: FactoredMatrix,
    k: usize,
}

impl VarietyPoint {
    /// Trims `x` to its numerical rank and checks `rank ≤ k ≤ min(m, n)`.
    pub fn new(x: FactoredMatrix, k: usize) -> Result<Self> {
        let (m, n) = x.shape();
        if k > m.min(n) {
            return Err(Error::InvalidArgument(format!("rank budget {k} exceeds min({m}, {n})")));
        }
        let x = x.trimmed(DEFAULT_RANK_TOL);
        if x.rank() > k {
            return Err(Error::InvalidArgument(format!(
                "point has rank {} above the budget {k}",
                x.rank()
            )));
        }
        Ok(Self { x, k })
    }

    pub fn zeros(m: usize, n: usize, k: usize) -> Result<Self> {
        Self::new(FactoredMatrix::zeros(m, n), k)
    }

    pub fn matrix(&self) -> &FactoredMatrix {
        &self.x
    }

    pub fn into_matrix(self) -> FactoredMatrix {
        self.x
    }

    /// Current rank `s`.
    pub fn rank(&self) -> usize {
        self.x.rank()
    }

    /// Rank budget `k`.
    pub fn budget(&self) -> usize {
        self.k
    }

    pub fn dims(&self) -> (usize, usize) {
        self.x.shape()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        self.x.u()
    }

    pub fn v(&self) -> &DMatrix<f64> {
        self.x.v()
    }

    pub fn sigma(&self) -> &DVector<f64> {
        self.x.sigma()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.x.to_dense()
    }
}

/// An element of the tangent cone, stored blockwise relative to the base
/// point's singular subspaces.
///
/// `up`/`vp` are `None` for directions that drop that block (the
/// retraction-free partial projections).
#[derive(Clone, Debug)]
pub struct ConeTangentVector {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    core: DMatrix<f64>,
    up: Option<DMatrix<f64>>,
    vp: Option<DMatrix<f64>>,
    perp: FactoredMatrix,
}

impl ConeTangentVector {
    pub fn zeros(x: &VarietyPoint) -> Self {
        let (m, n) = x.dims();
        let s = x.rank();
        Self {
            u: x.u().clone(),
            v: x.v().clone(),
            core: DMatrix::zeros(s, s),
            up: Some(DMatrix::zeros(m, s)),
            vp: Some(DMatrix::zeros(n, s)),
            perp: FactoredMatrix::zeros(m, n),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.u.nrows(), self.v.nrows())
    }

    /// Rank of the base point.
    pub fn base_rank(&self) -> usize {
        self.u.ncols()
    }

    /// `UᵀΞV`.
    pub fn core(&self) -> &DMatrix<f64> {
        &self.core
    }

    /// Block in `U⊥ ⊗ V`.
    pub fn up(&self) -> Option<&DMatrix<f64>> {
        self.up.as_ref()
    }

    /// Block in `U ⊗ V⊥`, stored as the n×s factor `Vₚ`.
    pub fn vp(&self) -> Option<&DMatrix<f64>> {
        self.vp.as_ref()
    }

    /// Rank ≤ `k − s` part in `U⊥ ⊗ V⊥`.
    pub fn perp(&self) -> &FactoredMatrix {
        &self.perp
    }

    fn block_norm_sq(b: &Option<DMatrix<f64>>) -> f64 {
        b.as_ref().map_or(0.0, |m| m.norm_squared())
    }

    pub fn up_norm_sq(&self) -> f64 {
        Self::block_norm_sq(&self.up)
    }

    pub fn vp_norm_sq(&self) -> f64 {
        Self::block_norm_sq(&self.vp)
    }

    /// Blocks are orthogonal, so the norm is a sum over blocks.
    pub fn norm_sq(&self) -> f64 {
        self.core.norm_squared() + self.up_norm_sq() + self.vp_norm_sq() + self.perp.frob_norm_sq()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            u: self.u.clone(),
            v: self.v.clone(),
            core: &self.core * c,
            up: self.up.as_ref().map(|b| b * c),
            vp: self.vp.as_ref().map(|b| b * c),
            perp: self.perp.scaled(c),
        }
    }

    /// Tangent-space part only (`Ξ⊥` dropped).
    pub fn tangent_part(&self) -> Self {
        Self {
            perp: FactoredMatrix::zeros(self.dims().0, self.dims().1),
            ..self.clone()
        }
    }

    /// `(Π_U ⊗ I)·F + Ξ⊥`: the `Uₚ` block dropped.
    pub fn without_up(&self) -> Self {
        Self { up: None, ..self.clone() }
    }

    /// `(I ⊗ Π_V)·F + Ξ⊥`: the `Vₚ` block dropped.
    pub fn without_vp(&self) -> Self {
        Self { vp: None, ..self.clone() }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = &self.u * &self.core * self.v.transpose() + self.perp.to_dense();
        if let Some(up) = &self.up {
            out += up * self.v.transpose();
        }
        if let Some(vp) = &self.vp {
            out += &self.u * vp.transpose();
        }
        out
    }

    /// `⟨F, Ξ⟩_F`, using only `F·V`, `Fᵀ·U` and the structured inner product
    /// with `Ξ⊥`.
    pub fn inner_ambient(&self, f: &Ambient) -> Result<f64> {
        check_dims(self.dims(), f.dims())?;
        let fv = f.mul_right(&self.v);
        let mut acc = self.u.tr_mul(&fv).dot(&self.core);
        if let Some(up) = &self.up {
            acc += fv.dot(up);
        }
        if let Some(vp) = &self.vp {
            acc += f.tr_mul_right(&self.u).dot(vp);
        }
        if self.perp.rank() > 0 {
            acc += frob_inner(f, &Ambient::Factored(self.perp.clone()))?;
        }
        Ok(acc)
    }

    /// Compact SVD of `diag(base)`-shifted sum `U·diag(base)·Vᵀ + α·Ξ`,
    /// from the stacked factors `[U, Uₚ, P_U]` and `[V, Vₚ, P_V]`.
    fn stacked_sum(&self, base: Option<&DVector<f64>>, alpha: f64) -> FactoredMatrix {
        let s = self.base_rank();
        let p = self.perp.rank();
        let pu = self.perp.u();
        let pv = self.perp.v();

        let mut left_blocks = vec![&self.u];
        let mut right_blocks = vec![&self.v];
        let lu = self.up.as_ref().map(|up| {
            left_blocks.push(up);
            s
        });
        let rv = self.vp.as_ref().map(|vp| {
            right_blocks.push(vp);
            s
        });
        let lp = s + lu.map_or(0, |_| s);
        let rp = s + rv.map_or(0, |_| s);
        left_blocks.push(pu);
        right_blocks.push(pv);

        let mut core = DMatrix::zeros(lp + p, rp + p);
        core.view_mut((0, 0), (s, s)).copy_from(&(&self.core * alpha));
        if let Some(base) = base {
            for i in 0..s {
                core[(i, i)] += base[i];
            }
        }
        for i in 0..s {
            if let Some(off) = lu {
                core[(off + i, i)] = alpha;
            }
            if let Some(off) = rv {
                core[(i, off + i)] = alpha;
            }
        }
        for i in 0..p {
            core[(lp + i, rp + i)] = alpha * self.perp.sigma()[i];
        }
        FactoredMatrix::from_thin_product(&hstack(&left_blocks), &core, &hstack(&right_blocks))
    }

    /// The represented ambient matrix in compact SVD form (rank ≤ `k + s`).
    pub fn to_factored(&self) -> FactoredMatrix {
        self.stacked_sum(None, 1.0)
    }

    fn check_base(&self, x: &VarietyPoint) -> Result<()> {
        check_dims(x.dims(), self.dims())?;
        if x.rank() != self.base_rank() {
            return Err(Error::InvalidArgument(format!(
                "tangent vector based at rank {}, point has rank {}",
                self.base_rank(),
                x.rank()
            )));
        }
        Ok(())
    }
}

fn tangent_blocks(x: &VarietyPoint, f: &Ambient) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    check_dims(x.dims(), f.dims())?;
    let (u, v) = (x.u(), x.v());
    let fv = f.mul_right(v);
    let ftu = f.tr_mul_right(u);
    let core = u.tr_mul(&fv);
    let mut up = fv.clone();
    project_out(&mut up, u);
    let mut vp = ftu.clone();
    project_out(&mut vp, v);
    Ok((core, up, vp, fv, ftu))
}

/// Orthogonal projection of `F` onto the tangent space of the rank-`s`
/// manifold at `X`: `UUᵀF + FVVᵀ − UUᵀFVVᵀ`.
pub fn project_tangent_space(x: &VarietyPoint, f: &Ambient) -> Result<ConeTangentVector> {
    let (core, up, vp, _, _) = tangent_blocks(x, f)?;
    let (m, n) = x.dims();
    Ok(ConeTangentVector {
        u: x.u().clone(),
        v: x.v().clone(),
        core,
        up: Some(up),
        vp: Some(vp),
        perp: FactoredMatrix::zeros(m, n),
    })
}

/// Metric projection of `F` onto the tangent cone at `X`, and its norm `g⁻`.
///
/// The tangent-space part is computed from thin products only. The remainder
/// `(I − UUᵀ)·F·(I − VVᵀ)` is assembled densely as `F` minus a rank-`2s`
/// correction and truncated to rank `k − s`; this happens only when `s < k`.
pub fn project_cone(x: &VarietyPoint, f: &Ambient) -> Result<(ConeTangentVector, f64)> {
    let (core, up, vp, fv, ftu) = tangent_blocks(x, f)?;
    let (m, n) = x.dims();
    let (s, k) = (x.rank(), x.budget());
    let (u, v) = (x.u(), x.v());

    let perp = if s < k {
        let mut rem = f.to_dense();
        rem -= &fv * v.transpose();
        rem -= u * ftu.transpose();
        rem += u * &core * v.transpose();
        let best = FactoredMatrix::from_dense(&rem)?.truncate(k - s)?;
        let floor = DEFAULT_RANK_TOL * f.frob_norm();
        let keep = best.sigma().iter().take_while(|&&sv| sv > floor).count();
        let best = best.truncate(keep)?;
        let mut pu = best.u_scaled();
        let mut pv = best.v().clone();
        project_out(&mut pu, u);
        project_out(&mut pv, v);
        FactoredMatrix::from_thin_product(&pu, &DMatrix::identity(keep, keep), &pv)
    } else {
        FactoredMatrix::zeros(m, n)
    };

    let g = ConeTangentVector {
        u: u.clone(),
        v: v.clone(),
        core,
        up: Some(up),
        vp: Some(vp),
        perp,
    };
    let g_minus = g.norm();
    Ok((g, g_minus))
}

/// `√((k − s) / min(m − s, n − s))·‖F‖_F`, a lower bound for `g⁻`; zero when
/// `s = k`.
pub fn g_lower_bound(x: &VarietyPoint, f: &Ambient) -> f64 {
    let (m, n) = x.dims();
    let (s, k) = (x.rank(), x.budget());
    if s >= k {
        return 0.0;
    }
    ((k - s) as f64 / (m - s).min(n - s) as f64).sqrt() * f.frob_norm()
}

/// Truncated-SVD retraction: a best rank-`k` approximation of `X + α·Ξ`,
/// computed from the rank-`(k + s)` stacked representation.
pub fn retract(x: &VarietyPoint, xi: &ConeTangentVector, alpha: f64) -> Result<VarietyPoint> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("step size {alpha} must be nonnegative")));
    }
    xi.check_base(x)?;
    if alpha == 0.0 {
        return Ok(x.clone());
    }
    let sum = xi.stacked_sum(Some(x.sigma()), alpha);
    VarietyPoint::new(sum.truncate(x.budget().min(sum.rank()))?, x.budget())
}

/// `X + α·Ξ` for a direction that keeps the rank within the budget, re-factored
/// without truncation. Errors if the step would leave the variety.
pub fn affine_step(x: &VarietyPoint, xi: &ConeTangentVector, alpha: f64) -> Result<VarietyPoint> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("step size {alpha} must be nonnegative")));
    }
    xi.check_base(x)?;
    if alpha == 0.0 {
        return Ok(x.clone());
    }
    let sum = xi.stacked_sum(Some(x.sigma()), alpha);
    let k = x.budget();
    if sum.rank() > k {
        let tail: f64 = sum.sigma().iter().skip(k).map(|s| s * s).sum::<f64>().sqrt();
        if tail > AFFINE_TAIL_TOL * sum.frob_norm() {
            return Err(Error::InvalidArgument(format!(
                "affine step leaves the variety (rank-{k} tail {tail:e})"
            )));
        }
    }
    VarietyPoint::new(sum.truncate(k.min(sum.rank()))?, k)
}

/// The two rank-preserving partial projections `(G⁽¹⁾, G⁽²⁾)` of `F`.
pub fn partial_directions(x: &VarietyPoint, f: &Ambient) -> Result<(ConeTangentVector, ConeTangentVector)> {
    let (g, _) = project_cone(x, f)?;
    Ok(partial_directions_of(&g))
}

/// Partial projections derived from an already computed cone projection.
pub fn partial_directions_of(g: &ConeTangentVector) -> (ConeTangentVector, ConeTangentVector) {
    (g.without_up(), g.without_vp())
}

/// Picks `G⁽¹⁾` when `‖(Π_U ⊗ I)F‖ ≥ ‖(I ⊗ Π_V)F‖`, else `G⁽²⁾`.
pub fn choose_flat_direction(x: &VarietyPoint, f: &Ambient) -> Result<ConeTangentVector> {
    let (g, _) = project_cone(x, f)?;
    Ok(choose_flat_direction_of(&g))
}

pub fn choose_flat_direction_of(g: &ConeTangentVector) -> ConeTangentVector {
    let c = g.core().norm_squared();
    if c + g.vp_norm_sq() >= c + g.up_norm_sq() {
        g.without_up()
    } else {
        g.without_vp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::svd;
    use nalgebra::dmatrix;

    fn point(a: DMatrix<f64>, k: usize) -> VarietyPoint {
        VarietyPoint::new(svd(&a).unwrap(), k).unwrap()
    }

    fn e11() -> DMatrix<f64> {
        dmatrix![1.0, 0.0; 0.0, 0.0]
    }

    #[test]
    fn zero_gradient_projects_to_zero() {
        let x = point(e11(), 2);
        let (g, gm) = project_cone(&x, &Ambient::Dense(DMatrix::zeros(2, 2))).unwrap();
        assert_eq!(gm, 0.0);
        assert_eq!(g.to_dense(), DMatrix::zeros(2, 2));
        let t = project_tangent_space(&x, &Ambient::Dense(DMatrix::zeros(2, 2))).unwrap();
        assert_eq!(t.norm(), 0.0);
    }

    #[test]
    fn tangent_projection_of_identity_at_e11() {
        // UUᵀF + FVVᵀ − UUᵀFVVᵀ with U = V = e₁, F = I gives diag(1, 0)
        let x = point(e11(), 1);
        let t = project_tangent_space(&x, &Ambient::Dense(DMatrix::identity(2, 2))).unwrap();
        assert!((t.to_dense() - e11()).norm() < 1e-15);
    }

    #[test]
    fn tangent_projection_is_idempotent() {
        let x = point(dmatrix![2.0, 1.0, 0.0; 0.5, 1.0, 3.0; 1.0, 0.0, 1.0; 0.0, 2.0, 1.0], 3).clone();
        let x = VarietyPoint::new(x.matrix().truncate(2).unwrap(), 2).unwrap();
        let f = Ambient::Dense(dmatrix![1.0, -2.0, 0.5; 0.3, 0.0, 1.0; -1.0, 1.0, 2.0; 0.0, 0.7, -0.4]);
        let once = project_tangent_space(&x, &f).unwrap().to_dense();
        let twice = project_tangent_space(&x, &Ambient::Dense(once.clone())).unwrap().to_dense();
        assert!((once - twice).norm() < 1e-13);
    }

    #[test]
    fn cone_at_origin_is_best_rank_one() {
        let x = VarietyPoint::zeros(2, 2, 1).unwrap();
        let (g, gm) = project_cone(&x, &Ambient::Dense(dmatrix![3.0, 0.0; 0.0, 1.0])).unwrap();
        assert!((gm - 3.0).abs() < 1e-14);
        assert!((g.to_dense() - dmatrix![3.0, 0.0; 0.0, 0.0]).norm() < 1e-14);
    }

    #[test]
    fn full_rank_point_has_no_perp_part() {
        let x = point(dmatrix![2.0, 0.0, 1.0; 0.0, 1.0, 0.0], 2);
        let f = Ambient::Dense(dmatrix![1.0, 2.0, 3.0; 4.0, 5.0, 6.0]);
        let (g, _) = project_cone(&x, &f).unwrap();
        assert_eq!(g.perp().rank(), 0);
        let t = project_tangent_space(&x, &f).unwrap();
        assert!((g.to_dense() - t.to_dense()).norm() < 1e-14);
    }

    #[test]
    fn lower_bound_worked_values() {
        let x = VarietyPoint::zeros(2, 2, 1).unwrap();
        let f = Ambient::Dense(dmatrix![3.0, 0.0; 0.0, 1.0]);
        let lb = g_lower_bound(&x, &f);
        assert!((lb - 5f64.sqrt()).abs() < 1e-14);
        assert!((lb - 2.2360).abs() < 1e-4);

        let full = VarietyPoint::zeros(2, 2, 2).unwrap();
        assert!((g_lower_bound(&full, &f) - 10f64.sqrt()).abs() < 1e-14);

        let at_budget = point(e11(), 1);
        assert_eq!(g_lower_bound(&at_budget, &f), 0.0);
    }

    #[test]
    fn retract_worked_example() {
        // X + Ξ = [[2,1],[1,0]] has eigenvalues 1 ± √2
        let x = point(dmatrix![2.0, 0.0; 0.0, 0.0], 1);
        let xi = project_tangent_space(&x, &Ambient::Dense(dmatrix![0.0, 1.0; 1.0, 0.0])).unwrap();
        let r = retract(&x, &xi, 1.0).unwrap();
        let err = (r.to_dense() - dmatrix![2.0, 1.0; 1.0, 0.0]).norm();
        assert!((err - (2f64.sqrt() - 1.0)).abs() < 1e-14);
        assert!(err <= FRAC_1_SQRT_2 * xi.norm());
    }

    #[test]
    fn zero_step_and_negative_step() {
        let x = point(e11(), 1);
        let xi = ConeTangentVector::zeros(&x);
        assert!((retract(&x, &xi, 1.0).unwrap().to_dense() - e11()).norm() < 1e-15);
        assert!(matches!(retract(&x, &xi, -1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(affine_step(&x, &xi, f64::NAN), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn symmetric_tie_picks_first_candidate() {
        let x = point(e11(), 1);
        let f = Ambient::Dense(dmatrix![1.0, 2.0; 2.0, 5.0]);
        let (g, _) = project_cone(&x, &f).unwrap();
        assert_eq!(g.up_norm_sq(), g.vp_norm_sq());
        let chosen = choose_flat_direction_of(&g);
        assert!(chosen.up().is_none() && chosen.vp().is_some());
    }

    #[test]
    fn one_sided_gradient_keeps_full_projection() {
        // F = [[1, 2], [0, 0]] lives in U ⊗ R^n for U = e₁: no Uₚ block
        let x = point(e11(), 1);
        let f = Ambient::Dense(dmatrix![1.0, 2.0; 0.0, 0.0]);
        let (g, _) = project_cone(&x, &f).unwrap();
        let chosen = choose_flat_direction(&x, &f).unwrap();
        assert!(chosen.up().is_none());
        assert!((chosen.to_dense() - g.to_dense()).norm() < 1e-15);
    }

    #[test]
    fn core_only_gradient_gives_equal_partials() {
        let x = point(e11(), 1);
        let f = Ambient::Dense(dmatrix![3.0, 0.0; 0.0, 0.0]);
        let (g1, g2) = partial_directions(&x, &f).unwrap();
        assert!((g1.to_dense() - dmatrix![3.0, 0.0; 0.0, 0.0]).norm() < 1e-15);
        assert!((g2.to_dense() - g1.to_dense()).norm() < 1e-15);
    }

    #[test]
    fn affine_step_rejects_non_flat_direction() {
        let x = point(dmatrix![2.0, 0.0; 0.0, 0.0], 1);
        let xi = project_tangent_space(&x, &Ambient::Dense(dmatrix![0.0, 1.0; 1.0, 0.0])).unwrap();
        assert!(affine_step(&x, &xi, 1.0).is_err());
        assert!(affine_step(&x, &xi.without_up(), 1.0).is_ok());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let x = point(e11(), 1);
        assert!(matches!(
            project_cone(&x, &Ambient::Dense(DMatrix::zeros(3, 2))),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
