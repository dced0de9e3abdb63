//! Energy densities and the Nitsche constraint term.
//!
//! Integrands see the unknown fields only through a [`Jet`]: the values and
//! partial derivatives of every field component at one quadrature point.
//! Densities are written once, generically over [`Scalar`], and evaluated
//! either in plain `f64` or in hyper-dual arithmetic by the assembler.

use crate::autodiff::{HyperDual, Scalar};
use crate::elements::DerivLayout;
use crate::error::{Error, Result};
use crate::mesh::Point;

/// Storage description of one slot (one field seen by a term) in a jet.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotShape {
    pub offset: usize,
    pub ncomp: usize,
    pub layout: DerivLayout,
}

impl SlotShape {
    /// Builds consecutive slot shapes for `(ncomp, dim, order)` triples.
    pub fn sequence(slots: &[(usize, usize, usize)]) -> Vec<SlotShape> {
        let mut offset = 0;
        slots
            .iter()
            .map(|&(ncomp, dim, order)| {
                let layout = DerivLayout::new(dim, order);
                let s = SlotShape { offset, ncomp, layout };
                offset += ncomp * s.layout.len();
                s
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.ncomp * self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ncomp == 0
    }

    #[inline]
    pub fn index(&self, comp: usize, alpha: [u8; 3]) -> usize {
        self.offset + comp * self.layout.len() + self.layout.index(alpha)
    }
}

/// Field values and derivatives at one point.
#[derive(Debug, Clone, Copy)]
pub struct Jet<'a, S> {
    pub shapes: &'a [SlotShape],
    pub data: &'a [S],
}

impl<S: Scalar> Jet<'_, S> {
    #[inline]
    pub fn d(&self, slot: usize, comp: usize, alpha: [u8; 3]) -> S {
        self.data[self.shapes[slot].index(comp, alpha)]
    }

    #[inline]
    pub fn value(&self, slot: usize, comp: usize) -> S {
        self.d(slot, comp, [0, 0, 0])
    }

    #[inline]
    pub fn grad(&self, slot: usize, comp: usize, i: usize) -> S {
        self.d(slot, comp, DerivLayout::alpha_of(&[i]))
    }

    #[inline]
    pub fn second(&self, slot: usize, comp: usize, i: usize, j: usize) -> S {
        self.d(slot, comp, DerivLayout::alpha_of(&[i, j]))
    }

    #[inline]
    pub fn third(&self, slot: usize, comp: usize, i: usize, j: usize, k: usize) -> S {
        self.d(slot, comp, DerivLayout::alpha_of(&[i, j, k]))
    }

    pub fn dim(&self, slot: usize) -> usize {
        self.shapes[slot].layout.dim
    }

    pub fn laplacian(&self, slot: usize, comp: usize) -> S {
        let mut s = S::zero();
        for i in 0..self.dim(slot) {
            s += self.second(slot, comp, i, i);
        }
        s
    }

    pub fn bilaplacian(&self, slot: usize, comp: usize) -> S {
        let dim = self.dim(slot);
        let mut s = S::zero();
        for i in 0..dim {
            for j in 0..dim {
                s += self.d(slot, comp, DerivLayout::alpha_of(&[i, i, j, j]));
            }
        }
        s
    }

    /// Displacement gradient `∂u_i/∂x_j` of a vector slot.
    pub fn vector_grad(&self, slot: usize) -> [[S; 3]; 3] {
        let dim = self.dim(slot);
        let mut g = [[S::zero(); 3]; 3];
        for (i, row) in g.iter_mut().enumerate().take(self.shapes[slot].ncomp) {
            for (j, e) in row.iter_mut().enumerate().take(dim) {
                *e = self.grad(slot, i, j);
            }
        }
        g
    }
}

/// Geometric data at a quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointContext {
    pub x: Point,
    /// Outward unit normal of the facet for boundary terms, zero otherwise.
    pub normal: Point,
    /// Diameter of the cell carrying the point.
    pub h: f64,
    pub cell: usize,
}

/// A volume energy density.
pub trait Density: Send + Sync {
    fn eval<S: Scalar>(&self, jet: &Jet<S>, ctx: &PointContext) -> S;
}

/// Constraint function, multiplier expression and scaling of a Nitsche term.
pub trait Constraint: Send + Sync {
    fn beta<S: Scalar>(&self, jet: &Jet<S>, ctx: &PointContext) -> S;
    fn lambda<S: Scalar>(&self, jet: &Jet<S>, ctx: &PointContext) -> S;
    fn gamma(&self, ctx: &PointContext) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Inequality,
    Equality,
    /// Multiplier terms removed; `one_sided` penalizes only `β < 0`.
    Penalty {
        one_sided: bool,
    },
}

impl ConstraintKind {
    pub fn is_inequality(self) -> bool {
        matches!(self, ConstraintKind::Inequality | ConstraintKind::Penalty { one_sided: true })
    }
}

/// The Nitsche energy density for one constraint evaluation.
pub fn nitsche_density<S: Scalar>(kind: ConstraintKind, beta: S, lambda: S, gamma: f64) -> Result<S> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::InvalidParameter(format!("stabilization γ must be positive, got {gamma}")));
    }
    let half = 0.5 * gamma;
    let shifted = |l: S| l - beta.scale(1.0 / gamma);
    Ok(match kind {
        ConstraintKind::Inequality => {
            let p = shifted(lambda).max_plus();
            (p * p - lambda * lambda).scale(half)
        }
        ConstraintKind::Equality => {
            let p = shifted(lambda);
            (p * p - lambda * lambda).scale(half)
        }
        ConstraintKind::Penalty { one_sided } => {
            let mut p = shifted(S::zero());
            if one_sided {
                p = p.max_plus();
            }
            (p * p).scale(half)
        }
    })
}

/// The eliminated discrete multiplier that the Nitsche term represents.
pub fn recovered_multiplier(kind: ConstraintKind, beta: f64, lambda: f64, gamma: f64) -> f64 {
    match kind {
        ConstraintKind::Inequality => (lambda - beta / gamma).max(0.0),
        ConstraintKind::Equality => lambda - beta / gamma,
        ConstraintKind::Penalty { one_sided: true } => (-beta / gamma).max(0.0),
        ConstraintKind::Penalty { one_sided: false } => -beta / gamma,
    }
}

/// Object-safe view of an integrand, as stored by the assembler.
pub trait Integrand: Send + Sync {
    fn energy(&self, jet: &Jet<f64>, ctx: &PointContext) -> Result<f64>;
    fn energy_hd(&self, jet: &Jet<HyperDual>, ctx: &PointContext) -> Result<HyperDual>;
    /// `(β, λ_h)` for constraint terms.
    fn constraint_values(&self, _jet: &Jet<f64>, _ctx: &PointContext) -> Option<(f64, f64)> {
        None
    }
    fn kind(&self) -> Option<ConstraintKind> {
        None
    }
}

/// Wraps a [`Density`] as an integrand.
pub struct Volume<D>(pub D);

impl<D: Density> Integrand for Volume<D> {
    fn energy(&self, jet: &Jet<f64>, ctx: &PointContext) -> Result<f64> {
        Ok(self.0.eval(jet, ctx))
    }

    fn energy_hd(&self, jet: &Jet<HyperDual>, ctx: &PointContext) -> Result<HyperDual> {
        Ok(self.0.eval(jet, ctx))
    }
}

/// A constraint together with the way it is enforced.
pub struct ConstraintTriple<C> {
    pub constraint: C,
    pub kind: ConstraintKind,
}

impl<C: Constraint> ConstraintTriple<C> {
    fn density<S: Scalar>(&self, jet: &Jet<S>, ctx: &PointContext) -> Result<S> {
        let beta = self.constraint.beta(jet, ctx);
        let lambda = match self.kind {
            ConstraintKind::Penalty { .. } => S::zero(),
            _ => self.constraint.lambda(jet, ctx),
        };
        nitsche_density(self.kind, beta, lambda, self.constraint.gamma(ctx))
    }
}

impl<C: Constraint> Integrand for ConstraintTriple<C> {
    fn energy(&self, jet: &Jet<f64>, ctx: &PointContext) -> Result<f64> {
        self.density(jet, ctx)
    }

    fn energy_hd(&self, jet: &Jet<HyperDual>, ctx: &PointContext) -> Result<HyperDual> {
        self.density(jet, ctx)
    }

    fn constraint_values(&self, jet: &Jet<f64>, ctx: &PointContext) -> Option<(f64, f64)> {
        let beta = self.constraint.beta(jet, ctx);
        let lambda = self.constraint.lambda(jet, ctx);
        Some((beta, recovered_multiplier(self.kind, beta, lambda, self.constraint.gamma(ctx))))
    }

    fn kind(&self) -> Option<ConstraintKind> {
        Some(self.kind)
    }
}

/// `½ κ |∇u|² − f u`
pub fn poisson_density<S: Scalar>(grad_u: &[S], kappa: f64, f: f64, u: S) -> S {
    let mut g2 = S::zero();
    for &g in grad_u {
        g2 += g * g;
    }
    g2.scale(0.5 * kappa) - u.scale(f)
}

/// `½ σ(u):ε(u) − f·u` for isotropic linear elasticity in `dim` dimensions.
pub fn elasticity_density<S: Scalar>(dim: usize, grad_u: &[[S; 3]; 3], mu: f64, lambda: f64, f: &[f64], u: &[S]) -> S {
    let eps = |i: usize, j: usize| (grad_u[i][j] + grad_u[j][i]).scale(0.5);
    let mut tr = S::zero();
    let mut ee = S::zero();
    for i in 0..dim {
        tr += grad_u[i][i];
        for j in 0..dim {
            let e = eps(i, j);
            ee += e * e;
        }
    }
    // σ:ε = 2μ ε:ε + λ (tr ε)²
    let mut e = (ee.scale(2.0 * mu) + (tr * tr).scale(lambda)).scale(0.5);
    for k in 0..dim {
        e -= u[k].scale(f[k]);
    }
    e
}

/// Stress `σ_ij` from a displacement gradient.
pub fn stress<S: Scalar>(dim: usize, grad_u: &[[S; 3]; 3], mu: f64, lambda: f64, i: usize, j: usize) -> S {
    let mut tr = S::zero();
    for k in 0..dim {
        tr += grad_u[k][k];
    }
    let mut s = (grad_u[i][j] + grad_u[j][i]).scale(mu);
    if i == j {
        s += tr.scale(lambda);
    }
    s
}

/// `½ Σ_ij (∂²u/∂x_i∂x_j)² − f u`
pub fn plate_density<S: Scalar>(hess_u: &[[S; 2]; 2], f: f64, u: S) -> S {
    let mut s = S::zero();
    for row in hess_u {
        for &h in row {
            s += h * h;
        }
    }
    s.scale(0.5) - u.scale(f)
}

/// Kirchhoff shear `Q·n + ∂M_ns/∂s` with moment `M = −∇²u`, expanded in
/// the third derivatives `d3(i, j, k) = ∂³u/∂x_i∂x_j∂x_k`. The result does not
/// depend on the orientation of `s`.
pub fn kirchhoff_shear<S: Scalar>(d3: impl Fn(usize, usize, usize) -> S, n: &[f64; 2], s: &[f64; 2]) -> S {
    let mut k = S::zero();
    for i in 0..2 {
        for j in 0..2 {
            k -= d3(i, j, j).scale(n[i]);
            for l in 0..2 {
                k -= d3(i, j, l).scale(n[i] * s[j] * s[l]);
            }
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::eval_grad_hess;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nitsche_examples() {
        let g = 0.3;
        assert_eq!(nitsche_density(ConstraintKind::Inequality, 0.0, 0.0, g).unwrap(), 0.0);
        let v = nitsche_density(ConstraintKind::Inequality, g * 2.0, 2.0, g).unwrap();
        assert!((v + 2.0 * g).abs() < 1e-15);
        assert_eq!(nitsche_density(ConstraintKind::Equality, 0.0, 1.0, 0.5).unwrap(), 0.0);
        assert!(matches!(nitsche_density(ConstraintKind::Equality, 0.0, 1.0, 0.0), Err(Error::InvalidParameter(_))));
        assert!(nitsche_density(ConstraintKind::Equality, 0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn penalty_degenerations() {
        let g = 0.25;
        for beta in [-0.7, 0.0, 0.4] {
            let two = nitsche_density(ConstraintKind::Penalty { one_sided: false }, beta, 9.0, g).unwrap();
            assert!((two - beta * beta / (2.0 * g)).abs() < 1e-14);
            let one = nitsche_density(ConstraintKind::Penalty { one_sided: true }, beta, 9.0, g).unwrap();
            let neg = beta.min(0.0);
            assert!((one - neg * neg / (2.0 * g)).abs() < 1e-14);
        }
    }

    #[test]
    fn equality_with_zero_residual_is_inert() {
        for lambda in [-3.0, 0.0, 0.5, 7.0] {
            assert_eq!(nitsche_density(ConstraintKind::Equality, 0.0, lambda, 0.1).unwrap(), 0.0);
        }
    }

    #[test]
    fn multiplier_signs() {
        assert_eq!(recovered_multiplier(ConstraintKind::Inequality, 1.0, 0.2, 0.5), 0.0);
        assert!((recovered_multiplier(ConstraintKind::Inequality, 0.0, 0.7, 0.5) - 0.7).abs() < 1e-15);
        assert_eq!(recovered_multiplier(ConstraintKind::Equality, 1.0, 0.2, 0.5), 0.2 - 2.0);
    }

    #[test]
    fn poisson_examples() {
        assert_eq!(poisson_density(&[1.0, 0.0], 1.0, 0.0, 0.0), 0.5);
        assert_eq!(poisson_density(&[0.0, 0.0], 1.0, 2.0, 3.0), -6.0);
        assert_eq!(poisson_density(&[1.0, 1.0], 2.0, 0.0, 0.0), 2.0);
    }

    fn mat(rows: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        rows
    }

    #[test]
    fn elasticity_examples() {
        let id = mat([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!((elasticity_density(3, &id, 1.0, 1.0, &[0.0; 3], &[0.0; 3]) - 7.5).abs() < 1e-14);
        let rot = mat([[0.0, 0.3, -0.2], [-0.3, 0.0, 0.5], [0.2, -0.5, 0.0]]);
        assert!(elasticity_density(3, &rot, 1.0, 1.0, &[0.0; 3], &[0.0; 3]).abs() < 1e-15);
        let shear = mat([[0.0, 1.0, 0.0], [0.0; 3], [0.0; 3]]);
        assert!((elasticity_density(3, &shear, 1.0, 0.0, &[0.0; 3], &[0.0; 3]) - 0.5).abs() < 1e-15);
        // Body load.
        assert_eq!(elasticity_density(2, &[[0.0; 3]; 3], 1.0, 1.0, &[0.0, 2.0], &[0.0, 3.0]), -6.0);
        // σ = 2μ ε + λ tr ε I
        let g = mat([[0.1, 0.2, 0.0], [0.0, -0.3, 0.0], [0.0; 3]]);
        assert!((stress(2, &g, 1.5, 0.5, 0, 0) - (3.0 * 0.1 + 0.5 * (-0.2))).abs() < 1e-15);
        assert!((stress(2, &g, 1.5, 0.5, 0, 1) - 1.5 * 0.2).abs() < 1e-15);
    }

    #[test]
    fn plate_examples() {
        assert_eq!(plate_density(&[[0.0; 2]; 2], 2.0, 1.5), -3.0);
        assert_eq!(plate_density(&[[1.0, 0.0], [0.0, 1.0]], 0.0, 0.0), 1.0);
        assert_eq!(plate_density(&[[0.0, 1.0], [1.0, 0.0]], 0.0, 0.0), 1.0);
    }

    /// Kirchhoff shear built directly from its mechanical definition by
    /// finite differences of the moment field, for a polynomial deflection.
    fn shear_oracle(hess: impl Fn(f64, f64) -> [[f64; 2]; 2], x: [f64; 2], n: [f64; 2], s: [f64; 2]) -> f64 {
        let m = |x: f64, y: f64| {
            let h = hess(x, y);
            [[-h[0][0], -h[0][1]], [-h[1][0], -h[1][1]]]
        };
        let e = 1e-4;
        let dm = |axis: usize| {
            let (mut p, mut q) = (x, x);
            p[axis] += e;
            q[axis] -= e;
            let (a, b) = (m(p[0], p[1]), m(q[0], q[1]));
            [
                [(a[0][0] - b[0][0]) / (2.0 * e), (a[0][1] - b[0][1]) / (2.0 * e)],
                [(a[1][0] - b[1][0]) / (2.0 * e), (a[1][1] - b[1][1]) / (2.0 * e)],
            ]
        };
        let (dx, dy) = (dm(0), dm(1));
        let q = [dx[0][0] + dy[0][1], dx[1][0] + dy[1][1]];
        let mns = |x: f64, y: f64| {
            let mm = m(x, y);
            (0..2).map(|i| (0..2).map(|j| n[i] * mm[i][j] * s[j]).sum::<f64>()).sum::<f64>()
        };
        let dmns = (mns(x[0] + e * s[0], x[1] + e * s[1]) - mns(x[0] - e * s[0], x[1] - e * s[1])) / (2.0 * e);
        q[0] * n[0] + q[1] * n[1] + dmns
    }

    fn cubic_third(c: &[f64; 4]) -> impl Fn(usize, usize, usize) -> f64 + '_ {
        // u = c0 x³ + c1 x²y + c2 xy² + c3 y³
        move |i, j, k| match [i, j, k].iter().filter(|&&a| a == 1).count() {
            0 => 6.0 * c[0],
            1 => 2.0 * c[1],
            2 => 2.0 * c[2],
            _ => 6.0 * c[3],
        }
    }

    #[test]
    fn kirchhoff_reference_values() {
        let n = [0.0, -1.0];
        let s = [1.0, 0.0];
        // u = x³
        assert_eq!(kirchhoff_shear(cubic_third(&[1.0, 0.0, 0.0, 0.0]), &n, &s), 0.0);
        // u = y³
        assert_eq!(kirchhoff_shear(cubic_third(&[0.0, 0.0, 0.0, 1.0]), &n, &s), 6.0);
        assert_eq!(kirchhoff_shear(cubic_third(&[0.0, 0.0, 0.0, 1.0]), &n, &[-1.0, 0.0]), 6.0);
        let o = shear_oracle(|_, y| [[0.0, 0.0], [0.0, 6.0 * y]], [0.3, 0.0], n, s);
        assert!((o - 6.0).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn kirchhoff_matches_oracle(c in proptest::array::uniform4(-2.0f64..2.0), theta in 0.0f64..std::f64::consts::TAU, x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let n = [theta.cos(), theta.sin()];
            let s = [-n[1], n[0]];
            let hess = |x: f64, y: f64| {
                let uxx = 6.0 * c[0] * x + 2.0 * c[1] * y;
                let uxy = 2.0 * c[1] * x + 2.0 * c[2] * y;
                let uyy = 2.0 * c[2] * x + 6.0 * c[3] * y;
                [[uxx, uxy], [uxy, uyy]]
            };
            let k = kirchhoff_shear(cubic_third(&c), &n, &s);
            let o = shear_oracle(hess, [x, y], n, s);
            prop_assert!((k - o).abs() < 1e-6);
        }
    }

    /// Each source density is quadratic in its jet: the hyper-dual Hessian
    /// is the same at random points.
    #[test]
    fn densities_are_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let elastic = |z: &[HyperDual]| {
            let mut g = [[HyperDual::default(); 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    g[i][j] = z[3 + 3 * i + j];
                }
            }
            elasticity_density(3, &g, 1.3, 0.7, &[0.1, 0.2, 0.3], &z[0..3])
        };
        let plate = |z: &[HyperDual]| plate_density(&[[z[1], z[2]], [z[2], z[3]]], 5.0, z[0]);
        let poisson = |z: &[HyperDual]| poisson_density(&z[1..3], 2.5, 1.0, z[0]);
        let cases: [(&dyn Fn(&[HyperDual]) -> HyperDual, usize); 3] = [(&elastic, 12), (&plate, 4), (&poisson, 3)];
        for (f, n) in cases {
            let mut first: Option<Vec<f64>> = None;
            for _ in 0..10 {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
                let (_, _, h) = eval_grad_hess(f, &x).unwrap();
                match &first {
                    None => first = Some(h),
                    Some(h0) => {
                        for (a, b) in h0.iter().zip(&h) {
                            assert!((a - b).abs() <= 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn jet_accessors() {
        let shapes = SlotShape::sequence(&[(1, 2, 4), (2, 3, 1)]);
        assert_eq!(shapes[1].offset, 15);
        let mut data = vec![0.0; 15 + 8];
        let l = &shapes[0].layout;
        data[l.index([4, 0, 0])] = 1.0;
        data[l.index([2, 2, 0])] = 2.0;
        data[l.index([0, 4, 0])] = 3.0;
        data[l.index([2, 0, 0])] = 4.0;
        data[l.index([0, 2, 0])] = 5.0;
        data[shapes[1].index(1, [0, 0, 1])] = 9.0;
        let jet = Jet { shapes: &shapes, data: &data };
        assert_eq!(jet.bilaplacian(0, 0), 1.0 + 2.0 * 2.0 + 3.0);
        assert_eq!(jet.laplacian(0, 0), 9.0);
        assert_eq!(jet.vector_grad(1)[1][2], 9.0);
    }
}
