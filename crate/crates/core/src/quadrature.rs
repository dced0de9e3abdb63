//! Gauss rules on the reference interval `[0,1]`, triangle
//! `{ξ,η ≥ 0, ξ+η ≤ 1}`, square `[0,1]²` and cube `[0,1]³`.

use crate::error::{Error, Result};
use crate::mesh::{CellKind, Point};

/// Highest polynomial degree for which a rule is published.
pub const MAX_DEGREE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefShape {
    Interval,
    Triangle,
    Quadrilateral,
    Hexahedron,
}

impl RefShape {
    pub fn measure(self) -> f64 {
        match self {
            RefShape::Triangle => 0.5,
            _ => 1.0,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            RefShape::Interval => 1,
            RefShape::Triangle | RefShape::Quadrilateral => 2,
            RefShape::Hexahedron => 3,
        }
    }
}

impl From<CellKind> for RefShape {
    fn from(k: CellKind) -> Self {
        match k {
            CellKind::Triangle => RefShape::Triangle,
            CellKind::Quadrilateral => RefShape::Quadrilateral,
            CellKind::Hexahedron => RefShape::Hexahedron,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub shape: RefShape,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// Gauss–Legendre nodes and weights on `[0,1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, refined by Newton on P_n.
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        x[n - 1 - i] = 0.5 * (1.0 + t);
        w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// A rule on `shape` integrating polynomials of total degree `degree`
/// exactly. Tensor rules are exact in each variable separately up to the
/// reported degree.
pub fn rule_for(shape: RefShape, degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!("quadrature degree {degree} exceeds the supported maximum {MAX_DEGREE}")));
    }
    let n = degree / 2 + 1;
    let rule = match shape {
        RefShape::Interval => {
            let (x, w) = gauss_legendre(n);
            QuadratureRule { shape, points: x.iter().map(|&t| [t, 0.0, 0.0]).collect(), weights: w, exact_degree: 2 * n - 1 }
        }
        RefShape::Quadrilateral | RefShape::Hexahedron => {
            let (x, w) = gauss_legendre(n);
            let dim = shape.dim();
            let total = n.pow(dim as u32);
            let mut points = Vec::with_capacity(total);
            let mut weights = Vec::with_capacity(total);
            for idx in 0..total {
                let mut p = [0.0; 3];
                let mut wt = 1.0;
                let mut r = idx;
                for k in 0..dim {
                    p[k] = x[r % n];
                    wt *= w[r % n];
                    r /= n;
                }
                points.push(p);
                weights.push(wt);
            }
            QuadratureRule { shape, points, weights, exact_degree: 2 * n - 1 }
        }
        RefShape::Triangle => triangle_rule(degree),
    };
    Ok(rule)
}

fn triangle_rule(degree: usize) -> QuadratureRule {
    match degree {
        0 | 1 => {
            QuadratureRule { shape: RefShape::Triangle, points: vec![[1.0 / 3.0, 1.0 / 3.0, 0.0]], weights: vec![0.5], exact_degree: 1 }
        }
        2 => QuadratureRule {
            shape: RefShape::Triangle,
            points: vec![[1.0 / 6.0, 1.0 / 6.0, 0.0], [2.0 / 3.0, 1.0 / 6.0, 0.0], [1.0 / 6.0, 2.0 / 3.0, 0.0]],
            weights: vec![1.0 / 6.0; 3],
            exact_degree: 2,
        },
        _ => {
            // Collapsed Gauss: ξ = u, η = (1 - u) v with Jacobian (1 - u).
            let n = (degree + 3) / 2;
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let u = x[i];
                    points.push([u, (1.0 - u) * x[j], 0.0]);
                    weights.push(w[i] * w[j] * (1.0 - u));
                }
            }
            QuadratureRule { shape: RefShape::Triangle, points, weights, exact_degree: 2 * n - 2 }
        }
    }
}
