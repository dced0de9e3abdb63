//! Hyper-dual numbers: exact first and second derivatives by forward
//! propagation along two seed directions.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// `v + d1 ε₁ + d2 ε₂ + d12 ε₁ε₂` with `ε₁² = ε₂² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperDual {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

impl HyperDual {
    pub const fn new(v: f64, d1: f64, d2: f64, d12: f64) -> HyperDual {
        HyperDual { v, d1, d2, d12 }
    }

    pub const fn constant(v: f64) -> HyperDual {
        HyperDual { v, d1: 0.0, d2: 0.0, d12: 0.0 }
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.v`.
    #[inline]
    fn chain(self, f: f64, df: f64, ddf: f64) -> HyperDual {
        HyperDual { v: f, d1: df * self.d1, d2: df * self.d2, d12: df * self.d12 + ddf * (self.d1 * self.d2) }
    }

    pub fn sqrt(self) -> HyperDual {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn powi(self, n: i32) -> HyperDual {
        let nf = n as f64;
        let f = self.v.powi(n);
        let df = if n == 0 { 0.0 } else { nf * self.v.powi(n - 1) };
        let ddf = if n == 0 || n == 1 { 0.0 } else { nf * (nf - 1.0) * self.v.powi(n - 2) };
        self.chain(f, df, ddf)
    }

    pub fn powf(self, p: f64) -> HyperDual {
        let f = self.v.powf(p);
        self.chain(f, p * self.v.powf(p - 1.0), p * (p - 1.0) * self.v.powf(p - 2.0))
    }

    pub fn exp(self) -> HyperDual {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> HyperDual {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn sin(self) -> HyperDual {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> HyperDual {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.d1.is_finite() && self.d2.is_finite() && self.d12.is_finite()
    }
}

/// `max(x, 0)`; the derivative at the kink `x.v == 0` is taken as zero.
pub fn max_plus(x: HyperDual) -> HyperDual {
    if x.v > 0.0 {
        x
    } else {
        HyperDual::constant(0.0)
    }
}

impl Add for HyperDual {
    type Output = HyperDual;
    #[inline]
    fn add(self, o: HyperDual) -> HyperDual {
        HyperDual::new(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2, self.d12 + o.d12)
    }
}

impl Sub for HyperDual {
    type Output = HyperDual;
    #[inline]
    fn sub(self, o: HyperDual) -> HyperDual {
        HyperDual::new(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2, self.d12 - o.d12)
    }
}

impl Mul for HyperDual {
    type Output = HyperDual;
    #[inline]
    fn mul(self, o: HyperDual) -> HyperDual {
        HyperDual::new(
            self.v * o.v,
            self.v * o.d1 + self.d1 * o.v,
            self.v * o.d2 + self.d2 * o.v,
            (self.v * o.d12 + self.d12 * o.v) + (self.d1 * o.d2 + self.d2 * o.d1),
        )
    }
}

impl Div for HyperDual {
    type Output = HyperDual;
    #[inline]
    fn div(self, o: HyperDual) -> HyperDual {
        let inv = 1.0 / o.v;
        self * o.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }
}

impl Neg for HyperDual {
    type Output = HyperDual;
    #[inline]
    fn neg(self) -> HyperDual {
        HyperDual::new(-self.v, -self.d1, -self.d2, -self.d12)
    }
}

impl AddAssign for HyperDual {
    #[inline]
    fn add_assign(&mut self, o: HyperDual) {
        *self = *self + o;
    }
}

impl SubAssign for HyperDual {
    #[inline]
    fn sub_assign(&mut self, o: HyperDual) {
        *self = *self - o;
    }
}

impl MulAssign for HyperDual {
    #[inline]
    fn mul_assign(&mut self, o: HyperDual) {
        *self = *self * o;
    }
}

/// Arithmetic shared by `f64` and [`HyperDual`], so densities can be written
/// once and evaluated either plainly or with derivatives.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Send
    + Sync
    + 'static
{
    fn cst(c: f64) -> Self;
    fn value(&self) -> f64;
    fn max_plus(self) -> Self;
    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn scale(self, c: f64) -> Self {
        self * Self::cst(c)
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(c: f64) -> f64 {
        c
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn max_plus(self) -> f64 {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    fn sqrt(self) -> f64 {
        f64::sqrt(self)
    }
}

impl Scalar for HyperDual {
    #[inline]
    fn cst(c: f64) -> HyperDual {
        HyperDual::constant(c)
    }
    #[inline]
    fn value(&self) -> f64 {
        self.v
    }
    #[inline]
    fn max_plus(self) -> HyperDual {
        max_plus(self)
    }
    fn sqrt(self) -> HyperDual {
        HyperDual::sqrt(self)
    }
}

/// Value, gradient and row-major Hessian of `f` at `x`, using one seeded
/// evaluation per unordered index pair. The Hessian is symmetric by
/// construction. Non-finite output is reported as `Err` with the value.
pub fn eval_grad_hess<F>(f: F, x: &[f64]) -> std::result::Result<(f64, Vec<f64>, Vec<f64>), f64>
where
    F: Fn(&[HyperDual]) -> HyperDual,
{
    let n = x.len();
    let mut args: Vec<HyperDual> = x.iter().map(|&v| HyperDual::constant(v)).collect();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let mut value = f(&args).v;
    if !value.is_finite() {
        return Err(value);
    }
    for i in 0..n {
        for j in i..n {
            args[i].d1 = 1.0;
            args[j].d2 = 1.0;
            let r = f(&args);
            args[i].d1 = 0.0;
            args[j].d2 = 0.0;
            if !r.is_finite() {
                return Err(r.v);
            }
            if i == j {
                grad[i] = r.d1;
                value = r.v;
            }
            hess[i * n + j] = r.d12;
            hess[j * n + i] = r.d12;
        }
    }
    Ok((value, grad, hess))
}
