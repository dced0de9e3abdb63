//! Semismooth Newton iteration, sparse direct solves and condition numbers.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::assembly::{Problem, SparseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Always take the full step.
    Fixed,
    /// Keep the full step when it lowers the energy or the residual,
    /// otherwise shrink it while the energy increases.
    Backtracking { shrink: f64, max_halvings: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol_residual: f64,
    pub tol_step: f64,
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Estimate the condition number of every Jacobian that is factorized.
    pub track_condition: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol_residual: 1e-9,
            tol_step: 1e-10,
            max_iters: 50,
            step_rule: StepRule::Backtracking { shrink: 0.5, max_halvings: 8 },
            track_condition: false,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0 && self.tol_step > 0.0) {
            return Err(Error::InvalidParameter("Newton tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if let StepRule::Backtracking { shrink, .. } = self.step_rule {
            if !(shrink > 0.0 && shrink < 1.0) {
                return Err(Error::InvalidParameter(format!("backtracking factor {shrink} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Residual norm after each iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub final_energy: f64,
    /// Condition number of the Jacobian solved in each iteration.
    pub condition_estimates: Option<Vec<f64>>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimizes the problem's energy from `initial` by solving `J w = −r` and
/// updating `u ← u + α w` until the residual or the relative step is small.
pub fn newton_solve(problem: &Problem, initial: &[f64], cfg: &NewtonConfig) -> Result<(Vec<f64>, NewtonReport)> {
    cfg.validate()?;
    if initial.len() != problem.n_dofs() {
        return Err(Error::InvalidArgument(format!("initial state has {} entries, problem has {} DOFs", initial.len(), problem.n_dofs())));
    }
    let mut u = initial.to_vec();
    let mut current = problem.assemble(&u)?;
    let mut report = NewtonReport {
        iterations: 0,
        residual_history: Vec::new(),
        converged: norm(&current.residual) <= cfg.tol_residual,
        final_energy: current.energy,
        condition_estimates: cfg.track_condition.then(Vec::new),
    };
    let mut increases = 0;
    while !report.converged && report.iterations < cfg.max_iters {
        let k = report.iterations + 1;
        if let Some(c) = report.condition_estimates.as_mut() {
            c.push(condition_estimate(&current.jacobian).unwrap_or(f64::NAN));
        }
        let rhs: Vec<f64> = current.residual.iter().map(|r| -r).collect();
        let w = linear_solve(&current.jacobian, &rhs).map_err(|e| match e {
            Error::LinearSolveFailure { reason, .. } => Error::LinearSolveFailure { iteration: k, reason },
            other => other,
        })?;
        let e0 = current.energy;
        let r0 = norm(&current.residual);
        let slack = 1e-12 * (e0.abs() + 1.0);
        let mut alpha = 1.0;
        let mut trial = u.clone();
        problem.update(&mut trial, &w, alpha);
        let mut next = problem.assemble(&trial)?;
        match cfg.step_rule {
            StepRule::Fixed => {
                if next.energy > e0 + slack {
                    increases += 1;
                    if increases >= 5 {
                        return Err(Error::Divergence { iterations: k, increases });
                    }
                } else {
                    increases = 0;
                }
            }
            StepRule::Backtracking { shrink, max_halvings } => {
                // The Nitsche energy need not be convex, so a full step that
                // reduces the residual is kept even if the energy rises.
                if next.energy > e0 + slack && norm(&next.residual) >= r0 {
                    let mut halvings = 0;
                    let mut e = next.energy;
                    while e > e0 + slack && halvings < max_halvings {
                        alpha *= shrink;
                        trial.copy_from_slice(&u);
                        problem.update(&mut trial, &w, alpha);
                        e = problem.energy(&trial)?;
                        halvings += 1;
                    }
                    next = problem.assemble(&trial)?;
                }
            }
        }
        let step = alpha * norm(&w);
        let scale = norm(&problem.restrict(&trial)).max(1.0);
        u = trial;
        current = next;
        let r = norm(&current.residual);
        report.iterations = k;
        report.residual_history.push(r);
        report.final_energy = current.energy;
        report.converged = r <= cfg.tol_residual || step <= cfg.tol_step * scale;
    }
    Ok((u, report))
}

fn to_faer(a: &SparseMatrix) -> Result<SparseColMat<usize, f64>> {
    let t: Vec<Triplet<usize, usize, f64>> = a.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    SparseColMat::try_new_from_triplets(a.n, a.n, &t).map_err(|e| Error::LinearSolveFailure { iteration: 0, reason: format!("{e:?}") })
}

fn fail(reason: impl Into<String>) -> Error {
    Error::LinearSolveFailure { iteration: 0, reason: reason.into() }
}

/// Solves `A x = b` with a sparse Cholesky factorization, falling back to
/// LU when `A` is not positive definite, followed by one step of iterative
/// refinement.
pub fn linear_solve(a: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    if rhs.len() != n {
        return Err(Error::InvalidArgument(format!("rhs length {} for a {n}×{n} matrix", rhs.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = to_faer(a)?;
    let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
    let solve: Box<dyn Fn(&Mat<f64>) -> Mat<f64>> = match m.sp_cholesky(Side::Lower) {
        Ok(llt) => Box::new(move |r| llt.solve(r)),
        Err(_) => {
            let lu = m.sp_lu().map_err(|e| fail(format!("sparse LU failed: {e:?}")))?;
            Box::new(move |r| lu.solve(r))
        }
    };
    let first = solve(&b);
    let mut x: Vec<f64> = (0..n).map(|i| first[(i, 0)]).collect();
    let residual = |x: &[f64]| -> Vec<f64> { a.matvec(x).iter().zip(rhs).map(|(ax, b)| b - ax).collect() };
    let r = residual(&x);
    let corr = solve(&Mat::from_fn(n, 1, |i, _| r[i]));
    for (i, xi) in x.iter_mut().enumerate() {
        *xi += corr[(i, 0)];
    }
    let bnorm = norm(rhs);
    let rnorm = norm(&residual(&x));
    if !x.iter().all(|v| v.is_finite()) {
        return Err(fail("non-finite solution (singular matrix)"));
    }
    if rnorm > 1e-6 * bnorm.max(f64::MIN_POSITIVE) && rnorm > 0.0 {
        return Err(fail(format!("relative residual {:.3e} after refinement (singular or ill-posed system)", rnorm / bnorm)));
    }
    Ok(x)
}

/// Matrices up to this size are handled with a dense eigensolver.
pub const DENSE_LIMIT: usize = 2000;

/// Spectral condition number `max|λ| / min|λ|` of a symmetric matrix.
pub fn condition_estimate(a: &SparseMatrix) -> Result<f64> {
    let n = a.n;
    if n == 0 {
        return Err(Error::EstimationFailure("empty matrix".into()));
    }
    if n <= DENSE_LIMIT {
        let mut d = Mat::<f64>::zeros(n, n);
        for (i, j, v) in a.triplets() {
            d[(i, j)] = v;
        }
        let ev = d.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::EstimationFailure(format!("{e:?}")))?;
        let max = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        return Ok(max / min);
    }
    let largest = lanczos_extreme(n, |x| a.matvec(x))?;
    let m = to_faer(a).map_err(|e| Error::EstimationFailure(e.to_string()))?;
    let lu = m.sp_lu().map_err(|e| Error::EstimationFailure(format!("factorization failed: {e:?}")))?;
    let inv_largest = lanczos_extreme(n, |x| {
        let s = lu.solve(&Mat::from_fn(n, 1, |i, _| x[i]));
        (0..n).map(|i| s[(i, 0)]).collect()
    })?;
    Ok(largest * inv_largest)
}

/// Largest |eigenvalue| of a symmetric operator by Lanczos iteration with
/// full reorthogonalization.
fn lanczos_extreme(n: usize, op: impl Fn(&[f64]) -> Vec<f64>) -> Result<f64> {
    let max_steps = n.min(300);
    // Deterministic start vector with components in every direction.
    let mut q: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 2654435761) % 1000) as f64 / 1000.0).collect();
    let qn = norm(&q);
    q.iter_mut().for_each(|v| *v /= qn);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for k in 0..max_steps {
        let mut w = op(&basis[k]);
        let alpha: f64 = w.iter().zip(&basis[k]).map(|(a, b)| a * b).sum();
        alphas.push(alpha);
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = norm(&w);
        let m = alphas.len();
        let t = Mat::from_fn(m, m, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        let ev = t.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::EstimationFailure(format!("{e:?}")))?;
        let theta = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if beta <= 1e-14 * theta || (k >= 10 && (theta - last).abs() <= 1e-8 * theta) {
            return Ok(theta);
        }
        last = theta;
        betas.push(beta);
        basis.push(w.iter().map(|v| v / beta).collect());
    }
    if last.is_finite() && last > 0.0 {
        // Ritz values increase monotonically towards the extreme eigenvalue.
        Ok(last)
    } else {
        Err(Error::EstimationFailure(format!("Lanczos did not converge in {max_steps} steps")))
    }
}
