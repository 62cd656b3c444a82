//! ADMM engine for constrained ℓ₁-penalized least squares with an optional
//! quadratic proximity prior:
//!
//! ```text
//! min_{X >= 0}  1/2 ||Y - A X||_F^2  +  lambda ||X||_1,1  +  beta/2 ||P - X||_F^2
//! ```
//!
//! The same iteration solves the coarse problem (`beta = 0`, no prior) and
//! the regularized full-resolution problem. Each iteration is
//!
//! ```text
//! Omega = A'Y + mu (U + V) + beta P
//! X     = (A'A + (mu + beta) I)^{-1} Omega     (cached factorization)
//! U     = max{0, soft(X - V, lambda / mu)}
//! V     = V - (X - U)
//! ```
//!
//! with `U = V = 0` at start. The feasible iterate `U` (exactly nonnegative
//! by construction) is returned as the abundance estimate; it differs from
//! `X` by at most the primal residual.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, cholesky_solve, mat_mul, mat_mul_into};
use crate::datamodel::AbundanceMatrix;
use crate::Float;
use ndarray::{Array2, ArrayView2};
use std::time::Instant;

/// Component-wise soft thresholding, `sign(y) * max(|y| - tau, 0)`: the
/// proximal operator of `tau * |.|`.
#[inline]
pub fn soft_threshold<T: Float>(y: T, tau: T) -> T {
    let m = y.abs() - tau;
    if m > T::zero() {
        m * y.signum()
    } else {
        T::zero()
    }
}

/// Cached factorization of the shifted normal matrix `A'A + shift I`,
/// computed once per solve and reused by every iteration (and by both
/// pipeline stages when the shifts coincide).
#[derive(Debug, Clone)]
pub struct NormalFactor<T> {
    shift: T,
    /// Lower Cholesky factor of `A'A + shift I`.
    chol: Array2<T>,
    /// Explicit inverse, so the per-iteration solve is a single matrix
    /// product over all pixel columns.
    inv: Array2<T>,
}

/// Factorizes `A'A + shift I`. Any `shift > 0` makes the matrix positive
/// definite even for rank-deficient `A`; failure signals numerical
/// breakdown from a shift too small for the conditioning at hand.
// negated comparison so a NaN shift is rejected too
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn factorize<T: Float>(a: ArrayView2<T>, shift: T) -> Result<NormalFactor<T>> {
    if !(shift > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "normal-matrix shift {shift} must be > 0"
        )));
    }
    let p = a.ncols();
    let mut gram = mat_mul(a.t(), a);
    for i in 0..p {
        gram[(i, i)] += shift;
    }
    let chol = cholesky_lower(&gram)?;
    let inv = cholesky_solve(&chol, Array2::eye(p).view());
    Ok(NormalFactor { shift, chol, inv })
}

impl<T: Float> NormalFactor<T> {
    pub fn size(&self) -> usize {
        self.chol.nrows()
    }

    pub fn shift(&self) -> T {
        self.shift
    }

    /// Solves `(A'A + shift I) Z = B` for a multi-column right-hand side.
    pub fn solve(&self, b: ArrayView2<T>) -> Array2<T> {
        let mut out = Array2::zeros((self.size(), b.ncols()));
        self.solve_into(b, &mut out);
        out
    }

    pub(crate) fn solve_into(&self, b: ArrayView2<T>, out: &mut Array2<T>) {
        mat_mul_into(self.inv.view(), b, out);
    }

    /// Rebuilds `A'A + shift I` from the stored factor (`L L^T`).
    pub fn reconstruct(&self) -> Array2<T> {
        mat_mul(self.chol.view(), self.chol.t())
    }
}

/// Iteration state of the ADMM loop: primal iterate `x`, feasible split
/// variable `u` (nonnegative after every iteration) and the scaled dual
/// variable `v`.
#[derive(Debug, Clone)]
pub struct AdmmState<T> {
    pub x: Array2<T>,
    pub u: Array2<T>,
    pub v: Array2<T>,
    pub iter: usize,
    /// `||X - U||_F`
    pub primal_residual: T,
    /// `mu * ||U_i - U_{i-1}||_F`
    pub dual_residual: T,
}

impl<T: Float> AdmmState<T> {
    fn zeros(count: usize, pixels: usize) -> Self {
        Self {
            x: Array2::zeros((count, pixels)),
            u: Array2::zeros((count, pixels)),
            v: Array2::zeros((count, pixels)),
            iter: 0,
            primal_residual: T::infinity(),
            dual_residual: T::infinity(),
        }
    }
}

/// Penalty weights and stopping rule for one solve.
#[derive(Debug, Clone, Copy)]
pub struct AdmmParams<T> {
    pub lambda: T,
    pub beta: T,
    pub mu: T,
    pub max_iters: usize,
    /// Residual tolerance; both residuals are compared against
    /// `tol * sqrt(count * pixels)`.
    pub tol: T,
}

impl<T: Float> AdmmParams<T> {
    pub fn new(lambda: T, beta: T) -> Self {
        Self {
            lambda,
            beta,
            mu: T::from_f64_lossy(0.01),
            max_iters: 1000,
            tol: T::from_f64_lossy(1e-6),
        }
    }

    // negated comparisons so NaN parameters are rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {} must be >= 0",
                self.lambda
            )));
        }
        if !(self.beta >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "beta = {} must be >= 0",
                self.beta
            )));
        }
        if !(self.mu > T::zero()) {
            return Err(Error::InvalidParameter(format!("mu = {} must be > 0", self.mu)));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "tol = {} must be > 0",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one solve. Non-convergence is not an error: the report
/// carries the final residuals and callers decide.
#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    /// The feasible iterate `U`; elementwise nonnegative.
    pub abundances: AbundanceMatrix<T>,
    pub iterations: usize,
    pub final_primal_residual: T,
    pub final_dual_residual: T,
    /// Objective value at the returned abundances.
    pub objective: T,
    /// Seconds spent inside the solve.
    pub wall_time: f64,
}

/// Runs the ADMM iteration on `y` (`bands x pixels`) against the signature
/// matrix `a` (`bands x count`).
///
/// A prior must be supplied exactly when `beta > 0`; with `beta = 0` the
/// prior term is absent from the iteration altogether, so the coarse
/// problem is solved bit-identically whether or not a prior ever existed.
pub fn admm_solve<T: Float>(
    y: ArrayView2<T>,
    a: ArrayView2<T>,
    prior: Option<ArrayView2<T>>,
    params: &AdmmParams<T>,
) -> Result<SolveReport<T>> {
    params.validate()?;
    let started = Instant::now();
    let (count, pixels) = (a.ncols(), y.ncols());
    if y.nrows() != a.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "observation has {} bands, signature matrix has {}",
            y.nrows(),
            a.nrows()
        )));
    }
    match (&prior, params.beta > T::zero()) {
        (Some(_), false) => {
            return Err(Error::InvalidParameter(
                "prior supplied but beta = 0".into(),
            ))
        }
        (None, true) => {
            return Err(Error::InvalidParameter(
                "beta > 0 requires a prior".into(),
            ))
        }
        _ => {}
    }
    if let Some(p) = &prior {
        if p.dim() != (count, pixels) {
            return Err(Error::ShapeMismatch(format!(
                "prior is {:?}, expected ({count}, {pixels})",
                p.dim()
            )));
        }
    }

    let factor = factorize(a, params.mu + params.beta)?;
    // A'Y is constant across iterations.
    let gram_y = mat_mul(a.t(), y);
    // borrow when already contiguous, copy only for exotic strides
    let prior: Option<ndarray::CowArray<T, ndarray::Ix2>> = prior.map(|p| {
        if p.is_standard_layout() {
            ndarray::CowArray::from(p)
        } else {
            ndarray::CowArray::from(p.to_owned())
        }
    });

    let mut state = AdmmState::zeros(count, pixels);
    let mut omega: Array2<T> = Array2::zeros((count, pixels));
    let mut u_prev: Array2<T> = Array2::zeros((count, pixels));
    let tau = params.lambda / params.mu;
    let threshold = params.tol * T::from_usize(count * pixels).unwrap().sqrt();

    while state.iter < params.max_iters {
        {
            // Omega = A'Y + mu (U + V) [+ beta prior]
            let og = omega.as_slice_mut().unwrap();
            let gy = gram_y.as_slice().unwrap();
            let us = state.u.as_slice().unwrap();
            let vs = state.v.as_slice().unwrap();
            match &prior {
                Some(p) => {
                    let ps = p.as_slice().expect("standard layout");
                    for (((o, &g), (&u, &v)), &pr) in
                        og.iter_mut().zip(gy).zip(us.iter().zip(vs)).zip(ps)
                    {
                        *o = g + params.mu * (u + v) + params.beta * pr;
                    }
                }
                None => {
                    for ((o, &g), (&u, &v)) in og.iter_mut().zip(gy).zip(us.iter().zip(vs)) {
                        *o = g + params.mu * (u + v);
                    }
                }
            }
        }
        factor.solve_into(omega.view(), &mut state.x);

        std::mem::swap(&mut state.u, &mut u_prev);
        let mut primal_sq = T::zero();
        let mut dual_sq = T::zero();
        {
            let xs = state.x.as_slice().unwrap();
            let us = state.u.as_slice_mut().unwrap();
            let ups = u_prev.as_slice().unwrap();
            let vs = state.v.as_slice_mut().unwrap();
            for (((&x, u), &up), v) in xs.iter().zip(us.iter_mut()).zip(ups).zip(vs.iter_mut()) {
                let s = soft_threshold(x - *v, tau);
                let un = if s > T::zero() { s } else { T::zero() };
                *u = un;
                let pr = x - un;
                *v -= pr;
                primal_sq += pr * pr;
                let du = un - up;
                dual_sq += du * du;
            }
        }
        state.primal_residual = primal_sq.sqrt();
        state.dual_residual = params.mu * dual_sq.sqrt();
        state.iter += 1;

        if state.primal_residual <= threshold && state.dual_residual <= threshold {
            break;
        }
    }

    let objective = objective_value(
        y,
        a,
        state.u.view(),
        prior.as_ref().map(|p| p.view()),
        params.lambda,
        params.beta,
    );
    Ok(SolveReport {
        abundances: AbundanceMatrix::new(state.u)?,
        iterations: state.iter,
        final_primal_residual: state.primal_residual,
        final_dual_residual: state.dual_residual,
        objective,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Objective of the solved problem at a candidate point.
pub fn objective_value<T: Float>(
    y: ArrayView2<T>,
    a: ArrayView2<T>,
    x: ArrayView2<T>,
    prior: Option<ArrayView2<T>>,
    lambda: T,
    beta: T,
) -> T {
    let ax = mat_mul(a, x);
    let mut fit = T::zero();
    for (&yv, &av) in y.iter().zip(ax.iter()) {
        let d = yv - av;
        fit += d * d;
    }
    let mut l1 = T::zero();
    for &v in x.iter() {
        l1 += v.abs();
    }
    let mut prox = T::zero();
    if let Some(p) = prior {
        for (&pv, &xv) in p.iter().zip(x.iter()) {
            let d = pv - xv;
            prox += d * d;
        }
    }
    let half = T::from_f64_lossy(0.5);
    half * fit + lambda * l1 + half * beta * prox
}
