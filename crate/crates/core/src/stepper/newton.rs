use faer::linalg::solvers::PartialPivLu;
use faer::prelude::SpSolver;
use faer::Mat;

use crate::error::{Error, Result};

/// Weighted max norm `max_i |v_i| / (atol + rtol |scale_i|)`.
pub fn weighted_max_norm(v: &[f64], scale: &[f64], rtol: f64, atol: f64) -> f64 {
    v.iter()
        .zip(scale)
        .map(|(x, s)| x.abs() / (atol + rtol * s.abs()))
        .fold(0.0, f64::max)
}

const DIVERGENCE_FACTOR: f64 = 1e3;

/// Tolerances for one nonlinear solve.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Converged once the weighted residual norm is at most this value.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Weighted residual norm before each iteration and after the last one.
    pub residual_history: Vec<f64>,
}

/// How the Newton matrix is obtained at each iteration.
pub enum NewtonMatrix<'a> {
    /// Re-evaluated and refactorized at every iterate.
    Exact(&'a mut dyn FnMut(&[f64]) -> Mat<f64>),
    /// A factorization computed once by the caller and reused.
    Frozen(&'a PartialPivLu<f64>),
}

/// Solves `residual(x) = 0` by Newton's method starting from `guess`.
///
/// Fails with [`Error::NonConvergence`] when the iteration cap is reached or the
/// iterates blow up, and with [`Error::SingularMatrix`] when a linear solve
/// produces non-finite values.
pub fn newton_solve(
    residual: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    mut matrix: NewtonMatrix<'_>,
    guess: Vec<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonSolution> {
    let n = guess.len();
    let anchor = guess.clone();
    let mut x = guess;
    let mut history = Vec::with_capacity(opts.max_iter + 1);
    let mut r = residual(&x);
    let mut norm = weighted_max_norm(&r, &x, opts.rtol, opts.atol);
    history.push(norm);
    // Residual measured with weights fixed at the starting point, so that a
    // diverging iterate cannot shrink its own tolerance.
    let initial = weighted_max_norm(&r, &anchor, opts.rtol, opts.atol);

    for iteration in 0..opts.max_iter {
        if !norm.is_finite() {
            break;
        }
        if iteration > 0
            && weighted_max_norm(&r, &anchor, opts.rtol, opts.atol)
                > DIVERGENCE_FACTOR * initial.max(1.0)
        {
            break;
        }
        if norm <= opts.tol {
            return Ok(NewtonSolution {
                x,
                iterations: iteration,
                residual_history: history,
            });
        }
        let rhs = Mat::from_fn(n, 1, |i, _| r[i]);
        let step = match &mut matrix {
            NewtonMatrix::Exact(jacobian) => jacobian(&x).partial_piv_lu().solve(&rhs),
            NewtonMatrix::Frozen(lu) => lu.solve(&rhs),
        };
        if (0..n).any(|i| !step[(i, 0)].is_finite()) {
            return Err(Error::SingularMatrix);
        }
        for (i, xi) in x.iter_mut().enumerate() {
            *xi -= step[(i, 0)];
        }
        r = residual(&x);
        norm = weighted_max_norm(&r, &x, opts.rtol, opts.atol);
        history.push(norm);
    }

    let diverged =
        weighted_max_norm(&r, &anchor, opts.rtol, opts.atol) > DIVERGENCE_FACTOR * initial.max(1.0);
    if norm <= opts.tol && !diverged {
        return Ok(NewtonSolution {
            x,
            iterations: history.len() - 1,
            residual_history: history,
        });
    }
    Err(Error::NonConvergence {
        iterations: history.len() - 1,
        residual: norm,
    })
}
