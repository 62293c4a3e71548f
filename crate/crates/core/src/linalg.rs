//! Conjugate-gradient solver for the symmetric positive definite systems
//! `(I - c Δ_h + diag) x = b` arising from implicit diffusion steps.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for SPD `A` given as a matrix-free `apply`.
///
/// `x` holds the initial guess on entry. Starting from `x = b` keeps every
/// residual orthogonal to constants when `A - I` annihilates them, so the
/// discrete mass of the iterate equals that of `b` at every iteration.
pub fn conjugate_gradient<F>(
    mut apply: F,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let target = tol * b_norm;
    for it in 0..max_iter {
        if rr.sqrt() <= target {
            return Ok(CgOutcome {
                iterations: it,
                relative_residual: rr.sqrt() / b_norm,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverNonConvergence {
                iterations: it,
                residual: rr.sqrt() / b_norm,
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr.sqrt() <= target {
        return Ok(CgOutcome {
            iterations: max_iter,
            relative_residual: rr.sqrt() / b_norm,
        });
    }
    Err(Error::SolverNonConvergence {
        iterations: max_iter,
        residual: rr.sqrt() / b_norm,
    })
}

/// Default iteration cap for an `n`-unknown solve.
pub fn default_max_iter(n: usize) -> usize {
    (4 * n).max(500)
}
