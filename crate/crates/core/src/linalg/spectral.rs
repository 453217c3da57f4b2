//! Spectral norms of symmetric kernels.
//!
//! Below [`EIGEN_SWITCHOVER`] the full symmetric eigensolver is used. Above
//! it, the two extreme eigenvalues are found by Lanczos iteration with full
//! reorthogonalization, which only needs matrix-vector products and so also
//! works for operators that are never formed explicitly.

use faer::{Mat, Side};

use super::{all_finite, dot, SymmetricKernel};
use crate::error::{Error, Result};

pub const EIGEN_SWITCHOVER: usize = 512;

const LANCZOS_TOL: f64 = 1e-10;

/// Eigenvalues in nondecreasing order.
pub fn symmetric_eigenvalues(s: &SymmetricKernel) -> Result<Vec<f64>> {
    if !all_finite(s.as_mat()) {
        return Err(Error::NonFinite("symmetric_eigenvalues"));
    }
    s.as_mat()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::NoConvergence)
}

/// `max |λ(S)|`.
pub fn spectral_norm(s: &SymmetricKernel) -> Result<f64> {
    if !all_finite(s.as_mat()) {
        return Err(Error::NonFinite("spectral_norm"));
    }
    if s.dim() <= EIGEN_SWITCHOVER {
        let ev = symmetric_eigenvalues(s)?;
        Ok(ev.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
    } else {
        spectral_norm_of_operator(s.dim(), |x, y| {
            y.iter_mut().for_each(|v| *v = 0.0);
            super::gemv(s.as_mat(), x, y);
        })
    }
}

/// Spectral norm of a symmetric operator given only through `y = S·x`.
pub fn spectral_norm_of_operator(n: usize, matvec: impl FnMut(&[f64], &mut [f64])) -> Result<f64> {
    let (lo, hi) = lanczos_extremes(n, matvec, LANCZOS_TOL)?;
    Ok(lo.abs().max(hi.abs()))
}

/// Smallest and largest eigenvalue of a symmetric operator.
///
/// Stops when both extreme Ritz pairs have residual below
/// `tol·max(|θ_min|, |θ_max|)`, or when the Krylov space becomes invariant.
pub fn lanczos_extremes(
    n: usize,
    mut matvec: impl FnMut(&[f64], &mut [f64]),
    tol: f64,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let mut q0 = start_vector(n);
    let nrm = dot(&q0, &q0).sqrt();
    q0.iter_mut().for_each(|v| *v /= nrm);

    let max_steps = n.min(400);
    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];

    for k in 0..max_steps {
        matvec(&basis[k], &mut w);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lanczos matvec"));
        }
        let a = dot(&basis[k], &w);
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let b = dot(&w, &w).sqrt();

        let last = k + 1 == max_steps;
        let scale = alpha.iter().chain(beta.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
        let invariant = b <= 1e-14 * scale.max(f64::MIN_POSITIVE) || scale == 0.0;
        if invariant || last || k % 4 == 3 {
            let (theta, resid) = ritz(&alpha, &beta, b)?;
            let lo = theta[0];
            let hi = *theta.last().unwrap();
            let norm = lo.abs().max(hi.abs());
            if invariant || last {
                return Ok((lo, hi));
            }
            if resid.0 <= tol * norm && resid.1 <= tol * norm {
                return Ok((lo, hi));
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
    }
    unreachable!("loop returns on its last iteration")
}

/// Ritz values and residual bounds of the extreme pairs.
fn ritz(alpha: &[f64], beta: &[f64], b_next: f64) -> Result<(Vec<f64>, (f64, f64))> {
    let k = alpha.len();
    let t = Mat::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let evd = t.self_adjoint_eigen(Side::Lower).map_err(|_| Error::NoConvergence)?;
    let s = evd.S();
    let u = evd.U();
    let theta: Vec<f64> = (0..k).map(|i| s[i]).collect();
    let r_lo = (b_next * u[(k - 1, 0)]).abs();
    let r_hi = (b_next * u[(k - 1, k - 1)]).abs();
    Ok((theta, (r_lo, r_hi)))
}

// Deterministic, well-spread start vector.
fn start_vector(n: usize) -> Vec<f64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}
