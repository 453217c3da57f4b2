//! Dense solver for `A·X + X·Aᵀ = R`.
//!
//! Small systems are solved through the Kronecker form; larger ones through
//! the eigendecomposition `A = V·Λ·V⁻¹`, where the equation decouples into
//! `Y_ij = F_ij / (λ_i + λ_j)` with `F = V⁻¹·R·V⁻ᵀ`. Every solution is checked
//! against the residual bound before it is returned.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Par};

use super::{mat_mul, DenseMatrix, SymmetricKernel};
use crate::error::{dim_mismatch, Error, Result};

/// Largest dimension solved through the `n² × n²` Kronecker system.
pub const KRONECKER_MAX_DIM: usize = 24;

const RESIDUAL_TOL: f64 = 1e-10;

/// `A·X + X·Aᵀ`, symmetrized.
pub fn lyapunov_apply(a: &DenseMatrix, x: &SymmetricKernel) -> Result<SymmetricKernel> {
    check_dims(a, x)?;
    let ax = mat_mul(a.as_mat(), x.as_mat(), Par::Seq);
    let sum = &ax + ax.transpose();
    Ok(SymmetricKernel::symmetrize_unchecked(sum.as_ref()))
}

/// Solves `A·X + X·Aᵀ = R`.
pub fn lyapunov_solve(a: &DenseMatrix, rhs: &SymmetricKernel) -> Result<SymmetricKernel> {
    check_dims(a, rhs)?;
    let n = a.nrows();
    let rhs_norm = rhs.frobenius();
    if rhs_norm == 0.0 {
        return Ok(SymmetricKernel::zeros(n));
    }

    let eigen = a.as_mat().eigen().map_err(|_| Error::NoConvergence)?;
    let lambda: Vec<c64> = (0..n).map(|i| eigen.S()[i]).collect();
    let a_scale = a.one_norm().max(f64::MIN_POSITIVE);
    let gap = lambda
        .iter()
        .flat_map(|li| lambda.iter().map(move |lj| (li + lj).norm()))
        .fold(f64::INFINITY, f64::min);
    if gap <= 1e3 * f64::EPSILON * a_scale {
        return Err(Error::SingularLyapunov(format!(
            "eigenvalue pair sums to {gap:.3e} (‖A‖₁ = {a_scale:.3e}); shift the generator"
        )));
    }

    let x = if n <= KRONECKER_MAX_DIM {
        solve_kronecker(a, rhs)
    } else {
        solve_eigen(eigen.U(), &lambda, rhs)?
    };
    let x = SymmetricKernel::symmetrize_unchecked(x.as_ref());

    let resid = lyapunov_apply(a, &x)?.sub(rhs)?.frobenius();
    if !resid.is_finite() || resid > RESIDUAL_TOL * rhs_norm {
        return Err(Error::SingularLyapunov(format!(
            "residual {resid:.3e} exceeds {RESIDUAL_TOL:e}·‖R‖ = {:.3e}",
            RESIDUAL_TOL * rhs_norm
        )));
    }
    Ok(x)
}

fn check_dims(a: &DenseMatrix, x: &SymmetricKernel) -> Result<()> {
    if !a.is_square() {
        return Err(dim_mismatch("lyapunov", "square A", format!("{}x{}", a.nrows(), a.ncols())));
    }
    if a.nrows() != x.dim() {
        return Err(dim_mismatch("lyapunov", a.nrows(), x.dim()));
    }
    Ok(())
}

// (I ⊗ A + A ⊗ I) vec(X) = vec(R), column-major vec.
fn solve_kronecker(a: &DenseMatrix, rhs: &SymmetricKernel) -> Mat<f64> {
    let n = a.nrows();
    let nn = n * n;
    let mut k = Mat::<f64>::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for p in 0..n {
                // (A X)_{ij} = Σ_p A_ip X_pj
                k[(row, p + n * j)] += a.get(i, p);
                // (X Aᵀ)_{ij} = Σ_p X_ip A_jp
                k[(row, i + n * p)] += a.get(j, p);
            }
        }
    }
    let b = Mat::from_fn(nn, 1, |r, _| rhs.get(r % n, r / n));
    let sol = k.partial_piv_lu().solve(b.as_ref());
    Mat::from_fn(n, n, |i, j| sol[(i + n * j, 0)])
}

fn solve_eigen(v: faer::MatRef<'_, c64>, lambda: &[c64], rhs: &SymmetricKernel) -> Result<Mat<f64>> {
    let n = lambda.len();
    let r = Mat::from_fn(n, n, |i, j| c64::new(rhs.get(i, j), 0.0));
    let lu = v.partial_piv_lu();
    // F = V⁻¹ R V⁻ᵀ = V⁻¹ (V⁻¹ Rᵀ)ᵀ, and R is symmetric
    let w = lu.solve(r.as_ref());
    let f = lu.solve(w.transpose().to_owned().as_ref());
    let y = Mat::from_fn(n, n, |i, j| f[(i, j)] / (lambda[i] + lambda[j]));
    let vy = v * &y;
    let x = &vy * v.transpose();
    let out = Mat::from_fn(n, n, |i, j| x[(i, j)].re);
    if !super::all_finite(out.as_ref()) {
        return Err(Error::NonFinite("lyapunov_solve"));
    }
    Ok(out)
}
