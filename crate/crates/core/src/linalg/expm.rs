//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants, and the Van Loan block-exponential integral.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Par};

use super::{all_finite, mat_mul, one_norm, DenseMatrix, SymmetricKernel};
use crate::error::{dim_mismatch, Error, Result};

// Backward-error bounds for the [m/m] approximants (double precision).
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `e^{tA}`.
pub fn expm(a: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    if !a.is_square() {
        return Err(dim_mismatch("expm", "square", format!("{}x{}", a.nrows(), a.ncols())));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("expm time"));
    }
    let ta = Mat::from_fn(a.nrows(), a.ncols(), |i, j| t * a.get(i, j));
    let e = expm_mat(ta.as_ref(), Par::Seq);
    DenseMatrix::from_mat(e)
}

pub(crate) fn expm_mat(a: MatRef<'_, f64>, par: Par) -> Mat<f64> {
    let n = a.nrows();
    let norm = one_norm(a);
    let ident = Mat::<f64>::identity(n, n);
    if norm == 0.0 {
        return ident;
    }

    let a2 = mat_mul(a, a, par);
    for (theta, coeffs) in [
        (THETA_3, &PADE_3[..]),
        (THETA_5, &PADE_5[..]),
        (THETA_7, &PADE_7[..]),
        (THETA_9, &PADE_9[..]),
    ] {
        if norm <= theta {
            return pade_low(a, a2.as_ref(), coeffs, par);
        }
    }

    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scale = 0.5_f64.powi(squarings);
    let s1 = scale;
    let s2 = scale * scale;
    let a_s = Mat::from_fn(n, n, |i, j| s1 * a[(i, j)]);
    let a2 = Mat::from_fn(n, n, |i, j| s2 * a2[(i, j)]);
    let a4 = mat_mul(a2.as_ref(), a2.as_ref(), par);
    let a6 = mat_mul(a4.as_ref(), a2.as_ref(), par);
    let b = &PADE_13;

    let u_inner = Mat::from_fn(n, n, |i, j| b[13] * a6[(i, j)] + b[11] * a4[(i, j)] + b[9] * a2[(i, j)]);
    let mut u_tmp = mat_mul(a6.as_ref(), u_inner.as_ref(), par);
    for j in 0..n {
        for i in 0..n {
            u_tmp[(i, j)] += b[7] * a6[(i, j)] + b[5] * a4[(i, j)] + b[3] * a2[(i, j)] + b[1] * ident[(i, j)];
        }
    }
    let u = mat_mul(a_s.as_ref(), u_tmp.as_ref(), par);

    let v_inner = Mat::from_fn(n, n, |i, j| b[12] * a6[(i, j)] + b[10] * a4[(i, j)] + b[8] * a2[(i, j)]);
    let mut v = mat_mul(a6.as_ref(), v_inner.as_ref(), par);
    for j in 0..n {
        for i in 0..n {
            v[(i, j)] += b[6] * a6[(i, j)] + b[4] * a4[(i, j)] + b[2] * a2[(i, j)] + b[0] * ident[(i, j)];
        }
    }

    let mut r = solve_pade(&u, &v);
    for _ in 0..squarings {
        r = mat_mul(r.as_ref(), r.as_ref(), par);
    }
    r
}

fn pade_low(a: MatRef<'_, f64>, a2: MatRef<'_, f64>, b: &[f64], par: Par) -> Mat<f64> {
    let n = a.nrows();
    let m = b.len() - 1;
    // even powers A⁰, A², A⁴, ... up to A^{m-1}
    let mut powers = vec![Mat::<f64>::identity(n, n), a2.to_owned()];
    while 2 * (powers.len() - 1) < m - 1 {
        let next = mat_mul(powers.last().unwrap().as_ref(), a2, par);
        powers.push(next);
    }
    let mut u_inner = Mat::<f64>::zeros(n, n);
    let mut v = Mat::<f64>::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        let odd = 2 * k + 1;
        let even = 2 * k;
        for j in 0..n {
            for i in 0..n {
                if odd <= m {
                    u_inner[(i, j)] += b[odd] * p[(i, j)];
                }
                if even <= m {
                    v[(i, j)] += b[even] * p[(i, j)];
                }
            }
        }
    }
    let u = mat_mul(a, u_inner.as_ref(), par);
    solve_pade(&u, &v)
}

/// `(V − U)⁻¹ (V + U)`.
fn solve_pade(u: &Mat<f64>, v: &Mat<f64>) -> Mat<f64> {
    let p = v + u;
    let q = v - u;
    q.partial_piv_lu().solve(p.as_ref())
}

/// Affine sub-flow data over `[0, t]`: `E = e^{tA}` and
/// `X = ∫₀ᵗ e^{sA} Q e^{sAᵀ} ds`.
///
/// `X` is read off the block exponential of `[[A, Q], [0, −Aᵀ]]` as
/// `G₁₂·G₁₁ᵀ`. For stiff `A` the block exponential is evaluated on a
/// sub-interval `t/2ᵏ` with `‖(t/2ᵏ)A‖₁ ≤ 1` and then doubled with
/// `X(2s) = X(s) + E(s)·X(s)·E(s)ᵀ`, `E(2s) = E(s)²`, which avoids the
/// cancellation caused by the growing `e^{−sAᵀ}` block.
pub fn vanloan_flow(a: &DenseMatrix, q: &SymmetricKernel, t: f64) -> Result<(DenseMatrix, SymmetricKernel)> {
    vanloan_flow_par(a, q, t, Par::Seq)
}

pub(crate) fn vanloan_flow_par(
    a: &DenseMatrix,
    q: &SymmetricKernel,
    t: f64,
    par: Par,
) -> Result<(DenseMatrix, SymmetricKernel)> {
    if !a.is_square() {
        return Err(dim_mismatch("vanloan_flow", "square A", format!("{}x{}", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    if q.dim() != n {
        return Err(dim_mismatch("vanloan_flow", n, q.dim()));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("vanloan_flow time"));
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t, "vanloan_flow"));
    }

    let norm = t * a.one_norm();
    let doublings = if norm > 1.0 { norm.log2().ceil() as i32 } else { 0 };
    let h = t * 0.5_f64.powi(doublings);

    let mut block = Mat::<f64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            block[(i, j)] = h * a.get(i, j);
            block[(i, n + j)] = h * q.get(i, j);
            block[(n + i, n + j)] = -h * a.get(j, i);
        }
    }
    let g = expm_mat(block.as_ref(), par);
    let mut e = g.as_ref().submatrix(0, 0, n, n).to_owned();
    let g12 = g.as_ref().submatrix(0, n, n, n);
    let mut x = SymmetricKernel::symmetrize_unchecked(mat_mul(g12, e.transpose(), par).as_ref());

    for _ in 0..doublings {
        let exe = super::congruence_transform(e.as_ref(), x.as_mat(), par);
        let sum = x.as_mat() + exe.as_mat();
        x = SymmetricKernel::symmetrize_unchecked(sum.as_ref());
        e = mat_mul(e.as_ref(), e.as_ref(), par);
    }
    if !all_finite(e.as_ref()) || !all_finite(x.as_mat()) {
        return Err(Error::NonFinite("vanloan_flow result"));
    }
    Ok((DenseMatrix::from_mat(e)?, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
        (a - b).norm_max()
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = DenseMatrix::zeros(2, 2);
        let e = expm(&z, 5.0).unwrap();
        assert_eq!(e, DenseMatrix::identity(2));
    }

    #[test]
    fn exp_of_diagonal() {
        let a = DenseMatrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -2.0]]).unwrap();
        let e = expm(&a, 1.0).unwrap();
        assert!((e.get(0, 0) - (-1.0_f64).exp()).abs() < 1e-15);
        assert!((e.get(1, 1) - (-2.0_f64).exp()).abs() < 1e-15);
        assert_eq!(e.get(0, 1), 0.0);
    }

    #[test]
    fn every_pade_branch_matches_scalar_exp() {
        for x in [1e-3, 0.1, 0.5, 1.5, 4.0, 30.0, -30.0] {
            let a = DenseMatrix::from_rows(&[vec![x]]).unwrap();
            let e = expm(&a, 1.0).unwrap().get(0, 0);
            assert!(((e - x.exp()) / x.exp()).abs() < 1e-14, "x={x}: {e} vs {}", x.exp());
        }
    }

    #[test]
    fn rotation_generator() {
        // exp(t [[0, 1], [−1, 0]]) is a rotation by −t
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let t = 2.3;
        let e = expm(&a, t).unwrap();
        let expected = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => t.cos(),
            (0, 1) => t.sin(),
            _ => -t.sin(),
        });
        assert!(max_diff(e.as_mat(), expected.as_ref()) < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(expm(&DenseMatrix::zeros(2, 3), 1.0).is_err());
        assert!(expm(&DenseMatrix::identity(2), f64::NAN).is_err());
        let q = SymmetricKernel::identity(2);
        assert!(matches!(
            vanloan_flow(&DenseMatrix::identity(2), &q, -1.0),
            Err(Error::NegativeTime(..))
        ));
        assert!(vanloan_flow(&DenseMatrix::identity(3), &q, 1.0).is_err());
    }

    #[test]
    fn vanloan_constant_integrand() {
        let tau = 0.37;
        let (e, x) = vanloan_flow(&DenseMatrix::zeros(1, 1), &SymmetricKernel::diagonal(&[2.5]), tau).unwrap();
        assert!((e.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((x.get(0, 0) - tau * 2.5).abs() < 1e-15);
    }

    #[test]
    fn vanloan_scalar_closed_form() {
        // ∫₀¹ e^{−2s} ds = (1 − e^{−2})/2
        let a = DenseMatrix::from_rows(&[vec![-1.0]]).unwrap();
        let (e, x) = vanloan_flow(&a, &SymmetricKernel::identity(1), 1.0).unwrap();
        let expected = 0.5 * (1.0 - (-2.0_f64).exp());
        assert!((x.get(0, 0) - expected).abs() < 1e-15);
        assert!((e.get(0, 0) - (-1.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn vanloan_stiff_diagonal_uses_doubling() {
        // ‖tA‖ = 400 would lose everything without the doubling phase.
        let lam = [-1.0, -50.0, -400.0];
        let a = DenseMatrix::from_fn(3, 3, |i, j| if i == j { lam[i] } else { 0.0 }).unwrap();
        let q = SymmetricKernel::rank_one(&[1.0, 0.5, 2.0]);
        let (_, x) = vanloan_flow(&a, &q, 1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s = lam[i] + lam[j];
                let exact = q.get(i, j) * ((s).exp() - 1.0) / s;
                assert!((x.get(i, j) - exact).abs() <= 1e-13 * exact.abs().max(1e-3), "{i}{j}: {} vs {exact}", x.get(i, j));
            }
        }
    }
}
