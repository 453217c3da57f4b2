#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use dre_core::linalg::{
    cholesky, expm, lyapunov_solve, spectral_norm, symmetric_eigenvalues, vanloan_flow, EIGEN_SWITCHOVER,
};
use dre_core::SymmetricKernel;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn expm_matches_eigendecomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let a = random_symmetric(&mut rng, 4);
        let (lam, v) = jacobi_eigen(&a);
        let d: Rows = (0..4).map(|i| (0..4).map(|j| if i == j { (0.3 * lam[i]).exp() } else { 0.0 }).collect()).collect();
        let oracle = mul(&mul(&v, &d), &transpose(&v));
        let got = dense_rows(&expm(&dense(&a), 0.3).unwrap());
        assert!(rel_diff(&got, &oracle) <= 1e-12, "{}", rel_diff(&got, &oracle));
    }
}

#[test]
fn expm_of_nonnormal_matches_taylor() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for scale_factor in [0.01, 0.5, 3.0, 20.0] {
        let a = scale(&random_rows(&mut rng, 5, 5), scale_factor);
        let got = dense_rows(&expm(&dense(&a), 1.0).unwrap());
        let oracle = taylor_exp(&a);
        assert!(rel_diff(&got, &oracle) <= 1e-11, "scale {scale_factor}: {}", rel_diff(&got, &oracle));
    }
}

#[test]
fn vanloan_scalar_closed_form() {
    let (_, x) = vanloan_flow(&dense(&vec![vec![-1.0]]), &SymmetricKernel::identity(1), 1.0).unwrap();
    assert!((x.get(0, 0) - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-15);
}

#[test]
fn vanloan_matches_simpson_at_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_stable(&mut rng, 4);
    let q = random_psd(&mut rng, 4);
    let (e, x) = vanloan_flow(&dense(&a), &kernel(&q), 0.5).unwrap();
    assert!(rel_diff(&rows(&x), &simpson_integral(&a, &q, 0.5, 10_000)) <= 1e-10);
    assert!(rel_diff(&dense_rows(&e), &taylor_exp(&scale(&a, 0.5))) <= 1e-12);
}

#[test]
fn cholesky_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let a = random_rows(&mut rng, 5, 5);
        let m = lin(&mul(&transpose(&a), &a), 1.0, &identity(5));
        let f = cholesky(&kernel(&m)).unwrap();
        let l: Rows = (0..5).map(|i| (0..5).map(|j| f.lower()[(i, j)]).collect()).collect();
        let r = lin(&mul(&l, &transpose(&l)), -1.0, &m);
        assert!(max_abs(&r) <= 1e-13 * max_abs(&m));
    }
}

#[test]
fn eigenvalues_match_jacobi() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let a = random_symmetric(&mut rng, 6);
        let mut oracle = jacobi_eigen(&a).0;
        oracle.sort_by(f64::total_cmp);
        let got = symmetric_eigenvalues(&kernel(&a)).unwrap();
        for (g, o) in got.iter().zip(&oracle) {
            assert!((g - o).abs() <= 1e-10, "{g} vs {o}");
        }
        let norm = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((spectral_norm(&kernel(&a)).unwrap() - norm).abs() <= 1e-10 * norm);
    }
}

/// `H·diag(d)·H` with a Householder reflector `H`, so the spectrum is `d`.
fn with_spectrum(d: &[f64], v: &[f64]) -> SymmetricKernel {
    let n = d.len();
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let h = |i: usize, j: usize| f64::from(u8::from(i == j)) - 2.0 * v[i] * v[j] / vv;
    // (H D H)_ij = Σ_k H_ik d_k H_kj
    let hd: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|k| h(i, k) * d[k]).collect()).collect();
    let m = faer::Mat::from_fn(n, n, |i, j| (0..n).map(|k| hd[i][k] * h(k, j)).sum::<f64>());
    SymmetricKernel::symmetrize(m.as_ref()).unwrap()
}

#[test]
fn spectral_norm_above_switchover() {
    let n = EIGEN_SWITCHOVER + 40;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let v: Vec<f64> = random_rows(&mut rng, 1, n).remove(0);
    for (lo, hi) in [(-3.0, 2.0), (-1.0, 5.0), (0.0, 1.0)] {
        let d: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
        let p = with_spectrum(&d, &v);
        let expected = f64::max(lo.abs(), hi.abs());
        let got = spectral_norm(&p).unwrap();
        assert!((got - expected).abs() <= 1e-9 * expected, "{got} vs {expected}");
    }
}

#[test]
fn lyapunov_residual_on_random_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [5, 30] {
        let a = random_stable(&mut rng, n);
        let r = random_symmetric(&mut rng, n);
        let x = rows(&lyapunov_solve(&dense(&a), &kernel(&r)).unwrap());
        let res = lin(&lin(&mul(&a, &x), 1.0, &mul(&x, &transpose(&a))), -1.0, &r);
        assert!(max_abs(&res) <= 1e-10 * max_abs(&r), "n={n}: {}", max_abs(&res));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetrize_is_exact(seed in any::<u64>(), n in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_rows(&mut rng, n, n);
        let s = kernel(&a);
        prop_assert_eq!(s.symmetry_defect(), 0.0);
        for i in 0..n {
            for j in 0..n {
                prop_assert!((s.get(i, j) - 0.5 * (a[i][j] + a[j][i])).abs() <= 1e-16);
            }
        }
    }

    #[test]
    fn psd_spectrum_is_nonnegative(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = kernel(&random_psd(&mut rng, n));
        let ev = symmetric_eigenvalues(&p).unwrap();
        let norm = spectral_norm(&p).unwrap();
        prop_assert!(ev[0] >= -1e-12 * norm);
    }
}
