//! Small dense helpers shared by the integration tests. Deliberately naive
//! so that they do not share code paths with the library.
#![allow(dead_code)]

use dre_core::{DenseMatrix, SymmetricKernel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Rows = Vec<Vec<f64>>;

pub fn identity(n: usize) -> Rows {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

pub fn zeros(n: usize) -> Rows {
    vec![vec![0.0; n]; n]
}

pub fn mul(a: &Rows, b: &Rows) -> Rows {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut c = vec![vec![0.0; p]; n];
    for i in 0..n {
        for k in 0..m {
            for j in 0..p {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

pub fn transpose(a: &Rows) -> Rows {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn lin(a: &Rows, c: f64, b: &Rows) -> Rows {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + c * y).collect()).collect()
}

pub fn scale(a: &Rows, c: f64) -> Rows {
    a.iter().map(|r| r.iter().map(|v| c * v).collect()).collect()
}

pub fn max_abs(a: &Rows) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn rel_diff(a: &Rows, b: &Rows) -> f64 {
    max_abs(&lin(a, -1.0, b)) / max_abs(b).max(f64::MIN_POSITIVE)
}

pub fn rows(p: &SymmetricKernel) -> Rows {
    (0..p.dim()).map(|i| (0..p.dim()).map(|j| p.get(i, j)).collect()).collect()
}

pub fn dense_rows(p: &DenseMatrix) -> Rows {
    (0..p.nrows()).map(|i| (0..p.ncols()).map(|j| p.get(i, j)).collect()).collect()
}

pub fn kernel(a: &Rows) -> SymmetricKernel {
    SymmetricKernel::from_rows(a).unwrap()
}

pub fn dense(a: &Rows) -> DenseMatrix {
    DenseMatrix::from_rows(a).unwrap()
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Rows {
    (0..n).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Rows {
    let a = random_rows(rng, n, n);
    (0..n).map(|i| (0..n).map(|j| 0.5 * (a[i][j] + a[j][i])).collect()).collect()
}

/// `B·Bᵀ` with `B` of random rank.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> Rows {
    let rank = rng.random_range(1..=n);
    let b = random_rows(rng, n, rank);
    mul(&b, &transpose(&b))
}

/// Random matrix with spectrum in the open left half plane.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> Rows {
    let r = random_rows(rng, n, n);
    let shift = 0.5 + n as f64 * max_abs(&r);
    (0..n).map(|i| (0..n).map(|j| r[i][j] - if i == j { shift } else { 0.0 }).collect()).collect()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix: `(values, V)`
/// with eigenvectors in the columns of `V`.
pub fn jacobi_eigen(a: &Rows) -> (Vec<f64>, Rows) {
    let n = a.len();
    let mut a = a.clone();
    let mut v = identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 * (1.0 + max_abs(&a).powi(2)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Classical RK4 for a matrix ODE.
pub fn rk4(p0: &Rows, f: impl Fn(&Rows) -> Rows, t: f64, steps: usize) -> Rows {
    let h = t / steps as f64;
    let mut p = p0.clone();
    for _ in 0..steps {
        let k1 = f(&p);
        let k2 = f(&lin(&p, 0.5 * h, &k1));
        let k3 = f(&lin(&p, 0.5 * h, &k2));
        let k4 = f(&lin(&p, h, &k3));
        let s = lin(&lin(&lin(&k1, 2.0, &k2), 2.0, &k3), 1.0, &k4);
        p = lin(&p, h / 6.0, &s);
    }
    p
}

/// `e^{A}` by scaled Taylor series and repeated squaring.
pub fn taylor_exp(a: &Rows) -> Rows {
    let n = a.len();
    let norm = max_abs(a) * n as f64;
    let k = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let s = scale(a, 0.5f64.powi(k));
    let mut term = identity(n);
    let mut sum = identity(n);
    for m in 1..30 {
        term = scale(&mul(&term, &s), 1.0 / m as f64);
        sum = lin(&sum, 1.0, &term);
    }
    for _ in 0..k {
        sum = mul(&sum, &sum);
    }
    sum
}

/// `∫₀^t e^{sA} Q e^{sAᵀ} ds`, composite Simpson.
pub fn simpson_integral(a: &Rows, q: &Rows, t: f64, panels: usize) -> Rows {
    let n = a.len();
    let half = t / (2 * panels) as f64;
    let step = taylor_exp(&scale(a, half));
    let mut e = identity(n);
    let mut acc = zeros(n);
    for k in 0..=2 * panels {
        let w = if k == 0 || k == 2 * panels { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        acc = lin(&acc, w, &mul(&mul(&e, q), &transpose(&e)));
        e = mul(&e, &step);
    }
    scale(&acc, half / 3.0)
}

/// Value at `(x, y)` of the periodic P1 hat function of node `(i, j)` on
/// the `nx × nx` mesh whose cells are split along `(0,0)–(1,1)`.
pub fn hat(nx: usize, i: usize, j: usize, x: f64, y: f64) -> f64 {
    let h = 1.0 / nx as f64;
    let mut total = 0.0;
    // the support of a hat spans six triangles; check both periodic images
    for dx in [-1.0, 0.0, 1.0] {
        for dy in [-1.0, 0.0, 1.0] {
            let u = (x + dx - i as f64 * h) / h;
            let w = (y + dy - j as f64 * h) / h;
            total += reference_hat(u, w);
        }
    }
    total
}

/// Hat centred at the origin on the unit-spacing mesh.
fn reference_hat(u: f64, w: f64) -> f64 {
    if u.abs() > 1.0 || w.abs() > 1.0 || (u - w).abs() > 1.0 {
        return 0.0;
    }
    if u >= 0.0 && w >= 0.0 {
        1.0 - u.max(w)
    } else if u <= 0.0 && w <= 0.0 {
        1.0 - (-u).max(-w)
    } else if u >= 0.0 {
        1.0 - (u - w)
    } else {
        1.0 - (w - u)
    }
}
