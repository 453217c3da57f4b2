//! Independent reference computations used by `oracle-check`.

use dre_core::linalg::vanloan_flow;
use dre_core::solver::scalar_riccati_closed_form;
use dre_core::{nonlinear_flow, DenseMatrix, Execution, GalerkinDre, LieStepper, SymmetricKernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

fn identity(n: usize) -> Rows {
    (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
}

fn mul(a: &Rows, b: &Rows) -> Rows {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn lin(a: &Rows, c: f64, b: &Rows) -> Rows {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + c * y).collect()).collect()
}

fn max_abs(a: &Rows) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

fn rows_of(p: &SymmetricKernel) -> Rows {
    (0..p.dim()).map(|i| (0..p.dim()).map(|j| p.get(i, j)).collect()).collect()
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> Rows {
    let b: Rows = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let bt: Rows = (0..n).map(|i| (0..n).map(|j| b[j][i]).collect()).collect();
    mul(&b, &bt)
}

fn rk4<F: Fn(&Rows) -> Rows>(p0: &Rows, f: F, t: f64, steps: usize) -> Rows {
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

/// Scalar closed form against RK4 on `p' = 2ap + q − sp²`.
pub fn scalar_closed_form() -> Check {
    let mut worst: f64 = 0.0;
    for &(a, q, s, p0) in &[(-1.0, 1.0, 2.25, 1.0), (0.5, 0.2, 1.0, 0.0), (0.0, 0.0, 3.0, 2.0), (-3.0, 2.0, 0.0, 0.5)] {
        let f = |p: &Rows| vec![vec![2.0 * a * p[0][0] + q - s * p[0][0] * p[0][0]]];
        let oracle = rk4(&vec![vec![p0]], f, 1.0, 10_000)[0][0];
        let exact = scalar_riccati_closed_form(a, q, s, p0, 1.0).unwrap_or(f64::NAN);
        worst = worst.max((exact - oracle).abs() / oracle.abs().max(1e-300));
    }
    Check { name: "scalar closed form vs RK4", value: worst, bound: "<= 1e-10".into(), pass: worst <= 1e-10 }
}

/// Observed order of the Lie scheme on a one-dof problem.
pub fn scalar_order() -> Check {
    let (a, q, ell, z) = (-1.0, 1.0, 1.5, 1.0);
    let problem = GalerkinDre::from_parts(
        SymmetricKernel::identity(1),
        SymmetricKernel::diagonal(&[a]),
        vec![ell],
        vec![q],
        vec![z],
        0.0,
        1.0,
    )
    .expect("scalar problem");
    let mut pairs = Vec::new();
    for j in 3..=10 {
        let nt = 1usize << j;
        let mut stepper = LieStepper::new(&problem, nt, Execution::Sequential).expect("stepper");
        let mut err: f64 = 0.0;
        for n in 1..=nt {
            let p = stepper.step().expect("step").get(0, 0);
            let exact = scalar_riccati_closed_form(a, q * q, ell * ell, z * z, n as f64 / nt as f64).unwrap_or(f64::NAN);
            err = err.max((p - exact).abs() / exact.abs());
        }
        pairs.push((1.0 / nt as f64, err));
    }
    let slope = dre_core::observed_order(&pairs).unwrap_or(f64::NAN);
    Check { name: "scalar Lie order", value: slope, bound: "in [0.9, 1.1]".into(), pass: (0.9..=1.1).contains(&slope) }
}

/// Sherman–Morrison sub-flow against RK4 on random PSD kernels.
pub fn nonlinear_flow_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = random_psd(&mut rng, 5);
        let ell: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = rng.random_range(0.1..1.0);
        let f = |p: &Rows| {
            let u: Vec<f64> = p.iter().map(|r| r.iter().zip(&ell).map(|(x, y)| x * y).sum()).collect();
            u.iter().map(|ui| u.iter().map(|uj| -ui * uj).collect()).collect()
        };
        let oracle = rk4(&p, f, t, 10_000);
        let kernel = SymmetricKernel::from_rows(&p).expect("psd rows");
        let got = match nonlinear_flow(&kernel, &ell, t) {
            Ok(k) => rows_of(&k),
            Err(_) => return Check { name: "nonlinear flow vs RK4", value: f64::NAN, bound: "<= 1e-8".into(), pass: false },
        };
        worst = worst.max(max_abs(&lin(&got, -1.0, &oracle)) / max_abs(&oracle));
    }
    Check { name: "nonlinear flow vs RK4", value: worst, bound: "<= 1e-8".into(), pass: worst <= 1e-8 }
}

fn taylor_exp(a: &Rows) -> Rows {
    let n = a.len();
    let norm = max_abs(a) * n as f64;
    let k = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let s: Rows = a.iter().map(|r| r.iter().map(|v| v / 2f64.powi(k)).collect()).collect();
    let mut term = identity(n);
    let mut sum = identity(n);
    for m in 1..30 {
        term = mul(&term, &s);
        term.iter_mut().flatten().for_each(|v| *v /= m as f64);
        sum = lin(&sum, 1.0, &term);
    }
    for _ in 0..k {
        sum = mul(&sum, &sum);
    }
    sum
}

fn simpson(a: &Rows, q: &Rows, t: f64, panels: usize) -> Rows {
    let n = a.len();
    let half = t / (2 * panels) as f64;
    let step = taylor_exp(&a.iter().map(|r| r.iter().map(|v| v * half).collect()).collect());
    let mut e = identity(n);
    let mut acc = vec![vec![0.0; n]; n];
    for k in 0..=2 * panels {
        let w = if k == 0 || k == 2 * panels { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let et: Rows = (0..n).map(|i| (0..n).map(|j| e[j][i]).collect()).collect();
        acc = lin(&acc, w, &mul(&mul(&e, q), &et));
        e = mul(&e, &step);
    }
    acc.iter().map(|r| r.iter().map(|v| v * half / 3.0).collect()).collect()
}

/// Van Loan integral against composite Simpson on random stable systems.
pub fn vanloan_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let r: Rows = (0..4).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let shift = 0.5 + 4.0 * max_abs(&r);
        let a: Rows = (0..4).map(|i| (0..4).map(|j| r[i][j] - if i == j { shift } else { 0.0 }).collect()).collect();
        let q = random_psd(&mut rng, 4);
        let t = rng.random_range(0.5..2.0);
        let got = DenseMatrix::from_rows(&a)
            .and_then(|am| vanloan_flow(&am, &SymmetricKernel::from_rows(&q)?, t))
            .map(|(_, x)| rows_of(&x));
        let Ok(got) = got else {
            return Check { name: "Van Loan vs Simpson", value: f64::NAN, bound: "<= 1e-10".into(), pass: false };
        };
        let oracle = simpson(&a, &q, t, 10_000);
        worst = worst.max(max_abs(&lin(&got, -1.0, &oracle)) / max_abs(&oracle));
    }
    Check { name: "Van Loan vs Simpson", value: worst, bound: "<= 1e-10".into(), pass: worst <= 1e-10 }
}

pub fn all() -> Vec<Check> {
    vec![scalar_closed_form(), scalar_order(), nonlinear_flow_check(4), vanloan_check(5)]
}
