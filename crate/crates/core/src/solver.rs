//! Time integration of the Galerkin DRE.
//!
//! One Lie step applies the exact quadratic sub-flow `P' = −P Ŝ P` first and
//! then the exact affine sub-flow `P' = Â P + P Âᵀ + Q̂`:
//!
//! ```text
//! P ↦ E · (P − τ (Pℓ)(Pℓ)ᵀ / (1 + τ ℓᵀPℓ)) · Eᵀ + X
//! ```
//!
//! with `E = e^{τÂ}` and `X = ∫₀^τ e^{sÂ} Q̂ e^{sÂᵀ} ds` computed once per step
//! size. The shifted scheme integrates `P̄(t) = e^{−2λt} P(t)` with generator
//! `Â − λI`, time-dependent weights `e^{−2λt} Q̂` (frozen at the left end of
//! each step) and `e^{2λt} Ŝ` (integrated exactly).

use faer::{Mat, Par};
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::exec::Execution;
use crate::fem::GalerkinDre;
use crate::linalg::{
    cholesky, congruence_transform, dot, expm, lyapunov_solve, spectral_norm_of_operator,
    symmetric_eigenvalues, vanloan_flow_par, DenseMatrix, SymmetricKernel,
};

/// Exact solution of `P' = −P ℓℓᵀ P` after time `t`, i.e. `(I + t P Ŝ)⁻¹ P`
/// in Sherman–Morrison form.
pub fn nonlinear_flow(p: &SymmetricKernel, ell: &[f64], t: f64) -> Result<SymmetricKernel> {
    if p.dim() != ell.len() {
        return Err(dim_mismatch("nonlinear_flow", p.dim(), ell.len()));
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t, "nonlinear_flow"));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("nonlinear_flow time"));
    }
    let u = p.apply(ell);
    let denom = 1.0 + t * dot(ell, &u);
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::NotPsd(denom));
    }
    let c = t / denom;
    let n = p.dim();
    let pm = p.as_mat();
    let mut out = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        let cu = c * u[j];
        for i in j..n {
            out[(i, j)] = pm[(i, j)] - cu * u[i];
        }
    }
    Ok(SymmetricKernel::from_symmetric_mat(out))
}

/// Nonlinear sub-flow of the shifted equation with weight `e^{2λs} Ŝ`,
/// started at `s = 0`: the plain flow with effective time `(e^{2λt} − 1)/(2λ)`.
pub fn transformed_nonlinear_flow(p: &SymmetricKernel, ell: &[f64], lambda: f64, t: f64) -> Result<SymmetricKernel> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidProblem(format!("shift must be > 0, got {lambda}")));
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t, "transformed_nonlinear_flow"));
    }
    nonlinear_flow(p, ell, shifted_time(lambda, 0.0, t))
}

/// `∫_{t0}^{t0+t} e^{2λs} ds`.
fn shifted_time(lambda: f64, t0: f64, t: f64) -> f64 {
    (2.0 * lambda * t0).exp() * (2.0 * lambda * t).exp_m1() / (2.0 * lambda)
}

/// Step data shared by every step of one `(h, τ)` run.
#[derive(Clone, Debug)]
pub struct LieStepPrecomp {
    /// `E = e^{τÂ}`.
    pub propagator: DenseMatrix,
    /// `X = ∫₀^τ e^{sÂ} Q̂ e^{sÂᵀ} ds`.
    pub integral: SymmetricKernel,
    pub tau: f64,
    /// `ℓ_ξ`, so that `Ŝ = ℓ_ξ ℓ_ξᵀ`.
    pub control_load: Vec<f64>,
}

pub fn precompute_lie_step(problem: &GalerkinDre, tau: f64) -> Result<LieStepPrecomp> {
    precompute_lie_step_with(problem, tau, Execution::Sequential)
}

pub fn precompute_lie_step_with(problem: &GalerkinDre, tau: f64, exec: Execution) -> Result<LieStepPrecomp> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidProblem(format!("step size must be > 0, got {tau}")));
    }
    let par = exec.faer_par();
    let generator = problem.generator_par(par);
    let (propagator, integral) = vanloan_flow_par(&generator, &problem.q_hat(), tau, par)?;
    Ok(LieStepPrecomp {
        propagator,
        integral,
        tau,
        control_load: problem.ell_xi.clone(),
    })
}

/// One Lie step `exp(τF) ∘ exp(τG)`.
pub fn lie_step(p: &SymmetricKernel, pre: &LieStepPrecomp) -> Result<SymmetricKernel> {
    step_with(p, pre, pre.tau, 1.0, Par::Seq)
}

fn step_with(p: &SymmetricKernel, pre: &LieStepPrecomp, flow_time: f64, q_weight: f64, par: Par) -> Result<SymmetricKernel> {
    if p.dim() != pre.propagator.nrows() {
        return Err(dim_mismatch("lie_step", pre.propagator.nrows(), p.dim()));
    }
    let after_quadratic = nonlinear_flow(p, &pre.control_load, flow_time)?;
    let propagated = congruence_transform(pre.propagator.as_mat(), after_quadratic.as_mat(), par);
    let pm = propagated.as_mat();
    let xm = pre.integral.as_mat();
    let n = p.dim();
    let mut out = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            out[(i, j)] = pm[(i, j)] + q_weight * xm[(i, j)];
        }
    }
    Ok(SymmetricKernel::from_symmetric_mat(out))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Mode {
    Direct,
    Transformed { lambda: f64 },
}

/// Incremental Lie-splitting integrator; holds only the current kernel.
#[derive(Clone, Debug)]
pub struct LieStepper {
    pre: LieStepPrecomp,
    state: SymmetricKernel,
    steps_taken: usize,
    nt: usize,
    mode: Mode,
    par: Par,
}

impl LieStepper {
    /// Integrates the problem as stated (generator `M⁻¹A − λI`).
    pub fn new(problem: &GalerkinDre, nt: usize, exec: Execution) -> Result<Self> {
        Self::build(problem, nt, exec, Mode::Direct)
    }

    /// Integrates the unshifted equation through the change of variables
    /// `P̄ = e^{−2λt} P`, with `λ = problem.shift > 0`.
    pub fn new_transformed(problem: &GalerkinDre, nt: usize, exec: Execution) -> Result<Self> {
        if !(problem.shift > 0.0) {
            return Err(Error::InvalidProblem("transformed scheme needs shift > 0".into()));
        }
        Self::build(problem, nt, exec, Mode::Transformed { lambda: problem.shift })
    }

    fn build(problem: &GalerkinDre, nt: usize, exec: Execution, mode: Mode) -> Result<Self> {
        if nt == 0 {
            return Err(Error::InvalidProblem("number of steps must be >= 1".into()));
        }
        let tau = problem.horizon / nt as f64;
        let pre = precompute_lie_step_with(problem, tau, exec)?;
        Ok(Self {
            pre,
            state: problem.initial_kernel(),
            steps_taken: 0,
            nt,
            mode,
            par: exec.faer_par(),
        })
    }

    pub fn tau(&self) -> f64 {
        self.pre.tau
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn is_transformed(&self) -> bool {
        matches!(self.mode, Mode::Transformed { .. })
    }

    /// Kernel in the integrator's own variable (`P̄` when transformed).
    pub fn current(&self) -> &SymmetricKernel {
        &self.state
    }

    /// Kernel of the unshifted equation at the current time.
    pub fn physical(&self) -> SymmetricKernel {
        match self.mode {
            Mode::Direct => self.state.clone(),
            Mode::Transformed { lambda } => {
                let t = self.steps_taken as f64 * self.pre.tau;
                self.state.scaled((2.0 * lambda * t).exp())
            }
        }
    }

    pub fn step(&mut self) -> Result<&SymmetricKernel> {
        let next = match self.mode {
            Mode::Direct => step_with(&self.state, &self.pre, self.pre.tau, 1.0, self.par)?,
            Mode::Transformed { lambda } => {
                let t0 = self.steps_taken as f64 * self.pre.tau;
                let flow_time = shifted_time(lambda, t0, self.pre.tau);
                let q_weight = (-2.0 * lambda * t0).exp();
                step_with(&self.state, &self.pre, flow_time, q_weight, self.par)?
            }
        };
        self.state = next;
        self.steps_taken += 1;
        Ok(&self.state)
    }
}

/// Time-indexed kernels `P₀, …, P_N` on one `(h, τ)` grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub tau: f64,
    pub kernels: Vec<SymmetricKernel>,
    /// Kernels hold `P̄ = e^{−2λt} P` rather than `P`.
    pub transformed: bool,
    pub shift: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.kernels.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.kernels[0].dim()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    /// Kernel of the unshifted equation at step `n`.
    pub fn physical(&self, n: usize) -> SymmetricKernel {
        if self.transformed {
            self.kernels[n].scaled((2.0 * self.shift * self.time(n)).exp())
        } else {
            self.kernels[n].clone()
        }
    }

    pub fn final_physical(&self) -> SymmetricKernel {
        self.physical(self.steps())
    }
}

fn collect(mut stepper: LieStepper, shift: f64) -> Result<Trajectory> {
    let mut kernels = Vec::with_capacity(stepper.nt() + 1);
    kernels.push(stepper.current().clone());
    for _ in 0..stepper.nt() {
        kernels.push(stepper.step()?.clone());
    }
    Ok(Trajectory {
        tau: stepper.tau(),
        transformed: stepper.is_transformed(),
        shift,
        kernels,
    })
}

/// `P_n = L_τⁿ P₀`, `n = 0..=nt`, `τ = T / nt`.
pub fn solve(problem: &GalerkinDre, nt: usize) -> Result<Trajectory> {
    collect(LieStepper::new(problem, nt, Execution::default())?, problem.shift)
}

/// Shifted scheme; the trajectory stores `P̄` and maps back through
/// [`Trajectory::physical`].
pub fn solve_transformed(problem: &GalerkinDre, nt: usize) -> Result<Trajectory> {
    collect(LieStepper::new_transformed(problem, nt, Execution::default())?, problem.shift)
}

/// `X` with `Â X + X Âᵀ = Â P₀ + P₀ Âᵀ`, the regularized initial value built
/// with the discrete generator.
pub fn regularized_initial(problem: &GalerkinDre) -> Result<SymmetricKernel> {
    let generator = problem.generator();
    let p0 = problem.initial_kernel();
    let rhs = crate::linalg::lyapunov_apply(&generator, &p0)?;
    regularized_initial_with_rhs(problem, &rhs)
}

/// `X` with `Â X + X Âᵀ = R` for a caller-supplied projection `R`.
pub fn regularized_initial_with_rhs(problem: &GalerkinDre, rhs: &SymmetricKernel) -> Result<SymmetricKernel> {
    if !(problem.shift > 0.0) {
        return Err(Error::SingularLyapunov(
            "regularized initial value needs a shifted generator (shift > 0)".into(),
        ));
    }
    lyapunov_solve(&problem.generator(), rhs)
}

/// Classical RK4 on `P' = ÂP + PÂᵀ + Q̂ − PŜP`.
pub fn rk4_reference(problem: &GalerkinDre, nt_fine: usize) -> Result<Trajectory> {
    if nt_fine == 0 {
        return Err(Error::InvalidProblem("number of steps must be >= 1".into()));
    }
    let a = problem.generator();
    let q = problem.q_hat();
    let ell = &problem.ell_xi;
    let tau = problem.horizon / nt_fine as f64;
    let p0 = problem.initial_kernel();
    let scale = p0.max_abs().max(problem.horizon * q.max_abs());
    let limit = 1e6 * scale;

    let rhs = |p: &SymmetricKernel| -> SymmetricKernel {
        let ap = crate::linalg::mat_mul(a.as_mat(), p.as_mat(), Par::Seq);
        let u = p.apply(ell);
        let n = p.dim();
        let mut out = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                out[(i, j)] = ap[(i, j)] + ap[(j, i)] + q.get(i, j) - u[i] * u[j];
            }
        }
        SymmetricKernel::from_symmetric_mat(out)
    };
    let axpy = |p: &SymmetricKernel, c: f64, k: &SymmetricKernel| -> SymmetricKernel {
        let m = p.as_mat() + faer::Scale(c) * k.as_mat();
        SymmetricKernel::symmetrize_unchecked(m.as_ref())
    };

    let mut kernels = Vec::with_capacity(nt_fine + 1);
    kernels.push(p0);
    for step in 0..nt_fine {
        let p = kernels.last().unwrap();
        let k1 = rhs(p);
        let k2 = rhs(&axpy(p, 0.5 * tau, &k1));
        let k3 = rhs(&axpy(p, 0.5 * tau, &k2));
        let k4 = rhs(&axpy(p, tau, &k3));
        let incr = faer::Scale(tau / 6.0) * (k1.as_mat() + faer::Scale(2.0) * k2.as_mat() + faer::Scale(2.0) * k3.as_mat() + k4.as_mat());
        let next = SymmetricKernel::symmetrize_unchecked((p.as_mat() + incr).as_ref());
        let norm = next.max_abs();
        if !norm.is_finite() || (scale > 0.0 && norm > limit) {
            return Err(Error::BlowUp {
                step: step + 1,
                norm,
                limit,
            });
        }
        kernels.push(next);
    }
    Ok(Trajectory {
        tau,
        kernels,
        transformed: false,
        shift: problem.shift,
    })
}

/// Exact solution of `p' = 2ap + q − sp²`, `p(0) = p₀`, from the linear
/// Hamiltonian system `[v; w]' = [[a, q], [s, −a]]·[v; w]`, `p = v/w`.
pub fn scalar_riccati_closed_form(a: f64, q: f64, s: f64, p0: f64, t: f64) -> Result<f64> {
    if !(s >= 0.0 && q >= 0.0 && p0 >= 0.0) {
        return Err(Error::InvalidProblem(format!(
            "scalar Riccati needs s, q, p0 >= 0 (got s={s}, q={q}, p0={p0})"
        )));
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t, "scalar_riccati_closed_form"));
    }
    let h = DenseMatrix::from_rows(&[vec![a, q], vec![s, -a]])?;
    let g = expm(&h, t)?;
    let v = g.get(0, 0) * p0 + g.get(0, 1);
    let w = g.get(1, 0) * p0 + g.get(1, 1);
    if w <= 0.0 {
        return Err(Error::FiniteEscape(t));
    }
    Ok(v / w)
}

/// Running record of symmetry and positivity along trajectories.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureStats {
    pub kernels_checked: usize,
    /// `max ‖P − Pᵀ‖_max / ‖P‖`.
    pub max_symmetry_ratio: f64,
    /// Most negative `λ_min / ‖P‖` among kernels small enough for a full
    /// eigensolve.
    pub worst_min_eig_ratio: f64,
    /// Kernels for which `P + 10⁻¹⁰‖P‖ I` failed to factor.
    pub psd_violations: usize,
}

/// Kernels up to this size get an exact eigenvalue check; larger ones are
/// certified through a shifted Cholesky factorization.
const EXACT_PSD_CHECK_DIM: usize = 128;
pub const PSD_TOL: f64 = 1e-10;

impl StructureStats {
    pub fn observe(&mut self, p: &SymmetricKernel) -> Result<()> {
        self.kernels_checked += 1;
        let n = p.dim();
        let (norm, min_eig) = if n <= EXACT_PSD_CHECK_DIM {
            let ev = symmetric_eigenvalues(p)?;
            let norm = ev[0].abs().max(ev[n - 1].abs());
            (norm, Some(ev[0]))
        } else {
            let norm = spectral_norm_of_operator(n, |x, y| y.copy_from_slice(&p.apply(x)))?;
            (norm, None)
        };
        if norm == 0.0 {
            return Ok(());
        }
        self.max_symmetry_ratio = self.max_symmetry_ratio.max(p.symmetry_defect() / norm);
        match min_eig {
            Some(lmin) => {
                let r = lmin / norm;
                self.worst_min_eig_ratio = self.worst_min_eig_ratio.min(r);
                if r < -PSD_TOL {
                    self.psd_violations += 1;
                }
            }
            None => {
                let mut shifted = p.as_mat().to_owned();
                for i in 0..n {
                    shifted[(i, i)] += PSD_TOL * norm;
                }
                if cholesky(&SymmetricKernel::from_symmetric_mat(shifted)).is_err() {
                    self.psd_violations += 1;
                }
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &StructureStats) {
        self.kernels_checked += other.kernels_checked;
        self.max_symmetry_ratio = self.max_symmetry_ratio.max(other.max_symmetry_ratio);
        self.worst_min_eig_ratio = self.worst_min_eig_ratio.min(other.worst_min_eig_ratio);
        self.psd_violations += other.psd_violations;
    }

    pub fn passes(&self) -> bool {
        self.psd_violations == 0 && self.max_symmetry_ratio <= 1e-13
    }
}
