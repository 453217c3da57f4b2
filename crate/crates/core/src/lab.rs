//! Convergence studies: grid transfer, L²-operator-norm errors and observed
//! orders.
//!
//! All runs of a study are advanced in lockstep with their reference, so
//! errors are accumulated on the fly and no trajectory is ever stored.

use std::fmt::Write as _;

use faer::Par;
use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::exec::Execution;
use crate::fem::{build_problem, FieldSpec, GalerkinDre};
use crate::linalg::{
    congruence_transform, spectral_norm, spectral_norm_of_operator, CholeskyFactor, DenseMatrix,
    SymmetricKernel, EIGEN_SWITCHOVER,
};
use crate::solver::{LieStepper, StructureStats, Trajectory};

/// Nodal interpolation of coarse P1 functions onto a nested finer mesh.
#[derive(Clone, Debug)]
pub struct InjectionOperator {
    coarse_nx: usize,
    fine_nx: usize,
    /// Per fine node: `(coarse node, weight)` pairs.
    rows: Vec<Vec<(usize, f64)>>,
}

pub fn build_injection(coarse_nx: usize, fine_nx: usize) -> Result<InjectionOperator> {
    for nx in [coarse_nx, fine_nx] {
        if nx < 2 || nx % 2 != 0 {
            return Err(Error::InvalidMesh(format!("nx must be even and >= 2, got {nx}")));
        }
    }
    if !fine_nx.is_multiple_of(coarse_nx) || !(fine_nx / coarse_nx).is_power_of_two() {
        return Err(Error::IncompatibleGrids(format!(
            "fine nx {fine_nx} is not a power-of-two refinement of {coarse_nx}"
        )));
    }
    let r = fine_nx / coarse_nx;
    let rf = r as f64;
    let node = |i: usize, j: usize| (i % coarse_nx) + coarse_nx * (j % coarse_nx);
    let mut rows = Vec::with_capacity(fine_nx * fine_nx);
    for jf in 0..fine_nx {
        for i_f in 0..fine_nx {
            let (ci, cj) = (i_f / r, jf / r);
            let (a, b) = (i_f % r, jf % r);
            let (xi, eta) = (a as f64 / rf, b as f64 / rf);
            let (p00, p10, p11, p01) = (node(ci, cj), node(ci + 1, cj), node(ci + 1, cj + 1), node(ci, cj + 1));
            let candidates = if a >= b {
                [(p00, 1.0 - xi), (p10, xi - eta), (p11, eta)]
            } else {
                [(p00, 1.0 - eta), (p11, xi), (p01, eta - xi)]
            };
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(3);
            for (k, w) in candidates {
                if w == 0.0 {
                    continue;
                }
                match row.iter_mut().find(|(c, _)| *c == k) {
                    Some(entry) => entry.1 += w,
                    None => row.push((k, w)),
                }
            }
            rows.push(row);
        }
    }
    Ok(InjectionOperator { coarse_nx, fine_nx, rows })
}

impl InjectionOperator {
    pub fn identity(nx: usize) -> Result<Self> {
        build_injection(nx, nx)
    }

    pub fn coarse_nx(&self) -> usize {
        self.coarse_nx
    }

    pub fn fine_nx(&self) -> usize {
        self.fine_nx
    }

    pub fn is_identity(&self) -> bool {
        self.coarse_nx == self.fine_nx
    }

    pub fn coarse_dim(&self) -> usize {
        self.coarse_nx * self.coarse_nx
    }

    pub fn fine_dim(&self) -> usize {
        self.fine_nx * self.fine_nx
    }

    pub fn matrix(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.fine_dim(), self.coarse_dim()).into_mat();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] += w;
            }
        }
        DenseMatrix::from_mat(m).expect("injection weights are finite")
    }

    /// `J·x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, w)| w * x[j]).sum();
        }
    }

    /// `Jᵀ·y`.
    pub fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (yi, row) in y.iter().zip(&self.rows) {
            for &(j, w) in row {
                out[j] += w * yi;
            }
        }
    }
}

/// `J·P·Jᵀ`.
pub fn extend_kernel(p: &SymmetricKernel, j: &InjectionOperator) -> Result<SymmetricKernel> {
    if p.dim() != j.coarse_dim() {
        return Err(dim_mismatch("extend_kernel", j.coarse_dim(), p.dim()));
    }
    if j.is_identity() {
        return Ok(p.clone());
    }
    Ok(congruence_transform(j.matrix().as_mat(), p.as_mat(), Par::Seq))
}

/// L²-operator norm of the coefficient action `c ↦ P·M·c`, `M = L·Lᵀ`.
pub fn operator_norm_l2(p: &SymmetricKernel, mfac: &CholeskyFactor) -> Result<f64> {
    operator_norm_l2_par(p, mfac, Par::Seq)
}

fn operator_norm_l2_par(p: &SymmetricKernel, mfac: &CholeskyFactor, par: Par) -> Result<f64> {
    if p.dim() != mfac.dim() {
        return Err(dim_mismatch("operator_norm_l2", mfac.dim(), p.dim()));
    }
    if p.dim() <= EIGEN_SWITCHOVER {
        spectral_norm(&mfac.congruence(p, par))
    } else {
        weighted_operator_norm(mfac, |x, y| y.copy_from_slice(&p.apply(x)))
    }
}

/// `‖Lᵀ·D·L‖₂` for `D` given only through products.
fn weighted_operator_norm(mfac: &CholeskyFactor, mut apply_d: impl FnMut(&[f64], &mut [f64])) -> Result<f64> {
    let n = mfac.dim();
    let mut lx = vec![0.0; n];
    let mut dlx = vec![0.0; n];
    spectral_norm_of_operator(n, |x, y| {
        mfac.apply_lower(x, &mut lx);
        apply_d(&lx, &mut dlx);
        mfac.apply_lower_transpose(&dlx, y);
    })
}

/// `‖J_a·A·J_aᵀ − J_b·B·J_bᵀ‖` in the common (fine) space.
pub fn difference_norm(
    a: &SymmetricKernel,
    j_a: &InjectionOperator,
    b: &SymmetricKernel,
    j_b: &InjectionOperator,
    mfac: &CholeskyFactor,
) -> Result<f64> {
    difference_norm_par(a, j_a, b, j_b, mfac, Par::Seq)
}

fn difference_norm_par(
    a: &SymmetricKernel,
    j_a: &InjectionOperator,
    b: &SymmetricKernel,
    j_b: &InjectionOperator,
    mfac: &CholeskyFactor,
    par: Par,
) -> Result<f64> {
    if j_a.fine_dim() != mfac.dim() || j_b.fine_dim() != mfac.dim() {
        return Err(Error::IncompatibleGrids(format!(
            "injections target {} and {} dofs, mass factor has {}",
            j_a.fine_dim(),
            j_b.fine_dim(),
            mfac.dim()
        )));
    }
    if a.dim() != j_a.coarse_dim() || b.dim() != j_b.coarse_dim() {
        return Err(dim_mismatch("difference_norm", j_a.coarse_dim(), a.dim()));
    }
    let n = mfac.dim();
    if n <= EIGEN_SWITCHOVER {
        let d = extend_kernel(a, j_a)?.sub(&extend_kernel(b, j_b)?)?;
        return spectral_norm(&mfac.congruence(&d, par));
    }
    let mut ca = vec![0.0; a.dim()];
    let mut cb = vec![0.0; b.dim()];
    let mut fb = vec![0.0; n];
    weighted_operator_norm(mfac, |x, y| {
        j_a.apply_transpose(x, &mut ca);
        j_a.apply(&a.apply(&ca), y);
        j_b.apply_transpose(x, &mut cb);
        j_b.apply(&b.apply(&cb), &mut fb);
        y.iter_mut().zip(&fb).for_each(|(yi, fi)| *yi -= fi);
    })
}

/// Running numerator and denominator of the relative error
/// `max_n ‖P_n − P_ref(t_n)‖ / max_n ‖P_ref(t_n)‖`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorAccumulator {
    pub max_difference: f64,
    pub max_reference: f64,
}

impl ErrorAccumulator {
    pub fn observe(&mut self, difference: f64, reference: f64) {
        self.max_difference = self.max_difference.max(difference);
        self.max_reference = self.max_reference.max(reference);
    }

    pub fn relative(&self) -> f64 {
        if self.max_difference == 0.0 {
            0.0
        } else if self.max_reference == 0.0 {
            f64::INFINITY
        } else {
            self.max_difference / self.max_reference
        }
    }
}

/// Relative error of `traj` against `reference` over the steps `n = 1..=N`
/// of `traj`; `reference` must use a step size that divides `traj.tau`.
pub fn err_tau_h(
    traj: &Trajectory,
    reference: &Trajectory,
    j_traj: &InjectionOperator,
    j_ref: &InjectionOperator,
    mfac: &CholeskyFactor,
) -> Result<f64> {
    let stride = time_stride(traj.steps(), reference.steps())?;
    let horizon_gap = (traj.time(traj.steps()) - reference.time(reference.steps())).abs();
    if horizon_gap > 1e-12 * reference.time(reference.steps()).abs().max(1.0) {
        return Err(Error::IncompatibleGrids("trajectories end at different times".into()));
    }
    let mut acc = ErrorAccumulator::default();
    for n in 1..=traj.steps() {
        let r = reference.physical(n * stride);
        let diff = difference_norm(&traj.physical(n), j_traj, &r, j_ref, mfac)?;
        let norm = difference_norm(&r, j_ref, &SymmetricKernel::zeros(r.dim()), j_ref, mfac)?;
        acc.observe(diff, norm);
    }
    Ok(acc.relative())
}

fn time_stride(nt: usize, nt_ref: usize) -> Result<usize> {
    if nt == 0 || !nt_ref.is_multiple_of(nt) {
        return Err(Error::IncompatibleGrids(format!(
            "reference with {nt_ref} steps does not refine {nt} steps"
        )));
    }
    Ok(nt_ref / nt)
}

/// Least-squares slope of `log err` against `log step`. Pairs with
/// nonpositive error are dropped with a warning.
pub fn observed_order(pairs: &[(f64, f64)]) -> Result<f64> {
    let mut pts = Vec::with_capacity(pairs.len());
    for &(step, err) in pairs {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InsufficientData(format!("step size {step} is not positive")));
        }
        if !(err > 0.0) || !err.is_finite() {
            warn!("dropping error {err} at step {step} from order fit");
            continue;
        }
        pts.push((step.ln(), err.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::InsufficientData(format!("{} usable points, need 2", pts.len())));
    }
    let m = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all step sizes coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    Ok(sxy / sxx)
}

/// Drops points whose error is within a factor 3 of the smallest one.
pub fn drop_stagnated(pairs: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let floor = pairs.iter().map(|p| p.1).filter(|e| *e > 0.0).fold(f64::INFINITY, f64::min);
    pairs.iter().copied().filter(|p| p.1 >= 3.0 * floor).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Full tensor product of the spatial and temporal ladders.
    #[default]
    None,
    /// One run per `nx` with `τ = h²`.
    #[serde(rename = "tau-h2", alias = "tau-equals-h-squared")]
    TauEqualsHSquared,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub nx_ladder: Vec<usize>,
    /// Ignored under [`Coupling::TauEqualsHSquared`].
    pub nt_ladder: Vec<usize>,
    pub coupling: Coupling,
    pub horizon: f64,
    /// Positive values run the shifted scheme and map back.
    pub shift: f64,
    pub xi: FieldSpec,
    pub zeta: FieldSpec,
    /// `(nx, nt)`; defaults to the finest grid in the ladders.
    pub reference: Option<(usize, usize)>,
    pub execution: Execution,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            nx_ladder: vec![8],
            nt_ladder: vec![8, 16, 32, 64],
            coupling: Coupling::None,
            horizon: 1.0,
            shift: 0.0,
            xi: FieldSpec::default_xi(),
            zeta: FieldSpec::default_zeta(),
            reference: None,
            execution: Execution::default(),
        }
    }
}

impl StudyConfig {
    /// `(nx, nt)` of every compared run.
    pub fn runs(&self) -> Result<Vec<(usize, usize)>> {
        if self.nx_ladder.is_empty() {
            return Err(Error::InvalidProblem("empty nx ladder".into()));
        }
        let mut runs = Vec::new();
        match self.coupling {
            Coupling::None => {
                if self.nt_ladder.is_empty() {
                    return Err(Error::InvalidProblem("empty nt ladder".into()));
                }
                for &nx in &self.nx_ladder {
                    for &nt in &self.nt_ladder {
                        runs.push((nx, nt));
                    }
                }
            }
            Coupling::TauEqualsHSquared => {
                for &nx in &self.nx_ladder {
                    runs.push((nx, coupled_steps(self.horizon, nx)?));
                }
            }
        }
        runs.sort_unstable();
        runs.dedup();
        Ok(runs)
    }

    pub fn reference_grid(&self) -> Result<(usize, usize)> {
        let runs = self.runs()?;
        let reference = self.reference.unwrap_or_else(|| {
            let nx = runs.iter().map(|r| r.0).max().unwrap_or(0);
            let nt = runs.iter().map(|r| r.1).max().unwrap_or(0);
            (nx, nt)
        });
        for &(nx, nt) in &runs {
            if nx > reference.0 || nt > reference.1 {
                return Err(Error::IncompatibleGrids(format!(
                    "reference ({}, {}) is coarser than run ({nx}, {nt})",
                    reference.0, reference.1
                )));
            }
            build_injection(nx, reference.0)?;
            time_stride(nt, reference.1)?;
        }
        Ok(reference)
    }
}

/// Number of steps with `τ = h²` on `[0, T]`.
pub fn coupled_steps(horizon: f64, nx: usize) -> Result<usize> {
    let nt = horizon * (nx * nx) as f64;
    let rounded = nt.round();
    if rounded < 1.0 || (nt - rounded).abs() > 1e-9 * nt.max(1.0) {
        return Err(Error::InvalidProblem(format!(
            "T = {horizon} is not an integer multiple of h² = 1/{}",
            nx * nx
        )));
    }
    Ok(rounded as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub nx: usize,
    pub h: f64,
    pub nt: usize,
    pub tau: f64,
    /// Against the study reference.
    pub err: f64,
    /// Against the finest-`τ` run with the same `nx`, when there is one.
    pub err_same_nx: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub label: String,
    pub slope: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauDiagnostic {
    pub nx: usize,
    pub min_error: f64,
    /// Errors at the two smallest step sizes, finest first.
    pub finest_errors: [f64; 2],
    /// `|e₁ − e₂| / max(e₁, e₂)` for those two errors.
    pub relative_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub horizon: f64,
    pub shift: f64,
    pub xi: String,
    pub zeta: String,
    pub coupling: Coupling,
    pub reference_nx: usize,
    pub reference_nt: usize,
    pub entries: Vec<ErrorEntry>,
    /// Per `nx`, errors against the same-`nx` finest-`τ` run.
    pub temporal_orders: Vec<OrderFit>,
    /// Per `nx`, errors against the study reference with stagnated points
    /// removed.
    pub reference_temporal_orders: Vec<OrderFit>,
    pub spatial_orders: Vec<OrderFit>,
    pub plateaus: Vec<PlateauDiagnostic>,
    pub structure: StructureStats,
}

impl ConvergenceReport {
    pub fn entry(&self, nx: usize, nt: usize) -> Option<&ErrorEntry> {
        self.entries.iter().find(|e| e.nx == nx && e.nt == nt)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("# nx,h,nt,tau,err\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{:.16e},{},{:.16e},{:.16e}", e.nx, e.h, e.nt, e.tau, e.err);
        }
        s
    }

    pub fn orders_summary(&self) -> String {
        let mut s = String::new();
        for (title, fits) in [
            ("temporal (same-nx reference)", &self.temporal_orders),
            ("temporal (study reference, stagnation removed)", &self.reference_temporal_orders),
            ("spatial", &self.spatial_orders),
        ] {
            let _ = writeln!(s, "{title}:");
            if fits.is_empty() {
                let _ = writeln!(s, "  (none)");
            }
            for f in fits {
                let _ = writeln!(s, "  {}: {:.4} ({} points)", f.label, f.slope, f.points);
            }
        }
        s
    }
}

struct Run {
    nx: usize,
    nt: usize,
    stride: usize,
    injection: InjectionOperator,
    stepper: LieStepper,
    acc: ErrorAccumulator,
    stats: StructureStats,
}

fn new_stepper(problem: &GalerkinDre, nt: usize, exec: Execution) -> Result<LieStepper> {
    if problem.shift > 0.0 {
        LieStepper::new_transformed(problem, nt, exec)
    } else {
        LieStepper::new(problem, nt, exec)
    }
}

/// Advances the reference and every run in lockstep; returns each run's
/// relative error (same order as `runs`) and the merged structure record.
fn run_group(
    reference: &GalerkinDre,
    ref_nx: usize,
    ref_nt: usize,
    runs: &[(&GalerkinDre, usize, usize)],
    exec: Execution,
) -> Result<(Vec<f64>, StructureStats)> {
    let par = exec.faer_par();
    let mfac = reference.mass_factor();
    let j_ref = InjectionOperator::identity(ref_nx)?;
    let mut ref_stepper = new_stepper(reference, ref_nt, exec)?;
    let mut ref_stats = StructureStats::default();
    ref_stats.observe(ref_stepper.current())?;

    let mut states = Vec::new();
    let mut slots = Vec::with_capacity(runs.len());
    for &(problem, nx, nt) in runs {
        if nx == ref_nx && nt == ref_nt {
            slots.push(None);
            continue;
        }
        slots.push(Some(states.len()));
        let stepper = new_stepper(problem, nt, exec)?;
        let mut stats = StructureStats::default();
        stats.observe(stepper.current())?;
        states.push(Run {
            nx,
            nt,
            stride: time_stride(nt, ref_nt)?,
            injection: build_injection(nx, ref_nx)?,
            stepper,
            acc: ErrorAccumulator::default(),
            stats,
        });
    }

    for k in 1..=ref_nt {
        ref_stepper.step()?;
        ref_stats.observe(ref_stepper.current())?;
        if !states.iter().any(|r| k % r.stride == 0) {
            continue;
        }
        let ref_phys = ref_stepper.physical();
        let ref_norm = operator_norm_l2_par(&ref_phys, mfac, par)?;
        let outcomes = exec.map_mut(&mut states, |run| -> Result<()> {
            if k % run.stride != 0 {
                return Ok(());
            }
            run.stepper.step()?;
            run.stats.observe(run.stepper.current())?;
            let diff = difference_norm_par(&run.stepper.physical(), &run.injection, &ref_phys, &j_ref, mfac, Par::Seq)?;
            run.acc.observe(diff, ref_norm);
            Ok(())
        });
        outcomes.into_iter().collect::<Result<Vec<()>>>()?;
        if k % (ref_nt / 8).max(1) == 0 {
            debug!("reference ({ref_nx}, {ref_nt}): step {k}");
        }
    }

    let mut stats = ref_stats;
    for run in &states {
        debug!("run ({}, {}): error {:.3e}", run.nx, run.nt, run.acc.relative());
        stats.merge(&run.stats);
    }
    let errors = slots
        .iter()
        .map(|slot| slot.map_or(0.0, |i| states[i].acc.relative()))
        .collect();
    Ok((errors, stats))
}

/// Runs every configured `(nx, nt)` pair against the reference and fits
/// observed orders.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    let exec = config.execution;
    let runs = config.runs()?;
    let (ref_nx, ref_nt) = config.reference_grid()?;
    info!("study: {} runs against reference ({ref_nx}, {ref_nt})", runs.len());

    let mut nxs: Vec<usize> = runs.iter().map(|r| r.0).chain([ref_nx]).collect();
    nxs.sort_unstable();
    nxs.dedup();
    let problems = exec
        .map(&nxs, |&nx| build_problem(nx, &config.xi, &config.zeta, config.shift, config.horizon))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let problem_of = |nx: usize| &problems[nxs.binary_search(&nx).expect("problem built for every nx")];

    let group: Vec<_> = runs.iter().map(|&(nx, nt)| (problem_of(nx), nx, nt)).collect();
    let (global, mut structure) = run_group(problem_of(ref_nx), ref_nx, ref_nt, &group, exec)?;

    let mut same_nx = vec![None; runs.len()];
    for &nx in &nxs {
        let idx: Vec<usize> = (0..runs.len()).filter(|&i| runs[i].0 == nx).collect();
        if idx.len() < 2 {
            continue;
        }
        if nx == ref_nx {
            for &i in &idx {
                same_nx[i] = Some(global[i]);
            }
            continue;
        }
        let finest = idx.iter().map(|&i| runs[i].1).max().expect("non-empty");
        let members: Vec<_> = idx.iter().map(|&i| (problem_of(nx), nx, runs[i].1)).collect();
        let (errs, stats) = run_group(problem_of(nx), nx, finest, &members, exec)?;
        structure.merge(&stats);
        for (&i, e) in idx.iter().zip(errs) {
            same_nx[i] = Some(e);
        }
    }

    let entries: Vec<ErrorEntry> = runs
        .iter()
        .enumerate()
        .map(|(i, &(nx, nt))| ErrorEntry {
            nx,
            h: 1.0 / nx as f64,
            nt,
            tau: config.horizon / nt as f64,
            err: global[i],
            err_same_nx: same_nx[i],
        })
        .collect();

    Ok(ConvergenceReport {
        horizon: config.horizon,
        shift: config.shift,
        xi: config.xi.to_string(),
        zeta: config.zeta.to_string(),
        coupling: config.coupling,
        reference_nx: ref_nx,
        reference_nt: ref_nt,
        temporal_orders: temporal_fits(&entries, |e| e.err_same_nx, false),
        reference_temporal_orders: temporal_fits(&entries, |e| Some(e.err), true),
        spatial_orders: spatial_fits(&entries, config.coupling),
        plateaus: plateau_diagnostics(&entries),
        structure,
        entries,
    })
}

fn fit(label: String, pairs: &[(f64, f64)]) -> Option<OrderFit> {
    let usable = pairs.iter().filter(|p| p.1 > 0.0).count();
    observed_order(pairs).ok().map(|slope| OrderFit { label, slope, points: usable })
}

fn temporal_fits(entries: &[ErrorEntry], err: impl Fn(&ErrorEntry) -> Option<f64>, filter: bool) -> Vec<OrderFit> {
    let mut nxs: Vec<usize> = entries.iter().map(|e| e.nx).collect();
    nxs.dedup();
    nxs.into_iter()
        .filter_map(|nx| {
            let pairs: Vec<(f64, f64)> = entries
                .iter()
                .filter(|e| e.nx == nx)
                .filter_map(|e| err(e).map(|v| (e.tau, v)))
                .collect();
            let pairs = if filter { drop_stagnated(&pairs) } else { pairs };
            fit(format!("nx={nx}"), &pairs)
        })
        .collect()
}

fn spatial_fits(entries: &[ErrorEntry], coupling: Coupling) -> Vec<OrderFit> {
    match coupling {
        Coupling::TauEqualsHSquared => {
            let pairs: Vec<(f64, f64)> = entries.iter().map(|e| (e.h, e.err)).collect();
            fit("tau=h^2".into(), &pairs).into_iter().collect()
        }
        Coupling::None => {
            let mut nts: Vec<usize> = entries.iter().map(|e| e.nt).collect();
            nts.sort_unstable();
            nts.dedup();
            nts.into_iter()
                .filter_map(|nt| {
                    let pairs: Vec<(f64, f64)> =
                        entries.iter().filter(|e| e.nt == nt).map(|e| (e.h, e.err)).collect();
                    fit(format!("nt={nt}"), &drop_stagnated(&pairs))
                })
                .collect()
        }
    }
}

fn plateau_diagnostics(entries: &[ErrorEntry]) -> Vec<PlateauDiagnostic> {
    let mut nxs: Vec<usize> = entries.iter().map(|e| e.nx).collect();
    nxs.dedup();
    nxs.into_iter()
        .filter_map(|nx| {
            let mut row: Vec<&ErrorEntry> = entries.iter().filter(|e| e.nx == nx).collect();
            if row.len() < 2 {
                return None;
            }
            row.sort_by(|a, b| a.tau.total_cmp(&b.tau));
            let (e1, e2) = (row[0].err, row[1].err);
            let big = e1.max(e2);
            Some(PlateauDiagnostic {
                nx,
                min_error: row.iter().map(|e| e.err).fold(f64::INFINITY, f64::min),
                finest_errors: [e1, e2],
                relative_change: if big > 0.0 { (e1 - e2).abs() / big } else { 0.0 },
            })
        })
        .collect()
}
