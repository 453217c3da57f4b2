//! Periodic P1 finite elements on the unit square.
//!
//! The square is cut into `nx × nx` cells, each split along its
//! `(i, j) → (i+1, j+1)` diagonal. Nodes on opposite sides are identified,
//! so the space has `nx²` degrees of freedom.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use faer::{Mat, Par};
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{cholesky, CholeskyFactor, DenseMatrix, SymmetricKernel};

#[derive(Clone, Debug, PartialEq)]
pub struct Triangle {
    /// Periodic node indices, counter-clockwise.
    pub nodes: [usize; 3],
    /// Unwrapped vertex coordinates in `[0, 1]²`.
    pub vertices: [[f64; 2]; 3],
}

impl Triangle {
    pub fn area(&self) -> f64 {
        let [a, b, c] = self.vertices;
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Physical point for barycentric coordinates `l`.
    pub fn point(&self, l: [f64; 3]) -> [f64; 2] {
        let [a, b, c] = self.vertices;
        [
            l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
            l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
        ]
    }

    /// Constant gradients of the three local hat functions.
    pub fn gradients(&self) -> [[f64; 2]; 3] {
        let [a, b, c] = self.vertices;
        let two_area = 2.0 * self.area();
        [
            [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
            [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
        ]
    }
}

#[derive(Clone, Debug)]
pub struct PeriodicMesh {
    nx: usize,
    coords: Vec<[f64; 2]>,
    triangles: Vec<Triangle>,
}

/// Uniform periodic triangulation with `nx` cells per direction.
pub fn build_mesh(nx: usize) -> Result<PeriodicMesh> {
    if nx < 2 || !nx.is_multiple_of(2) {
        return Err(Error::InvalidMesh(format!("nx must be even and >= 2, got {nx}")));
    }
    let h = 1.0 / nx as f64;
    let node = |i: usize, j: usize| (i % nx) + nx * (j % nx);
    let coords = (0..nx * nx).map(|k| [(k % nx) as f64 * h, (k / nx) as f64 * h]).collect();
    let mut triangles = Vec::with_capacity(2 * nx * nx);
    for j in 0..nx {
        for i in 0..nx {
            let p = |di: usize, dj: usize| [(i + di) as f64 * h, (j + dj) as f64 * h];
            triangles.push(Triangle {
                nodes: [node(i, j), node(i + 1, j), node(i + 1, j + 1)],
                vertices: [p(0, 0), p(1, 0), p(1, 1)],
            });
            triangles.push(Triangle {
                nodes: [node(i, j), node(i + 1, j + 1), node(i, j + 1)],
                vertices: [p(0, 0), p(1, 1), p(0, 1)],
            });
        }
    }
    Ok(PeriodicMesh { nx, coords, triangles })
}

impl PeriodicMesh {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn h(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }
}

/// `M_ij = ∫ φ_i φ_j`.
pub fn assemble_mass(mesh: &PeriodicMesh) -> SymmetricKernel {
    let n = mesh.node_count();
    let mut m = Mat::<f64>::zeros(n, n);
    for t in mesh.triangles() {
        let a = t.area();
        for (li, &gi) in t.nodes.iter().enumerate() {
            for (lj, &gj) in t.nodes.iter().enumerate() {
                m[(gi, gj)] += if li == lj { a / 6.0 } else { a / 12.0 };
            }
        }
    }
    SymmetricKernel::symmetrize_unchecked(m.as_ref())
}

/// `A_ij = −∫ ∇φ_i·∇φ_j`.
pub fn assemble_stiffness(mesh: &PeriodicMesh) -> SymmetricKernel {
    let n = mesh.node_count();
    let mut k = Mat::<f64>::zeros(n, n);
    for t in mesh.triangles() {
        let a = t.area();
        let g = t.gradients();
        for (li, &gi) in t.nodes.iter().enumerate() {
            for (lj, &gj) in t.nodes.iter().enumerate() {
                k[(gi, gj)] -= a * (g[li][0] * g[lj][0] + g[li][1] * g[lj][1]);
            }
        }
    }
    SymmetricKernel::symmetrize_unchecked(k.as_ref())
}

// Symmetric 6-point rule, exact for polynomials of degree 4.
const QUAD_A: f64 = 0.445_948_490_915_964_9;
const QUAD_WA: f64 = 0.223_381_589_678_011_47;
const QUAD_C: f64 = 0.091_576_213_509_770_74;
const QUAD_WC: f64 = 0.109_951_743_655_321_87;

fn quadrature_points() -> [([f64; 3], f64); 6] {
    let b = 1.0 - 2.0 * QUAD_A;
    let d = 1.0 - 2.0 * QUAD_C;
    [
        ([QUAD_A, QUAD_A, b], QUAD_WA),
        ([QUAD_A, b, QUAD_A], QUAD_WA),
        ([b, QUAD_A, QUAD_A], QUAD_WA),
        ([QUAD_C, QUAD_C, d], QUAD_WC),
        ([QUAD_C, d, QUAD_C], QUAD_WC),
        ([d, QUAD_C, QUAD_C], QUAD_WC),
    ]
}

/// `ℓ_j = ∫ f φ_j`.
pub fn assemble_load(mesh: &PeriodicMesh, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    let mut l = vec![0.0; mesh.node_count()];
    let rule = quadrature_points();
    for t in mesh.triangles() {
        let a = t.area();
        for (bary, w) in rule {
            let [x, y] = t.point(bary);
            let fv = f(x, y);
            if !fv.is_finite() {
                return Err(Error::NonFinite("load integrand"));
            }
            for (k, &g) in t.nodes.iter().enumerate() {
                l[g] += a * w * fv * bary[k];
            }
        }
    }
    Ok(l)
}

/// `ℓ_j = ∫_{(1/2,1)×(0,1)} φ_j`, exact.
pub fn assemble_half_domain(mesh: &PeriodicMesh) -> Result<Vec<f64>> {
    if !mesh.nx().is_multiple_of(2) {
        return Err(Error::InvalidMesh("half-domain functional needs even nx".into()));
    }
    let mut l = vec![0.0; mesh.node_count()];
    for t in mesh.triangles() {
        let xmin = t.vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
        if xmin >= 0.5 - 1e-12 {
            let share = t.area() / 3.0;
            for &g in &t.nodes {
                l[g] += share;
            }
        }
    }
    Ok(l)
}

/// Built-in scalar fields for the control profile ξ and the initial-data
/// profile ζ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// `(1 + cos 2πx)(1 + cos 2πy)/2`
    DefaultXi,
    /// `sin 2πx · sin 2πy + 1`
    DefaultZeta,
    /// Periodic bump `exp(κ(cos 2π(x−½) + cos 2π(y−½) − 2))`, κ = 4.
    GaussianBump,
    Constant,
}

const BUMP_KAPPA: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub amplitude: f64,
}

impl FieldSpec {
    pub const fn new(kind: FieldKind, amplitude: f64) -> Self {
        Self { kind, amplitude }
    }

    pub const fn default_xi() -> Self {
        Self::new(FieldKind::DefaultXi, 1.0)
    }

    pub const fn default_zeta() -> Self {
        Self::new(FieldKind::DefaultZeta, 1.0)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FieldKind::DefaultXi => "default-xi",
            FieldKind::DefaultZeta => "default-zeta",
            FieldKind::GaussianBump => "gaussian-bump",
            FieldKind::Constant => "constant",
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let tp = 2.0 * PI;
        let v = match self.kind {
            FieldKind::DefaultXi => 0.5 * (1.0 + (tp * x).cos()) * (1.0 + (tp * y).cos()),
            FieldKind::DefaultZeta => (tp * x).sin() * (tp * y).sin() + 1.0,
            FieldKind::GaussianBump => {
                (BUMP_KAPPA * ((tp * (x - 0.5)).cos() + (tp * (y - 0.5)).cos() - 2.0)).exp()
            }
            FieldKind::Constant => 1.0,
        };
        self.amplitude * v
    }

    /// Analytic Laplacian of the field.
    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        let tp = 2.0 * PI;
        let k2 = tp * tp;
        let v = match self.kind {
            FieldKind::DefaultXi => {
                let (cx, cy) = ((tp * x).cos(), (tp * y).cos());
                -0.5 * k2 * (cx * (1.0 + cy) + (1.0 + cx) * cy)
            }
            FieldKind::DefaultZeta => -2.0 * k2 * (tp * x).sin() * (tp * y).sin(),
            FieldKind::GaussianBump => {
                let (u, w) = (tp * (x - 0.5), tp * (y - 0.5));
                let f = (BUMP_KAPPA * (u.cos() + w.cos() - 2.0)).exp();
                f * k2
                    * (BUMP_KAPPA * BUMP_KAPPA * (u.sin().powi(2) + w.sin().powi(2))
                        - BUMP_KAPPA * (u.cos() + w.cos()))
            }
            FieldKind::Constant => 0.0,
        };
        self.amplitude * v
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.amplitude == 1.0 {
            write!(f, "{}", self.name())
        } else {
            write!(f, "{}:{}", self.name(), self.amplitude)
        }
    }
}

impl FromStr for FieldSpec {
    type Err = Error;

    /// `name` or `name:amplitude`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, amp) = match s.split_once(':') {
            Some((n, a)) => {
                let amp: f64 = a
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidProblem(format!("bad field amplitude `{a}`")))?;
                (n.trim(), amp)
            }
            None => (s.trim(), 1.0),
        };
        if !amp.is_finite() {
            return Err(Error::InvalidProblem(format!("non-finite amplitude in `{s}`")));
        }
        let kind = match name {
            "default-xi" => FieldKind::DefaultXi,
            "default-zeta" => FieldKind::DefaultZeta,
            "gaussian-bump" => FieldKind::GaussianBump,
            "constant" => FieldKind::Constant,
            other => return Err(Error::InvalidProblem(format!("unknown field `{other}`"))),
        };
        Ok(Self::new(kind, amp))
    }
}

/// Assembled Galerkin DRE in kernel coordinates:
/// `P' = Â P + P Âᵀ + q qᵀ − P ℓ ℓᵀ P`, `P(0) = z zᵀ`, with
/// `Â = M⁻¹·A − λ·I`.
#[derive(Clone, Debug)]
pub struct GalerkinDre {
    pub mass: SymmetricKernel,
    pub stiffness: SymmetricKernel,
    /// Load vector of the control profile ξ.
    pub ell_xi: Vec<f64>,
    /// `M⁻¹·ℓ_E`, the output functional in coefficient form.
    pub q_vec: Vec<f64>,
    /// `M⁻¹·ℓ_ζ`, factor of the projected initial value.
    pub z_vec: Vec<f64>,
    pub shift: f64,
    pub horizon: f64,
    nx: Option<usize>,
    mass_factor: CholeskyFactor,
}

impl GalerkinDre {
    /// Problem from raw data; used for scalar and synthetic test problems.
    pub fn from_parts(
        mass: SymmetricKernel,
        stiffness: SymmetricKernel,
        ell_xi: Vec<f64>,
        q_vec: Vec<f64>,
        z_vec: Vec<f64>,
        shift: f64,
        horizon: f64,
    ) -> Result<Self> {
        let n = mass.dim();
        if stiffness.dim() != n {
            return Err(dim_mismatch("GalerkinDre", n, stiffness.dim()));
        }
        for v in [&ell_xi, &q_vec, &z_vec] {
            if v.len() != n {
                return Err(dim_mismatch("GalerkinDre vector", n, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("GalerkinDre vector"));
            }
        }
        if !(shift >= 0.0 && shift.is_finite()) {
            return Err(Error::InvalidProblem(format!("shift must be >= 0, got {shift}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidProblem(format!("horizon must be > 0, got {horizon}")));
        }
        let mass_factor = cholesky(&mass)?;
        Ok(Self {
            mass,
            stiffness,
            ell_xi,
            q_vec,
            z_vec,
            shift,
            horizon,
            nx: None,
            mass_factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    /// Mesh resolution when the problem came from [`build_problem`].
    pub fn nx(&self) -> Option<usize> {
        self.nx
    }

    pub fn mass_factor(&self) -> &CholeskyFactor {
        &self.mass_factor
    }

    pub fn with_shift(&self, shift: f64) -> Result<Self> {
        if !(shift >= 0.0 && shift.is_finite()) {
            return Err(Error::InvalidProblem(format!("shift must be >= 0, got {shift}")));
        }
        Ok(Self { shift, ..self.clone() })
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidProblem(format!("horizon must be > 0, got {horizon}")));
        }
        Ok(Self { horizon, ..self.clone() })
    }

    /// `Â = M⁻¹·A − λ·I`.
    pub fn generator(&self) -> DenseMatrix {
        self.generator_par(Par::Seq)
    }

    pub(crate) fn generator_par(&self, par: Par) -> DenseMatrix {
        let mut g = self.mass_factor.solve_mat(self.stiffness.as_mat(), par);
        for i in 0..self.dim() {
            g[(i, i)] -= self.shift;
        }
        DenseMatrix::from_mat(g).expect("generator of a validated problem is finite")
    }

    /// `Q̂ = q·qᵀ`.
    pub fn q_hat(&self) -> SymmetricKernel {
        SymmetricKernel::rank_one(&self.q_vec)
    }

    /// `Ŝ = ℓ_ξ·ℓ_ξᵀ`.
    pub fn s_hat(&self) -> SymmetricKernel {
        SymmetricKernel::rank_one(&self.ell_xi)
    }

    /// `P₀ = z·zᵀ`.
    pub fn initial_kernel(&self) -> SymmetricKernel {
        SymmetricKernel::rank_one(&self.z_vec)
    }
}

/// Assembles the periodic heat-equation LQR problem on an `nx × nx` mesh.
pub fn build_problem(nx: usize, xi: &FieldSpec, zeta: &FieldSpec, shift: f64, horizon: f64) -> Result<GalerkinDre> {
    let mesh = build_mesh(nx)?;
    build_problem_on(&mesh, xi, zeta, shift, horizon)
}

pub fn build_problem_on(
    mesh: &PeriodicMesh,
    xi: &FieldSpec,
    zeta: &FieldSpec,
    shift: f64,
    horizon: f64,
) -> Result<GalerkinDre> {
    let mass = assemble_mass(mesh);
    let stiffness = assemble_stiffness(mesh);
    let ell_xi = assemble_load(mesh, |x, y| xi.value(x, y))?;
    let ell_e = assemble_half_domain(mesh)?;
    let ell_zeta = assemble_load(mesh, |x, y| zeta.value(x, y))?;
    let factor = cholesky(&mass)?;
    let q_vec = factor.solve_vec(&ell_e);
    let z_vec = factor.solve_vec(&ell_zeta);
    let mut p = GalerkinDre::from_parts(mass, stiffness, ell_xi, q_vec, z_vec, shift, horizon)?;
    p.nx = Some(mesh.nx());
    Ok(p)
}
