//! Dense symmetric linear algebra on top of faer.

mod expm;
mod lyapunov;
mod spectral;

pub use expm::{expm, vanloan_flow};
pub(crate) use expm::vanloan_flow_par;
pub use lyapunov::{lyapunov_apply, lyapunov_solve, KRONECKER_MAX_DIM};
pub use spectral::{
    lanczos_extremes, spectral_norm, spectral_norm_of_operator, symmetric_eigenvalues,
    EIGEN_SWITCHOVER,
};

use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_upper_triangular_in_place,
};
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};

use crate::error::{dim_mismatch, Error, Result};

/// General real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(Mat<f64>);

impl DenseMatrix {
    pub fn from_mat(m: Mat<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(dim_mismatch("DenseMatrix", "at least 1x1", "empty"));
        }
        if !all_finite(m.as_ref()) {
            return Err(Error::NonFinite("DenseMatrix"));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(dim_mismatch("DenseMatrix::from_rows", c, bad.len()));
        }
        Self::from_mat(Mat::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_mat(Mat::from_fn(rows, cols, f))
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(Mat::zeros(rows, cols))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        self.0.as_ref()
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose().to_owned())
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols(), "DenseMatrix::apply dimension");
        let mut y = vec![0.0; self.nrows()];
        gemv(self.as_mat(), x, &mut y);
        y
    }

    /// Transposed matrix-vector product.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows(), "DenseMatrix::apply_transpose dimension");
        let mut y = vec![0.0; self.ncols()];
        gemv(self.as_mat().transpose(), x, &mut y);
        y
    }

    pub fn one_norm(&self) -> f64 {
        one_norm(self.as_mat())
    }
}

/// Symmetric matrix with exactly symmetric storage.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricKernel(Mat<f64>);

impl SymmetricKernel {
    /// `(m + mᵀ)/2`, written so that both triangles hold bit-identical values.
    pub fn symmetrize(m: MatRef<'_, f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(dim_mismatch(
                "SymmetricKernel::symmetrize",
                "square",
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        if m.nrows() == 0 {
            return Err(dim_mismatch("SymmetricKernel::symmetrize", "dim >= 1", 0));
        }
        if !all_finite(m) {
            return Err(Error::NonFinite("SymmetricKernel"));
        }
        Ok(Self::symmetrize_unchecked(m))
    }

    pub(crate) fn symmetrize_unchecked(m: MatRef<'_, f64>) -> Self {
        let n = m.nrows();
        let mut s = Mat::zeros(n, n);
        for j in 0..n {
            s[(j, j)] = m[(j, j)];
            for i in j + 1..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Self(s)
    }

    /// Takes ownership of a matrix that the caller guarantees is symmetric.
    pub(crate) fn from_symmetric_mat(mut m: Mat<f64>) -> Self {
        let n = m.nrows();
        for j in 0..n {
            for i in j + 1..n {
                m[(j, i)] = m[(i, j)];
            }
        }
        Self(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = DenseMatrix::from_rows(rows)?;
        Self::symmetrize(d.as_mat())
    }

    pub fn zeros(n: usize) -> Self {
        Self(Mat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n, n))
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self(Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 }))
    }

    /// `v·vᵀ`.
    pub fn rank_one(v: &[f64]) -> Self {
        Self(Mat::from_fn(v.len(), v.len(), |i, j| v[i] * v[j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        self.0.as_ref()
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.0
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix(self.0.clone())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(Mat::from_fn(self.dim(), self.dim(), |i, j| c * self.0[(i, j)]))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "SymmetricKernel::add")?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "SymmetricKernel::sub")?;
        Ok(Self(&self.0 - &other.0))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.norm_max()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm_l2()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)]).sum()
    }

    /// `max |P_ij − P_ji|`; zero for every kernel built through this type.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim();
        let mut d: f64 = 0.0;
        for j in 0..n {
            for i in j + 1..n {
                d = d.max((self.0[(i, j)] - self.0[(j, i)]).abs());
            }
        }
        d
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "SymmetricKernel::apply dimension");
        let mut y = vec![0.0; self.dim()];
        gemv(self.as_mat(), x, &mut y);
        y
    }

    /// `xᵀ·P·y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    fn check_same(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(dim_mismatch(op, self.dim(), other.dim()));
        }
        Ok(())
    }
}

/// Lower Cholesky factor `L` with `M = L·Lᵀ`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    lower: Mat<f64>,
}

/// Cholesky factorization of a symmetric positive definite kernel.
pub fn cholesky(m: &SymmetricKernel) -> Result<CholeskyFactor> {
    let llt = m
        .as_mat()
        .llt(Side::Lower)
        .map_err(|faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index }| {
            Error::NotPositiveDefinite { pivot: index }
        })?;
    let n = m.dim();
    let l = llt.L();
    let lower = Mat::from_fn(n, n, |i, j| if i >= j { l[(i, j)] } else { 0.0 });
    Ok(CholeskyFactor { lower })
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> MatRef<'_, f64> {
        self.lower.as_ref()
    }

    /// Solves `M·X = B` for a block of right-hand sides.
    pub fn solve_mat(&self, rhs: MatRef<'_, f64>, par: Par) -> Mat<f64> {
        let mut x = rhs.to_owned();
        solve_lower_triangular_in_place(self.lower.as_ref(), x.as_mut(), par);
        solve_upper_triangular_in_place(self.lower.transpose(), x.as_mut(), par);
        x
    }

    /// `L⁻¹·B`.
    pub fn solve_lower(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        let mut x = rhs.to_owned();
        solve_lower_triangular_in_place(self.lower.as_ref(), x.as_mut(), Par::Seq);
        x
    }

    pub fn solve_vec(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.solve_mat(b.as_ref(), Par::Seq);
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }

    /// `L·x`.
    pub fn apply_lower(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        gemv(self.lower.as_ref(), x, out);
    }

    /// `Lᵀ·x`.
    pub fn apply_lower_transpose(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        gemv(self.lower.transpose(), x, out);
    }

    /// `Lᵀ·P·L`, the kernel weighted so that its spectral norm is the
    /// L²-operator norm under the coefficient action `c ↦ P·M·c`.
    pub fn congruence(&self, p: &SymmetricKernel, par: Par) -> SymmetricKernel {
        let pl = mat_mul(p.as_mat(), self.lower.as_ref(), par);
        let ltpl = mat_mul(self.lower.transpose(), pl.as_ref(), par);
        SymmetricKernel::symmetrize_unchecked(ltpl.as_ref())
    }
}

pub(crate) fn mat_mul(a: MatRef<'_, f64>, b: MatRef<'_, f64>, par: Par) -> Mat<f64> {
    let mut c = Mat::zeros(a.nrows(), b.ncols());
    matmul(c.as_mut(), Accum::Replace, a, b, 1.0, par);
    c
}

/// `a·p·aᵀ` for symmetric `p`, returned exactly symmetric.
pub(crate) fn congruence_transform(a: MatRef<'_, f64>, p: MatRef<'_, f64>, par: Par) -> SymmetricKernel {
    let ap = mat_mul(a, p, par);
    let apat = mat_mul(ap.as_ref(), a.transpose(), par);
    SymmetricKernel::symmetrize_unchecked(apat.as_ref())
}

/// `y += a·x`.
pub(crate) fn gemv(a: MatRef<'_, f64>, x: &[f64], y: &mut [f64]) {
    let xv = MatRef::from_column_major_slice(x, x.len(), 1);
    let yv = MatMut::from_column_major_slice_mut(y, a.nrows(), 1);
    matmul(yv, Accum::Add, a, xv, 1.0, Par::Seq);
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn one_norm(a: MatRef<'_, f64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn all_finite(a: MatRef<'_, f64>) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].is_finite()))
}
