//! Dense complex matrices and the spectral calculus every divergence is
//! built from.
//!
//! Matrices are stored row-major. Composite indices on `A ⊗ B` flatten as
//! `i_a * dim_b + i_b`, which is the convention [`ComplexMatrix::kron`] and
//! [`partial_trace`] agree on.
//!
//! Functions of positive semidefinite matrices are always taken *on the
//! support*: eigenvalues at or below `tol.psd` are treated as exact zeros and
//! mapped to zero, whatever the scalar function would do there. This makes
//! `inverse` a pseudo-inverse and `log` the support-restricted logarithm.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Absolute tolerances shared by the whole toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    /// Hermiticity check, max |A - A†|.
    pub herm: f64,
    /// Eigenvalues in `[-psd, psd]` count as zero.
    pub psd: f64,
    /// Scalar equality assertions.
    pub eq: f64,
    /// Optimizer convergence.
    pub opt: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            psd: 1e-12,
            eq: 1e-9,
            opt: 1e-6,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        let all_pos = [self.herm, self.psd, self.eq, self.opt]
            .iter()
            .all(|t| t.is_finite() && *t > 0.0);
        if !all_pos || self.psd > self.herm || self.herm > self.eq || self.opt < self.eq {
            return Err(Error::BadConfig(format!(
                "tolerances must satisfy 0 < psd <= herm <= eq <= opt, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Replace `eq` and pull the other tolerances along so the ordering holds.
    pub fn with_eq(mut self, eq: f64) -> Result<Self> {
        self.eq = eq;
        self.herm = self.herm.min(eq);
        self.psd = self.psd.min(self.herm);
        self.opt = self.opt.max(eq);
        self.validate()?;
        Ok(self)
    }
}

static TOLERANCES: OnceLock<ToleranceConfig> = OnceLock::new();

/// The process-wide tolerances. Defaults unless [`install_tolerances`] ran first.
pub fn tolerances() -> &'static ToleranceConfig {
    TOLERANCES.get_or_init(ToleranceConfig::default)
}

/// Install process-wide tolerances. Only the first call (before any
/// computation reads them) has an effect; returns `false` otherwise.
pub fn install_tolerances(cfg: ToleranceConfig) -> Result<bool> {
    cfg.validate()?;
    Ok(TOLERANCES.set(cfg).is_ok())
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:>10.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0)))
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(*v, 0.0);
        }
        m
    }

    /// `|v⟩⟨w|`.
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        Self::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
    }

    /// Column vector.
    pub fn column(v: &[C64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn col(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn real_diagonal(&self) -> Vec<f64> {
        self.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.diagonal().iter().sum()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `Tr[self · other]` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut t = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                t += self[(i, k)] * other[(k, i)];
            }
        }
        t
    }

    /// Kronecker product, index `(i_a * rows_b + i_b, j_a * cols_b + j_b)`.
    pub fn kron(&self, other: &Self) -> Self {
        let (rb, cb) = (other.rows, other.cols);
        Self::from_fn(self.rows * rb, self.cols * cb, |r, c| {
            self[(r / rb, c / cb)] * other[(r % rb, c % cb)]
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut err: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                err = err.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// `(A + A†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    /// `X A X†`.
    pub fn conjugate_by(&self, x: &Self) -> Self {
        x.matmul(self).matmul(&x.adjoint())
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self[(r, c)] * v[c]).sum())
            .collect()
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Unitary whose columns are the eigenvectors.
    pub vectors: ComplexMatrix,
}

impl Eigh {
    /// `U diag(f(λ)) U†`.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let u = &self.vectors;
        ComplexMatrix::from_fn(n, n, |i, j| {
            let mut s = ZERO;
            for k in 0..n {
                if fl[k] != 0.0 {
                    s += u[(i, k)] * u[(j, k)].conj() * fl[k];
                }
            }
            s
        })
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        self.vectors.col(k)
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Fails with `NotHermitian` when `max |A - A†| > tol.herm`. The Hermitian
/// part is decomposed, so inputs within tolerance are symmetrized first.
pub fn hermitian_eig(a: &ComplexMatrix, tol: &ToleranceConfig) -> Result<Eigh> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let err = a.hermiticity_error();
    if err > tol.herm * a.max_abs().max(1.0) {
        return Err(Error::NotHermitian(err));
    }
    eigh_unchecked(&a.hermitian_part())
}

/// Decomposes the Hermitian part of `a` without the symmetry check.
pub(crate) fn eigh_unchecked(a: &ComplexMatrix) -> Result<Eigh> {
    let n = a.rows;
    if n == 0 {
        return Ok(Eigh {
            values: vec![],
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(a.to_nalgebra(), f64::EPSILON, 10_000)
        .ok_or(Error::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigh { values, vectors })
}

/// Scalar functions that can be lifted to PSD matrices on their support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFn {
    Log2,
    Ln,
    Pow(f64),
    Inverse,
    Sqrt,
}

impl ScalarFn {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            ScalarFn::Log2 => x.log2(),
            ScalarFn::Ln => x.ln(),
            ScalarFn::Pow(a) => x.powf(a),
            ScalarFn::Inverse => 1.0 / x,
            ScalarFn::Sqrt => x.sqrt(),
        }
    }
}

fn check_psd(e: &Eigh, tol: &ToleranceConfig) -> Result<()> {
    let lmin = e.min();
    if lmin < -tol.psd {
        return Err(Error::NotPsd(lmin));
    }
    Ok(())
}

/// `f(a)` on the support of the PSD matrix `a`.
pub fn fn_on_support(a: &ComplexMatrix, f: ScalarFn, tol: &ToleranceConfig) -> Result<ComplexMatrix> {
    let e = hermitian_eig(a, tol)?;
    check_psd(&e, tol)?;
    Ok(e.map(|l| if l > tol.psd { f.eval(l) } else { 0.0 }))
}

/// Orthogonal projector onto the support of the PSD matrix `a`.
pub fn support_projector(a: &ComplexMatrix, tol: &ToleranceConfig) -> Result<ComplexMatrix> {
    let e = hermitian_eig(a, tol)?;
    check_psd(&e, tol)?;
    Ok(e.map(|l| if l > tol.psd { 1.0 } else { 0.0 }))
}

/// Number of eigenvalues above `tol.psd`.
pub fn rank(a: &ComplexMatrix, tol: &ToleranceConfig) -> Result<usize> {
    let e = hermitian_eig(a, tol)?;
    Ok(e.values.iter().filter(|&&l| l > tol.psd).count())
}

/// `a ⊗ b`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// Which tensor factor a partial trace keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

/// Partial trace of an operator on `A ⊗ B`.
pub fn partial_trace(a: &ComplexMatrix, dims: (usize, usize), keep: Keep) -> Result<ComplexMatrix> {
    let (da, db) = dims;
    if !a.is_square() || a.rows != da * db {
        return Err(Error::DimensionMismatch(format!(
            "partial trace over {da}x{db} needs a {0}x{0} matrix, got {1}x{2}",
            da * db,
            a.rows,
            a.cols
        )));
    }
    Ok(match keep {
        Keep::A => ComplexMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| a[(i * db + k, j * db + k)]).sum()
        }),
        Keep::B => ComplexMatrix::from_fn(db, db, |i, j| {
            (0..da).map(|k| a[(k * db + i, k * db + j)]).sum()
        }),
    })
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn lambda_max(a: &ComplexMatrix) -> Result<f64> {
    Ok(eigh_unchecked(a)?.max())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn lambda_min(a: &ComplexMatrix) -> Result<f64> {
    Ok(eigh_unchecked(a)?.min())
}

/// Spectral (operator) norm of a Hermitian matrix.
pub fn hermitian_op_norm(a: &ComplexMatrix) -> Result<f64> {
    let e = eigh_unchecked(a)?;
    Ok(e.max().abs().max(e.min().abs()))
}

/// `‖(I - Π_σ) ρ (I - Π_σ)‖ <= tol.psd`, i.e. `supp(ρ) ⊆ supp(σ)`.
pub fn support_contained(rho: &ComplexMatrix, sigma: &ComplexMatrix, tol: &ToleranceConfig) -> Result<bool> {
    let e = hermitian_eig(sigma, tol)?;
    check_psd(&e, tol)?;
    let comp = e.map(|l| if l > tol.psd { 0.0 } else { 1.0 });
    let leak = rho.conjugate_by(&comp);
    Ok(hermitian_op_norm(&leak.hermitian_part())? <= tol.psd.max(1e-12 * rho.max_abs()))
}

/// Apply `f` on the support of a PSD matrix with clamping of small negative
/// eigenvalues. Used internally where inputs are PSD by construction.
pub(crate) fn psd_map(a: &ComplexMatrix, floor: f64, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let e = eigh_unchecked(a)?;
    Ok(e.map(|l| if l > floor { f(l) } else { 0.0 }))
}
