//! States, probability vectors, quantum and classical channels, superchannels.
//!
//! Conventions used everywhere in the crate:
//!
//! * The Choi matrix is the unnormalized `J_N = Σ_{jk} |j⟩⟨k| ⊗ N(|j⟩⟨k|)` on
//!   `A ⊗ B` (input factor first), so `Tr J_N = |A|` and `Tr_B J_N = I_A` for
//!   trace-preserving maps.
//! * In composite systems the reference `R` comes first: a channel `A → B`
//!   acting on `R ⊗ A` yields an operator on `R ⊗ B`.
//! * A superchannel is a pre-processing channel `A' → R ⊗ A` and a
//!   post-processing channel `R ⊗ B → B'`; `Θ[N] = post ∘ (id_R ⊗ N) ∘ pre`.
//! * Classical channels are column-stochastic, `matrix[y][x] = N(y|x)`, and
//!   embed as channels with diagonal Choi matrices.

use crate::error::{Error, Result};
use crate::linalg::{
    eigh_unchecked, hermitian_eig, partial_trace, tolerances, ComplexMatrix, Keep, C64,
};

/// A density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    matrix: ComplexMatrix,
}

impl QuantumState {
    /// Validates PSD (within `tol.psd`) and unit trace (within `tol.eq`).
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let tol = tolerances();
        let e = hermitian_eig(&matrix, tol)?;
        let scale = matrix.max_abs().max(1.0);
        if e.min() < -tol.psd * scale {
            return Err(Error::NotPsd(e.min()));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > tol.eq * matrix.rows() as f64 || tr.im.abs() > tol.eq {
            return Err(Error::Invalid(format!("density matrix has trace {tr}")));
        }
        Ok(Self {
            matrix: matrix.hermitian_part(),
        })
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        Self {
            matrix: matrix.hermitian_part(),
        }
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Invalid("zero state vector".into()));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Ok(Self::new_unchecked(ComplexMatrix::outer(&v, &v)))
    }

    pub fn diagonal(p: &ProbVector) -> Self {
        Self::new_unchecked(ComplexMatrix::diag(p.weights()))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self::new_unchecked(ComplexMatrix::identity(d).scale_re(1.0 / d as f64))
    }

    /// `|i⟩⟨i|` in dimension `d`.
    pub fn basis(d: usize, i: usize) -> Self {
        let mut w = vec![0.0; d];
        w[i] = 1.0;
        Self::new_unchecked(ComplexMatrix::diag(&w))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self::new_unchecked(self.matrix.kron(&other.matrix))
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self::new_unchecked(self.matrix.conjugate_by(u))
    }

    /// Convex combination `(1-t) self + t other`.
    pub fn mix(&self, other: &Self, t: f64) -> Self {
        Self::new_unchecked(&self.matrix.scale_re(1.0 - t) + &other.matrix.scale_re(t))
    }

    /// Diagonal in the computational basis, if the state is diagonal.
    pub fn as_classical(&self) -> Option<ProbVector> {
        let n = self.dim();
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.matrix[(i, j)].norm())
            .fold(0.0, f64::max);
        if off > tolerances().eq {
            return None;
        }
        ProbVector::new(self.matrix.real_diagonal().iter().map(|x| x.max(0.0)).collect()).ok()
    }
}

/// A probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    weights: Vec<f64>,
}

impl ProbVector {
    /// Entries must be nonnegative and sum to 1 within `tol.eq`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Invalid("empty probability vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Invalid(format!("negative or non-finite probability {w}")));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > tolerances().eq * weights.len().max(1) as f64 {
            return Err(Error::Invalid(format!("probabilities sum to {s}")));
        }
        Ok(Self { weights })
    }

    pub(crate) fn new_unchecked(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// The point mass on `i`.
    pub fn delta(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self { weights: w }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let w = self
            .weights
            .iter()
            .flat_map(|a| other.weights.iter().map(move |b| a * b))
            .collect();
        Self { weights: w }
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.weights[i]
    }
}

/// A column-stochastic matrix `N(y|x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalChannel {
    dim_in: usize,
    dim_out: usize,
    /// `rows[y][x]`.
    rows: Vec<Vec<f64>>,
}

impl ClassicalChannel {
    /// `rows[y][x] = N(y|x)`; every column must be a probability vector.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim_out = rows.len();
        let dim_in = rows.first().map_or(0, Vec::len);
        if dim_out == 0 || dim_in == 0 || rows.iter().any(|r| r.len() != dim_in) {
            return Err(Error::Invalid("classical channel matrix must be a nonempty rectangle".into()));
        }
        let ch = Self { dim_in, dim_out, rows };
        for x in 0..dim_in {
            ProbVector::new(ch.column_weights(x))
                .map_err(|e| Error::Invalid(format!("column {x}: {e}")))?;
        }
        Ok(ch)
    }

    /// Builds from columns `N(·|x)`.
    pub fn from_columns(cols: &[ProbVector]) -> Result<Self> {
        let dim_out = cols.first().ok_or(Error::EmptyList)?.dim();
        if cols.iter().any(|c| c.dim() != dim_out) {
            return Err(Error::DimensionMismatch("columns of unequal length".into()));
        }
        let rows = (0..dim_out).map(|y| cols.iter().map(|c| c[y]).collect()).collect();
        Ok(Self {
            dim_in: cols.len(),
            dim_out,
            rows,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::from_columns(&(0..d).map(|i| ProbVector::delta(d, i)).collect::<Vec<_>>()).unwrap()
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn entry(&self, y: usize, x: usize) -> f64 {
        self.rows[y][x]
    }

    fn column_weights(&self, x: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[x]).collect()
    }

    pub fn column(&self, x: usize) -> ProbVector {
        ProbVector::new_unchecked(self.column_weights(x))
    }

    pub fn columns(&self) -> Vec<ProbVector> {
        (0..self.dim_in).map(|x| self.column(x)).collect()
    }

    pub fn apply(&self, p: &ProbVector) -> Result<ProbVector> {
        if p.dim() != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "channel expects input dimension {}, got {}",
                self.dim_in,
                p.dim()
            )));
        }
        Ok(ProbVector::new_unchecked(
            self.rows
                .iter()
                .map(|r| r.iter().zip(p.weights()).map(|(a, b)| a * b).sum())
                .collect(),
        ))
    }

    /// `self ⊗ other` with row-major pairing `(x1, x2) -> x1 * |X2| + x2`.
    pub fn tensor(&self, other: &Self) -> Self {
        let rows = (0..self.dim_out * other.dim_out)
            .map(|y| {
                (0..self.dim_in * other.dim_in)
                    .map(|x| {
                        self.rows[y / other.dim_out][x / other.dim_in]
                            * other.rows[y % other.dim_out][x % other.dim_in]
                    })
                    .collect()
            })
            .collect();
        Self {
            dim_in: self.dim_in * other.dim_in,
            dim_out: self.dim_out * other.dim_out,
            rows,
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim_in == other.dim_in && self.dim_out == other.dim_out
    }
}

/// A completely positive trace-preserving map `A → B`, stored by its Choi matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannel {
    dim_in: usize,
    dim_out: usize,
    choi: ComplexMatrix,
    kraus: Option<Vec<ComplexMatrix>>,
}

impl QuantumChannel {
    /// Validates complete positivity (`J ≥ -tol.psd`) and trace preservation
    /// (`Tr_B J = I_A` within `tol.eq`).
    pub fn from_choi(dim_in: usize, dim_out: usize, choi: ComplexMatrix) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::BadDims("channel dimensions must be positive".into()));
        }
        if !choi.is_square() || choi.rows() != dim_in * dim_out {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix of a {dim_in}->{dim_out} channel must be {0}x{0}, got {1}x{2}",
                dim_in * dim_out,
                choi.rows(),
                choi.cols()
            )));
        }
        let tol = tolerances();
        let e = hermitian_eig(&choi, tol)?;
        if e.min() < -tol.psd * choi.max_abs().max(1.0) {
            return Err(Error::NotPsd(e.min()));
        }
        let marg = partial_trace(&choi, (dim_in, dim_out), Keep::A)?;
        let err = marg.max_abs_diff(&ComplexMatrix::identity(dim_in));
        if err > tol.eq * dim_in as f64 {
            return Err(Error::Invalid(format!(
                "not trace preserving: |Tr_B J - I| = {err:e}"
            )));
        }
        Ok(Self {
            dim_in,
            dim_out,
            choi: choi.hermitian_part(),
            kraus: None,
        })
    }

    pub(crate) fn from_choi_unchecked(dim_in: usize, dim_out: usize, choi: ComplexMatrix) -> Self {
        Self {
            dim_in,
            dim_out,
            choi: choi.hermitian_part(),
            kraus: None,
        }
    }

    /// Validates `Σ K†K = I`.
    pub fn from_kraus(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or(Error::EmptyList)?;
        let (dim_out, dim_in) = (first.rows(), first.cols());
        if kraus.iter().any(|k| k.rows() != dim_out || k.cols() != dim_in) {
            return Err(Error::DimensionMismatch("Kraus operators of unequal shape".into()));
        }
        let mut sum = ComplexMatrix::zeros(dim_in, dim_in);
        for k in &kraus {
            sum = &sum + &k.adjoint().matmul(k);
        }
        let err = sum.max_abs_diff(&ComplexMatrix::identity(dim_in));
        if err > tolerances().eq * dim_in as f64 {
            return Err(Error::Invalid(format!("Kraus operators not trace preserving: {err:e}")));
        }
        let choi = choi_from_kraus(&kraus, dim_in, dim_out);
        Ok(Self {
            dim_in,
            dim_out,
            choi,
            kraus: Some(kraus),
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::from_kraus(vec![ComplexMatrix::identity(d)]).expect("identity is a channel")
    }

    /// A state as a channel with one-dimensional input.
    pub fn from_state(state: &QuantumState) -> Self {
        Self::from_choi_unchecked(1, state.dim(), state.matrix().clone())
    }

    /// Diagonal Choi `Σ_x |x⟩⟨x| ⊗ diag(N(·|x))`.
    pub fn from_classical(ch: &ClassicalChannel) -> Self {
        let (dx, dy) = (ch.dim_in(), ch.dim_out());
        let mut d = vec![0.0; dx * dy];
        for x in 0..dx {
            for y in 0..dy {
                d[x * dy + y] = ch.entry(y, x);
            }
        }
        Self::from_choi_unchecked(dx, dy, ComplexMatrix::diag(&d))
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn stored_kraus(&self) -> Option<&[ComplexMatrix]> {
        self.kraus.as_deref()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim_in == other.dim_in && self.dim_out == other.dim_out
    }

    /// Kraus operators from the spectral decomposition of the Choi matrix.
    pub fn kraus_operators(&self) -> Result<Vec<ComplexMatrix>> {
        let e = eigh_unchecked(&self.choi)?;
        let floor = tolerances().psd;
        let (da, db) = (self.dim_in, self.dim_out);
        Ok(e.values
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > floor)
            .map(|(k, &l)| {
                let v = e.eigenvector(k);
                let s = l.sqrt();
                ComplexMatrix::from_fn(db, da, |b, a| v[a * db + b] * s)
            })
            .collect())
    }

    /// The classical channel behind a diagonal Choi matrix.
    pub fn as_classical(&self) -> Option<ClassicalChannel> {
        let n = self.choi.rows();
        let tol = tolerances().eq;
        for i in 0..n {
            for j in 0..n {
                if i != j && self.choi[(i, j)].norm() > tol {
                    return None;
                }
            }
        }
        let (dx, dy) = (self.dim_in, self.dim_out);
        let rows = (0..dy)
            .map(|y| (0..dx).map(|x| self.choi[(x * dy + y, x * dy + y)].re.max(0.0)).collect())
            .collect();
        Some(ClassicalChannel {
            dim_in: dx,
            dim_out: dy,
            rows,
        })
    }

    /// `self ⊗ other` acting on `A1 A2 → B1 B2`.
    pub fn tensor(&self, other: &Self) -> Self {
        let (a1, b1, a2, b2) = (self.dim_in, self.dim_out, other.dim_in, other.dim_out);
        let n = a1 * a2 * b1 * b2;
        let split = |i: usize| {
            // i = ((x1 * a2 + x2) * b1 + y1) * b2 + y2
            let y2 = i % b2;
            let y1 = (i / b2) % b1;
            let x2 = (i / (b1 * b2)) % a2;
            let x1 = i / (a2 * b1 * b2);
            (x1 * b1 + y1, x2 * b2 + y2)
        };
        let choi = ComplexMatrix::from_fn(n, n, |r, c| {
            let (r1, r2) = split(r);
            let (c1, c2) = split(c);
            self.choi[(r1, c1)] * other.choi[(r2, c2)]
        });
        let kraus = match (&self.kraus, &other.kraus) {
            (Some(k1), Some(k2)) => Some(
                k1.iter()
                    .flat_map(|x| k2.iter().map(move |y| x.kron(y)))
                    .collect(),
            ),
            _ => None,
        };
        Self {
            dim_in: a1 * a2,
            dim_out: b1 * b2,
            choi,
            kraus,
        }
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &Self) -> Result<Self> {
        if next.dim_in != self.dim_out {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {}->{} with {}->{}",
                self.dim_in, self.dim_out, next.dim_in, next.dim_out
            )));
        }
        let choi = apply_choi_map(next, &self.choi, self.dim_in)?;
        Ok(Self::from_choi_unchecked(self.dim_in, next.dim_out, choi))
    }

    /// Convex combination `(1-t) self + t other`.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch("mixing channels of different shape".into()));
        }
        Ok(Self::from_choi_unchecked(
            self.dim_in,
            self.dim_out,
            &self.choi.scale_re(1.0 - t) + &other.choi.scale_re(t),
        ))
    }
}

fn choi_from_kraus(kraus: &[ComplexMatrix], dim_in: usize, dim_out: usize) -> ComplexMatrix {
    let n = dim_in * dim_out;
    ComplexMatrix::from_fn(n, n, |r, c| {
        let (j, b) = (r / dim_out, r % dim_out);
        let (k, bp) = (c / dim_out, c % dim_out);
        kraus.iter().map(|m| m[(b, j)] * m[(bp, k)].conj()).sum()
    })
}

/// Apply the linear map with Choi matrix `J` (A → B) to an operator on
/// `R ⊗ A`, producing an operator on `R ⊗ B`.
fn apply_choi_map(n: &QuantumChannel, op: &ComplexMatrix, dim_r: usize) -> Result<ComplexMatrix> {
    let (da, db) = (n.dim_in, n.dim_out);
    if !op.is_square() || op.rows() != dim_r * da {
        return Err(Error::DimensionMismatch(format!(
            "operator of size {} does not act on R({dim_r}) x A({da})",
            op.rows()
        )));
    }
    let j = &n.choi;
    let mut out = ComplexMatrix::zeros(dim_r * db, dim_r * db);
    for r in 0..dim_r {
        for rp in 0..dim_r {
            for a in 0..da {
                for ap in 0..da {
                    let x = op[(r * da + a, rp * da + ap)];
                    if x == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for b in 0..db {
                        for bp in 0..db {
                            out[(r * db + b, rp * db + bp)] += x * j[(a * db + b, ap * db + bp)];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `(id_R ⊗ N)(ρ)` for a state on `R ⊗ A` with `|R| = dim_r`.
///
/// Uses the stored Kraus operators when present, otherwise the Choi action
/// `Tr_A[(ρ^{T_A} ⊗ I_B)(I_R ⊗ J_N)]`.
pub fn apply_channel(n: &QuantumChannel, rho: &QuantumState, dim_r: usize) -> Result<QuantumState> {
    if dim_r == 0 || rho.dim() != dim_r * n.dim_in {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} does not live on R({dim_r}) x A({})",
            rho.dim(),
            n.dim_in
        )));
    }
    let out = match &n.kraus {
        Some(ks) => {
            let id = ComplexMatrix::identity(dim_r);
            let mut acc = ComplexMatrix::zeros(dim_r * n.dim_out, dim_r * n.dim_out);
            for k in ks {
                acc = &acc + &rho.matrix().conjugate_by(&id.kron(k));
            }
            acc
        }
        None => apply_choi_map(n, rho.matrix(), dim_r)?,
    };
    Ok(QuantumState::new_unchecked(out))
}

/// Choi-based action, ignoring stored Kraus operators.
pub fn apply_channel_via_choi(n: &QuantumChannel, rho: &QuantumState, dim_r: usize) -> Result<QuantumState> {
    Ok(QuantumState::new_unchecked(apply_choi_map(n, rho.matrix(), dim_r)?))
}

/// The replacement channel `ω ↦ Tr[ω] σ` with input dimension `dim_in`.
pub fn make_replacement(sigma: &QuantumState, dim_in: usize) -> QuantumChannel {
    QuantumChannel::from_choi_unchecked(
        dim_in,
        sigma.dim(),
        ComplexMatrix::identity(dim_in).kron(sigma.matrix()),
    )
}

/// The replacement channel onto the maximally mixed state.
pub fn completely_randomizing(dim_in: usize, dim_out: usize) -> QuantumChannel {
    make_replacement(&QuantumState::maximally_mixed(dim_out), dim_in)
}

/// `ρ ↦ V ρ V†` for an isometry `V: A → B`.
pub fn make_isometry_channel(v: &ComplexMatrix) -> Result<QuantumChannel> {
    let (db, da) = (v.rows(), v.cols());
    if db < da {
        return Err(Error::NotIsometry(format!("{db}x{da} matrix cannot be an isometry")));
    }
    let err = v.adjoint().matmul(v).max_abs_diff(&ComplexMatrix::identity(da));
    if err > tolerances().eq {
        return Err(Error::NotIsometry(format!("|V†V - I| = {err:e}")));
    }
    QuantumChannel::from_kraus(vec![v.clone()])
}

/// Pre- and post-processing around a reference system.
#[derive(Debug, Clone, PartialEq)]
pub struct Superchannel {
    pre: QuantumChannel,
    post: QuantumChannel,
    dim_r: usize,
}

impl Superchannel {
    /// `pre: A' → R ⊗ A`, `post: R ⊗ B → B'`.
    pub fn new(pre: QuantumChannel, post: QuantumChannel, dim_r: usize) -> Result<Self> {
        if dim_r == 0 || !pre.dim_out.is_multiple_of(dim_r) || !post.dim_in.is_multiple_of(dim_r) {
            return Err(Error::DimensionMismatch(format!(
                "reference dimension {dim_r} does not divide pre output {} / post input {}",
                pre.dim_out, post.dim_in
            )));
        }
        Ok(Self { pre, post, dim_r })
    }

    /// The superchannel that leaves every `A → B` channel unchanged.
    pub fn identity(dim_a: usize, dim_b: usize) -> Self {
        Self {
            pre: QuantumChannel::identity(dim_a),
            post: QuantumChannel::identity(dim_b),
            dim_r: 1,
        }
    }

    pub fn pre(&self) -> &QuantumChannel {
        &self.pre
    }

    pub fn post(&self) -> &QuantumChannel {
        &self.post
    }

    pub fn dim_r(&self) -> usize {
        self.dim_r
    }

    /// Input-channel shape `(|A|, |B|)`.
    pub fn input_shape(&self) -> (usize, usize) {
        (self.pre.dim_out / self.dim_r, self.post.dim_in / self.dim_r)
    }

    /// Output-channel shape `(|A'|, |B'|)`.
    pub fn output_shape(&self) -> (usize, usize) {
        (self.pre.dim_in, self.post.dim_out)
    }

    /// `Θ[N]`.
    pub fn apply(&self, n: &QuantumChannel) -> Result<QuantumChannel> {
        superchannel_apply(self, n)
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Self) -> Result<Self> {
        if self.input_shape() != first.output_shape() {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose superchannels: {:?} vs {:?}",
                self.input_shape(),
                first.output_shape()
            )));
        }
        let id_r = QuantumChannel::identity(self.dim_r);
        let pre = self.pre.then(&id_r.tensor(&first.pre))?;
        let post = id_r.tensor(&first.post).then(&self.post)?;
        Ok(Self {
            pre,
            post,
            dim_r: self.dim_r * first.dim_r,
        })
    }
}

/// Choi matrix of `post ∘ (id_R ⊗ N) ∘ pre`.
pub fn superchannel_apply(theta: &Superchannel, n: &QuantumChannel) -> Result<QuantumChannel> {
    let (da, db) = theta.input_shape();
    if n.dim_in != da || n.dim_out != db {
        return Err(Error::ShapeMismatch(format!(
            "superchannel expects a {da}->{db} channel, got {}->{}",
            n.dim_in, n.dim_out
        )));
    }
    let a_prime = theta.pre.dim_in;
    // J_pre lives on A' ⊗ R ⊗ A; act with N on the last factor, then with post on R ⊗ B.
    let mid = apply_choi_map(n, &theta.pre.choi, a_prime * theta.dim_r)?;
    let out = apply_choi_map(&theta.post, &mid, a_prime)?;
    Ok(QuantumChannel::from_choi_unchecked(a_prime, theta.post.dim_out, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_channel, random_mixed_state, random_superchannel, rng_from_seed};

    fn assert_valid(ch: &QuantumChannel) {
        QuantumChannel::from_choi(ch.dim_in(), ch.dim_out(), ch.choi().clone()).unwrap();
    }

    #[test]
    fn identity_channel_acts_trivially() {
        let mut rng = rng_from_seed(1);
        let rho = random_mixed_state(&mut rng, 4);
        let out = apply_channel(&QuantumChannel::identity(2), &rho, 2).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-14);
        let out = apply_channel_via_choi(&QuantumChannel::identity(2), &rho, 2).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-14);
    }

    #[test]
    fn replacement_outputs_sigma() {
        let mut rng = rng_from_seed(2);
        let sigma = random_mixed_state(&mut rng, 3);
        let ch = make_replacement(&sigma, 2);
        assert_valid(&ch);
        for _ in 0..5 {
            let rho = random_mixed_state(&mut rng, 2);
            let out = apply_channel(&ch, &rho, 1).unwrap();
            assert!(out.matrix().max_abs_diff(sigma.matrix()) < 1e-13);
        }
        let r = completely_randomizing(2, 2);
        let expect = ComplexMatrix::identity(4).scale_re(0.5);
        assert_eq!(r.choi(), &expect);
        let pure0 = make_replacement(&QuantumState::basis(2, 0), 2);
        assert_eq!(pure0.choi(), &ComplexMatrix::diag(&[1.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn choi_and_kraus_actions_agree() {
        let mut rng = rng_from_seed(3);
        for _ in 0..10 {
            let ch = random_channel(&mut rng, 2, 3);
            assert!(ch.stored_kraus().is_some());
            let rho = random_mixed_state(&mut rng, 4);
            let a = apply_channel(&ch, &rho, 2).unwrap();
            let b = apply_channel_via_choi(&ch, &rho, 2).unwrap();
            assert!(a.matrix().max_abs_diff(b.matrix()) <= 1e-10);
        }
    }

    #[test]
    fn kraus_round_trip() {
        let mut rng = rng_from_seed(4);
        for _ in 0..10 {
            let ch = random_channel(&mut rng, 3, 2);
            let ks = ch.kraus_operators().unwrap();
            let rebuilt = QuantumChannel::from_kraus(ks).unwrap();
            assert!(rebuilt.choi().max_abs_diff(ch.choi()) <= 1e-9);
        }
    }

    #[test]
    fn isometry_channels() {
        let id = make_isometry_channel(&ComplexMatrix::identity(2)).unwrap();
        assert!(id.choi().max_abs_diff(QuantumChannel::identity(2).choi()) < 1e-15);
        let v = ComplexMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let ch = make_isometry_channel(&v).unwrap();
        assert_valid(&ch);
        assert_eq!(crate::linalg::rank(ch.choi(), tolerances()).unwrap(), 1);
        // J = (I ⊗ V)|Ω⟩⟨Ω|(I ⊗ V)†
        let mut omega = vec![C64::new(0.0, 0.0); 4];
        omega[0] = C64::new(1.0, 0.0);
        omega[3] = C64::new(1.0, 0.0);
        let w = ComplexMatrix::identity(2).kron(&v).apply(&omega);
        assert!(ComplexMatrix::outer(&w, &w).max_abs_diff(ch.choi()) <= 1e-12);
        let bad = ComplexMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(make_isometry_channel(&bad), Err(Error::NotIsometry(_))));
    }

    #[test]
    fn identity_superchannel_is_trivial() {
        let mut rng = rng_from_seed(5);
        let n = random_channel(&mut rng, 2, 3);
        let out = Superchannel::identity(2, 3).apply(&n).unwrap();
        assert!(out.choi().max_abs_diff(n.choi()) < 1e-13);
    }

    #[test]
    fn state_preparation_superchannel() {
        // pre prepares ψ from a trivial input; post is the identity.
        let mut rng = rng_from_seed(6);
        let psi = random_mixed_state(&mut rng, 2);
        let n = random_channel(&mut rng, 2, 2);
        let theta = Superchannel::new(QuantumChannel::from_state(&psi), QuantumChannel::identity(2), 1).unwrap();
        let out = theta.apply(&n).unwrap();
        assert_eq!(out.dim_in(), 1);
        let expect = apply_channel(&n, &psi, 1).unwrap();
        assert!(out.choi().max_abs_diff(expect.matrix()) < 1e-13);
    }

    #[test]
    fn superchannel_output_is_a_channel_and_composes() {
        let mut rng = rng_from_seed(7);
        for _ in 0..20 {
            let n = random_channel(&mut rng, 2, 2);
            let t1 = random_superchannel(&mut rng, (2, 2), (2, 3), 2);
            let t2 = random_superchannel(&mut rng, (2, 3), (3, 2), 2);
            let once = t1.apply(&n).unwrap();
            assert_valid(&once);
            let twice = t2.apply(&once).unwrap();
            let composed = t2.after(&t1).unwrap().apply(&n).unwrap();
            assert!(twice.choi().max_abs_diff(composed.choi()) <= 1e-9);
        }
    }

    #[test]
    fn tensor_of_channels_matches_kraus() {
        let mut rng = rng_from_seed(8);
        let a = random_channel(&mut rng, 2, 3);
        let b = random_channel(&mut rng, 3, 2);
        let ab = a.tensor(&b);
        let via_kraus = QuantumChannel::from_kraus(ab.stored_kraus().unwrap().to_vec()).unwrap();
        assert!(ab.choi().max_abs_diff(via_kraus.choi()) < 1e-12);
        assert_valid(&ab);
    }

    #[test]
    fn classical_embedding_round_trips() {
        let ch = ClassicalChannel::new(vec![vec![0.5, 0.1], vec![0.5, 0.9]]).unwrap();
        let q = QuantumChannel::from_classical(&ch);
        assert_valid(&q);
        assert_eq!(q.as_classical().unwrap(), ch);
        let p = ProbVector::new(vec![0.3, 0.7]).unwrap();
        let out = apply_channel(&q, &QuantumState::diagonal(&p), 1).unwrap();
        let cl = out.as_classical().unwrap();
        let direct = ch.apply(&p).unwrap();
        for (a, b) in cl.weights().iter().zip(direct.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(ClassicalChannel::new(vec![vec![0.5, 0.2], vec![0.4, 0.8]]).is_err());
    }
}
