//! Dense complex linear algebra used by every other module.
//!
//! Matrices are stored row-major. Products go through `matrixmultiply`'s
//! complex GEMM; eigen- and singular-value decompositions are delegated to
//! `nalgebra`.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Default relative tolerance below which eigenvalues are reported as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Tolerance of the Hermiticity check, relative to `max(1, max |m_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// Dense complex column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CVector(pub Vec<C64>);

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted by decreasing magnitude; the eigenvectors are the
/// matching columns of `eigenvectors`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
    pub rank: usize,
}

/// Which tensor factor a partial trace removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracedSide {
    Left,
    Right,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        Ok(CMatrix { rows, cols, data })
    }

    /// Builds a matrix from real row-major rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn real_diagonal(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diagonal(&v)
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::NotSquare { rows: self.rows, cols: self.cols })
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Matrix product through complex GEMM.
    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = CMatrix::zeros(m, n);
        if m == 0 || n == 0 || k == 0 {
            return Ok(out);
        }
        // SAFETY: Complex64 is repr(C) with layout [f64; 2]; the buffers hold
        // exactly m*k, k*n and m*n elements with the row-major strides below.
        unsafe {
            matrixmultiply::zgemm(
                matrixmultiply::CGemmOption::Standard,
                matrixmultiply::CGemmOption::Standard,
                m,
                k,
                n,
                [1.0, 0.0],
                self.data.as_ptr() as *const [f64; 2],
                k as isize,
                1,
                other.data.as_ptr() as *const [f64; 2],
                n as isize,
                1,
                [0.0, 0.0],
                out.data.as_mut_ptr() as *mut [f64; 2],
                n as isize,
                1,
            );
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &CVector) -> Result<CVector> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let out = (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(&v.0).map(|(a, b)| a * b).sum()
            })
            .collect();
        Ok(CVector(out))
    }

    pub fn column(&self, j: usize) -> CVector {
        CVector((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    /// Leading `r x c` sub-block.
    pub fn top_left(&self, r: usize, c: usize) -> CMatrix {
        Self::from_fn(r, c, |i, j| self[(i, j)])
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &CMatrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Largest `|m_ij - conj(m_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermitian_defect() <= tol * self.max_abs().max(1.0)
    }

    pub fn require_hermitian(&self) -> Result<()> {
        self.require_square()?;
        let dev = self.hermitian_defect();
        if dev > HERMITIAN_TOL * self.max_abs().max(1.0) {
            return Err(Error::NotHermitian { max_dev: dev, context: None });
        }
        Ok(())
    }

    /// `(m + m^dagger) / 2`.
    pub fn hermitian_part(&self) -> CMatrix {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// Frobenius norm of `U^dagger U - I`, an upper bound on the operator-norm defect.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.adjoint().matmul(self).expect("square by construction");
        let mut acc = 0.0;
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let target = if i == j { ONE } else { ZERO };
                acc += (gram[(i, j)] - target).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> CMatrix {
        CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Number of entries with modulus above `tol`.
    pub fn nnz(&self, tol: f64) -> usize {
        self.data.iter().filter(|x| x.norm() > tol).count()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

fn zip_entries(a: &CMatrix, b: &CMatrix, op: impl Fn(C64, C64) -> C64) -> CMatrix {
    assert_eq!((a.rows, a.cols), (b.rows, b.cols), "shape mismatch in elementwise op");
    CMatrix { rows: a.rows, cols: a.cols, data: a.data.iter().zip(&b.data).map(|(x, y)| op(*x, *y)).collect() }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        zip_entries(self, rhs, |x, y| x + y)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        zip_entries(self, rhs, |x, y| x - y)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("dimension mismatch in matrix product")
    }
}

impl CVector {
    pub fn zeros(n: usize) -> Self {
        CVector(vec![ZERO; n])
    }

    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[k] = ONE;
        v
    }

    pub fn from_real(values: &[f64]) -> Self {
        CVector(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &CVector) -> C64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, s: C64) -> CVector {
        CVector(self.0.iter().map(|x| x * s).collect())
    }

    pub fn normalized(&self) -> CVector {
        let n = self.norm();
        self.scale(C64::new(1.0 / n, 0.0))
    }

    /// `|self><other|`.
    pub fn outer(&self, other: &CVector) -> CMatrix {
        CMatrix::from_fn(self.len(), other.len(), |i, j| self.0[i] * other.0[j].conj())
    }

    /// `|self><self|`.
    pub fn projector(&self) -> CMatrix {
        self.outer(self)
    }

    pub fn kron(&self, other: &CVector) -> CVector {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for a in &self.0 {
            for b in &other.0 {
                out.push(a * b);
            }
        }
        CVector(out)
    }

    /// Indices of entries with modulus above `tol`.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.0[i].norm() > tol).collect()
    }

    pub fn sub(&self, other: &CVector) -> CVector {
        CVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &CVector) -> CVector {
        CVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac, br, bc) = (a.rows, a.cols, b.rows, b.cols);
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let x = a[(i, j)];
            if x == ZERO {
                continue;
            }
            for k in 0..br {
                let row = (i * br + k) * out.cols + j * bc;
                for l in 0..bc {
                    out.data[row + l] = x * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a list of matrices, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    let mut acc = CMatrix::identity(1);
    for f in factors {
        acc = kron(&acc, f);
    }
    acc
}

/// Partial trace over one tensor factor.
///
/// The input lives on `traced ⊗ kept` for [`TracedSide::Left`] and on
/// `kept ⊗ traced` for [`TracedSide::Right`].
pub fn partial_trace(m: &CMatrix, keep_dim: usize, trace_dim: usize, side: TracedSide) -> Result<CMatrix> {
    let n = m.require_square()?;
    if n != keep_dim * trace_dim {
        return Err(Error::DimensionMismatch(format!(
            "partial trace of dimension {n} keeping {keep_dim} and tracing {trace_dim}"
        )));
    }
    Ok(match side {
        TracedSide::Left => CMatrix::from_fn(keep_dim, keep_dim, |i, j| {
            (0..trace_dim).map(|a| m[(a * keep_dim + i, a * keep_dim + j)]).sum()
        }),
        TracedSide::Right => CMatrix::from_fn(keep_dim, keep_dim, |i, j| {
            (0..trace_dim).map(|b| m[(i * trace_dim + b, j * trace_dim + b)]).sum()
        }),
    })
}

/// Unsorted eigendecomposition of the Hermitian part of `m`.
fn eigh_raw(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = nalgebra::SymmetricEigen::new(m.hermitian_part().to_nalgebra());
    (eig.eigenvalues.iter().copied().collect(), CMatrix::from_nalgebra(&eig.eigenvectors))
}

/// Eigendecomposition of a Hermitian matrix with the default rank tolerance.
pub fn eig_hermitian(m: &CMatrix) -> Result<SpectralData> {
    eig_hermitian_with_tol(m, DEFAULT_RANK_TOL)
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues with `|λ| < rank_tol * max|λ|` are set to exactly zero and
/// excluded from `rank`.
pub fn eig_hermitian_with_tol(m: &CMatrix, rank_tol: f64) -> Result<SpectralData> {
    m.require_hermitian()?;
    let n = m.rows;
    let (vals, vecs) = eigh_raw(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()));
    let max_abs = order.first().map_or(0.0, |&i| vals[i].abs());
    let cutoff = rank_tol * max_abs;
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = CMatrix::zeros(n, n);
    let mut rank = 0;
    for (new, &old) in order.iter().enumerate() {
        let lambda = vals[old];
        if lambda.abs() < cutoff || lambda == 0.0 {
            eigenvalues.push(0.0);
        } else {
            eigenvalues.push(lambda);
            rank += 1;
        }
        for i in 0..n {
            eigenvectors[(i, new)] = vecs[(i, old)];
        }
    }
    Ok(SpectralData { eigenvalues, eigenvectors, rank })
}

impl SpectralData {
    /// `Σ_k |λ_k|`.
    pub fn abs_sum(&self) -> f64 {
        self.eigenvalues.iter().map(|x| x.abs()).sum()
    }

    /// Indices of nonzero eigenvalues, in sorted order.
    pub fn nonzero(&self) -> Vec<usize> {
        (0..self.eigenvalues.len()).filter(|&k| self.eigenvalues[k] != 0.0).collect()
    }

    pub fn eigenvector(&self, k: usize) -> CVector {
        self.eigenvectors.column(k)
    }

    /// `V diag(λ) V^dagger`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let scaled = CMatrix::from_fn(n, n, |i, k| v[(i, k)] * self.eigenvalues[k]);
        &scaled * &v.adjoint()
    }
}

/// Singular values in decreasing order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.rows == 0 || m.cols == 0 {
        return Vec::new();
    }
    let svd = nalgebra::SVD::new(m.to_nalgebra(), false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Operator (spectral) norm.
pub fn op_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Trace (nuclear) norm.
pub fn trace_norm(m: &CMatrix) -> f64 {
    singular_values(m).iter().sum()
}

/// Largest entry modulus.
pub fn max_entry_norm(m: &CMatrix) -> f64 {
    m.max_abs()
}

/// Maximum number of entries above `tol` in any row or column.
pub fn sparsity(m: &CMatrix, tol: f64) -> usize {
    let row_max = (0..m.rows).map(|i| (0..m.cols).filter(|&j| m[(i, j)].norm() > tol).count()).max().unwrap_or(0);
    let col_max = (0..m.cols).map(|j| (0..m.rows).filter(|&i| m[(i, j)].norm() > tol).count()).max().unwrap_or(0);
    row_max.max(col_max)
}

/// `exp(-i t H)` for Hermitian `H`, via eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    h.require_hermitian()?;
    let (vals, vecs) = eigh_raw(h);
    let phases: Vec<C64> = vals.iter().map(|&l| C64::from_polar(1.0, -l * t)).collect();
    Ok(apply_spectral(&vecs, &phases))
}

/// `V diag(values) V^dagger`.
pub fn apply_spectral(vecs: &CMatrix, values: &[C64]) -> CMatrix {
    let n = vecs.rows;
    let scaled = CMatrix::from_fn(n, values.len(), |i, k| vecs[(i, k)] * values[k]);
    &scaled * &vecs.adjoint()
}

/// Applies a complex function to the spectrum of a Hermitian matrix.
pub fn hermitian_function(h: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let (vals, vecs) = eigh_raw(h);
    let mapped: Vec<C64> = vals.iter().map(|&l| f(l)).collect();
    apply_spectral(&vecs, &mapped)
}

/// Trace norm of a Hermitian matrix, from its eigenvalues.
pub fn trace_norm_hermitian(h: &CMatrix) -> f64 {
    eigh_raw(h).0.iter().map(|x| x.abs()).sum()
}

/// Unitary whose first column is the unit vector `v`.
///
/// Built from a Householder reflection, scaled by the phase of `v[0]`.
pub fn complete_unitary(v: &CVector) -> Result<CMatrix> {
    let n = v.len();
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnit { norm });
    }
    let phase = if v.0[0].norm() > 0.0 { v.0[0] / v.0[0].norm() } else { ONE };
    // H x = v for x = phase * e0, and x^dagger v is real, so U = phase * H.
    let mut u = v.scale(-ONE);
    u.0[0] += phase;
    let unorm2: f64 = u.0.iter().map(|x| x.norm_sqr()).sum();
    let mut h = CMatrix::identity(n);
    if unorm2 > 1e-30 {
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] -= u.0[i] * u.0[j].conj() * (2.0 / unorm2);
            }
        }
    }
    Ok(h.scale(phase))
}

/// Permutation matrix with `P e_j = e_{perm[j]}`.
pub fn permutation_matrix(perm: &[usize]) -> CMatrix {
    let n = perm.len();
    let mut p = CMatrix::zeros(n, n);
    for (j, &i) in perm.iter().enumerate() {
        p[(i, j)] = ONE;
    }
    p
}

/// Smallest power of two that is at least `n` (and at least 1).
pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// `ceil(log2(n))` for `n >= 1`.
pub fn ceil_log2(n: usize) -> u32 {
    next_pow2(n).trailing_zeros()
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        random_matrix(rng, n, n).hermitian_part()
    }

    pub fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        let v = CVector((0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect());
        v.normalized()
    }

    pub fn dist(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).max_abs()
    }
}
