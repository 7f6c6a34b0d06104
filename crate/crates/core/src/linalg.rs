//! Dense complex linear algebra: row-major matrices and vectors, Kronecker
//! products, adjoints, and a cyclic Jacobi eigensolver for Hermitian matrices.
//!
//! Everything here is deterministic: no randomness, no parallel reductions,
//! fixed iteration order. Identical inputs give bit-identical outputs.

use num_complex::Complex64;
use thiserror::Error;

/// Hard ceiling on matrix/space dimensions produced by tensor products.
/// Keeps an accidental chain of Kronecker products from exploding.
pub const DIM_CAP: usize = 4096;

/// Shorthand constructor for a complex scalar.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension limit exceeded: {dim} > cap {cap}")]
    DimensionLimit { dim: usize, cap: usize },
    #[error("shape mismatch: {context} ({left} vs {right})")]
    ShapeMismatch {
        context: &'static str,
        left: String,
        right: String,
    },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("empty or zero dimension not allowed")]
    ZeroDim,
    #[error("matrix is not Hermitian: max |A - A†| = {residual:.3e} > {eps:.3e}")]
    NotHermitian { residual: f64, eps: f64 },
    #[error("cannot normalize a (numerically) zero vector")]
    ZeroNorm,
    #[error("invalid tolerance: {0}")]
    BadTolerance(f64),
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

/// Comparison tolerance carried explicitly through every validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub eps: f64,
}

impl Tolerance {
    pub fn new(eps: f64) -> Result<Self, LinalgError> {
        if !eps.is_finite() || eps < 0.0 {
            return Err(LinalgError::BadTolerance(eps));
        }
        Ok(Tolerance { eps })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { eps: 1e-10 }
    }
}

/// Dense complex column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    data: Vec<Complex64>,
}

impl ComplexVector {
    /// Build from entries, rejecting empty input and non-finite values.
    pub fn new(data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if data.is_empty() {
            return Err(LinalgError::ZeroDim);
        }
        for (i, z) in data.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(LinalgError::NonFinite { index: i });
            }
        }
        Ok(ComplexVector { data })
    }

    pub fn zeros(dim: usize) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::ZeroDim);
        }
        Ok(ComplexVector {
            data: vec![Complex64::ZERO; dim],
        })
    }

    /// Canonical basis vector e_index.
    pub fn basis(dim: usize, index: usize) -> Result<Self, LinalgError> {
        if dim == 0 || index >= dim {
            return Err(LinalgError::ZeroDim);
        }
        let mut v = ComplexVector::zeros(dim)?;
        v.data[index] = Complex64::ONE;
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    /// ⟨self|other⟩ with the conjugate on `self`.
    pub fn inner(&self, other: &ComplexVector) -> Result<Complex64, LinalgError> {
        if self.dim() != other.dim() {
            return Err(shape("inner product", self.dim(), other.dim()));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(Complex64::ZERO, |acc, (a, b)| acc + a.conj() * b))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, s: Complex64) -> ComplexVector {
        ComplexVector {
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &ComplexVector) -> Result<ComplexVector, LinalgError> {
        if self.dim() != other.dim() {
            return Err(shape("vector add", self.dim(), other.dim()));
        }
        Ok(ComplexVector {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &ComplexVector) -> Result<ComplexVector, LinalgError> {
        if self.dim() != other.dim() {
            return Err(shape("vector sub", self.dim(), other.dim()));
        }
        Ok(ComplexVector {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Unit vector in the same direction; errors on numerically zero input.
    pub fn normalized(&self) -> Result<ComplexVector, LinalgError> {
        let n = self.norm();
        if n < 1e-150 {
            return Err(LinalgError::ZeroNorm);
        }
        Ok(self.scaled(c64(1.0 / n, 0.0)))
    }

    /// Kronecker product |self⟩ ⊗ |other⟩.
    pub fn tensor(&self, other: &ComplexVector) -> Result<ComplexVector, LinalgError> {
        let dim = checked_dim(self.dim(), other.dim())?;
        let mut data = Vec::with_capacity(dim);
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        Ok(ComplexVector { data })
    }

    /// Outer product |self⟩⟨other|.
    pub fn outer(&self, other: &ComplexVector) -> ComplexMatrix {
        let rows = self.dim();
        let cols = other.dim();
        let mut data = Vec::with_capacity(rows * cols);
        for a in &self.data {
            for b in &other.data {
                data.push(a * b.conj());
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn max_abs_diff(&self, other: &ComplexVector) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.data[i]
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Build from a row-major entry list, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::ZeroDim);
        }
        if data.len() != rows * cols {
            return Err(shape("entry count", data.len(), rows * cols));
        }
        for (i, z) in data.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(LinalgError::NonFinite { index: i });
            }
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::ZeroDim);
        }
        Ok(ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        })
    }

    pub fn identity(n: usize) -> Result<Self, LinalgError> {
        let mut m = ComplexMatrix::zeros(n, n)?;
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        Ok(m)
    }

    /// Diagonal matrix from real entries.
    pub fn diag_real(entries: &[f64]) -> Result<Self, LinalgError> {
        let n = entries.len();
        let mut m = ComplexMatrix::zeros(n, n)?;
        for (i, &x) in entries.iter().enumerate() {
            if !x.is_finite() {
                return Err(LinalgError::NonFinite { index: i });
            }
            m[(i, i)] = c64(x, 0.0);
        }
        Ok(m)
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

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        self.check_same_shape(other, "matrix add")?;
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        self.check_same_shape(other, "matrix sub")?;
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scaled(&self, s: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        if self.cols != other.rows {
            return Err(shape("matmul", self.cols, other.rows));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols)?;
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &ComplexVector) -> Result<ComplexVector, LinalgError> {
        if self.cols != v.dim() {
            return Err(shape("matrix-vector product", self.cols, v.dim()));
        }
        let mut out = ComplexVector::zeros(self.rows)?;
        for i in 0..self.rows {
            let mut acc = Complex64::ZERO;
            for j in 0..self.cols {
                acc += self.data[i * self.cols + j] * v[j];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix {
            rows: self.cols,
            cols: self.rows,
            data: vec![Complex64::ZERO; self.data.len()],
        };
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    /// Kronecker product self ⊗ other; dimensions multiply.
    pub fn tensor(&self, other: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        let rows = checked_dim(self.rows, other.rows)?;
        let cols = checked_dim(self.cols, other.cols)?;
        let mut out = ComplexMatrix::zeros(rows, cols)?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.data[i * self.cols + j];
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.data[(i * other.rows + k) * cols + (j * other.cols + l)] =
                            a * other.data[k * other.cols + l];
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> Complex64 {
        let n = self.rows.min(self.cols);
        (0..n).fold(Complex64::ZERO, |acc, i| acc + self.data[i * self.cols + i])
    }

    /// Entrywise max modulus.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        debug_assert_eq!(self.rows, other.rows);
        debug_assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &ComplexMatrix, tol: Tolerance) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.max_abs_diff(other) <= tol.eps
    }

    pub fn is_hermitian(&self, tol: Tolerance) -> bool {
        if !self.is_square() {
            return false;
        }
        self.max_abs_diff(&self.adjoint()) <= tol.eps
    }

    /// True iff max-norm of (U†U − I) ≤ eps. Non-square input is a shape error.
    pub fn is_unitary(&self, tol: Tolerance) -> Result<bool, LinalgError> {
        if !self.is_square() {
            return Err(shape("is_unitary", self.rows, self.cols));
        }
        let gram = self.adjoint().matmul(self)?;
        let id = ComplexMatrix::identity(self.rows)?;
        Ok(gram.max_abs_diff(&id) <= tol.eps)
    }

    /// Commutator AB − BA.
    pub fn commutator(&self, other: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in descending order with matching orthonormal
    /// eigenvectors. The input must be Hermitian within `tol.eps`.
    pub fn hermitian_eig(&self, tol: Tolerance) -> Result<HermitianEig, LinalgError> {
        if !self.is_square() {
            return Err(shape("hermitian_eig", self.rows, self.cols));
        }
        let residual = self.max_abs_diff(&self.adjoint());
        if residual > tol.eps {
            return Err(LinalgError::NotHermitian {
                residual,
                eps: tol.eps,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut v = ComplexMatrix::identity(n)?;

        let scale = self.max_norm().max(1.0);
        let conv = 1e-15 * scale;
        const MAX_SWEEPS: usize = 100;

        let mut converged = n <= 1;
        for _ in 0..MAX_SWEEPS {
            if converged {
                break;
            }
            let mut off = 0.0_f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a.data[p * n + q].norm());
                }
            }
            if off <= conv {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.data[p * n + q];
                    let r = apq.norm();
                    if r <= conv {
                        continue;
                    }
                    let phase = apq / r;
                    let app = a.data[p * n + p].re;
                    let aqq = a.data[q * n + q].re;
                    let tau = (aqq - app) / (2.0 * r);
                    let t = if tau == 0.0 {
                        1.0
                    } else {
                        tau.signum() / (tau.abs() + (tau * tau + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    let sp = phase.scale(s);

                    // Column update: A ← A·J with J[p][p]=c, J[p][q]=s·phase,
                    // J[q][p]=−s·conj(phase), J[q][q]=c.
                    for k in 0..n {
                        let akp = a.data[k * n + p];
                        let akq = a.data[k * n + q];
                        a.data[k * n + p] = akp.scale(c) - akq * sp.conj();
                        a.data[k * n + q] = akp * sp + akq.scale(c);
                    }
                    // Row update: A ← J†·A.
                    for k in 0..n {
                        let apk = a.data[p * n + k];
                        let aqk = a.data[q * n + k];
                        a.data[p * n + k] = apk.scale(c) - sp * aqk;
                        a.data[q * n + k] = sp.conj() * apk + aqk.scale(c);
                    }
                    // Accumulate eigenvectors: V ← V·J.
                    for k in 0..n {
                        let vkp = v.data[k * n + p];
                        let vkq = v.data[k * n + q];
                        v.data[k * n + p] = vkp.scale(c) - vkq * sp.conj();
                        v.data[k * n + q] = vkp * sp + vkq.scale(c);
                    }
                }
            }
        }
        if !converged {
            // One final check: the last sweep may have finished the job.
            let mut off = 0.0_f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a.data[p * n + q].norm());
                }
            }
            if off > conv {
                return Err(LinalgError::NoConvergence { sweeps: MAX_SWEEPS });
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        let values: Vec<f64> = (0..n).map(|i| a.data[i * n + i].re).collect();
        order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());

        let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let eigenvectors: Vec<ComplexVector> = order
            .iter()
            .map(|&col| {
                let data: Vec<Complex64> = (0..n).map(|row| v.data[row * n + col]).collect();
                ComplexVector { data }
            })
            .collect();
        Ok(HermitianEig {
            eigenvalues,
            eigenvectors,
        })
    }

    fn check_same_shape(
        &self,
        other: &ComplexMatrix,
        context: &'static str,
    ) -> Result<(), LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::ShapeMismatch {
                context,
                left: format!("{}x{}", self.rows, self.cols),
                right: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Result of [`ComplexMatrix::hermitian_eig`]: eigenvalues descending,
/// eigenvectors orthonormal, index-matched.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<ComplexVector>,
}

impl HermitianEig {
    /// Σ λ_k |v_k⟩⟨v_k|, for reconstruction checks.
    pub fn reconstruct(&self) -> Result<ComplexMatrix, LinalgError> {
        let n = self.eigenvectors[0].dim();
        let mut out = ComplexMatrix::zeros(n, n)?;
        for (lambda, vec) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            out = out.add(&vec.outer(vec).scaled(c64(*lambda, 0.0)))?;
        }
        Ok(out)
    }
}

fn shape(context: &'static str, left: usize, right: usize) -> LinalgError {
    LinalgError::ShapeMismatch {
        context,
        left: left.to_string(),
        right: right.to_string(),
    }
}

fn checked_dim(a: usize, b: usize) -> Result<usize, LinalgError> {
    let dim = a.saturating_mul(b);
    if dim > DIM_CAP {
        return Err(LinalgError::DimensionLimit { dim, cap: DIM_CAP });
    }
    Ok(dim)
}
