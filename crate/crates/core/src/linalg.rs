//! Dense symmetric / Hermitian linear algebra for small matrices.
//!
//! Everything here is written for `p` in the tens at most: a cyclic Jacobi
//! eigensolver, functional calculus `f(X) = H f(Λ) Hᵀ`, and a Newton–Schulz
//! polar projection used to keep eigenvector frames orthonormal.
//!
//! Hermitian matrices `A + iB` are handled through the real embedding
//! `[[A, -B], [B, A]]`, which is symmetric and carries every eigenvalue of the
//! Hermitian matrix twice.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::LinalgError;

/// Default orthonormality tolerance `‖HᵀH − I‖_F` for eigenvector frames.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;
const MAX_POLAR_ITERATIONS: usize = 100;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.concat() }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Matrix) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · rhs` without materialising the transpose.
    pub fn tr_matmul(&self, rhs: &Matrix) -> Self {
        assert_eq!(self.rows, rhs.rows, "tr_matmul dimension mismatch");
        let mut out = Self::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(k, i)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Matrix) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (i + 1..self.cols).all(|j| self[(i, j)] == self[(j, i)]))
    }

    /// `(M + Mᵀ)/2`; the result is symmetric bit for bit.
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            if i == j {
                self[(i, i)]
            } else {
                0.5 * (self[(i, j)] + self[(j, i)])
            }
        })
    }

    /// `‖MᵀM − I‖_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.tr_matmul(self);
        gram.sub(&Matrix::identity(self.cols)).frobenius_norm()
    }
}

/// A real symmetric or complex Hermitian `p×p` matrix.
///
/// Real part is kept exactly symmetric and the imaginary part exactly
/// antisymmetric with a zero diagonal: writes go through [`set`] which mirrors
/// them, and constructors symmetrize or reject.
///
/// [`set`]: SymmetricMatrixState::set
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrixState {
    re: Matrix,
    im: Option<Matrix>,
}

impl SymmetricMatrixState {
    /// Wraps an exactly symmetric real matrix.
    pub fn from_symmetric(m: Matrix) -> Result<Self, LinalgError> {
        if !m.is_square() || m.rows() == 0 {
            return Err(LinalgError::Shape(format!("expected non-empty square matrix, got {}x{}", m.rows(), m.cols())));
        }
        if !m.is_symmetric() {
            return Err(LinalgError::NotSymmetric);
        }
        Ok(Self { re: m, im: None })
    }

    /// Symmetrizes an arbitrary square matrix as `(M + Mᵀ)/2`.
    pub fn symmetrize(m: &Matrix) -> Result<Self, LinalgError> {
        if !m.is_square() || m.rows() == 0 {
            return Err(LinalgError::Shape(format!("expected non-empty square matrix, got {}x{}", m.rows(), m.cols())));
        }
        Ok(Self { re: m.symmetrized(), im: None })
    }

    /// Uses the upper triangle of `m` and mirrors it.
    pub fn from_upper(m: &Matrix) -> Result<Self, LinalgError> {
        if !m.is_square() || m.rows() == 0 {
            return Err(LinalgError::Shape(format!("expected non-empty square matrix, got {}x{}", m.rows(), m.cols())));
        }
        let re = Matrix::from_fn(m.rows(), m.cols(), |i, j| if i <= j { m[(i, j)] } else { m[(j, i)] });
        Ok(Self { re, im: None })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "dimension must be at least 1");
        Self { re: Matrix::diagonal(values), im: None }
    }

    pub fn identity(p: usize) -> Self {
        Self::diagonal(&vec![1.0; p])
    }

    /// Hermitian matrix `re + i·im`, projected onto the Hermitian subspace.
    pub fn hermitian(re: &Matrix, im: &Matrix) -> Result<Self, LinalgError> {
        if !re.is_square() || re.rows() == 0 || (re.rows(), re.cols()) != (im.rows(), im.cols()) {
            return Err(LinalgError::Shape("hermitian parts must be equal-sized non-empty square matrices".into()));
        }
        let n = re.rows();
        let im = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 0.5 * (im[(i, j)] - im[(j, i)]) });
        Ok(Self { re: re.symmetrized(), im: Some(im) })
    }

    /// Hermitian matrix with zero imaginary part.
    pub fn hermitian_from_real(re: Matrix) -> Result<Self, LinalgError> {
        let n = re.rows();
        Self::hermitian(&re, &Matrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.re.rows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.im.is_some()
    }

    pub fn real_part(&self) -> &Matrix {
        &self.re
    }

    pub fn imag_part(&self) -> Option<&Matrix> {
        self.im.as_ref()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.re[(i, j)]
    }

    /// Sets entry `(i, j)` and its mirror `(j, i)` of the real part.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.re[(i, j)] = value;
        self.re[(j, i)] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        let re = self.re.frobenius_norm();
        match &self.im {
            Some(im) => re.hypot(im.frobenius_norm()),
            None => re,
        }
    }

    pub fn trace(&self) -> f64 {
        self.re.trace()
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.as_ref().is_none_or(Matrix::is_finite)
    }

    /// The real symmetric matrix handed to the eigensolver: `X` itself, or the
    /// `2p×2p` embedding `[[A, -B], [B, A]]` in Hermitian mode.
    pub fn real_form(&self) -> Matrix {
        match &self.im {
            None => self.re.clone(),
            Some(im) => {
                let p = self.dim();
                Matrix::from_fn(2 * p, 2 * p, |i, j| match (i < p, j < p) {
                    (true, true) => self.re[(i, j)],
                    (true, false) => -im[(i, j - p)],
                    (false, true) => im[(i - p, j)],
                    (false, false) => self.re[(i - p, j - p)],
                })
            }
        }
    }

    fn from_real_form(&self, m: &Matrix) -> Self {
        match self.im {
            None => Self { re: m.symmetrized(), im: None },
            Some(_) => {
                let p = self.dim();
                let re = Matrix::from_fn(p, p, |i, j| 0.5 * (m[(i, j)] + m[(i + p, j + p)]));
                let im = Matrix::from_fn(p, p, |i, j| 0.5 * (m[(i + p, j)] - m[(i, j + p)]));
                Self::hermitian(&re, &im).expect("shapes match by construction")
            }
        }
    }
}

/// Ordered eigenvalues and an orthonormal eigenvector frame.
///
/// In Hermitian mode `eigenvectors` is `2p×p`: rows `0..p` are real parts and
/// rows `p..2p` imaginary parts of unit complex eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl SpectralState {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_gap(&self) -> f64 {
        min_gap(&self.eigenvalues)
    }
}

/// Smallest consecutive gap `λ_{i+1} − λ_i`; `+∞` for a single eigenvalue.
pub fn min_gap(eigenvalues: &[f64]) -> f64 {
    eigenvalues.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Full eigensystem of a real symmetric matrix: ascending eigenvalues with
/// eigenvector columns, sign-normalised. Not exposed; callers go through
/// [`eigendecompose`].
struct RealEigen {
    values: Vec<f64>,
    vectors: Matrix,
}

fn jacobi_eigen(a: &Matrix, tol: f64) -> Result<RealEigen, LinalgError> {
    let n = a.rows();
    let scale = a.frobenius_norm();
    let mut w = a.clone();
    let mut v = Matrix::identity(n);

    if scale == 0.0 || n == 1 {
        return Ok(finish_eigen(&w, v));
    }
    if !scale.is_finite() {
        return Err(LinalgError::NonFinite);
    }

    let threshold = f64::EPSILON * scale;
    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        if off_diagonal_norm(&w) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut w, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&w) > threshold {
        let residual = off_diagonal_norm(&w) / scale;
        return Err(LinalgError::NotConverged { sweeps: MAX_SWEEPS, residual });
    }

    let eig = finish_eigen(&w, v);
    let residual = reconstruction_error(&eig.values, &eig.vectors, a) / scale;
    if residual > tol {
        return Err(LinalgError::NotConverged { sweeps: MAX_SWEEPS, residual });
    }
    Ok(eig)
}

fn off_diagonal_norm(w: &Matrix) -> f64 {
    let n = w.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += 2.0 * w[(i, j)] * w[(i, j)];
        }
    }
    s.sqrt()
}

/// One Jacobi rotation annihilating `w[p][q]`, accumulated into `v`.
fn rotate(w: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = w[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = w.rows();
    let theta = (w[(q, q)] - w[(p, p)]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    w[(p, p)] -= t * apq;
    w[(q, q)] += t * apq;
    w[(p, q)] = 0.0;
    w[(q, p)] = 0.0;
    for k in 0..n {
        if k != p && k != q {
            let akp = w[(k, p)];
            let akq = w[(k, q)];
            let new_kp = c * akp - s * akq;
            let new_kq = s * akp + c * akq;
            w[(k, p)] = new_kp;
            w[(p, k)] = new_kp;
            w[(k, q)] = new_kq;
            w[(q, k)] = new_kq;
        }
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Sorts ascending and fixes column signs: the largest-magnitude entry of
/// each column is positive, ties going to the lowest row index.
fn finish_eigen(w: &Matrix, v: Matrix) -> RealEigen {
    let n = w.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| w[(a, a)].total_cmp(&w[(b, b)]));
    let values = order.iter().map(|&k| w[(k, k)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut pivot = 0;
        for i in 1..n {
            if v[(i, k)].abs() > v[(pivot, k)].abs() {
                pivot = i;
            }
        }
        let sign = if v[(pivot, k)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, col)] = sign * v[(i, k)];
        }
    }
    RealEigen { values, vectors }
}

/// `‖H diag(λ) Hᵀ − X‖_F`.
pub fn reconstruction_error(eigenvalues: &[f64], eigenvectors: &Matrix, x: &Matrix) -> f64 {
    reconstruct(eigenvalues, eigenvectors, |l| l).sub(x).frobenius_norm()
}

/// `H diag(f(λ)) Hᵀ`, computed on the upper triangle and mirrored.
fn reconstruct(eigenvalues: &[f64], h: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let n = h.rows();
    let fl: Vec<f64> = eigenvalues.iter().map(|&l| f(l)).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for (k, &fk) in fl.iter().enumerate() {
                s += h[(i, k)] * fk * h[(j, k)];
            }
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

/// Diagonalises `X = H Λ Hᵀ` with ascending eigenvalues.
///
/// `tol` bounds the relative reconstruction error `‖HΛHᵀ − X‖_F / ‖X‖_F`;
/// a decomposition missing it is reported as [`LinalgError::NotConverged`].
/// Equal eigenvalues are fine here.
pub fn eigendecompose(x: &SymmetricMatrixState, tol: f64) -> Result<SpectralState, LinalgError> {
    if !(tol > 0.0) {
        return Err(LinalgError::InvalidTolerance(tol));
    }
    let eig = jacobi_eigen(&x.real_form(), tol)?;
    if !x.is_hermitian() {
        return Ok(SpectralState { eigenvalues: eig.values, eigenvectors: eig.vectors });
    }
    // The embedding doubles every eigenvalue; keep one vector per pair.
    let p = x.dim();
    let eigenvalues = (0..p).map(|k| 0.5 * (eig.values[2 * k] + eig.values[2 * k + 1])).collect();
    let eigenvectors = Matrix::from_fn(2 * p, p, |i, k| eig.vectors[(i, 2 * k)]);
    Ok(SpectralState { eigenvalues, eigenvectors })
}

/// Eigenvalues only (ascending).
pub fn eigenvalues(x: &SymmetricMatrixState, tol: f64) -> Result<Vec<f64>, LinalgError> {
    eigendecompose(x, tol).map(|s| s.eigenvalues)
}

/// Decomposition of a matrix kept around so several spectral functions can
/// be evaluated from one diagonalisation.
pub struct FunctionalCalculus<'a> {
    source: &'a SymmetricMatrixState,
    values: Vec<f64>,
    vectors: Matrix,
}

impl<'a> FunctionalCalculus<'a> {
    pub fn new(x: &'a SymmetricMatrixState, tol: f64) -> Result<Self, LinalgError> {
        if !(tol > 0.0) {
            return Err(LinalgError::InvalidTolerance(tol));
        }
        let eig = jacobi_eigen(&x.real_form(), tol)?;
        Ok(Self { source: x, values: eig.values, vectors: eig.vectors })
    }

    /// Eigenvalues of the underlying matrix, each listed once.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.source.is_hermitian() {
            self.values.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()
        } else {
            self.values.clone()
        }
    }

    pub fn apply(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrixState {
        let m = reconstruct(&self.values, &self.vectors, f);
        self.source.from_real_form(&m)
    }
}

/// `f(X) = H f(Λ) Hᵀ`.
pub fn apply_spectral_function(
    x: &SymmetricMatrixState,
    f: impl Fn(f64) -> f64,
    tol: f64,
) -> Result<SymmetricMatrixState, LinalgError> {
    Ok(FunctionalCalculus::new(x, tol)?.apply(f))
}

/// Orthogonal polar factor of `h` (the nearest orthogonal matrix), by
/// Newton–Schulz iteration `H ← H(3I − HᵀH)/2`.
///
/// The iteration needs every singular value inside `(0, √3)`; inputs with
/// `‖HᵀH − I‖_F ≥ 1` are treated as degenerate.
pub fn reorthonormalize(h: &Matrix) -> Result<Matrix, LinalgError> {
    if !h.is_square() || h.rows() == 0 {
        return Err(LinalgError::Shape(format!("expected non-empty square matrix, got {}x{}", h.rows(), h.cols())));
    }
    if !h.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = h.rows();
    let mut defect = h.orthonormality_defect();
    if defect >= 1.0 {
        return Err(LinalgError::Degenerate { defect });
    }
    let mut x = h.clone();
    let three = Matrix::identity(n).scale(3.0);
    for _ in 0..MAX_POLAR_ITERATIONS {
        if defect <= 1e-15 * (n as f64) {
            return Ok(x);
        }
        let gram = x.tr_matmul(&x);
        let next = x.matmul(&three.sub(&gram)).scale(0.5);
        let next_defect = next.orthonormality_defect();
        // Quadratic convergence stalls at rounding level; stop once it does.
        if next_defect >= defect {
            return Ok(x);
        }
        x = next;
        defect = next_defect;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: &[Vec<f64>]) -> SymmetricMatrixState {
        SymmetricMatrixState::from_symmetric(Matrix::from_rows(rows)).unwrap()
    }

    #[test]
    fn identity_decomposes_trivially() {
        let s = eigendecompose(&SymmetricMatrixState::identity(2), 1e-12).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 1.0]);
        assert_eq!(s.eigenvectors, Matrix::identity(2));
    }

    #[test]
    fn diagonal_is_reordered_ascending() {
        let s = eigendecompose(&SymmetricMatrixState::diagonal(&[3.0, 1.0]), 1e-12).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 3.0]);
        assert_eq!(s.eigenvectors, Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]));
    }

    #[test]
    fn swap_matrix_eigenpairs() {
        // characteristic polynomial λ² − 1
        let s = eigendecompose(&sym(&[vec![0.0, 1.0], vec![1.0, 0.0]]), 1e-12).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // (1,-1)/√2 has a tie in magnitude: lowest row wins, so it is positive.
        let expected = [[r, r], [-r, r]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((s.eigenvectors[(i, j)] - expected[i][j]).abs() < 1e-15, "{:?}", s.eigenvectors);
            }
        }
    }

    #[test]
    fn rejects_bad_tolerance_and_shapes() {
        assert!(matches!(
            eigendecompose(&SymmetricMatrixState::identity(2), 0.0),
            Err(LinalgError::InvalidTolerance(_))
        ));
        assert!(SymmetricMatrixState::from_symmetric(Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]])).is_err());
        assert!(SymmetricMatrixState::from_symmetric(Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn spectral_function_examples() {
        let d = SymmetricMatrixState::diagonal(&[4.0, 9.0]);
        let r = apply_spectral_function(&d, |x: f64| x.abs().sqrt(), 1e-12).unwrap();
        assert_eq!(r, SymmetricMatrixState::diagonal(&[2.0, 3.0]));

        let swap = sym(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let sq = apply_spectral_function(&swap, |x| x * x, 1e-12).unwrap();
        // direct product: [[0,1],[1,0]]² = I
        let direct = swap.real_part().matmul(swap.real_part());
        assert!(sq.real_part().sub(&direct).frobenius_norm() < 1e-14);
    }

    #[test]
    fn hermitian_eigenvalues_via_embedding() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let re = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
        let im = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let x = SymmetricMatrixState::hermitian(&re, &im).unwrap();
        let s = eigendecompose(&x, 1e-12).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 3.0).abs() < 1e-14);
        assert_eq!(s.eigenvectors.rows(), 4);

        // X² = [[5, 4i], [-4i, 5]]
        let sq = apply_spectral_function(&x, |v| v * v, 1e-12).unwrap();
        assert!((sq.real_part()[(0, 0)] - 5.0).abs() < 1e-13);
        assert!((sq.real_part()[(0, 1)]).abs() < 1e-13);
        assert!((sq.imag_part().unwrap()[(0, 1)] - 4.0).abs() < 1e-13);
        assert_eq!(sq.imag_part().unwrap()[(1, 0)], -sq.imag_part().unwrap()[(0, 1)]);
    }

    #[test]
    fn reorthonormalize_examples() {
        let c = 0.3f64.cos();
        let s = 0.3f64.sin();
        let rot = Matrix::from_rows(&[vec![c, -s], vec![s, c]]);
        let out = reorthonormalize(&rot).unwrap();
        assert!(out.sub(&rot).frobenius_norm() < 1e-12);

        let scaled = Matrix::identity(3).scale(1.01);
        let out = reorthonormalize(&scaled).unwrap();
        assert!(out.sub(&Matrix::identity(3)).frobenius_norm() < 1e-12);
        assert!(out.orthonormality_defect() <= 1e-12);
    }

    #[test]
    fn reorthonormalize_rejects_degenerate() {
        assert!(matches!(reorthonormalize(&Matrix::zeros(2, 2)), Err(LinalgError::Degenerate { .. })));
        let singular = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(reorthonormalize(&singular).is_err());
    }

    #[test]
    fn set_keeps_symmetry() {
        let mut x = SymmetricMatrixState::identity(3);
        x.set(0, 2, 5.0);
        assert_eq!(x.get(2, 0), 5.0);
        assert!(x.real_part().is_symmetric());
    }
}
