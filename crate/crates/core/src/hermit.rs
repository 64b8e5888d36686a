//! Dense complex Hermitian linear algebra.
//!
//! Everything the estimators need from linear algebra lives here: a small
//! row-major complex matrix, a validated Hermitian wrapper, a cyclic Jacobi
//! eigensolver, PSD square roots, circular Gaussian sampling and the sample
//! covariance `S = Z Zᴴ / K`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 50;
const JACOBI_REL_TOL: f64 = 1e-12;
/// Relative asymmetry tolerated when validating Hermitian input.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative eigenvalue floor below which a matrix is not PSD.
pub const PSD_TOL: f64 = 1e-10;

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4e}{:+.4e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[Complex64]) {
        assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &CMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let lhs = self.row(i);
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (l, &a) in lhs.iter().enumerate() {
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(l)) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `selfᴴ · x`
    pub fn adjoint_matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.rows, x.len(), "adjoint_matvec shape mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    /// Largest absolute component (real or imaginary part) of any entry.
    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .fold(0.0f64, |m, z| m.max(z.re.abs()).max(z.im.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest componentwise difference to `other`.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| {
                let d = a - b;
                m.max(d.re.abs()).max(d.im.abs())
            })
    }

    fn check_finite(&self) -> Result<()> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = self[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `xᴴ y`
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// An N×N complex Hermitian matrix with an exactly real diagonal.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian{:?}", self.0)
    }
}

impl HermitianMatrix {
    /// Validates `m` as Hermitian.
    ///
    /// Entries must be finite and satisfy `m[i][j] = conj(m[j][i])` to within
    /// `1e-12 · max(1, max|m|)` per component. The lower triangle is then
    /// rebuilt from the upper one and the diagonal made exactly real.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::InvalidInput(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        if m.rows == 0 {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        m.check_finite()?;
        let tol = HERMITIAN_TOL * m.max_abs().max(1.0);
        let n = m.rows;
        for i in 0..n {
            for j in i..n {
                let d = m[(i, j)] - m[(j, i)].conj();
                let mismatch = d.re.abs().max(d.im.abs());
                if mismatch > tol {
                    return Err(Error::NotHermitian { row: i, col: j, mismatch });
                }
            }
        }
        Ok(Self::from_upper(m))
    }

    /// Builds a Hermitian matrix from the upper triangle of `m` without
    /// checking the lower one.
    pub fn from_upper(mut m: CMatrix) -> Self {
        let n = m.rows;
        for i in 0..n {
            m[(i, i)].im = 0.0;
            for j in (i + 1)..n {
                m[(j, i)] = m[(i, j)].conj();
            }
        }
        Self(m)
    }

    /// `(m + mᴴ) / 2`, for products that are Hermitian up to rounding.
    pub fn hermitize(m: &CMatrix) -> Self {
        assert_eq!(m.rows, m.cols);
        let n = m.rows;
        let sym = CMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
        Self::from_upper(sym)
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self(CMatrix::diagonal(values))
    }

    /// `V · diag(values) · Vᴴ`
    pub fn from_eigen(vectors: &CMatrix, values: &[f64]) -> Self {
        let n = vectors.rows;
        assert_eq!(values.len(), vectors.cols);
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (l, &v) in values.iter().enumerate() {
                    acc += vectors[(i, l)] * vectors[(j, l)].conj() * v;
                }
                m[(i, j)] = acc;
            }
        }
        Self::from_upper(m)
    }

    pub fn n(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.scale(c))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Natural log of the determinant via complex Cholesky.
    ///
    /// Fails with [`Error::NotPsd`] when a pivot is not strictly positive.
    pub fn log_det(&self) -> Result<f64> {
        let n = self.n();
        let mut l = CMatrix::zeros(n, n);
        let mut acc = 0.0;
        for j in 0..n {
            let mut d = self.0[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPsd {
                    min_eig: d,
                    max_eig: self.0.max_abs(),
                });
            }
            let ljj = d.sqrt();
            l[(j, j)] = Complex64::new(ljj, 0.0);
            acc += ljj.ln();
            for i in (j + 1)..n {
                let mut s = self.0[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(2.0 * acc)
    }
}

impl Index<(usize, usize)> for HermitianMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

/// Eigenvalues sorted descending with the matching unitary eigenvector
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        HermitianMatrix::from_eigen(&self.eigenvectors, &self.eigenvalues)
    }

    /// Solves `H x = b` for the decomposed `H`.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let max = self.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min <= f64::EPSILON * max || min <= 0.0 {
            return Err(Error::Singular(min));
        }
        let inv: Vec<f64> = self.eigenvalues.iter().map(|v| 1.0 / v).collect();
        Ok(apply_spectral(&self.eigenvectors, &inv, b))
    }
}

/// `V · diag(weights) · Vᴴ · x`
pub fn apply_spectral(vectors: &CMatrix, weights: &[f64], x: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vectors.adjoint_matvec(x);
    for (c, &w) in coeffs.iter_mut().zip(weights) {
        *c *= w;
    }
    vectors.matvec(&coeffs)
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius mass drops below
/// `1e-12 · ‖H‖_F`. Equal eigenvalues keep their original diagonal order and
/// each eigenvector is rotated so its largest-magnitude entry is real and
/// positive.
pub fn eig_hermitian(h: &HermitianMatrix) -> Result<EigenDecomposition> {
    h.matrix().check_finite()?;
    let n = h.n();
    let mut a = h.matrix().clone();
    let mut v = CMatrix::identity(n);
    let target = JACOBI_REL_TOL * a.frobenius_norm();

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > target {
        return Err(Error::Convergence {
            iterations: JACOBI_MAX_SWEEPS,
            trajectory: Vec::new(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        fix_phase(&mut col);
        eigenvectors.set_column(dst, &col);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.rows;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// One two-sided rotation zeroing `a[p][q]`; accumulates it into `v`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let phase = apq / g;
    let theta = (aqq - app) / (2.0 * g);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let u_pp = Complex64::new(c, 0.0);
    let u_pq = Complex64::new(s, 0.0);
    let u_qp = -phase.conj() * s;
    let u_qq = phase.conj() * c;

    let n = a.rows;
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * u_pp + akq * u_qp;
        a[(k, q)] = akp * u_pq + akq * u_qq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
        a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)].im = 0.0;
    a[(q, q)].im = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * u_pp + vkq * u_qp;
        v[(k, q)] = vkp * u_pq + vkq * u_qq;
    }
}

fn fix_phase(col: &mut [Complex64]) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in col.iter().enumerate() {
        let m = z.norm();
        if m > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = m;
        }
    }
    if best_mag <= 0.0 {
        return;
    }
    let rot = col[best].conj() / best_mag;
    for z in col.iter_mut() {
        *z *= rot;
    }
    col[best] = Complex64::new(col[best].norm(), 0.0);
}

/// `F = V · diag(√max(λ, 0)) · Vᴴ`, so that `F · Fᴴ = h`.
///
/// Eigenvalues down to `-1e-10 · λ_max` are treated as zero; anything more
/// negative is reported as [`Error::NotPsd`].
pub fn sqrt_factor(h: &HermitianMatrix) -> Result<CMatrix> {
    let eig = eig_hermitian(h)?;
    sqrt_factor_from_eig(&eig)
}

pub fn sqrt_factor_from_eig(eig: &EigenDecomposition) -> Result<CMatrix> {
    let max = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let min = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if min < -PSD_TOL * max.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd {
            min_eig: min,
            max_eig: max,
        });
    }
    let roots: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(HermitianMatrix::from_eigen(&eig.eigenvectors, &roots).into_matrix())
}

/// K snapshots of dimension N, stored as the columns of an N×K matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMatrix(CMatrix);

impl TrainingMatrix {
    pub fn new(z: CMatrix) -> Result<Self> {
        if z.cols == 0 || z.rows == 0 {
            return Err(Error::InvalidInput(
                "training matrix needs at least one snapshot".into(),
            ));
        }
        z.check_finite()?;
        Ok(Self(z))
    }

    pub fn n(&self) -> usize {
        self.0.rows
    }

    pub fn k(&self) -> usize {
        self.0.cols
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        self.0.column(j)
    }

    pub fn columns(&self) -> impl Iterator<Item = Vec<Complex64>> + '_ {
        (0..self.k()).map(|j| self.column(j))
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.0
    }
}

/// Unit-variance circular complex Gaussian: real and imaginary parts are
/// independent `Normal(0, 1/2)`.
pub fn circular_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Draws K columns `z = F·w` with `w` white circular Gaussian.
///
/// Entries of `w` are drawn column by column, so a given rng state always
/// produces the same matrix.
pub fn sample_training<R: Rng + ?Sized>(
    factor: &CMatrix,
    k: usize,
    rng: &mut R,
) -> Result<TrainingMatrix> {
    if k == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let n = factor.cols;
    let mut white = CMatrix::zeros(n, k);
    for j in 0..k {
        for i in 0..n {
            white[(i, j)] = circular_gaussian(rng);
        }
    }
    TrainingMatrix::new(factor.matmul(&white))
}

/// `S = Z Zᴴ / K`
pub fn sample_covariance(z: &TrainingMatrix) -> HermitianMatrix {
    let (n, k) = (z.n(), z.k());
    let m = z.matrix();
    let scale = 1.0 / k as f64;
    let mut s = CMatrix::zeros(n, n);
    for i in 0..n {
        let ri = m.row(i);
        for j in i..n {
            let rj = m.row(j);
            let acc: Complex64 = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum();
            s[(i, j)] = acc * scale;
        }
    }
    HermitianMatrix::from_upper(s)
}
