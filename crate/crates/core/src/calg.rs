//! Small dense complex linear algebra.
//!
//! Dimensions in this crate stay below a dozen or so (the largest objects are
//! the stacked constraint matrices of projective fitting, a few thousand rows
//! by at most ~150 columns), so everything here is dense and row-major.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{is_finite, lit, Real};

/// Dense complex column vector.
#[derive(Clone, PartialEq, Default)]
pub struct CVector<T>(Vec<Complex<T>>);

impl<T: Real> CVector<T> {
    pub fn new(entries: Vec<Complex<T>>) -> Self {
        CVector(entries)
    }

    pub fn zeros(n: usize) -> Self {
        CVector(vec![Complex::zero(); n])
    }

    /// Unit vector `e_i` of length `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = Complex::one();
        v
    }

    pub fn from_real(entries: &[f64]) -> Self {
        CVector(entries.iter().map(|&x| Complex::new(lit(x), T::zero())).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex<T>> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| is_finite(*z))
    }

    /// Errors if any entry is NaN or infinite.
    pub fn validate(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn norm_sqr(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// Hermitian product `<self, other> = sum self_i * conj(other_i)`,
    /// linear in the first argument.
    pub fn dot(&self, other: &Self) -> Complex<T> {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .fold(Complex::zero(), |acc, (a, b)| acc + a * b.conj())
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        CVector(self.0.iter().map(|z| z * s).collect())
    }

    pub fn scale_real(&self, s: T) -> Self {
        CVector(self.0.iter().map(|z| z * s).collect())
    }

    pub fn conj(&self) -> Self {
        CVector(self.0.iter().map(|z| z.conj()).collect())
    }

    pub fn max_abs(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, z| acc.max(z.norm()))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .fold(T::zero(), |acc, (a, b)| acc.max((a - b).norm()))
    }

    /// Concatenation `[self, other]`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        CVector(v)
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        CVector(self.0[start..end].to_vec())
    }

    /// Multiplies by the unit phase that makes the largest-modulus entry real
    /// positive. Ties go to the lowest index.
    pub fn phase_canonicalized(&self) -> Self {
        match largest_entry_phase(&self.0) {
            Some(phase) => self.scale(phase),
            None => self.clone(),
        }
    }

    /// Iid standard complex Gaussian entries, `E|x_i|^2 = 1`.
    pub fn gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        CVector((0..n).map(|_| complex_gaussian(rng)).collect())
    }
}

/// Conjugate unit phase of the largest-modulus entry, or `None` when all
/// entries vanish.
fn largest_entry_phase<T: Real>(entries: &[Complex<T>]) -> Option<Complex<T>> {
    let mut best: Option<(T, Complex<T>)> = None;
    for &z in entries {
        let m = z.norm();
        if best.is_none_or(|(bm, _)| m > bm) {
            best = Some((m, z));
        }
    }
    match best {
        Some((m, z)) if m > T::zero() => Some(z.conj() / m),
        _ => None,
    }
}

/// Standard complex Gaussian: real and imaginary parts `N(0, 1/2)`.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex::new(lit(re * s), lit(im * s))
}

impl<T> Index<usize> for CVector<T> {
    type Output = Complex<T>;
    fn index(&self, i: usize) -> &Complex<T> {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for CVector<T> {
    fn index_mut(&mut self, i: usize) -> &mut Complex<T> {
        &mut self.0[i]
    }
}

impl<T: Real> Add for &CVector<T> {
    type Output = CVector<T>;
    fn add(self, rhs: Self) -> CVector<T> {
        assert_eq!(self.len(), rhs.len(), "vector length mismatch");
        CVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl<T: Real> Sub for &CVector<T> {
    type Output = CVector<T>;
    fn sub(self, rhs: Self) -> CVector<T> {
        assert_eq!(self.len(), rhs.len(), "vector length mismatch");
        CVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl<T: Real> Neg for &CVector<T> {
    type Output = CVector<T>;
    fn neg(self) -> CVector<T> {
        CVector(self.0.iter().map(|a| -a).collect())
    }
}

impl<T: fmt::Debug> fmt::Debug for CVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl<T: Real> FromIterator<Complex<T>> for CVector<T> {
    fn from_iter<I: IntoIterator<Item = Complex<T>>>(iter: I) -> Self {
        CVector(iter.into_iter().collect())
    }
}

impl<T: Real> From<Vec<Complex<T>>> for CVector<T> {
    fn from(v: Vec<Complex<T>>) -> Self {
        CVector(v)
    }
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_diag(diag: &[Complex<T>]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: Vec<Vec<Complex<T>>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
        Ok(CMatrix {
            rows: nrows,
            cols: ncols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Real matrix from nested `f64` rows. Panics on ragged input.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let data = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex::new(lit(x), T::zero())).collect())
            .collect();
        Self::from_rows(data).expect("ragged real matrix")
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[CVector<T>]) -> Result<Self> {
        let ncols = cols.len();
        let nrows = cols.first().map_or(0, CVector::len);
        if cols.iter().any(|c| c.len() != nrows) {
            return Err(Error::DimensionMismatch("columns of unequal length".into()));
        }
        Ok(Self::from_fn(nrows, ncols, |i, j| cols[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| is_finite(*z))
    }

    pub fn validate(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn row(&self, i: usize) -> CVector<T> {
        CVector(self.data[i * self.cols..(i + 1) * self.cols].to_vec())
    }

    pub fn col(&self, j: usize) -> CVector<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &CVector<T>) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex<T>>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(<[_]>::to_vec).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape(), "matrix shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc.max((a - b).norm()))
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.rows.min(self.cols)).fold(Complex::zero(), |acc, i| acc + self[(i, i)])
    }

    /// Copy of the `nrows x ncols` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> Self {
        Self::from_fn(nrows, ncols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Self) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn checked_mul_vec(&self, v: &CVector<T>) -> Result<CVector<T>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                (0..self.cols).fold(Complex::zero(), |acc, j| acc + self[(i, j)] * v[j])
            })
            .collect())
    }

    /// Largest entry of `|self^H self - I|`; zero exactly for isometries.
    pub fn isometry_residual(&self) -> T {
        let g = &self.adjoint() * self;
        g.max_abs_diff(&Self::identity(self.cols))
    }

    /// Determinant by LU with partial pivoting.
    pub fn determinant(&self) -> Result<Complex<T>> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("determinant of non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut det = Complex::<T>::one();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, k)].norm().partial_cmp(&a[(y, k)].norm()).unwrap())
                .unwrap();
            if a[(p, k)].is_zero() {
                return Ok(Complex::zero());
            }
            if p != k {
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(p, j)];
                    a[(p, j)] = tmp;
                }
                det = -det;
            }
            let pivot = a[(k, k)];
            det *= pivot;
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        Ok(det)
    }

    /// Haar-distributed unitary: the `Q` factor (positive real `R` diagonal)
    /// of a complex Gaussian matrix, via twice-iterated Gram-Schmidt.
    pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let g = Self::from_fn(n, n, |_, _| complex_gaussian(rng));
        let mut cols: Vec<CVector<T>> = (0..n).map(|j| g.col(j)).collect();
        for j in 0..n {
            for _ in 0..2 {
                for i in 0..j {
                    let proj = cols[j].dot(&cols[i]);
                    cols[j] = &cols[j] - &cols[i].scale(proj);
                }
            }
            let nrm = cols[j].norm();
            cols[j] = cols[j].scale_real(T::one() / nrm);
        }
        Self::from_columns(&cols).expect("square")
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: Self) -> CMatrix<T> {
        self.checked_mul(rhs).expect("matrix shape mismatch")
    }
}

impl<T: Real> Mul<&CVector<T>> for &CMatrix<T> {
    type Output = CVector<T>;
    fn mul(self, rhs: &CVector<T>) -> CVector<T> {
        self.checked_mul_vec(rhs).expect("matrix-vector shape mismatch")
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: Self) -> CMatrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: Self) -> CMatrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for CMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.cols.max(1)).take(self.rows)).finish()
    }
}

/// Signature `(p, q)` of the Hermitian form
/// `H(x, x) = |x_1|^2 + ... + |x_p|^2 - |x_{p+1}|^2 - ... - |x_{p+q}|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianSignature {
    p: usize,
    q: usize,
}

impl HermitianSignature {
    /// Indefinite signature; both `p` and `q` must be positive.
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidParameter(format!(
                "indefinite signature needs p >= 1 and q >= 1, got ({p}, {q})"
            )));
        }
        Ok(Self { p, q })
    }

    /// Positive-definite signature `(n, 0)`; turns the unitarity test into
    /// the ordinary `U(n)` test.
    pub fn definite(n: usize) -> Self {
        Self { p: n, q: 0 }
    }

    /// Signature `(1, d)` of the ball `B^d` in homogeneous coordinates.
    pub fn ball(d: usize) -> Self {
        Self { p: 1, q: d }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    fn sign<T: Real>(&self, i: usize) -> T {
        if i < self.p {
            T::one()
        } else {
            -T::one()
        }
    }

    /// `J = diag(I_p, -I_q)`.
    pub fn matrix<T: Real>(&self) -> CMatrix<T> {
        let d: Vec<Complex<T>> = (0..self.dim())
            .map(|i| Complex::new(self.sign(i), T::zero()))
            .collect();
        CMatrix::from_diag(&d)
    }
}

/// Value of the Hermitian form of signature `sig` on `x`.
pub fn hform_eval<T: Real>(sig: HermitianSignature, x: &CVector<T>) -> Result<T> {
    if x.len() != sig.dim() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for signature ({}, {})",
            x.len(),
            sig.p,
            sig.q
        )));
    }
    Ok(x.iter()
        .enumerate()
        .fold(T::zero(), |acc, (i, z)| acc + sig.sign::<T>(i) * z.norm_sqr()))
}

/// Max-norm of `M J M^H - J`.
pub fn h_unitary_residual<T: Real>(m: &CMatrix<T>, sig: HermitianSignature) -> Result<T> {
    if !m.is_square() || m.rows() != sig.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix for signature ({}, {})",
            m.rows(),
            m.cols(),
            sig.p,
            sig.q
        )));
    }
    let j = sig.matrix::<T>();
    let k = &(m * &j) * &m.adjoint();
    Ok(k.max_abs_diff(&j))
}

/// Membership in `U(p, q)` up to `tol`.
pub fn is_h_unitary<T: Real>(m: &CMatrix<T>, sig: HermitianSignature, tol: T) -> Result<bool> {
    Ok(h_unitary_residual(m, sig)? < tol)
}

/// Extends `k` orthonormal columns in `C^N` to an `N x N` unitary whose first
/// `k` columns are exactly the input.
pub fn unitary_complete<T: Real>(cols: &CMatrix<T>, tol: T) -> Result<CMatrix<T>> {
    let (n, k) = cols.shape();
    if k > n {
        return Err(Error::DimensionMismatch(format!(
            "{k} columns cannot be orthonormal in dimension {n}"
        )));
    }
    let residual = cols.isometry_residual();
    if residual.is_nan() || residual >= tol {
        return Err(Error::NotOrthonormal {
            residual: residual.to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut basis: Vec<CVector<T>> = (0..k).map(|j| cols.col(j)).collect();
    while basis.len() < n {
        // Pick the standard basis vector with the largest component outside
        // the current span, then orthogonalize it twice.
        let mut best: Option<(T, CVector<T>)> = None;
        for i in 0..n {
            let mut cand = CVector::basis(n, i);
            for _ in 0..2 {
                for b in &basis {
                    let proj = cand.dot(b);
                    cand = &cand - &b.scale(proj);
                }
            }
            let nrm = cand.norm();
            if best.as_ref().is_none_or(|(bn, _)| nrm > *bn) {
                best = Some((nrm, cand));
            }
        }
        let (nrm, cand) = best.expect("n > 0");
        basis.push(cand.scale_real(T::one() / nrm));
    }
    CMatrix::from_columns(&basis)
}

/// Thin singular value decomposition `A = U diag(s) V^H` of an `m x n`
/// matrix with `m >= n`. Singular values are sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: CMatrix<T>,
    pub singular: Vec<T>,
    pub v: CMatrix<T>,
}

/// One-sided (Hestenes) Jacobi SVD. Accurate for small singular values,
/// which is what nullspace extraction needs.
pub fn svd<T: Real>(a: &CMatrix<T>) -> Result<Svd<T>> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::DimensionMismatch(format!(
            "svd needs rows >= cols, got {m}x{n}"
        )));
    }
    a.validate("svd input")?;
    let mut cols: Vec<Vec<Complex<T>>> = (0..n).map(|j| a.col(j).into_vec()).collect();
    let mut v: Vec<Vec<Complex<T>>> = (0..n).map(|j| CVector::basis(n, j).into_vec()).collect();
    jacobi_sweeps(&mut cols, &mut v);

    let mut order: Vec<(T, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (c.iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt(), j))
        .collect();
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));

    let singular: Vec<T> = order.iter().map(|&(s, _)| s).collect();
    let u_cols: Vec<CVector<T>> = order
        .iter()
        .map(|&(s, j)| {
            if s > T::zero() {
                CVector(cols[j].iter().map(|z| z / s).collect())
            } else {
                CVector::zeros(m)
            }
        })
        .collect();
    let v_cols: Vec<CVector<T>> = order.iter().map(|&(_, j)| CVector(v[j].clone())).collect();
    Ok(Svd {
        u: CMatrix::from_columns(&u_cols)?,
        singular,
        v: CMatrix::from_columns(&v_cols)?,
    })
}

fn jacobi_sweeps<T: Real>(cols: &mut [Vec<Complex<T>>], v: &mut [Vec<Complex<T>>]) {
    let n = cols.len();
    let eps = T::epsilon();
    let two = lit::<T>(2.0);
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (alpha, beta, gamma) = {
                    let (ci, cj) = (&cols[i], &cols[j]);
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma = Complex::<T>::zero();
                    for (x, y) in ci.iter().zip(cj) {
                        alpha += x.norm_sqr();
                        beta += y.norm_sqr();
                        gamma += x.conj() * y;
                    }
                    (alpha, beta, gamma)
                };
                let g = gamma.norm();
                if g == T::zero() || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (two * g);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let cs = T::one() / (T::one() + t * t).sqrt();
                let sn = cs * t;
                rotate(cols, i, j, cs, sn, phase);
                rotate(v, i, j, cs, sn, phase);
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Columns `(x, y) <- (c x - s p y, s x + c p y)` with `p` a unit phase.
fn rotate<T: Real>(cols: &mut [Vec<Complex<T>>], i: usize, j: usize, c: T, s: T, p: Complex<T>) {
    let (left, right) = cols.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let py = p * *y;
        let nx = *x * c - py * s;
        let ny = *x * s + py * c;
        *x = nx;
        *y = ny;
    }
}

/// Householder QR; returns the `n x n` upper-triangular factor `R` of an
/// `m x n` matrix with `m >= n`.
pub fn qr_r<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::DimensionMismatch(format!(
            "qr needs rows >= cols, got {m}x{n}"
        )));
    }
    // Work column-major for cache-friendly reflector application.
    let mut cols: Vec<Vec<Complex<T>>> = (0..n).map(|j| a.col(j).into_vec()).collect();
    let two = lit::<T>(2.0);
    for k in 0..n {
        let norm_x = cols[k][k..].iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt();
        if norm_x == T::zero() {
            continue;
        }
        let x0 = cols[k][k];
        let phase = if x0.norm() > T::zero() {
            x0 / x0.norm()
        } else {
            Complex::one()
        };
        let alpha = -phase * norm_x;
        let mut vk: Vec<Complex<T>> = cols[k][k..].to_vec();
        vk[0] -= alpha;
        let vnorm2 = vk.iter().fold(T::zero(), |s, z| s + z.norm_sqr());
        if vnorm2 == T::zero() {
            continue;
        }
        for col in cols.iter_mut().skip(k) {
            let proj = vk
                .iter()
                .zip(&col[k..])
                .fold(Complex::<T>::zero(), |s, (vi, ci)| s + vi.conj() * ci);
            let f = proj * (two / vnorm2);
            for (ci, vi) in col[k..].iter_mut().zip(&vk) {
                *ci -= vi * f;
            }
        }
    }
    Ok(CMatrix::from_fn(n, n, |i, j| if i <= j { cols[j][i] } else { Complex::zero() }))
}

/// Unit minimizer of `||M x||` together with the singular values bracketing it.
#[derive(Debug, Clone)]
pub struct NullVector<T> {
    /// Phase-canonicalized minimizer.
    pub vector: CVector<T>,
    /// `||M x||`, the smallest singular value.
    pub sigma_min: T,
    /// Second smallest singular value.
    pub sigma_next: T,
    /// Largest singular value.
    pub sigma_max: T,
}

/// Default relative separation below which the two smallest singular values
/// are considered tied.
pub const DEFAULT_SINGULAR_GAP: f64 = 1e-8;

/// Homogeneous least squares: the unit vector minimizing `||M x||_2`.
pub fn min_right_singular<T: Real>(m: &CMatrix<T>) -> Result<NullVector<T>> {
    min_right_singular_with_gap(m, lit(DEFAULT_SINGULAR_GAP))
}

/// As [`min_right_singular`] with an explicit relative gap threshold.
pub fn min_right_singular_with_gap<T: Real>(m: &CMatrix<T>, gap: T) -> Result<NullVector<T>> {
    let (rows, cols) = m.shape();
    if rows < cols || cols == 0 {
        return Err(Error::DimensionMismatch(format!(
            "homogeneous least squares needs rows >= cols >= 1, got {rows}x{cols}"
        )));
    }
    let reduced = if rows > cols { qr_r(m)? } else { m.clone() };
    let dec = svd(&reduced)?;
    let s = &dec.singular;
    let sigma_min = s[cols - 1];
    let sigma_next = if cols >= 2 { s[cols - 2] } else { T::infinity() };
    let sigma_max = s[0];
    if cols >= 2 && (sigma_next - sigma_min) <= gap * sigma_max {
        return Err(Error::RankDegenerate {
            sigma_min: sigma_min.to_f64().unwrap_or(f64::NAN),
            sigma_next: sigma_next.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(NullVector {
        vector: dec.v.col(cols - 1).phase_canonicalized(),
        sigma_min,
        sigma_next,
        sigma_max,
    })
}

/// Closest isometry (orthonormal columns) to `a` in Frobenius norm, and the
/// Frobenius distance to it.
pub fn polar_isometry<T: Real>(a: &CMatrix<T>) -> Result<(CMatrix<T>, T)> {
    let dec = svd(a)?;
    let q = &dec.u * &dec.v.adjoint();
    let dist = (a - &q).frobenius_norm();
    Ok((q, dist))
}

// --- serialization: complex numbers as [re, im] -----------------------------

pub(crate) fn complex_to_pair<T: Real>(z: &Complex<T>) -> [T; 2] {
    [z.re, z.im]
}

pub(crate) fn pair_to_complex<T: Real>(p: [T; 2]) -> Complex<T> {
    Complex::new(p[0], p[1])
}

/// Serde adapter for a single complex number as `[re, im]`.
pub mod complex_pair {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(z: &Complex<T>, s: S) -> std::result::Result<S::Ok, S::Error> {
        complex_to_pair(z).serialize(s)
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> std::result::Result<Complex<T>, D::Error> {
        let z = pair_to_complex(<[T; 2]>::deserialize(d)?);
        if is_finite(z) {
            Ok(z)
        } else {
            Err(D::Error::custom("non-finite complex number"))
        }
    }
}

impl<T: Real> Serialize for CVector<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[T; 2]> = self.0.iter().map(complex_to_pair).collect();
        pairs.serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for CVector<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[T; 2]>::deserialize(d)?;
        let v = CVector(pairs.into_iter().map(pair_to_complex).collect());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(D::Error::custom("non-finite vector entry"))
        }
    }
}

impl<T: Real> Serialize for CMatrix<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[T; 2]>> = self
            .to_rows()
            .iter()
            .map(|r| r.iter().map(complex_to_pair).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for CMatrix<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<[T; 2]>>::deserialize(d)?;
        let m = CMatrix::from_rows(
            rows.into_iter()
                .map(|r| r.into_iter().map(pair_to_complex).collect())
                .collect(),
        )
        .map_err(D::Error::custom)?;
        if m.is_finite() {
            Ok(m)
        } else {
            Err(D::Error::custom("non-finite matrix entry"))
        }
    }
}
