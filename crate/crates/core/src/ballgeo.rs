//! Ball automorphisms as projective actions of matrices preserving the form
//! `|x_0|^2 - |x_1|^2 - ... - |x_d|^2`, the canonical shape of those fixing
//! `Q = (0, ..., 0, 1)`, and fitting such a matrix to sampled point pairs.
//!
//! A point `x` of `B^d` is lifted to `[1, x]`, multiplied, and
//! dehomogenized. Matrices may be rectangular, `(d_out + 1) x (d_in + 1)`
//! with `d_out >= d_in`, which covers linear embeddings `B^{d_in} -> B^{d_out}`.

use num_complex::Complex;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calg::{
    complex_pair, min_right_singular_with_gap, polar_isometry, CMatrix, CVector, HermitianSignature,
    DEFAULT_SINGULAR_GAP,
};
use crate::domain::unit_sphere;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Smallest admissible homogeneous denominator in [`ProjectiveAut::act`].
const DENOMINATOR_FLOOR: f64 = 1e-14;

fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn default_h_tol<T: Real>() -> T {
    lit(T::ALGEBRAIC_TOL * 10.0)
}

/// `T^H J_out T` and the positive constant `c` with `T^H J_out T ~ c J_in`.
fn h_gram<T: Real>(m: &CMatrix<T>) -> (CMatrix<T>, T) {
    let (rows, cols) = m.shape();
    let j_out = HermitianSignature::ball(rows - 1).matrix::<T>();
    let j_in = HermitianSignature::ball(cols - 1).matrix::<T>();
    let g = &(&m.adjoint() * &j_out) * m;
    let c = (&j_in * &g).trace().re / lit(cols as f64);
    (g, c)
}

/// Projective transformation of the closed ball.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveAut<T> {
    m: CMatrix<T>,
}

impl<T: Real> ProjectiveAut<T> {
    /// Validates `M^H J M = c J` with `c > 0` at the default tolerance.
    pub fn new(m: CMatrix<T>) -> Result<Self> {
        Self::new_with_tol(m, default_h_tol())
    }

    pub fn new_with_tol(m: CMatrix<T>, tol: T) -> Result<Self> {
        let (rows, cols) = m.shape();
        if cols < 2 || rows < cols {
            return Err(Error::DimensionMismatch(format!(
                "projective matrix must be (d_out+1)x(d_in+1) with d_out >= d_in >= 1, got {rows}x{cols}"
            )));
        }
        m.validate("projective matrix")?;
        let t = Self { m };
        let r = t.h_residual();
        if r.is_nan() || r >= tol {
            return Err(Error::NotBallAut { residual: to_f64(r) });
        }
        Ok(t)
    }

    pub fn identity(d: usize) -> Self {
        Self { m: CMatrix::identity(d + 1) }
    }

    /// The matrix as constructed.
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.m
    }

    /// Canonical representative: Frobenius norm `sqrt(d_in + 1)` and the
    /// largest-modulus entry real positive.
    pub fn normalized(&self) -> CMatrix<T> {
        let (rows, cols) = self.m.shape();
        let flat = CVector::new(self.m.to_rows().concat()).phase_canonicalized();
        let s = lit::<T>(cols as f64).sqrt() / flat.norm();
        let flat = flat.scale_real(s);
        CMatrix::from_fn(rows, cols, |i, j| flat[i * cols + j])
    }

    pub fn dim_in(&self) -> usize {
        self.m.cols() - 1
    }

    pub fn dim_out(&self) -> usize {
        self.m.rows() - 1
    }

    pub fn is_square(&self) -> bool {
        self.m.is_square()
    }

    /// The positive constant `c` in `M^H J M = c J`.
    pub fn h_scale(&self) -> T {
        h_gram(&self.m).1
    }

    /// `max |M^H J M / c - J|`; `inf` when `c <= 0`.
    pub fn h_residual(&self) -> T {
        let (g, c) = h_gram(&self.m);
        if !(c > T::zero()) {
            return T::infinity();
        }
        let j_in = HermitianSignature::ball(self.dim_in()).matrix::<T>();
        g.scale_real(T::one() / c).max_abs_diff(&j_in)
    }

    /// Representative with `M^H J M = J`.
    pub fn unimodular(&self) -> CMatrix<T> {
        self.m.scale_real(T::one() / self.h_scale().sqrt())
    }

    /// Image of `x` under the projective action.
    pub fn act(&self, x: &CVector<T>) -> Result<CVector<T>> {
        if x.len() != self.dim_in() {
            return Err(Error::DimensionMismatch(format!(
                "point of length {} for a transform of B^{}",
                x.len(),
                self.dim_in()
            )));
        }
        let h = CVector::new(vec![Complex::<T>::one()]).concat(x);
        let y = &self.m * &h;
        // Compare against the scale of the matrix so the check is projective.
        let floor = lit::<T>(DENOMINATOR_FLOOR) * self.m.max_abs();
        if !(y[0].norm() > floor) {
            return Err(Error::InvalidTransform);
        }
        let out = y.slice(1, y.len()).scale(Complex::<T>::one() / y[0]);
        if !out.is_finite() {
            return Err(Error::InvalidTransform);
        }
        Ok(out)
    }

    /// `self o other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        Ok(Self { m: self.m.checked_mul(&other.m)? })
    }

    /// Inverse of a square transform, `J M^H J / c`.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("only square transforms are invertible".into()));
        }
        let j = HermitianSignature::ball(self.dim_in()).matrix::<T>();
        let inv = &(&j * &self.m.adjoint()) * &j;
        Ok(Self { m: inv.scale_real(T::one() / self.h_scale()) })
    }

    /// `|act(Q) - Q|` in max norm.
    pub fn base_residual(&self) -> Result<T> {
        let q_in = CVector::basis(self.dim_in(), self.dim_in() - 1);
        let q_out = CVector::basis(self.dim_out(), self.dim_out() - 1);
        Ok(self.act(&q_in)?.max_abs_diff(&q_out))
    }

    /// Pointwise action distance to `other` on the given points.
    pub fn action_distance(&self, other: &Self, points: &[CVector<T>]) -> Result<T> {
        let mut worst = T::zero();
        for x in points {
            worst = worst.max(self.act(x)?.max_abs_diff(&other.act(x)?));
        }
        Ok(worst)
    }
}

/// Wire form `{"M": matrix}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct ProjectiveAutJson<T: Real> {
    #[serde(rename = "M")]
    pub m: CMatrix<T>,
}

impl<T: Real> From<&ProjectiveAut<T>> for ProjectiveAutJson<T> {
    fn from(t: &ProjectiveAut<T>) -> Self {
        Self { m: t.m.clone() }
    }
}

impl<T: Real> TryFrom<ProjectiveAutJson<T>> for ProjectiveAut<T> {
    type Error = Error;
    fn try_from(j: ProjectiveAutJson<T>) -> Result<Self> {
        ProjectiveAut::new(j.m)
    }
}

/// The disc automorphism `z_1 -> (z_1 + alpha) / (1 + conj(alpha) z_1)`
/// extended to `B^d`.
pub fn psi_alpha<T: Real>(alpha: Complex<T>, d: usize) -> Result<ProjectiveAut<T>> {
    if d == 0 {
        return Err(Error::InvalidParameter("ball dimension must be positive".into()));
    }
    if !(alpha.norm() < T::one()) {
        return Err(Error::InvalidParameter(format!("|alpha| must be < 1, got {}", alpha.norm())));
    }
    let beta = (T::one() - alpha.norm_sqr()).sqrt();
    let mut m = CMatrix::identity(d + 1);
    let ib = Complex::new(T::one() / beta, T::zero());
    m[(0, 0)] = ib;
    m[(0, 1)] = alpha.conj() / beta;
    m[(1, 0)] = alpha / beta;
    m[(1, 1)] = ib;
    Ok(ProjectiveAut { m })
}

/// Parameters `(A, a_0, a, lambda)` of a transform fixing `Q`, with
/// `M ~ diag(1, A, 1) V` and
///
/// ```text
///     | a_0             lambda conj(a)   lambda - a_0            |
/// V = | a               I                -a                      |
///     | 1/lambda + a_0  lambda conj(a)   lambda - 1/lambda - a_0 |
/// ```
///
/// `A` is `N x n` with orthonormal columns (`N = n` for automorphisms).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct CanonicalParams<T: Real> {
    #[serde(rename = "A")]
    pub a_mat: CMatrix<T>,
    #[serde(with = "complex_pair")]
    pub a0: Complex<T>,
    pub a: CVector<T>,
    #[serde(with = "complex_pair")]
    pub lambda: Complex<T>,
}

impl<T: Real> CanonicalParams<T> {
    /// `-1/lambda^2`; real positive for the transforms in the classification,
    /// where it equals the power `k`.
    pub fn kappa(&self) -> Complex<T> {
        -Complex::<T>::one() / (self.lambda * self.lambda)
    }

    /// `a_{n+1} = 1/lambda + a_0`.
    pub fn a_last(&self) -> Complex<T> {
        Complex::<T>::one() / self.lambda + self.a0
    }

    /// The `(n+2) x (n+2)` matrix `V`.
    pub fn v_matrix(&self) -> Result<CMatrix<T>> {
        if self.lambda.is_zero() {
            return Err(Error::InvalidParameter("lambda must be non-zero".into()));
        }
        let n = self.a.len();
        let l = self.lambda;
        let il = Complex::<T>::one() / l;
        let mut v = CMatrix::zeros(n + 2, n + 2);
        v[(0, 0)] = self.a0;
        v[(0, n + 1)] = l - self.a0;
        v[(n + 1, 0)] = il + self.a0;
        v[(n + 1, n + 1)] = l - il - self.a0;
        for i in 0..n {
            let b = l * self.a[i].conj();
            v[(0, i + 1)] = b;
            v[(n + 1, i + 1)] = b;
            v[(i + 1, 0)] = self.a[i];
            v[(i + 1, n + 1)] = -self.a[i];
            v[(i + 1, i + 1)] = Complex::<T>::one();
        }
        Ok(v)
    }
}

/// Reconstructs `diag(1, A, 1) V`.
pub fn from_canonical<T: Real>(p: &CanonicalParams<T>) -> Result<ProjectiveAut<T>> {
    let (rows, cols) = p.a_mat.shape();
    if cols != p.a.len() || rows < cols {
        return Err(Error::DimensionMismatch(format!(
            "A is {rows}x{cols} but a has length {}",
            p.a.len()
        )));
    }
    p.a_mat.validate("A")?;
    p.a.validate("a")?;
    let r = p.a_mat.isometry_residual();
    if !(r < lit(T::ALGEBRAIC_TOL * 100.0)) {
        return Err(Error::NotUnitary { residual: to_f64(r) });
    }
    let v = p.v_matrix()?;
    let n = cols;
    let big_n = rows;
    let mut d = CMatrix::zeros(big_n + 2, n + 2);
    d[(0, 0)] = Complex::<T>::one();
    d[(big_n + 1, n + 1)] = Complex::<T>::one();
    d.set_block(1, 1, &p.a_mat);
    let m = &d * &v;
    ProjectiveAut::new_with_tol(m, lit(T::ALGEBRAIC_TOL * 1e4))
}

/// Quantities reported alongside [`canonical_form`]; none of them is
/// asserted.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct CanonicalDiagnostics<T: Real> {
    /// The `(n+1, 0)` entry of `V`.
    #[serde(with = "complex_pair")]
    pub a_last: Complex<T>,
    /// `-1/lambda^2`.
    #[serde(with = "complex_pair")]
    pub kappa: Complex<T>,
    /// `|lambda (conj a_0 - conj a_{n+1}) + conj lambda (a_0 - a_{n+1}) - 2|`.
    pub relation_residual: T,
    /// `det V` by elimination (square part only).
    #[serde(with = "complex_pair")]
    pub det_v: Complex<T>,
    /// `lambda (a_{n+1} - a_0)`, fixed to 1 by the phase convention.
    #[serde(with = "complex_pair")]
    pub det_display: Complex<T>,
    pub re_lambda: T,
    /// `|2 lambda - 4 a_0 - 2 / lambda|`.
    pub dilation_constraint: T,
    /// Frobenius distance of the middle block to the nearest isometry.
    pub block_residual: T,
    /// Part of the middle rows outside the range of `A` (non-square input).
    pub complement_residual: T,
    /// Distance of `V` from the displayed shape rebuilt from `(a_0, a, lambda)`.
    pub shape_residual: T,
    /// Distance of the source action from [`from_canonical`] on the samples
    /// used for the check.
    pub action_residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct CanonicalForm<T: Real> {
    pub params: CanonicalParams<T>,
    pub diagnostics: CanonicalDiagnostics<T>,
}

/// Tolerances for [`canonical_form_with`].
#[derive(Debug, Clone, Copy)]
pub struct CanonicalOptions<T> {
    /// Bound on `|act(Q) - Q|`.
    pub fix_tol: T,
    /// Bound on the relative middle-block distance to an isometry.
    pub block_tol: T,
}

impl<T: Real> Default for CanonicalOptions<T> {
    fn default() -> Self {
        Self {
            fix_tol: lit(1e-9),
            block_tol: lit(1e-6),
        }
    }
}

pub fn canonical_form<T: Real>(t: &ProjectiveAut<T>) -> Result<CanonicalForm<T>> {
    canonical_form_with(t, CanonicalOptions::default())
}

/// Extracts `(A, a_0, a, lambda)` from a transform fixing `Q`.
///
/// The scalar ambiguity is fixed by `M^H J M = J` followed by the phase that
/// makes `lambda (a_{n+1} - a_0) = 1`; the remaining sign is the principal
/// square root. The identity lands on `lambda = a_0 = i`, `A = i I`.
pub fn canonical_form_with<T: Real>(t: &ProjectiveAut<T>, opts: CanonicalOptions<T>) -> Result<CanonicalForm<T>> {
    let fix = t.base_residual()?;
    if !(fix <= opts.fix_tol) {
        return Err(Error::DoesNotFixBase { residual: to_f64(fix) });
    }
    let n = t.dim_in() - 1;
    let big_n = t.dim_out() - 1;
    if n == 0 {
        return Err(Error::DimensionMismatch("canonical form needs a ball of dimension >= 2".into()));
    }
    let m = t.unimodular();
    let middle = m.block(1, 1, big_n, n);
    let (a0_mat, block_dist) = polar_isometry(&middle)?;
    let block_residual = block_dist / lit::<T>(n as f64).sqrt();
    if !(block_residual <= opts.block_tol) {
        return Err(Error::NotUnitary { residual: to_f64(block_residual) });
    }

    let mid_rows = m.block(1, 0, big_n, n + 2);
    let reduced = &a0_mat.adjoint() * &mid_rows;
    let complement_residual = (&mid_rows - &(&a0_mat * &reduced)).max_abs();
    let mut v = CMatrix::zeros(n + 2, n + 2);
    v.set_block(0, 0, &m.block(0, 0, 1, n + 2));
    v.set_block(1, 0, &reduced);
    v.set_block(n + 1, 0, &m.block(big_n + 1, 0, 1, n + 2));

    let lambda0 = v[(0, 0)] + v[(0, n + 1)];
    let delta = lambda0 * (v[(n + 1, 0)] - v[(0, 0)]);
    if delta.is_zero() || !crate::scalar::is_finite(delta) {
        return Err(Error::InvalidTransform);
    }
    let inv = Complex::<T>::one() / delta;
    // `+ 0` clears a negative zero so the principal root is taken
    let s = Complex::new(inv.re, inv.im + T::zero()).sqrt();
    for j in 0..n + 2 {
        v[(0, j)] = v[(0, j)] * s;
        v[(n + 1, j)] = v[(n + 1, j)] * s;
    }
    let a_mat = a0_mat.scale(s);
    let params = CanonicalParams {
        a_mat,
        a0: v[(0, 0)],
        a: v.col(0).slice(1, n + 1),
        lambda: v[(0, 0)] + v[(0, n + 1)],
    };
    let lambda = params.lambda;
    let a_last = v[(n + 1, 0)];
    let two = lit::<T>(2.0);
    let rel = lambda * (params.a0.conj() - a_last.conj()) + lambda.conj() * (params.a0 - a_last);
    let shape_residual = v.max_abs_diff(&params.v_matrix()?);
    let rebuilt = ProjectiveAut { m: {
        let mut d = CMatrix::zeros(big_n + 2, n + 2);
        d[(0, 0)] = Complex::<T>::one();
        d[(big_n + 1, n + 1)] = Complex::<T>::one();
        d.set_block(1, 1, &params.a_mat);
        &d * &params.v_matrix()?
    } };
    let probes = sample_sphere::<T>(n + 1, 0x51de, 32)
        .into_iter()
        .map(|x| x.scale_real(lit(0.9)))
        .collect::<Vec<_>>();
    let action_residual = t.action_distance(&rebuilt, &probes)?;
    let diagnostics = CanonicalDiagnostics {
        a_last,
        kappa: params.kappa(),
        relation_residual: (rel - Complex::new(two, T::zero())).norm(),
        det_v: v.determinant()?,
        det_display: lambda * (a_last - params.a0),
        re_lambda: lambda.re,
        dilation_constraint: (lambda.scale(two) - params.a0.scale(lit(4.0)) - Complex::new(two, T::zero()) / lambda)
            .norm(),
        block_residual,
        complement_residual,
        shape_residual,
        action_residual,
    };
    Ok(CanonicalForm { params, diagnostics })
}

/// Uniform points on the unit sphere of `C^d`; deterministic in `seed`.
pub fn sample_sphere<T: Real>(d: usize, seed: u64, count: usize) -> Vec<CVector<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| unit_sphere(d, &mut rng)).collect()
}

/// Tolerances for [`fit_projective`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions<T> {
    /// Bound on the H-unitarity residual of the fitted matrix.
    pub h_tol: T,
    /// Relative gap between the two smallest singular values.
    pub gap: T,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            h_tol: lit(1e-6),
            gap: lit(DEFAULT_SINGULAR_GAP),
        }
    }
}

/// Result of [`fit_projective`].
#[derive(Debug, Clone)]
pub struct FitReport<T> {
    pub transform: ProjectiveAut<T>,
    /// Smallest singular value of the constraint system (unit-norm solution).
    pub algebraic_residual: T,
    /// `max |act(T, x) - y|` over the pairs.
    pub action_residual: T,
    pub h_residual: T,
    pub sigma_next: T,
    pub sigma_max: T,
}

/// Minimum number of pairs accepted for the given dimensions.
pub fn min_pairs(d_in: usize, d_out: usize) -> usize {
    3 * (d_in + 1) * (d_out + 1)
}

/// Square fit `B^d -> B^d`.
pub fn fit_projective<T: Real>(pairs: &[(CVector<T>, CVector<T>)], d: usize) -> Result<FitReport<T>> {
    fit_projective_map(pairs, d, d, FitOptions::default())
}

/// Fits `T` with `[1, y] ~ T [1, x]` by stacking `y_i (row_0 . h) - row_i . h = 0`
/// and taking the minimal right singular vector.
pub fn fit_projective_map<T: Real>(
    pairs: &[(CVector<T>, CVector<T>)],
    d_in: usize,
    d_out: usize,
    opts: FitOptions<T>,
) -> Result<FitReport<T>> {
    if d_in == 0 || d_out < d_in {
        return Err(Error::DimensionMismatch(format!(
            "fit needs d_out >= d_in >= 1, got d_in = {d_in}, d_out = {d_out}"
        )));
    }
    let need = min_pairs(d_in, d_out);
    if pairs.len() < need {
        return Err(Error::InsufficientData(format!("{} pairs given, at least {need} needed", pairs.len())));
    }
    let (ri, ci) = (d_out + 1, d_in + 1);
    let mut sys = CMatrix::zeros(pairs.len() * d_out, ri * ci);
    for (p, (x, y)) in pairs.iter().enumerate() {
        if x.len() != d_in || y.len() != d_out {
            return Err(Error::DimensionMismatch(format!(
                "pair {p} has lengths ({}, {}), expected ({d_in}, {d_out})",
                x.len(),
                y.len()
            )));
        }
        x.validate("fit source point")?;
        y.validate("fit target point")?;
        let h = CVector::new(vec![Complex::<T>::one()]).concat(x);
        for i in 1..=d_out {
            let row = p * d_out + (i - 1);
            for j in 0..ci {
                sys[(row, j)] = y[i - 1] * h[j];
                sys[(row, i * ci + j)] = -h[j];
            }
        }
    }
    let nv = min_right_singular_with_gap(&sys, opts.gap)?;
    let m = CMatrix::from_fn(ri, ci, |i, j| nv.vector[i * ci + j]);
    let raw = ProjectiveAut { m };
    let h_residual = raw.h_residual();
    if !(h_residual <= opts.h_tol) {
        return Err(Error::NotBallAut { residual: to_f64(h_residual) });
    }
    let mut action_residual = T::zero();
    for (x, y) in pairs {
        action_residual = action_residual.max(raw.act(x)?.max_abs_diff(y));
    }
    Ok(FitReport {
        transform: raw,
        algebraic_residual: nv.sigma_min,
        action_residual,
        h_residual,
        sigma_next: nv.sigma_next,
        sigma_max: nv.sigma_max,
    })
}
