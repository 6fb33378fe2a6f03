//! Holomorphic automorphisms of `D_{n,m}(mu)`.
//!
//! The group is generated by unitary rotations of `z`, unitary rotations of
//! `w`, and the twisted translations
//!
//! ```text
//! phi_v(z, w) = (z + v, exp(-mu <z, v> - mu/2 |v|^2) w).
//! ```
//!
//! Every element is stored in the normal form `phi_U . phi_W . phi_v`
//! (translation innermost), which acts as
//!
//! ```text
//! (z, w) -> (U (z + v), W exp(-mu <z, v> - mu/2 |v|^2) w).
//! ```
//!
//! Composing two normal forms produces a leftover unit-modulus scalar on the
//! `w` factor: with `u = U_h^H v_g`, the exponents differ from the normal
//! form exponent of `v_h + u` by `-i mu Im <v_h, u>`.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calg::{CMatrix, CVector};
use crate::domain::{classify, DomainParams, DomainPoint, Membership};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// An automorphism of `D_{n,m}(mu)` in normal form.
#[derive(Debug, Clone, PartialEq)]
pub struct FbhAut<T: Real> {
    params: DomainParams<T>,
    u: CMatrix<T>,
    w: CMatrix<T>,
    v: CVector<T>,
}

impl<T: Real> FbhAut<T> {
    /// Builds `(U, W, v)`; `U` and `W` must be unitary to the algebraic
    /// tolerance.
    pub fn new(params: DomainParams<T>, u: CMatrix<T>, w: CMatrix<T>, v: CVector<T>) -> Result<Self> {
        if u.shape() != (params.n, params.n) || w.shape() != (params.m, params.m) || v.len() != params.n {
            return Err(Error::DimensionMismatch(format!(
                "automorphism parts U {:?}, W {:?}, v {} do not fit D_{{{},{}}}",
                u.shape(),
                w.shape(),
                v.len(),
                params.n,
                params.m
            )));
        }
        u.validate("U")?;
        w.validate("W")?;
        v.validate("v")?;
        let tol = lit::<T>(T::ALGEBRAIC_TOL);
        for m in [&u, &w] {
            let r = m.isometry_residual();
            if !(r < tol) {
                return Err(Error::NotUnitary {
                    residual: r.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self { params, u, w, v })
    }

    pub fn identity(params: DomainParams<T>) -> Self {
        Self {
            params,
            u: CMatrix::identity(params.n),
            w: CMatrix::identity(params.m),
            v: CVector::zeros(params.n),
        }
    }

    /// `phi_U : (z, w) -> (U z, w)`.
    pub fn unitary_z(params: DomainParams<T>, u: CMatrix<T>) -> Result<Self> {
        Self::new(params, u, CMatrix::identity(params.m), CVector::zeros(params.n))
    }

    /// `phi_W : (z, w) -> (z, W w)`.
    pub fn unitary_w(params: DomainParams<T>, w: CMatrix<T>) -> Result<Self> {
        Self::new(params, CMatrix::identity(params.n), w, CVector::zeros(params.n))
    }

    /// Scalar phase rotation `w -> e^{i theta} w` (any `m`).
    pub fn phase(params: DomainParams<T>, theta: T) -> Self {
        let mut g = Self::identity(params);
        g.w = CMatrix::identity(params.m).scale(Complex::from_polar(T::one(), theta));
        g
    }

    /// Twisted translation `phi_v`.
    pub fn translation(params: DomainParams<T>, v: CVector<T>) -> Result<Self> {
        Self::new(params, CMatrix::identity(params.n), CMatrix::identity(params.m), v)
    }

    /// Random element: Haar unitaries and a standard complex Gaussian `v`.
    pub fn random(params: DomainParams<T>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = CMatrix::random_unitary(params.n, &mut rng);
        let w = CMatrix::random_unitary(params.m, &mut rng);
        let v = CVector::gaussian(params.n, &mut rng);
        Self { params, u, w, v }
    }

    pub fn params(&self) -> &DomainParams<T> {
        &self.params
    }

    pub fn u(&self) -> &CMatrix<T> {
        &self.u
    }

    pub fn w(&self) -> &CMatrix<T> {
        &self.w
    }

    pub fn v(&self) -> &CVector<T> {
        &self.v
    }

    /// The scalar `exp(-mu <z, v> - mu/2 |v|^2)` multiplying `w`.
    pub fn twist(&self, z: &CVector<T>) -> Complex<T> {
        let mu = self.params.mu;
        let half = lit::<T>(0.5);
        (-(z.dot(&self.v) * mu) - Complex::new(mu * half * self.v.norm_sqr(), T::zero())).exp()
    }

    pub fn apply(&self, p: &DomainPoint<T>) -> Result<DomainPoint<T>> {
        if p.z.len() != self.params.n || p.w.len() != self.params.m {
            return Err(Error::DimensionMismatch(format!(
                "point ({}, {}) for automorphism of D_{{{},{}}}",
                p.z.len(),
                p.w.len(),
                self.params.n,
                self.params.m
            )));
        }
        let z = &self.u * &(&p.z + &self.v);
        let w = (&self.w * &p.w).scale(self.twist(&p.z));
        Ok(DomainPoint::new(z, w))
    }

    /// `self . other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.params != other.params {
            return Err(Error::ParameterMismatch(format!(
                "cannot compose automorphisms of {:?} and {:?}",
                self.params, other.params
            )));
        }
        let u_shift = &other.u.adjoint() * &self.v;
        let phase = Complex::new(T::zero(), -self.params.mu * other.v.dot(&u_shift).im).exp();
        Ok(Self {
            params: self.params,
            u: &self.u * &other.u,
            w: (&self.w * &other.w).scale(phase),
            v: &other.v + &u_shift,
        })
    }

    /// Group inverse `(U^H, W^H, -U v)`; the twist phases cancel exactly.
    pub fn inverse(&self) -> Self {
        Self {
            params: self.params,
            u: self.u.adjoint(),
            w: self.w.adjoint(),
            v: -&(&self.u * &self.v),
        }
    }

    /// Largest field-wise difference to `other`.
    pub fn max_field_diff(&self, other: &Self) -> T {
        self.u
            .max_abs_diff(&other.u)
            .max(self.w.max_abs_diff(&other.w))
            .max(self.v.max_abs_diff(&other.v))
    }

    /// Largest unitarity residual of the `U` and `W` parts.
    pub fn unitarity_residual(&self) -> T {
        self.u.isometry_residual().max(self.w.isometry_residual())
    }

    /// Jacobian `d(z', w') / d(z, w)` at `p`, shape `(n+m) x (n+m)`.
    pub fn jacobian(&self, p: &DomainPoint<T>) -> Result<CMatrix<T>> {
        let (n, m) = (self.params.n, self.params.m);
        if p.z.len() != n || p.w.len() != m {
            return Err(Error::DimensionMismatch("jacobian point dimensions".into()));
        }
        let mut jac = CMatrix::zeros(n + m, n + m);
        jac.set_block(0, 0, &self.u);
        let t = self.twist(&p.z);
        let ww = &self.w * &p.w;
        let mu = self.params.mu;
        for a in 0..m {
            for j in 0..n {
                jac[(n + a, j)] = ww[a] * t * self.v[j].conj() * (-mu);
            }
            for b in 0..m {
                jac[(n + a, n + b)] = self.w[(a, b)] * t;
            }
        }
        Ok(jac)
    }

    /// Automorphism of `D_{n,1}(mu)` sending the boundary point `q` to the
    /// base point `P = (0, ..., 0, 1)`: translate by `-z_q`, then undo the
    /// phase of the transported `w`.
    pub fn to_base(params: DomainParams<T>, q: &DomainPoint<T>) -> Result<Self> {
        Self::to_base_with_tol(params, q, lit(T::BOUNDARY_TOL))
    }

    pub fn to_base_with_tol(params: DomainParams<T>, q: &DomainPoint<T>, tol: T) -> Result<Self> {
        if params.m != 1 {
            return Err(Error::InvalidParameter(format!(
                "boundary transport is implemented for m = 1 only, got m = {}",
                params.m
            )));
        }
        if classify(&params, q, tol)? != Membership::Boundary {
            let value = crate::domain::fbh_defining(&params, q)?;
            return Err(Error::NotOnBoundary {
                value: value.to_f64().unwrap_or(f64::NAN),
            });
        }
        let shift = Self::translation(params, -&q.z)?;
        let moved = shift.apply(q)?.w[0];
        let modulus = moved.norm();
        let rot = CMatrix::from_diag(&[moved.conj() / modulus]);
        let rotate = Self::unitary_w(params, rot)?;
        rotate.compose(&shift)
    }
}

/// Wire form `{"U": matrix, "W": matrix, "v": vector}`; `mu` comes from
/// context.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct FbhAutJson<T: Real> {
    #[serde(rename = "U")]
    pub u: CMatrix<T>,
    #[serde(rename = "W")]
    pub w: CMatrix<T>,
    pub v: CVector<T>,
}

impl<T: Real> FbhAutJson<T> {
    pub fn into_aut(self, mu: T) -> Result<FbhAut<T>> {
        let params = DomainParams::new(self.u.rows(), self.w.rows(), mu)?;
        FbhAut::new(params, self.u, self.w, self.v)
    }
}

impl<T: Real> From<&FbhAut<T>> for FbhAutJson<T> {
    fn from(g: &FbhAut<T>) -> Self {
        Self {
            u: g.u.clone(),
            w: g.w.clone(),
            v: g.v.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{fbh_defining, sample_boundary, sample_interior};
    use crate::scalar::c;

    fn params(n: usize, mu: f64) -> DomainParams<f64> {
        DomainParams::new(n, 1, mu).unwrap()
    }

    /// Independent evaluation of the generator formulas, one generator at a
    /// time, used as the oracle for the normal-form algebra.
    fn apply_translation(mu: f64, v: &CVector<f64>, p: &DomainPoint<f64>) -> DomainPoint<f64> {
        let e = -(p.z.dot(v) * mu) - c(mu / 2.0 * v.norm_sqr(), 0.0);
        DomainPoint::new(&p.z + v, p.w.scale(e.exp()))
    }

    #[test]
    fn identity_acts_trivially() {
        let p = params(3, 1.0);
        let g = FbhAut::identity(p);
        for q in sample_interior(&p, 1, 10) {
            assert_eq!(g.apply(&q).unwrap(), q);
        }
    }

    #[test]
    fn moves_boundary_point_to_base() {
        let mu: f64 = 1.3;
        let p = params(2, mu);
        let z0: CVector<f64> = CVector::new(vec![c(0.3, -0.2), c(-0.1, 0.5)]);
        let theta0 = 0.7;
        let w0 = Complex::from_polar((-mu * z0.norm_sqr() / 2.0).exp(), theta0);
        let q = DomainPoint::with_scalar_w(z0.clone(), w0);
        assert!(fbh_defining(&p, &q).unwrap().abs() < 1e-15);

        let rot = CMatrix::from_diag(&[Complex::from_polar(1.0, -theta0)]);
        let g = FbhAut::new(p, CMatrix::identity(2), rot, -&z0).unwrap();
        let img = g.apply(&q).unwrap();
        assert!(img.max_abs_diff(&p.base_point()) < 1e-14);
    }

    #[test]
    fn rotation_preserves_defining_value() {
        let p = params(2, 0.5);
        let u = CMatrix::from_diag(&[Complex::from_polar(1.0, 0.4), Complex::from_polar(1.0, -1.1)]);
        let g = FbhAut::unitary_z(p, u.clone()).unwrap();
        for q in sample_interior(&p, 3, 20) {
            let img = g.apply(&q).unwrap();
            assert!(img.z.max_abs_diff(&(&u * &q.z)) < 1e-15);
            assert_eq!(img.w, q.w);
            let d = fbh_defining(&p, &img).unwrap() - fbh_defining(&p, &q).unwrap();
            assert!(d.abs() < 1e-15);
        }
    }

    #[test]
    fn compose_translations_matches_sequential_evaluation() {
        let p = params(3, 2.0);
        let v1 = CVector::new(vec![c(0.2, 0.1), c(-0.4, 0.3), c(0.0, -0.6)]);
        let v2 = CVector::new(vec![c(-0.5, 0.2), c(0.1, 0.1), c(0.7, 0.0)]);
        let g = FbhAut::translation(p, v1.clone()).unwrap();
        let h = FbhAut::translation(p, v2.clone()).unwrap();
        let gh = g.compose(&h).unwrap();
        assert!(gh.v().max_abs_diff(&(&v1 + &v2)) < 1e-15);
        assert!((gh.w()[(0, 0)].norm() - 1.0).abs() < 1e-15);
        for q in sample_interior(&p, 5, 100) {
            let seq = apply_translation(2.0, &v1, &apply_translation(2.0, &v2, &q));
            assert!(gh.apply(&q).unwrap().max_abs_diff(&seq) < 1e-10);
        }
    }

    #[test]
    fn compose_unitary_after_translation() {
        let p = params(2, 1.0);
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(4);
        let u = CMatrix::random_unitary(2, &mut rng);
        let v = CVector::new(vec![c(0.3, 0.0), c(0.0, -0.2)]);
        let g = FbhAut::unitary_z(p, u.clone()).unwrap();
        let h = FbhAut::translation(p, v.clone()).unwrap();
        let gh = g.compose(&h).unwrap();
        assert!(gh.v().max_abs_diff(&v) < 1e-15);
        assert!(gh.u().max_abs_diff(&u) < 1e-15);
        for q in sample_interior(&p, 6, 100) {
            let t = apply_translation(1.0, &v, &q);
            let seq = DomainPoint::new(&u * &t.z, t.w);
            assert!(gh.apply(&q).unwrap().max_abs_diff(&seq) < 1e-10);
        }
    }

    #[test]
    fn compose_with_identity() {
        let p = params(4, 1.0);
        let g = FbhAut::random(p, 9);
        let id = FbhAut::identity(p);
        assert!(g.compose(&id).unwrap().max_field_diff(&g) < 1e-12);
        assert!(id.compose(&g).unwrap().max_field_diff(&g) < 1e-12);
    }

    #[test]
    fn inverse_examples() {
        let p = params(3, 1.0);
        let id = FbhAut::identity(p);
        assert_eq!(id.inverse(), id);

        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(8);
        let u = CMatrix::random_unitary(3, &mut rng);
        let gu = FbhAut::unitary_z(p, u.clone()).unwrap();
        assert!(gu.inverse().u().max_abs_diff(&u.adjoint()) < 1e-15);

        let v = CVector::gaussian(3, &mut rng);
        let t = FbhAut::translation(p, v).unwrap();
        let ti = t.inverse();
        for q in sample_interior(&p, 10, 100) {
            let back = ti.apply(&t.apply(&q).unwrap()).unwrap();
            assert!(back.max_abs_diff(&q) < 1e-10);
        }
        assert!(t.compose(&ti).unwrap().max_field_diff(&id) < 1e-10);
    }

    #[test]
    fn compose_rejects_mismatched_params() {
        let g = FbhAut::identity(params(2, 1.0));
        let h = FbhAut::identity(params(2, 2.0));
        assert!(matches!(g.compose(&h), Err(Error::ParameterMismatch(_))));
    }

    #[test]
    fn to_base_examples() {
        let p = params(2, 1.0);
        let base = p.base_point();
        let g = FbhAut::to_base(p, &base).unwrap();
        assert!(g.apply(&base).unwrap().max_abs_diff(&base) < 1e-15);

        let q = DomainPoint::with_scalar_w(CVector::zeros(2), Complex::from_polar(1.0, std::f64::consts::FRAC_PI_3));
        let g = FbhAut::to_base(p, &q).unwrap();
        assert!((g.w()[(0, 0)] - Complex::from_polar(1.0, -std::f64::consts::FRAC_PI_3)).norm() < 1e-15);
        assert!(g.apply(&q).unwrap().max_abs_diff(&base) < 1e-15);

        for q in sample_boundary(&p, 12, 50) {
            let g = FbhAut::to_base(p, &q).unwrap();
            assert!(g.apply(&q).unwrap().max_abs_diff(&base) < 1e-10);
            assert!(g.inverse().apply(&base).unwrap().max_abs_diff(&q) < 1e-10);
        }
    }

    #[test]
    fn to_base_errors() {
        let p = params(1, 1.0);
        let inner = DomainPoint::with_scalar_w(CVector::zeros(1), c(0.5, 0.0));
        assert!(matches!(FbhAut::to_base(p, &inner), Err(Error::NotOnBoundary { .. })));
        let p2 = DomainParams::new(1, 2, 1.0).unwrap();
        let q = p2.base_point();
        assert!(matches!(FbhAut::to_base(p2, &q), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn random_is_valid_and_reproducible() {
        let p = DomainParams::<f64>::new(4, 2, 0.5).unwrap();
        let g = FbhAut::random(p, 77);
        assert!(g.unitarity_residual() < 1e-10);
        assert_eq!(g, FbhAut::random(p, 77));
        for q in sample_boundary(&p, 1, 200) {
            assert!(fbh_defining(&p, &g.apply(&q).unwrap()).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn new_rejects_non_unitary() {
        let p = params(2, 1.0);
        let bad = CMatrix::from_real_rows(&[&[1.0, 0.1], &[0.0, 1.0]]);
        assert!(FbhAut::unitary_z(p, bad).is_err());
        assert!(FbhAut::translation(p, CVector::zeros(3)).is_err());
    }

    #[test]
    fn json_roundtrip_through_wire_form() {
        let p = params(2, 1.5);
        let g = FbhAut::random(p, 1);
        let s = serde_json::to_string(&FbhAutJson::from(&g)).unwrap();
        assert!(s.starts_with(r#"{"U":"#));
        let back = serde_json::from_str::<FbhAutJson<f64>>(&s).unwrap().into_aut(1.5).unwrap();
        assert_eq!(back, g);
    }
}
