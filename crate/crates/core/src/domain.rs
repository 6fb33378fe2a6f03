//! Defining functions of the Fock-Bargmann-Hartogs domain `D_{n,m}(mu)`,
//! the Siegel upper half-space and the unit ball, plus boundary sampling.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calg::CVector;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Dimensions `(n, m)` and Fock weight `mu` of `{ |w|^2 < exp(-mu |z|^2) }`
/// in `C^n x C^m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<T>", bound = "T: Real")]
pub struct DomainParams<T> {
    pub n: usize,
    pub m: usize,
    pub mu: T,
}

#[derive(Deserialize)]
#[serde(bound = "T: Real")]
struct RawParams<T> {
    n: usize,
    m: usize,
    mu: T,
}

impl<T: Real> TryFrom<RawParams<T>> for DomainParams<T> {
    type Error = Error;
    fn try_from(raw: RawParams<T>) -> Result<Self> {
        DomainParams::new(raw.n, raw.m, raw.mu)
    }
}

impl<T: Real> DomainParams<T> {
    pub fn new(n: usize, m: usize, mu: T) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter(format!(
                "domain dimensions must be positive, got n = {n}, m = {m}"
            )));
        }
        if !(mu > T::zero()) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be positive and finite, got {mu}")));
        }
        Ok(Self { n, m, mu })
    }

    /// `D_{n,1}(mu)`, the case the classification is about.
    pub fn hartogs(n: usize, mu: T) -> Result<Self> {
        Self::new(n, 1, mu)
    }

    /// The base boundary point `P = (0, ..., 0, 1)` (first unit vector in `w`).
    pub fn base_point(&self) -> DomainPoint<T> {
        DomainPoint::new(CVector::zeros(self.n), CVector::basis(self.m, 0))
    }

    fn check(&self, p: &DomainPoint<T>) -> Result<()> {
        if p.z.len() != self.n || p.w.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "point has (|z|, |w|) = ({}, {}) but the domain is D_{{{},{}}}",
                p.z.len(),
                p.w.len(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }
}

/// A point `(z, w)` of `C^n x C^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DomainPoint<T: Real> {
    pub z: CVector<T>,
    pub w: CVector<T>,
}

impl<T: Real> DomainPoint<T> {
    pub fn new(z: CVector<T>, w: CVector<T>) -> Self {
        Self { z, w }
    }

    /// Point of `C^n x C` with scalar `w`.
    pub fn with_scalar_w(z: CVector<T>, w: Complex<T>) -> Self {
        Self { z, w: CVector::new(vec![w]) }
    }

    pub fn is_finite(&self) -> bool {
        self.z.is_finite() && self.w.is_finite()
    }

    /// Max-norm distance over all coordinates.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.z.max_abs_diff(&other.z).max(self.w.max_abs_diff(&other.w))
    }

    /// All coordinates as one vector `(z, w)`.
    pub fn coords(&self) -> CVector<T> {
        self.z.concat(&self.w)
    }

    pub fn from_coords(coords: &CVector<T>, n: usize) -> Self {
        Self::new(coords.slice(0, n), coords.slice(n, coords.len()))
    }
}

/// Position of a point relative to a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Interior,
    Boundary,
    Exterior,
}

/// `r(z, w) = |w|^2 - exp(-mu |z|^2)`; negative inside, zero on the boundary.
pub fn fbh_defining<T: Real>(params: &DomainParams<T>, p: &DomainPoint<T>) -> Result<T> {
    params.check(p)?;
    Ok(p.w.norm_sqr() - (-params.mu * p.z.norm_sqr()).exp())
}

/// Classifies `p`; "boundary" means `|r| < tol`.
pub fn classify<T: Real>(params: &DomainParams<T>, p: &DomainPoint<T>, tol: T) -> Result<Membership> {
    let r = fbh_defining(params, p)?;
    Ok(if r.abs() < tol {
        Membership::Boundary
    } else if r < T::zero() {
        Membership::Interior
    } else {
        Membership::Exterior
    })
}

/// [`classify`] with the default boundary band.
pub fn classify_default<T: Real>(params: &DomainParams<T>, p: &DomainPoint<T>) -> Result<Membership> {
    classify(params, p, lit(T::BOUNDARY_TOL))
}

/// Boundary points: `z` standard complex Gaussian (`E|z_i|^2 = 1`), `w`
/// uniform on the sphere of radius `exp(-mu |z|^2 / 2)`. Deterministic in
/// `seed`.
pub fn sample_boundary<T: Real>(params: &DomainParams<T>, seed: u64, count: usize) -> Vec<DomainPoint<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| boundary_point(params, &mut rng, T::one())).collect()
}

/// Interior points: `z` as in [`sample_boundary`], `w` uniform in the ball of
/// radius `exp(-mu |z|^2 / 2)`.
pub fn sample_interior<T: Real>(params: &DomainParams<T>, seed: u64, count: usize) -> Vec<DomainPoint<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            // Radial law of the uniform distribution in a real 2m-ball, kept
            // strictly inside.
            let rho = lit::<T>(u.powf(1.0 / (2.0 * params.m as f64)) * 0.999);
            boundary_point(params, &mut rng, rho)
        })
        .collect()
}

fn boundary_point<T: Real, R: Rng + ?Sized>(params: &DomainParams<T>, rng: &mut R, rho: T) -> DomainPoint<T> {
    let z = CVector::gaussian(params.n, rng);
    let dir = unit_sphere(params.m, rng);
    let radius = (-params.mu * z.norm_sqr() / lit(2.0)).exp();
    DomainPoint::new(z, dir.scale_real(radius * rho))
}

/// Uniform point on the unit sphere of `C^m`.
pub(crate) fn unit_sphere<T: Real, R: Rng + ?Sized>(m: usize, rng: &mut R) -> CVector<T> {
    loop {
        let g: CVector<T> = (0..m)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(lit(re), lit(im))
            })
            .collect();
        let nrm = g.norm();
        if nrm > T::zero() {
            return g.scale_real(T::one() / nrm);
        }
    }
}

/// `Im W - |z|^2`; positive inside the Siegel upper half-space.
pub fn siegel_defining<T: Real>(z: &CVector<T>, big_w: Complex<T>) -> T {
    big_w.im - z.norm_sqr()
}

/// `|x|^2 - 1`; negative inside the unit ball.
pub fn ball_defining<T: Real>(x: &CVector<T>) -> T {
    x.norm_sqr() - T::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;

    fn params(n: usize) -> DomainParams<f64> {
        DomainParams::new(n, 1, 1.0).unwrap()
    }

    fn pt(z: &[f64], w: f64) -> DomainPoint<f64> {
        DomainPoint::with_scalar_w(CVector::from_real(z), c(w, 0.0))
    }

    #[test]
    fn defining_function_examples() {
        let p = params(1);
        assert_eq!(fbh_defining(&p, &pt(&[0.0], 0.5)).unwrap(), -0.75);
        assert_eq!(fbh_defining(&p, &pt(&[0.0], 1.0)).unwrap(), 0.0);
        let z = 4f64.ln().sqrt();
        assert!(fbh_defining(&p, &pt(&[z], 0.5)).unwrap().abs() < 1e-15);
        assert!(fbh_defining(&p, &pt(&[0.0, 0.0], 0.5)).is_err());
    }

    #[test]
    fn classify_examples() {
        let p = params(1);
        assert_eq!(classify(&p, &pt(&[0.0], 0.5), 1e-9).unwrap(), Membership::Interior);
        assert_eq!(classify(&p, &pt(&[0.0], 1.0), 1e-9).unwrap(), Membership::Boundary);
        assert_eq!(classify(&p, &pt(&[0.0], 1.1), 1e-9).unwrap(), Membership::Exterior);
    }

    #[test]
    fn params_validation() {
        assert!(DomainParams::new(0, 1, 1.0).is_err());
        assert!(DomainParams::new(1, 0, 1.0).is_err());
        assert!(DomainParams::new(1, 1, 0.0).is_err());
        assert!(DomainParams::new(1, 1, f64::NAN).is_err());
        assert!(serde_json::from_str::<DomainParams<f64>>(r#"{"n":1,"m":1,"mu":-1}"#).is_err());
        let ok: DomainParams<f64> = serde_json::from_str(r#"{"n":2,"m":1,"mu":0.5}"#).unwrap();
        assert_eq!(ok.n, 2);
    }

    #[test]
    fn boundary_samples_are_on_the_boundary_and_reproducible() {
        for (n, m, mu) in [(1, 1, 1.0f64), (3, 1, 0.5), (2, 3, 2.0)] {
            let p = DomainParams::new(n, m, mu).unwrap();
            let a = sample_boundary(&p, 42, 200);
            let b = sample_boundary(&p, 42, 200);
            assert_eq!(a, b);
            for q in &a {
                assert!(fbh_defining(&p, q).unwrap().abs() < 1e-12);
                assert_eq!(classify_default(&p, q).unwrap(), Membership::Boundary);
            }
        }
    }

    #[test]
    fn interior_samples_are_inside() {
        let p = DomainParams::new(3, 2, 1.5).unwrap();
        for q in sample_interior(&p, 1, 300) {
            assert_eq!(classify_default(&p, &q).unwrap(), Membership::Interior);
        }
    }

    #[test]
    fn sampler_z_second_moment() {
        let n = 3;
        let p = params(n);
        let samples = sample_boundary(&p, 2024, 10_000);
        let mean = samples.iter().map(|q| q.z.norm_sqr()).sum::<f64>() / samples.len() as f64;
        assert!((mean - n as f64).abs() / (n as f64) < 0.1, "mean |z|^2 = {mean}");
    }

    #[test]
    fn siegel_and_ball_examples() {
        let z0 = CVector::<f64>::zeros(2);
        assert_eq!(siegel_defining(&z0, c(0.0, 1.0)), 1.0);
        assert_eq!(siegel_defining(&z0, c(0.0, 0.0)), 0.0);
        let z = CVector::<f64>::from_real(&[1.0, 1.0]);
        assert_eq!(siegel_defining(&z, c(0.0, 2.0)), 0.0);

        assert_eq!(ball_defining(&CVector::<f64>::zeros(3)), -1.0);
        assert_eq!(ball_defining(&CVector::<f64>::from_real(&[0.0, 0.0, 1.0])), 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(ball_defining(&CVector::<f64>::from_real(&[s, s])).abs() < 1e-15);
    }

    #[test]
    fn point_json_shape() {
        let q = pt(&[0.0], 0.5);
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"z":[[0.0,0.0]],"w":[[0.5,0.0]]}"#);
        let back: DomainPoint<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
    }
}
