//! Automorphisms, boundary charts and normal forms of proper holomorphic
//! maps between Fock-Bargmann-Hartogs domains
//! `D_{n,m}(mu) = { (z, w) in C^n x C^m : |w|^2 < exp(-mu |z|^2) }`.
//!
//! Everything is generic over the real scalar ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix the scalar to `f64`, which is the
//! precision all default tolerances are tuned for.

pub mod ballgeo;
pub mod calg;
pub mod domain;
pub mod error;
pub mod fbhaut;
pub mod mapsys;
pub mod normalizer;
pub mod scalar;
pub mod transfer;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type CVector = calg::CVector<f64>;
pub type CMatrix = calg::CMatrix<f64>;
pub type DomainParams = domain::DomainParams<f64>;
pub type DomainPoint = domain::DomainPoint<f64>;
pub type FbhAut = fbhaut::FbhAut<f64>;
pub type ProjectiveAut = ballgeo::ProjectiveAut<f64>;
pub type CanonicalParams = ballgeo::CanonicalParams<f64>;
pub type ChartPoint = transfer::ChartPoint<f64>;
pub type Chart = transfer::Chart<f64>;
pub type MapDescriptor = mapsys::MapDescriptor<f64>;
pub type NormalizationResult = normalizer::NormalizationResult<f64>;
