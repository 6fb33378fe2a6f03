//! Biholomorphic charts from a neighbourhood of `P = (0, ..., 0, 1)` in
//! `D_{n,1}(mu)` to the Siegel upper half-space `H = { Im W > |z|^2 }` and on
//! to the unit ball `B^{n+1}`.
//!
//! ```text
//! log chart:   (z, w)      -> (sqrt(mu) z, -2i Log w)          P -> O = 0
//! Cayley:      (z, W)      -> (2z / (W + i), -(W - i)/(W + i)) O -> Q = (0, ..., 0, 1)
//! ```
//!
//! `Log` is the principal branch, so the FBH stage is restricted to `w` off
//! the closed negative real axis. The `sqrt(mu)` factor carries the boundary
//! `|w|^2 = exp(-mu |z|^2)` exactly onto `Im W = |z'|^2`; at `mu = 1` the log
//! chart is the plain `(z, -2i Log w)`.

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::calg::CVector;
use crate::domain::DomainPoint;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Which space a [`ChartPoint`] lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Fbh,
    Siegel,
    Ball,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Fbh => "fbh",
            Stage::Siegel => "siegel",
            Stage::Ball => "ball",
        }
    }
}

/// Coordinates `(z_1, ..., z_n, last)` tagged with their stage. `last` is
/// `w`, `W` or `eta` respectively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ChartPoint<T: Real> {
    pub stage: Stage,
    pub coords: CVector<T>,
}

impl<T: Real> ChartPoint<T> {
    pub fn new(stage: Stage, coords: CVector<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::DimensionMismatch("chart point needs at least one coordinate".into()));
        }
        coords.validate("chart point")?;
        Ok(Self { stage, coords })
    }

    pub fn fbh(p: &DomainPoint<T>) -> Result<Self> {
        if p.w.len() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "the charts need m = 1, got m = {}",
                p.w.len()
            )));
        }
        Self::new(Stage::Fbh, p.coords())
    }

    /// Number of `z` coordinates.
    pub fn n(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn z(&self) -> CVector<T> {
        self.coords.slice(0, self.n())
    }

    pub fn last(&self) -> Complex<T> {
        self.coords[self.n()]
    }

    fn expect(&self, stage: Stage) -> Result<()> {
        if self.stage == stage {
            Ok(())
        } else {
            Err(Error::StageMismatch {
                expected: stage.name(),
                got: self.stage.name(),
            })
        }
    }

    fn build(stage: Stage, z: CVector<T>, last: Complex<T>) -> Self {
        Self {
            stage,
            coords: z.concat(&CVector::new(vec![last])),
        }
    }

    pub fn into_domain_point(self) -> Result<DomainPoint<T>> {
        self.expect(Stage::Fbh)?;
        let n = self.n();
        Ok(DomainPoint::from_coords(&self.coords, n))
    }
}

/// The chart chain for a fixed Fock weight `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chart<T> {
    mu: T,
}

impl<T: Real> Chart<T> {
    pub fn new(mu: T) -> Result<Self> {
        if !(mu > T::zero()) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    /// FBH -> Siegel.
    pub fn log_chart(&self, p: &ChartPoint<T>) -> Result<ChartPoint<T>> {
        p.expect(Stage::Fbh)?;
        let w = p.last();
        if w.is_zero() {
            return Err(Error::ZeroW);
        }
        if w.im == T::zero() && w.re < T::zero() {
            return Err(Error::BranchCut {
                re: w.re.to_f64().unwrap_or(f64::NAN),
                im: 0.0,
            });
        }
        let big_w = Complex::new(T::zero(), lit(-2.0)) * w.ln();
        Ok(ChartPoint::build(Stage::Siegel, p.z().scale_real(self.mu.sqrt()), big_w))
    }

    /// Siegel -> FBH.
    pub fn log_chart_inv(&self, q: &ChartPoint<T>) -> Result<ChartPoint<T>> {
        q.expect(Stage::Siegel)?;
        let w = (Complex::new(T::zero(), lit(0.5)) * q.last()).exp();
        Ok(ChartPoint::build(Stage::Fbh, q.z().scale_real(T::one() / self.mu.sqrt()), w))
    }

    /// Siegel -> ball (Cayley transform).
    pub fn cayley(&self, q: &ChartPoint<T>) -> Result<ChartPoint<T>> {
        q.expect(Stage::Siegel)?;
        let i = Complex::<T>::i();
        let denom = q.last() + i;
        if denom.is_zero() {
            return Err(Error::PoleAtMinusI);
        }
        let xi = q.z().scale(Complex::new(lit(2.0), T::zero()) / denom);
        let eta = -(q.last() - i) / denom;
        let out = ChartPoint::build(Stage::Ball, xi, eta);
        if !out.coords.is_finite() {
            return Err(Error::PoleAtMinusI);
        }
        Ok(out)
    }

    /// Ball -> Siegel.
    pub fn cayley_inv(&self, x: &ChartPoint<T>) -> Result<ChartPoint<T>> {
        x.expect(Stage::Ball)?;
        let i = Complex::<T>::i();
        let eta = x.last();
        let denom = Complex::<T>::one() + eta;
        if denom.is_zero() {
            return Err(Error::PoleAtMinusOne);
        }
        let z = x.z().scale(i / denom);
        let big_w = i * (Complex::<T>::one() - eta) / denom;
        let out = ChartPoint::build(Stage::Siegel, z, big_w);
        if !out.coords.is_finite() {
            return Err(Error::PoleAtMinusOne);
        }
        Ok(out)
    }

    /// FBH -> ball, the composite of the two charts.
    pub fn to_ball(&self, p: &ChartPoint<T>) -> Result<ChartPoint<T>> {
        self.cayley(&self.log_chart(p)?)
    }

    /// Ball -> FBH.
    pub fn from_ball(&self, x: &ChartPoint<T>) -> Result<ChartPoint<T>> {
        self.log_chart_inv(&self.cayley_inv(x)?)
    }

    /// [`Chart::to_ball`] on an untagged point of `D_{n,1}`.
    pub fn point_to_ball(&self, p: &DomainPoint<T>) -> Result<CVector<T>> {
        Ok(self.to_ball(&ChartPoint::fbh(p)?)?.coords)
    }

    /// [`Chart::from_ball`] on an untagged ball point.
    pub fn point_from_ball(&self, x: &CVector<T>) -> Result<DomainPoint<T>> {
        self.from_ball(&ChartPoint::new(Stage::Ball, x.clone())?)?
            .into_domain_point()
    }
}
