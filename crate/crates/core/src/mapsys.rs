//! Holomorphic maps between Fock-Bargmann-Hartogs domains built as chains of
//! primitive stages, with exact evaluation and chain-rule Jacobians.
//!
//! Stages are listed in application order: `stages[0]` acts first.
//!
//! ```text
//! aut      g                   (z, w) -> g(z, w)
//! power    k                   (z, w) -> (sqrt(k) z, w^k)
//! embed    k, N                (z, w) -> (sqrt(k) z, 0_{N-n}, w^k)
//! constant point               (z, w) -> point
//! scale_w  c                   (z, w) -> (z, c w)
//! ```
//!
//! `constant` and `scale_w` exist to express maps that are *not* proper.

use num_complex::Complex;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::calg::{complex_pair, CMatrix, CVector};
use crate::domain::{DomainParams, DomainPoint};
use crate::error::{Error, Result};
use crate::fbhaut::{FbhAut, FbhAutJson};
use crate::scalar::{lit, Real};

/// A holomorphic map `D_{n,m}(mu) -> D_{N,M}(mu')` seen as an oracle.
pub trait HolomorphicMap<T: Real>: Sync {
    fn in_params(&self) -> DomainParams<T>;
    fn out_params(&self) -> DomainParams<T>;
    fn evaluate(&self, p: &DomainPoint<T>) -> Result<DomainPoint<T>>;
    /// `(N + M) x (n + m)` matrix of holomorphic partials at `p`.
    fn jacobian(&self, p: &DomainPoint<T>) -> Result<CMatrix<T>>;
    /// False when [`HolomorphicMap::jacobian`] is a numerical approximation.
    fn exact_jacobian(&self) -> bool {
        true
    }
}

/// Step used by [`fd_jacobian`] and [`FiniteDifference`].
pub const FD_STEP: f64 = 1e-5;

/// Central finite-difference Jacobian along the real coordinate directions,
/// which equals the holomorphic Jacobian for holomorphic maps.
pub fn fd_jacobian<T: Real, F>(f: F, p: &DomainPoint<T>, h: T) -> Result<CMatrix<T>>
where
    F: Fn(&DomainPoint<T>) -> Result<DomainPoint<T>>,
{
    let x = p.coords();
    let n = p.z.len();
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += Complex::new(h, T::zero());
        xm[j] -= Complex::new(h, T::zero());
        let fp = f(&DomainPoint::from_coords(&xp, n))?.coords();
        let fm = f(&DomainPoint::from_coords(&xm, n))?.coords();
        cols.push((&fp - &fm).scale_real(T::one() / (h + h)));
    }
    CMatrix::from_columns(&cols)
}

/// Black-box view of a map: evaluation is delegated, the Jacobian comes from
/// central differences with step [`FD_STEP`].
#[derive(Debug, Clone)]
pub struct FiniteDifference<M>(pub M);

impl<T: Real, M: HolomorphicMap<T>> HolomorphicMap<T> for FiniteDifference<M> {
    fn in_params(&self) -> DomainParams<T> {
        self.0.in_params()
    }
    fn out_params(&self) -> DomainParams<T> {
        self.0.out_params()
    }
    fn evaluate(&self, p: &DomainPoint<T>) -> Result<DomainPoint<T>> {
        self.0.evaluate(p)
    }
    fn jacobian(&self, p: &DomainPoint<T>) -> Result<CMatrix<T>> {
        fd_jacobian(|q| self.0.evaluate(q), p, lit(FD_STEP))
    }
    fn exact_jacobian(&self) -> bool {
        false
    }
}

/// One primitive of a [`MapDescriptor`].
#[derive(Debug, Clone, PartialEq)]
pub enum Stage<T: Real> {
    Aut(FbhAut<T>),
    Power { k: u32 },
    Embed { k: u32, n_out: usize },
    Constant { point: DomainPoint<T> },
    ScaleW { factor: Complex<T> },
}

/// `(n, m)` of a domain.
type Dims = (usize, usize);

impl<T: Real> Stage<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Aut(_) => "aut",
            Stage::Power { .. } => "power",
            Stage::Embed { .. } => "embed",
            Stage::Constant { .. } => "constant",
            Stage::ScaleW { .. } => "scale_w",
        }
    }

    /// Output dimensions for the given input dimensions.
    fn out_dims(&self, (n, m): Dims, mu: T) -> std::result::Result<Dims, String> {
        match self {
            Stage::Aut(g) => {
                let p = g.params();
                if (p.n, p.m) != (n, m) {
                    return Err(format!("automorphism of D_{{{},{}}} applied to D_{{{n},{m}}}", p.n, p.m));
                }
                if p.mu != mu {
                    return Err(format!("automorphism has mu = {} but the chain has mu = {mu}", p.mu));
                }
                Ok((n, m))
            }
            Stage::Power { k } | Stage::Embed { k, .. } if *k == 0 => Err("k must be a positive integer".into()),
            Stage::Power { .. } => {
                if m != 1 {
                    return Err(format!("power needs m = 1, got m = {m}"));
                }
                Ok((n, 1))
            }
            Stage::Embed { n_out, .. } => {
                if m != 1 {
                    return Err(format!("embed needs m = 1, got m = {m}"));
                }
                if *n_out < n {
                    return Err(format!("embed needs N >= n, got N = {n_out}, n = {n}"));
                }
                Ok((*n_out, 1))
            }
            Stage::Constant { point } => {
                if !point.is_finite() {
                    return Err("constant point has non-finite entries".into());
                }
                if point.z.is_empty() || point.w.is_empty() {
                    return Err("constant point needs non-empty z and w".into());
                }
                Ok((point.z.len(), point.w.len()))
            }
            Stage::ScaleW { factor } => {
                if !(factor.re.is_finite() && factor.im.is_finite()) {
                    return Err("scale factor is not finite".into());
                }
                Ok((n, m))
            }
        }
    }

    pub fn evaluate(&self, p: &DomainPoint<T>) -> Result<DomainPoint<T>> {
        Ok(match self {
            Stage::Aut(g) => g.apply(p)?,
            Stage::Power { k } => {
                let s = lit::<T>(*k as f64).sqrt();
                DomainPoint::with_scalar_w(p.z.scale_real(s), p.w[0].powu(*k))
            }
            Stage::Embed { k, n_out } => {
                let s = lit::<T>(*k as f64).sqrt();
                let z = p.z.scale_real(s).concat(&CVector::zeros(n_out - p.z.len()));
                DomainPoint::with_scalar_w(z, p.w[0].powu(*k))
            }
            Stage::Constant { point } => point.clone(),
            Stage::ScaleW { factor } => DomainPoint::new(p.z.clone(), p.w.scale(*factor)),
        })
    }

    pub fn jacobian(&self, p: &DomainPoint<T>) -> Result<CMatrix<T>> {
        let (n, m) = (p.z.len(), p.w.len());
        Ok(match self {
            Stage::Aut(g) => g.jacobian(p)?,
            Stage::Power { k } | Stage::Embed { k, .. } => {
                let n_out = match self {
                    Stage::Embed { n_out, .. } => *n_out,
                    _ => n,
                };
                let kk = lit::<T>(*k as f64);
                let mut jac = CMatrix::zeros(n_out + 1, n + 1);
                for i in 0..n {
                    jac[(i, i)] = Complex::new(kk.sqrt(), T::zero());
                }
                jac[(n_out, n)] = if *k == 1 {
                    Complex::one()
                } else {
                    p.w[0].powu(k - 1).scale(kk)
                };
                jac
            }
            Stage::Constant { point } => CMatrix::zeros(point.z.len() + point.w.len(), n + m),
            Stage::ScaleW { factor } => {
                let mut jac = CMatrix::identity(n + m);
                for a in 0..m {
                    jac[(n + a, n + a)] = *factor;
                }
                jac
            }
        })
    }
}

/// A validated chain of stages from `in_params` to `out_params`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapDescriptor<T: Real> {
    in_params: DomainParams<T>,
    out_params: DomainParams<T>,
    stages: Vec<Stage<T>>,
}

impl<T: Real> MapDescriptor<T> {
    /// Checks stage compatibility; errors name the offending stage index.
    pub fn new(in_params: DomainParams<T>, out_params: DomainParams<T>, stages: Vec<Stage<T>>) -> Result<Self> {
        let mut dims = (in_params.n, in_params.m);
        for (i, s) in stages.iter().enumerate() {
            dims = s.out_dims(dims, in_params.mu).map_err(|message| Error::Schema {
                path: format!("stages[{i}]"),
                message: format!("{} stage: {message}", s.name()),
            })?;
        }
        if dims != (out_params.n, out_params.m) || out_params.mu != in_params.mu {
            return Err(Error::Schema {
                path: "out".into(),
                message: format!(
                    "chain ends in D_{{{},{}}}(mu = {}) but out is D_{{{},{}}}(mu = {})",
                    dims.0, dims.1, in_params.mu, out_params.n, out_params.m, out_params.mu
                ),
            });
        }
        Ok(Self { in_params, out_params, stages })
    }

    /// `(sqrt(k) z, w^k)` on `D_{n,1}(mu)`.
    pub fn power(n: usize, k: u32, mu: T) -> Result<Self> {
        let p = DomainParams::hartogs(n, mu)?;
        Self::new(p, p, vec![Stage::Power { k }])
    }

    /// `(sqrt(k) z, 0, w^k)` from `D_{n,1}(mu)` to `D_{N,1}(mu)`.
    pub fn embed(n: usize, n_out: usize, k: u32, mu: T) -> Result<Self> {
        Self::new(
            DomainParams::hartogs(n, mu)?,
            DomainParams::hartogs(n_out, mu)?,
            vec![Stage::Embed { k, n_out }],
        )
    }

    /// `g1 o Power(k) o g2`, or `g1 o Embed(k, N) o g2` when `n_out > n`,
    /// with `g2` on the source and `g1` on the target; Haar unitaries and
    /// Gaussian translations of standard deviation `spread`.
    pub fn classified_fixture(n: usize, n_out: usize, k: u32, mu: T, spread: T, seed: u64) -> Result<Self> {
        let pin = DomainParams::hartogs(n, mu)?;
        let pout = DomainParams::hartogs(n_out, mu)?;
        let g2 = scaled_random(pin, spread, seed.wrapping_mul(2).wrapping_add(1))?;
        let g1 = scaled_random(pout, spread, seed.wrapping_mul(2).wrapping_add(2))?;
        let mid = if n_out == n {
            Stage::Power { k }
        } else {
            Stage::Embed { k, n_out }
        };
        Self::new(pin, pout, vec![Stage::Aut(g2), mid, Stage::Aut(g1)])
    }

    pub fn stages(&self) -> &[Stage<T>] {
        &self.stages
    }

    /// Appends a stage acting after the current chain.
    pub fn then(&self, stage: Stage<T>, out_params: DomainParams<T>) -> Result<Self> {
        let mut stages = self.stages.clone();
        stages.push(stage);
        Self::new(self.in_params, out_params, stages)
    }

    /// Intermediate points: `trace[0] = p`, `trace[i + 1] = stage_i(trace[i])`.
    fn trace(&self, p: &DomainPoint<T>) -> Result<Vec<DomainPoint<T>>> {
        if p.z.len() != self.in_params.n || p.w.len() != self.in_params.m {
            return Err(Error::DimensionMismatch(format!(
                "point ({}, {}) for a map from D_{{{},{}}}",
                p.z.len(),
                p.w.len(),
                self.in_params.n,
                self.in_params.m
            )));
        }
        let mut out = Vec::with_capacity(self.stages.len() + 1);
        out.push(p.clone());
        for s in &self.stages {
            let next = s.evaluate(out.last().expect("non-empty"))?;
            out.push(next);
        }
        Ok(out)
    }
}

fn scaled_random<T: Real>(params: DomainParams<T>, spread: T, seed: u64) -> Result<FbhAut<T>> {
    let g = FbhAut::random(params, seed);
    FbhAut::new(params, g.u().clone(), g.w().clone(), g.v().scale_real(spread))
}

impl<T: Real> HolomorphicMap<T> for MapDescriptor<T> {
    fn in_params(&self) -> DomainParams<T> {
        self.in_params
    }

    fn out_params(&self) -> DomainParams<T> {
        self.out_params
    }

    fn evaluate(&self, p: &DomainPoint<T>) -> Result<DomainPoint<T>> {
        Ok(self.trace(p)?.pop().expect("non-empty"))
    }

    fn jacobian(&self, p: &DomainPoint<T>) -> Result<CMatrix<T>> {
        let trace = self.trace(p)?;
        let dim = self.in_params.n + self.in_params.m;
        let mut jac = CMatrix::identity(dim);
        for (s, q) in self.stages.iter().zip(&trace) {
            jac = s.jacobian(q)?.checked_mul(&jac)?;
        }
        Ok(jac)
    }
}

// --- JSON ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields, bound = "T: Real")]
enum StageJson<T: Real> {
    Aut {
        #[serde(rename = "U")]
        u: CMatrix<T>,
        #[serde(rename = "W")]
        w: CMatrix<T>,
        v: CVector<T>,
    },
    Power {
        k: u32,
    },
    Embed {
        k: u32,
        #[serde(rename = "N")]
        n_out: usize,
    },
    Constant {
        point: DomainPoint<T>,
    },
    ScaleW {
        #[serde(with = "complex_pair")]
        c: Complex<T>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
struct MapJson<T: Real> {
    #[serde(rename = "in")]
    in_params: DomainParams<T>,
    #[serde(rename = "out")]
    out_params: DomainParams<T>,
    stages: Vec<StageJson<T>>,
}

impl<T: Real> MapDescriptor<T> {
    /// Parses the map JSON; schema errors carry the JSON path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: MapJson<T> = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: match e.path().to_string() {
                p if p == "." => "$".into(),
                p => p,
            },
            message: e.inner().to_string(),
        })?;
        let mu = raw.in_params.mu;
        let mut stages = Vec::with_capacity(raw.stages.len());
        for (i, s) in raw.stages.into_iter().enumerate() {
            let stage = match s {
                StageJson::Aut { u, w, v } => {
                    Stage::Aut(FbhAutJson { u, w, v }.into_aut(mu).map_err(|e| Error::Schema {
                        path: format!("stages[{i}]"),
                        message: format!("aut stage: {e}"),
                    })?)
                }
                StageJson::Power { k } => Stage::Power { k },
                StageJson::Embed { k, n_out } => Stage::Embed { k, n_out },
                StageJson::Constant { point } => Stage::Constant { point },
                StageJson::ScaleW { c } => Stage::ScaleW { factor: c },
            };
            stages.push(stage);
        }
        Self::new(raw.in_params, raw.out_params, stages)
    }

    pub fn to_json(&self) -> String {
        let stages = self
            .stages
            .iter()
            .map(|s| match s {
                Stage::Aut(g) => {
                    let j = FbhAutJson::from(g);
                    StageJson::Aut { u: j.u, w: j.w, v: j.v }
                }
                Stage::Power { k } => StageJson::Power { k: *k },
                Stage::Embed { k, n_out } => StageJson::Embed { k: *k, n_out: *n_out },
                Stage::Constant { point } => StageJson::Constant { point: point.clone() },
                Stage::ScaleW { factor } => StageJson::ScaleW { c: *factor },
            })
            .collect();
        let raw = MapJson {
            in_params: self.in_params,
            out_params: self.out_params,
            stages,
        };
        serde_json::to_string(&raw).expect("map serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{fbh_defining, sample_boundary, sample_interior};
    use crate::scalar::c;

    type MD = MapDescriptor<f64>;

    fn pt(z: &[f64], w: Complex<f64>) -> DomainPoint<f64> {
        DomainPoint::with_scalar_w(CVector::from_real(z), w)
    }

    #[test]
    fn power_examples() {
        let f = MD::power(1, 2, 1.0).unwrap();
        let y = f.evaluate(&pt(&[0.0], c(0.5, 0.0))).unwrap();
        assert!(y.max_abs_diff(&pt(&[0.0], c(0.25, 0.0))) < 1e-16);
        let params = DomainParams::hartogs(3, 1.0).unwrap();
        let f3 = MD::power(3, 2, 1.0).unwrap();
        for q in sample_boundary(&params, 3, 200) {
            assert!(fbh_defining(&params, &f3.evaluate(&q).unwrap()).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn power_one_is_identity_in_a_chain() {
        let params = DomainParams::hartogs(2, 1.5).unwrap();
        let g = FbhAut::random(params, 4);
        let a = MD::new(params, params, vec![Stage::Power { k: 1 }, Stage::Aut(g.clone())]).unwrap();
        let b = MD::new(params, params, vec![Stage::Aut(g)]).unwrap();
        for q in sample_interior(&params, 9, 50) {
            assert!(a.evaluate(&q).unwrap().max_abs_diff(&b.evaluate(&q).unwrap()) < 1e-15);
        }
    }

    #[test]
    fn power_jacobian_examples() {
        let f = MD::power(2, 3, 1.0).unwrap();
        let j = f.jacobian(&pt(&[0.0, 0.0], c(0.3, 0.4))).unwrap();
        for i in 0..2 {
            assert!((j[(i, i)] - c(3f64.sqrt(), 0.0)).norm() < 1e-15);
        }
        assert!((j[(2, 2)] - c::<f64>(0.3, 0.4) * c::<f64>(0.3, 0.4) * 3.0).norm() < 1e-15);
        let f2 = MD::power(1, 2, 1.0).unwrap();
        assert_eq!(f2.jacobian(&pt(&[0.0], c(0.0, 0.0))).unwrap()[(1, 1)], c(0.0, 0.0));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for (seed, (n, n_out, k)) in [(1, 1, 1), (2, 2, 3), (3, 5, 2), (4, 4, 6)].into_iter().enumerate() {
            let f = MD::classified_fixture(n, n_out, k, 0.8, 0.5, seed as u64).unwrap();
            let fd = FiniteDifference(f.clone());
            for q in sample_interior(&f.in_params(), seed as u64, 10) {
                let a = f.jacobian(&q).unwrap();
                let b = fd.jacobian(&q).unwrap();
                assert!(a.max_abs_diff(&b) <= 1e-6 * a.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn fixtures_are_proper_on_samples() {
        for seed in 0..5 {
            let f = MD::classified_fixture(3, 3, 2 + seed as u32, 1.0, 0.7, seed).unwrap();
            let params = f.in_params();
            for q in sample_boundary(&params, seed, 100) {
                assert!(fbh_defining(&params, &f.evaluate(&q).unwrap()).unwrap().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let f = MD::classified_fixture(2, 3, 2, 1.0, 0.5, 7).unwrap();
        let s = f.to_json();
        let g = MD::from_json(&s).unwrap();
        assert_eq!(g.to_json(), s);
        let params = f.in_params();
        for q in sample_interior(&params, 1, 10) {
            assert_eq!(f.evaluate(&q).unwrap(), g.evaluate(&q).unwrap());
        }
        let neg = r#"{"in":{"n":1,"m":1,"mu":1},"out":{"n":1,"m":1,"mu":1},"stages":[
            {"type":"constant","point":{"z":[[0,0]],"w":[[0.5,0]]}},{"type":"scale_w","c":[0.9,0]}]}"#;
        let h = MD::from_json(neg).unwrap();
        assert_eq!(MD::from_json(&h.to_json()).unwrap(), h);
    }

    #[test]
    fn json_errors() {
        let bad_tag = r#"{"in":{"n":1,"m":1,"mu":1},"out":{"n":1,"m":1,"mu":1},"stages":[{"type":"twist"}]}"#;
        match MD::from_json(bad_tag) {
            Err(Error::Schema { path, message }) => {
                assert!(path.contains("stages[0]"), "{path}");
                assert!(message.contains("twist"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let bad_chain = r#"{"in":{"n":2,"m":1,"mu":1},"out":{"n":1,"m":1,"mu":1},
            "stages":[{"type":"power","k":2},{"type":"embed","k":1,"N":1}]}"#;
        match MD::from_json(bad_chain) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "stages[1]"),
            other => panic!("{other:?}"),
        }
        let bad_k = r#"{"in":{"n":1,"m":1,"mu":1},"out":{"n":1,"m":1,"mu":1},"stages":[{"type":"power","k":-1}]}"#;
        assert!(matches!(MD::from_json(bad_k), Err(Error::Schema { .. })));
        let zero_k = r#"{"in":{"n":1,"m":1,"mu":1},"out":{"n":1,"m":1,"mu":1},"stages":[{"type":"power","k":0}]}"#;
        assert!(matches!(MD::from_json(zero_k), Err(Error::Schema { .. })));
        let bad_out = r#"{"in":{"n":1,"m":1,"mu":1},"out":{"n":2,"m":1,"mu":1},"stages":[]}"#;
        match MD::from_json(bad_out) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "out"),
            other => panic!("{other:?}"),
        }
        let power_m2 = r#"{"in":{"n":1,"m":2,"mu":1},"out":{"n":1,"m":1,"mu":1},"stages":[{"type":"power","k":2}]}"#;
        assert!(matches!(MD::from_json(power_m2), Err(Error::Schema { .. })));
        let missing = r#"{"in":{"n":1,"m":1,"mu":1},"stages":[]}"#;
        assert!(matches!(MD::from_json(missing), Err(Error::Schema { .. })));
    }
}
