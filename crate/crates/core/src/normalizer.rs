//! Normal forms of proper holomorphic maps `D_{n,1}(mu) -> D_{N,1}(mu)`,
//! `n <= N < 2n`: every such map is `tau^{-1} o C_k o sigma^{-1}` with
//! `C_k = (sqrt(k) z, 0, w^k)` and automorphisms `sigma`, `tau`.
//!
//! Two strategies recover `k`:
//!
//! * [`normalize_self`] / [`normalize_nonequidim`] move `F(P)` back to `P`
//!   and read `k` and the unitary twist off the `z`-block of the Jacobian;
//! * [`normalize_ballfit`] pushes the map through the charts to the unit
//!   ball, fits the resulting projective transformation, and reads `k` off
//!   its canonical form as `-1/lambda^2`.
//!
//! [`fiber_count`] is an independent degree oracle for descriptors.

use std::f64::consts::PI;

use num_complex::Complex;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ballgeo::{
    canonical_form_with, fit_projective_map, min_pairs, CanonicalOptions, CanonicalParams, FitOptions,
};
use crate::calg::{complex_pair, polar_isometry, unitary_complete, CMatrix, CVector};
use crate::domain::{fbh_defining, sample_boundary, sample_interior, unit_sphere, DomainParams, DomainPoint};
use crate::error::{Error, Result};
use crate::fbhaut::FbhAut;
use crate::mapsys::{HolomorphicMap, MapDescriptor, Stage};
use crate::scalar::{lit, Real};
use crate::transfer::Chart;

/// Boundary residual below which [`verify_proper`] passes.
pub const PROPER_RESIDUAL_GATE: f64 = 1e-7;
/// `r_out(F(p))` above which an interior sample counts as mapped outside.
pub const INTERIOR_VIOLATION_TOL: f64 = 1e-9;
/// `k`-gate used when the Jacobian is a finite-difference estimate.
pub const FD_K_GATE: f64 = 1e-3;

fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn eval_at<T: Real, M: HolomorphicMap<T> + ?Sized>(f: &M, p: &DomainPoint<T>) -> Result<DomainPoint<T>> {
    f.evaluate(p).map_err(|e| Error::Evaluation {
        at: serde_json::to_string(p).unwrap_or_default(),
        source: Box::new(e),
    })
}

fn max_of<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    xs.into_iter().fold(T::zero(), |a, b| if b > a || b.is_nan() { b } else { a })
}

/// Sampled necessary conditions for properness.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct PropernessReport<T: Real> {
    /// `max |r_out(F(p))|` over boundary samples.
    pub max_boundary_residual: T,
    /// Interior samples with `r_out(F(p)) > 1e-9`.
    pub interior_violations: usize,
    pub samples_used: usize,
    pub pass: bool,
}

/// Evaluates `F` on `count` boundary and `count` interior samples of the
/// source domain.
pub fn verify_proper<T: Real, M: HolomorphicMap<T> + ?Sized>(
    f: &M,
    seed: u64,
    count: usize,
) -> Result<PropernessReport<T>> {
    let pin = f.in_params();
    let pout = f.out_params();
    let bnd = sample_boundary(&pin, seed, count);
    let inner = sample_interior(&pin, seed.wrapping_add(1), count);
    let residuals: Vec<T> = bnd
        .par_iter()
        .map(|p| Ok(fbh_defining(&pout, &eval_at(f, p)?)?.abs()))
        .collect::<Result<_>>()?;
    let violations: Vec<bool> = inner
        .par_iter()
        .map(|p| {
            let r = fbh_defining(&pout, &eval_at(f, p)?)?;
            Ok(r.is_nan() || r > lit(INTERIOR_VIOLATION_TOL))
        })
        .collect::<Result<_>>()?;
    let max_boundary_residual = max_of(residuals);
    let interior_violations = violations.into_iter().filter(|v| *v).count();
    Ok(PropernessReport {
        max_boundary_residual,
        interior_violations,
        samples_used: bnd.len() + inner.len(),
        pass: max_boundary_residual < lit(PROPER_RESIDUAL_GATE) && interior_violations == 0,
    })
}

/// Which algorithm produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Direct,
    BallFit,
}

/// `tau o F o sigma = C_k` on the validation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationResult<T: Real> {
    pub k: u32,
    /// Source-side automorphism (the identity for [`Strategy::Direct`]).
    pub sigma: FbhAut<T>,
    /// Target-side automorphism.
    pub tau: FbhAut<T>,
    /// `max |tau(F(sigma(p))) - C_k(p)|` over the grid.
    pub residual_sup: T,
    /// `tr(B^H B) / n` before rounding.
    pub kappa: T,
    pub strategy: Strategy,
}

/// Gates and grid sizes for the direct strategy.
#[derive(Debug, Clone, Copy)]
pub struct NormalizeOptions<T> {
    /// Bound on `|kappa - k|` and on the non-scalar part of `B^H B / kappa`.
    pub k_gate: T,
    pub residual_gate: T,
    pub grid_interior: usize,
    pub grid_boundary: usize,
    /// Samples per kind for the preliminary [`verify_proper`]; 0 skips it.
    pub proper_samples: usize,
    /// Band for `F(P)` to count as a boundary point.
    pub base_tol: T,
    pub seed: u64,
}

impl<T: Real> Default for NormalizeOptions<T> {
    fn default() -> Self {
        Self {
            k_gate: lit(1e-6),
            residual_gate: lit(1e-8),
            grid_interior: 500,
            grid_boundary: 200,
            proper_samples: 100,
            base_tol: lit(1e-9),
            seed: 0,
        }
    }
}

fn check_hartogs_pair<T: Real>(pin: &DomainParams<T>, pout: &DomainParams<T>) -> Result<()> {
    if pin.m != 1 || pout.m != 1 {
        return Err(Error::HypothesisViolated(format!(
            "normal forms are for maps between D_{{n,1}} domains, got m = {} -> {}",
            pin.m, pout.m
        )));
    }
    if pin.mu != pout.mu {
        return Err(Error::ParameterMismatch(format!(
            "source mu = {} and target mu = {} differ",
            pin.mu, pout.mu
        )));
    }
    Ok(())
}

/// `(sqrt(k) z, 0, w^k)` as a descriptor.
pub fn canonical_map<T: Real>(n: usize, n_out: usize, k: u32, mu: T) -> Result<MapDescriptor<T>> {
    if n_out == n {
        MapDescriptor::power(n, k, mu)
    } else {
        MapDescriptor::embed(n, n_out, k, mu)
    }
}

/// The automorphism `tau_1 = to_base(F(P))` of the target, rejecting maps
/// with `F(P)` off the boundary.
fn base_transport<T: Real, M: HolomorphicMap<T> + ?Sized>(f: &M, base_tol: T) -> Result<FbhAut<T>> {
    let pin = f.in_params();
    let pout = f.out_params();
    let q0 = eval_at(f, &pin.base_point())?;
    let r = fbh_defining(&pout, &q0)?;
    if !(r.abs() <= base_tol) {
        return Err(Error::NotProper(format!("F(P) is not a boundary point (r = {:e})", to_f64(r))));
    }
    FbhAut::to_base_with_tol(pout, &q0, base_tol).map_err(|e| match e {
        Error::NotOnBoundary { value } => Error::NotProper(format!("F(P) is not a boundary point (r = {value:e})")),
        other => other,
    })
}

/// Direct strategy for self-maps of `D_{n,1}(mu)`.
pub fn normalize_self<T: Real, M: HolomorphicMap<T> + ?Sized>(
    f: &M,
    opts: &NormalizeOptions<T>,
) -> Result<NormalizationResult<T>> {
    let (pin, pout) = (f.in_params(), f.out_params());
    if pin.n != pout.n {
        return Err(Error::DimensionMismatch(format!(
            "self-map expected, got n = {} -> N = {}",
            pin.n, pout.n
        )));
    }
    normalize_direct(f, opts)
}

/// Direct strategy for `D_{n,1}(mu) -> D_{N,1}(mu)`, `n <= N < 2n`.
pub fn normalize_nonequidim<T: Real, M: HolomorphicMap<T> + ?Sized>(
    f: &M,
    opts: &NormalizeOptions<T>,
) -> Result<NormalizationResult<T>> {
    let (n, big_n) = (f.in_params().n, f.out_params().n);
    if big_n >= 2 * n {
        return Err(Error::HypothesisViolated(format!(
            "the normal form is only established for N < 2n, got n = {n}, N = {big_n}"
        )));
    }
    if big_n < n {
        return Err(Error::DimensionMismatch(format!("target dimension N = {big_n} below n = {n}")));
    }
    normalize_direct(f, opts)
}

/// [`normalize_self`] or [`normalize_nonequidim`] by dimension.
pub fn normalize<T: Real, M: HolomorphicMap<T> + ?Sized>(
    f: &M,
    opts: &NormalizeOptions<T>,
) -> Result<NormalizationResult<T>> {
    if f.in_params().n == f.out_params().n {
        normalize_self(f, opts)
    } else {
        normalize_nonequidim(f, opts)
    }
}

fn normalize_direct<T: Real, M: HolomorphicMap<T> + ?Sized>(
    f: &M,
    opts: &NormalizeOptions<T>,
) -> Result<NormalizationResult<T>> {
    let (pin, pout) = (f.in_params(), f.out_params());
    check_hartogs_pair(&pin, &pout)?;
    let (n, big_n) = (pin.n, pout.n);
    if opts.proper_samples > 0 {
        let rep = verify_proper(f, opts.seed, opts.proper_samples)?;
        if !rep.pass {
            return Err(Error::NotProper(format!(
                "boundary residual {:e}, {} interior violations",
                to_f64(rep.max_boundary_residual),
                rep.interior_violations
            )));
        }
    }
    let tau1 = base_transport(f, opts.base_tol)?;

    let half = DomainPoint::with_scalar_w(CVector::zeros(n), Complex::new(lit(0.5), T::zero()));
    let jf = f.jacobian(&half)?;
    let jt = tau1.jacobian(&eval_at(f, &half)?)?;
    let j1 = jt.checked_mul(&jf)?;
    let b = j1.block(0, 0, big_n, n);

    let gram = &b.adjoint() * &b;
    let kappa = gram.trace().re / lit(n as f64);
    if !(kappa > lit(0.5)) {
        return Err(Error::NotClassifiedForm(format!("z-block is degenerate (kappa = {kappa})")));
    }
    let k_gate = if f.exact_jacobian() {
        opts.k_gate
    } else {
        opts.k_gate.max(lit(FD_K_GATE))
    };
    let nonscalar = gram.scale_real(T::one() / kappa).max_abs_diff(&CMatrix::identity(n));
    if !(nonscalar <= k_gate) {
        return Err(Error::NotClassifiedForm(format!(
            "B^H B is not a multiple of the identity (residual {:e})",
            to_f64(nonscalar)
        )));
    }
    let k_real = kappa.round();
    if !((kappa - k_real).abs() <= k_gate) {
        return Err(Error::NotClassifiedForm(format!("kappa = {kappa} is not an integer")));
    }
    let k = k_real.to_u32().ok_or_else(|| Error::NotClassifiedForm(format!("kappa = {kappa}")))?;

    let (u, _) = polar_isometry(&b.scale_real(T::one() / k_real.sqrt()))?;
    let full = if big_n == n {
        u
    } else {
        unitary_complete(&u, lit(T::ALGEBRAIC_TOL))?
    };
    let tau = FbhAut::unitary_z(pout, full.adjoint())?.compose(&tau1)?;
    let sigma = FbhAut::identity(pin);

    let target = canonical_map(n, big_n, k, pin.mu)?;
    let residual_sup = grid_residual(f, &sigma, &tau, &target, opts)?;
    if !(residual_sup < opts.residual_gate) {
        return Err(Error::NotClassifiedForm(format!(
            "normalized map deviates from C_{k} by {:e}",
            to_f64(residual_sup)
        )));
    }
    Ok(NormalizationResult {
        k,
        sigma,
        tau,
        residual_sup,
        kappa,
        strategy: Strategy::Direct,
    })
}

/// Validation grid: `grid_interior` interior and `grid_boundary` boundary
/// samples of the source domain.
pub fn validation_grid<T: Real>(params: &DomainParams<T>, interior: usize, boundary: usize, seed: u64) -> Vec<DomainPoint<T>> {
    let mut pts = sample_interior(params, seed.wrapping_add(0x9e37), interior);
    pts.extend(sample_boundary(params, seed.wrapping_add(0x79b9), boundary));
    pts
}

/// `max |tau(F(sigma(p))) - target(p)|` over the validation grid.
pub fn grid_residual<T: Real, M: HolomorphicMap<T> + ?Sized>(
    f: &M,
    sigma: &FbhAut<T>,
    tau: &FbhAut<T>,
    target: &MapDescriptor<T>,
    opts: &NormalizeOptions<T>,
) -> Result<T> {
    let grid = validation_grid(&f.in_params(), opts.grid_interior, opts.grid_boundary, opts.seed);
    let devs: Vec<T> = grid
        .par_iter()
        .map(|p| {
            let lhs = tau.apply(&eval_at(f, &sigma.apply(p)?)?)?;
            Ok(lhs.max_abs_diff(&target.evaluate(p)?))
        })
        .collect::<Result<_>>()?;
    Ok(max_of(devs))
}

/// Gates for [`normalize_ballfit`].
#[derive(Debug, Clone, Copy)]
pub struct BallFitOptions<T> {
    pub h_tol: T,
    /// Bound on `|a|` and on `|2 lambda - 4 a_0 - 2/lambda|`.
    pub constraint_tol: T,
    pub k_gate: T,
    pub base_tol: T,
    /// Number of sphere pairs; `None` uses twice the minimum.
    pub pairs: Option<usize>,
    pub seed: u64,
}

impl<T: Real> Default for BallFitOptions<T> {
    fn default() -> Self {
        Self {
            h_tol: lit(1e-6),
            constraint_tol: lit(1e-5),
            k_gate: lit(1e-6),
            base_tol: lit(1e-9),
            pairs: None,
            seed: 0,
        }
    }
}

/// Outcome of the ball-fit strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct BallFitReport<T: Real> {
    pub k: u32,
    /// `-1/lambda^2`.
    #[serde(with = "complex_pair")]
    pub kappa: Complex<T>,
    #[serde(with = "complex_pair")]
    pub lambda: Complex<T>,
    #[serde(with = "complex_pair")]
    pub a0: Complex<T>,
    pub a_vec: CVector<T>,
    pub a_norm: T,
    /// `|2 lambda - 4 a_0 - 2/lambda|`.
    pub dilation_residual: T,
    pub relation_residual: T,
    pub re_lambda: T,
    pub h_residual: T,
    pub fit_action_residual: T,
    pub algebraic_residual: T,
    pub complement_residual: T,
    pub pairs_used: usize,
    pub params: CanonicalParams<T>,
}

fn fit_failed(stage: &str, e: Error) -> Error {
    Error::FitFailed(format!("{stage}: {e}"))
}

/// Ball-fit strategy: `G = to_ball o tau_1 o F o from_ball` near `Q`, fitted
/// as a projective transformation and read through its canonical form.
pub fn normalize_ballfit<T: Real, M: HolomorphicMap<T> + ?Sized>(
    f: &M,
    opts: &BallFitOptions<T>,
) -> Result<BallFitReport<T>> {
    let (pin, pout) = (f.in_params(), f.out_params());
    check_hartogs_pair(&pin, &pout)?;
    let (n, big_n) = (pin.n, pout.n);
    if big_n < n {
        return Err(Error::DimensionMismatch(format!("target dimension N = {big_n} below n = {n}")));
    }
    let tau1 = base_transport(f, opts.base_tol)?;
    let f1 = |p: &DomainPoint<T>| -> Result<DomainPoint<T>> { tau1.apply(&eval_at(f, p)?) };

    // |dw'/dw| at P bounds how far arg w may range before arg w' wraps.
    let base = pin.base_point();
    let j1 = tau1.jacobian(&eval_at(f, &base)?)?.checked_mul(&f.jacobian(&base)?)?;
    let dw = j1[(big_n, n)].norm().to_f64().unwrap_or(1.0).max(1.0);
    let theta_max = PI / (4.0 * dw);

    let chart = Chart::new(pin.mu)?;
    let count = opts.pairs.unwrap_or(2 * min_pairs(n + 1, big_n + 1));
    let mu = pin.mu.to_f64().unwrap_or(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let sources: Vec<DomainPoint<T>> = (0..count)
        .map(|_| {
            let dir: CVector<T> = unit_sphere(n, &mut rng);
            let r = 1.5 * rng.random::<f64>() / mu.sqrt();
            let theta = theta_max * (2.0 * rng.random::<f64>() - 1.0);
            let w = Complex::from_polar((-mu * r * r / 2.0).exp(), theta);
            DomainPoint::with_scalar_w(dir.scale_real(lit(r)), Complex::new(lit(w.re), lit(w.im)))
        })
        .collect();
    let pairs: Vec<(CVector<T>, CVector<T>)> = sources
        .par_iter()
        .map(|p| {
            let x = chart.point_to_ball(p).map_err(|e| fit_failed("source chart", e))?;
            let y = chart.point_to_ball(&f1(p)?).map_err(|e| fit_failed("target chart", e))?;
            Ok((x, y))
        })
        .collect::<Result<_>>()?;

    let fit = fit_projective_map(
        &pairs,
        n + 1,
        big_n + 1,
        FitOptions {
            h_tol: opts.h_tol,
            ..FitOptions::default()
        },
    )
    .map_err(|e| fit_failed("projective fit", e))?;
    let cf = canonical_form_with(
        &fit.transform,
        CanonicalOptions {
            fix_tol: lit(1e-7),
            block_tol: lit(1e-6),
        },
    )
    .map_err(|e| fit_failed("canonical form", e))?;
    let d = &cf.diagnostics;
    let p = &cf.params;
    let a_norm = p.a.norm();
    if !(a_norm <= opts.constraint_tol) || !(d.dilation_constraint <= opts.constraint_tol) {
        return Err(Error::ConstraintResidualLarge(format!(
            "|a| = {:e}, |2 lambda - 4 a0 - 2/lambda| = {:e}",
            to_f64(a_norm),
            to_f64(d.dilation_constraint)
        )));
    }
    let kappa = p.kappa();
    let k_real = kappa.re.round();
    if !(k_real >= T::one()) || !((kappa - Complex::new(k_real, T::zero())).norm() <= opts.k_gate) {
        return Err(Error::NotClassifiedForm(format!("kappa = {kappa} is not a positive integer")));
    }
    Ok(BallFitReport {
        k: k_real.to_u32().unwrap_or(0),
        kappa,
        lambda: p.lambda,
        a0: p.a0,
        a_vec: p.a.clone(),
        a_norm,
        dilation_residual: d.dilation_constraint,
        relation_residual: d.relation_residual,
        re_lambda: d.re_lambda,
        h_residual: fit.h_residual,
        fit_action_residual: fit.action_residual,
        algebraic_residual: fit.algebraic_residual,
        complement_residual: d.complement_residual,
        pairs_used: pairs.len(),
        params: cf.params.clone(),
    })
}

/// Preimages of `target` found by inverting a descriptor stage by stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Fiber<T: Real> {
    pub preimages: Vec<DomainPoint<T>>,
}

impl<T: Real> Fiber<T> {
    pub fn count(&self) -> usize {
        self.preimages.len()
    }
}

/// Number of preimages of a generic `target` (`w != 0`).
pub fn fiber_count<T: Real>(f: &MapDescriptor<T>, target: &DomainPoint<T>) -> Result<usize> {
    Ok(fiber(f, target)?.count())
}

pub fn fiber<T: Real>(f: &MapDescriptor<T>, target: &DomainPoint<T>) -> Result<Fiber<T>> {
    let pout = f.out_params();
    if target.z.len() != pout.n || target.w.len() != pout.m {
        return Err(Error::DimensionMismatch("target does not live in the target domain".into()));
    }
    target.z.validate("target z")?;
    target.w.validate("target w")?;
    let scale = T::one().max(target.coords().max_abs());
    let tol = lit::<T>(1e-9) * scale;
    let mut cands = vec![target.clone()];
    for (i, stage) in f.stages().iter().enumerate().rev() {
        let mut next = Vec::new();
        for s in &cands {
            match stage {
                Stage::Aut(g) => next.push(g.inverse().apply(s)?),
                Stage::Power { k } | Stage::Embed { k, .. } => {
                    let w = s.w[0];
                    if w.is_zero() {
                        return Err(Error::NonGenericTarget(format!("w vanishes before stage {i}")));
                    }
                    let n_in = n_in_before(f, i);
                    if s.z.slice(n_in, s.z.len()).max_abs() > tol {
                        continue;
                    }
                    let z = s.z.slice(0, n_in).scale_real(T::one() / lit::<T>(*k as f64).sqrt());
                    let kf = *k as f64;
                    let (r, arg) = (w.norm().to_f64().unwrap_or(0.0), w.arg().to_f64().unwrap_or(0.0));
                    for j in 0..*k {
                        let root = Complex::from_polar(r.powf(1.0 / kf), (arg + 2.0 * PI * j as f64) / kf);
                        next.push(DomainPoint::with_scalar_w(z.clone(), Complex::new(lit(root.re), lit(root.im))));
                    }
                }
                Stage::ScaleW { factor } => {
                    if factor.is_zero() {
                        return Err(Error::NonGenericTarget(format!("stage {i} collapses w")));
                    }
                    next.push(DomainPoint::new(s.z.clone(), s.w.scale(Complex::new(T::one(), T::zero()) / *factor)));
                }
                Stage::Constant { .. } => {
                    return Err(Error::NotClassifiedForm(format!(
                        "stage {i} is constant; its fibers are not finite"
                    )));
                }
            }
        }
        cands = next;
    }
    if target.w.iter().all(|x| x.is_zero()) {
        return Err(Error::NonGenericTarget("target has w = 0".into()));
    }
    let mut pre: Vec<DomainPoint<T>> = Vec::new();
    for p in cands {
        let img = f.evaluate(&p)?;
        if fiber_distance(&img, target) <= lit(1e-8) && pre.iter().all(|q| fiber_distance(q, &p) > lit(1e-7)) {
            pre.push(p);
        }
    }
    Ok(Fiber { preimages: pre })
}

/// Distance with `z` measured on the unit scale and `w` relative to its size,
/// which may be exponentially small.
fn fiber_distance<T: Real>(a: &DomainPoint<T>, b: &DomainPoint<T>) -> T {
    let dz = a.z.max_abs_diff(&b.z) / T::one().max(a.z.max_abs()).max(b.z.max_abs());
    let wa = a.w.max_abs();
    let wb = b.w.max_abs();
    let dw = a.w.max_abs_diff(&b.w);
    let ws = wa.max(wb);
    dz.max(if ws.is_zero() { dw } else { dw / ws })
}

/// `z`-dimension entering stage `i`.
fn n_in_before<T: Real>(f: &MapDescriptor<T>, i: usize) -> usize {
    let mut n = f.in_params().n;
    for s in &f.stages()[..i] {
        n = match s {
            Stage::Embed { n_out, .. } => *n_out,
            Stage::Constant { point } => point.z.len(),
            _ => n,
        };
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainParams;
    use crate::mapsys::FiniteDifference;
    use crate::scalar::c;

    type MD = MapDescriptor<f64>;

    fn opts() -> NormalizeOptions<f64> {
        NormalizeOptions::default()
    }

    #[test]
    fn proper_examples() {
        let r = verify_proper(&MD::power(2, 2, 1.0).unwrap(), 0, 200).unwrap();
        assert!(r.pass && r.max_boundary_residual < 1e-10);
        assert_eq!(r.samples_used, 400);
        let id = MD::power(3, 1, 0.5).unwrap();
        assert!(verify_proper(&id, 1, 100).unwrap().pass);
        let params = DomainParams::hartogs(1, 1.0).unwrap();
        let konst = MD::new(
            params,
            params,
            vec![Stage::Constant { point: DomainPoint::with_scalar_w(CVector::zeros(1), c(0.5, 0.0)) }],
        )
        .unwrap();
        let r = verify_proper(&konst, 2, 100).unwrap();
        assert!(!r.pass);
        // |r| of the constant is 0.75; boundary residuals approach it
        assert!(r.max_boundary_residual > 0.5 && r.max_boundary_residual <= 0.75);
    }

    #[test]
    fn power_two_normalizes() {
        let f = MD::power(2, 2, 1.0).unwrap();
        let res = normalize_self(&f, &opts()).unwrap();
        assert_eq!(res.k, 2);
        assert!(res.residual_sup < 1e-10);
        assert!(res.tau.max_field_diff(&FbhAut::identity(f.out_params())) < 1e-12);
        let id = MD::power(3, 1, 1.0).unwrap();
        assert_eq!(normalize_self(&id, &opts()).unwrap().k, 1);
    }

    #[test]
    fn fixtures_recover_k() {
        for (seed, (n, k)) in [(1, 1), (2, 3), (4, 6), (8, 2)].into_iter().enumerate() {
            let f = MD::classified_fixture(n, n, k, 1.0, 0.5, seed as u64).unwrap();
            let res = normalize_self(&f, &opts()).unwrap();
            assert_eq!(res.k, k);
            assert!(res.residual_sup < 1e-8, "{}", res.residual_sup);
        }
    }

    #[test]
    fn nonequidim_fixtures() {
        let e = MD::embed(2, 3, 1, 1.0).unwrap();
        let res = normalize_nonequidim(&e, &opts()).unwrap();
        assert_eq!(res.k, 1);
        assert!(res.residual_sup < 1e-10);
        let f = MD::classified_fixture(3, 5, 4, 2.0, 0.5, 11).unwrap();
        assert_eq!(normalize_nonequidim(&f, &opts()).unwrap().k, 4);
        let bad = MD::embed(2, 4, 1, 1.0).unwrap();
        assert!(matches!(normalize_nonequidim(&bad, &opts()), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn finite_difference_oracle_uses_loose_gate() {
        let f = MD::classified_fixture(2, 2, 3, 1.0, 0.5, 5).unwrap();
        let res = normalize_self(&FiniteDifference(f), &opts()).unwrap();
        assert_eq!(res.k, 3);
    }

    #[test]
    fn improper_maps_are_rejected() {
        let f = MD::classified_fixture(2, 2, 2, 1.0, 0.5, 3).unwrap();
        let shrunk = f
            .then(Stage::ScaleW { factor: c(0.9, 0.0) }, f.out_params())
            .unwrap();
        assert!(!verify_proper(&shrunk, 0, 100).unwrap().pass);
        assert!(matches!(normalize_self(&shrunk, &opts()), Err(Error::NotProper(_))));
        let no_check = NormalizeOptions { proper_samples: 0, ..opts() };
        assert!(matches!(normalize_self(&shrunk, &no_check), Err(Error::NotProper(_))));
    }

    #[test]
    fn ballfit_agrees_with_direct() {
        for (seed, (n, big_n, k)) in [(1, 1, 1), (2, 2, 2), (3, 3, 3), (2, 3, 2)].into_iter().enumerate() {
            let f = MD::classified_fixture(n, big_n, k, 1.0, 0.5, seed as u64).unwrap();
            let bf = normalize_ballfit(&f, &BallFitOptions::default()).unwrap();
            assert_eq!(bf.k, k);
            assert!((bf.kappa - c(k as f64, 0.0)).norm() < 1e-6);
            assert!(bf.a_norm < 1e-6);
            assert!(bf.relation_residual < 1e-7);
        }
    }

    #[test]
    fn fiber_examples() {
        let f = MD::power(1, 2, 1.0).unwrap();
        let t = DomainPoint::with_scalar_w(CVector::zeros(1), c(0.25, 0.0));
        assert_eq!(fiber_count(&f, &t).unwrap(), 2);
        let id = MD::power(1, 1, 1.0).unwrap();
        assert_eq!(fiber_count(&id, &t).unwrap(), 1);
        let zero = DomainPoint::with_scalar_w(CVector::zeros(1), c(0.0, 0.0));
        assert!(matches!(fiber_count(&f, &zero), Err(Error::NonGenericTarget(_))));
        for seed in 0..4u64 {
            let k = 1 + seed as u32 * 2;
            let g = MD::classified_fixture(2, 3, k, 1.0, 0.5, seed).unwrap();
            let src = sample_interior(&g.in_params(), seed, 1).pop().unwrap();
            let tgt = g.evaluate(&src).unwrap();
            assert_eq!(fiber_count(&g, &tgt).unwrap(), k as usize);
        }
    }

    #[test]
    fn fiber_of_tiny_w_target() {
        // far out in z the admissible w is exponentially small
        let f = MD::power(2, 6, 2.0).unwrap();
        let z = CVector::new(vec![c(3.0, 0.0), c(0.0, -2.0)]);
        let src = DomainPoint::with_scalar_w(z, c(1e-6, 2e-6));
        let tgt = f.evaluate(&src).unwrap();
        assert!(tgt.w[0].norm() < 1e-30);
        let fib = fiber(&f, &tgt).unwrap();
        assert_eq!(fib.count(), 6);
        assert!(fib.preimages.iter().any(|p| fiber_distance(p, &src) < 1e-12));
    }
}
