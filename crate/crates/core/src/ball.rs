//! Transfer of the disk construction to the unit ball of `ℂ^d` through a
//! family of homogeneous polynomials that is bounded by 1 on the sphere and
//! has no common small values there.
//!
//! Only the Euclidean ball ships, so the gauge is `ρ(z) = |z|`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::construction::{h_for_delta, ConstructionState};
use crate::envelope::DiskFunction;
use crate::grid::{chebyshev_radii, uniform_angles};
use crate::numeric::log_sum_exp;
use crate::scaled::{sum_unit_terms, ScaledComplex};
use crate::series::{split_parity, unit_pow, LacunarySeries};
use crate::weight::WeightFunction;
use crate::{Error, Result};

pub const MIN_SPHERE_SAMPLES: usize = 64;
const SUP_TOL: f64 = 1e-9;
const HOMOGENEITY_TOL: f64 = 1e-10;
const HOMOGENEITY_POINTS: usize = 64;

/// `Q` homogeneous polynomials `W_q[n]` of each supported degree `n`.
///
/// `q` is 0-based. Implementations must be safe to call concurrently.
pub trait PolynomialFamily: Send + Sync {
    fn dimension(&self) -> usize;
    fn q_count(&self) -> usize;
    fn delta_claimed(&self) -> f64;

    fn supports_degree(&self, _n: u64) -> bool {
        true
    }

    fn eval(&self, q: usize, n: u64, z: &[Complex64]) -> Result<Complex64>;

    /// Same value without underflow for large degrees.
    fn eval_scaled(&self, q: usize, n: u64, z: &[Complex64]) -> Result<ScaledComplex> {
        Ok(ScaledComplex::from_complex(self.eval(q, n, z)?))
    }

    /// Plugin form: coordinates as interleaved `(re, im)` pairs.
    fn eval_interleaved(&self, q: usize, n: u64, coords: &[f64]) -> Result<Complex64> {
        if coords.len() != 2 * self.dimension() {
            return Err(Error::input(format!(
                "expected {} reals, got {}",
                2 * self.dimension(),
                coords.len()
            )));
        }
        let z: Vec<Complex64> = coords.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        self.eval(q, n, &z)
    }
}

/// `z^n` in scaled form, with the phase from renormalised repeated squaring.
pub fn pow_scaled(z: Complex64, n: u64) -> ScaledComplex {
    if n == 0 {
        return ScaledComplex::from_complex(Complex64::new(1.0, 0.0));
    }
    let r = z.norm();
    if r == 0.0 {
        return ScaledComplex::ZERO;
    }
    ScaledComplex::new(unit_pow(z / r, n), n as f64 * r.ln())
}

fn scaled_by(s: ScaledComplex, factor: f64) -> ScaledComplex {
    if s.is_zero() {
        s
    } else {
        ScaledComplex::new(s.mantissa * factor, s.log_scale)
    }
}

/// `W_1[n](z) = scale · z^n` on `ℂ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub delta: f64,
    pub scale: f64,
}

impl Default for Monomial {
    fn default() -> Self {
        Monomial { delta: 1.0, scale: 1.0 }
    }
}

impl PolynomialFamily for Monomial {
    fn dimension(&self) -> usize {
        1
    }

    fn q_count(&self) -> usize {
        1
    }

    fn delta_claimed(&self) -> f64 {
        self.delta
    }

    fn eval(&self, q: usize, n: u64, z: &[Complex64]) -> Result<Complex64> {
        Ok(self.eval_scaled(q, n, z)?.to_complex())
    }

    fn eval_scaled(&self, q: usize, n: u64, z: &[Complex64]) -> Result<ScaledComplex> {
        if q != 0 || z.len() != 1 {
            return Err(Error::input(format!(
                "monomial family: bad index {q} or dimension {}",
                z.len()
            )));
        }
        Ok(scaled_by(pow_scaled(z[0], n), self.scale))
    }
}

/// `W_q[n](z) = scale · z_q^n`, `Q = d`. It has no uniform lower bound on
/// the sphere for `d ≥ 2`: at the diagonal the maximum is `d^{-n/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coordinate {
    pub d: usize,
    pub delta: f64,
    pub scale: f64,
}

impl PolynomialFamily for Coordinate {
    fn dimension(&self) -> usize {
        self.d
    }

    fn q_count(&self) -> usize {
        self.d
    }

    fn delta_claimed(&self) -> f64 {
        self.delta
    }

    fn eval(&self, q: usize, n: u64, z: &[Complex64]) -> Result<Complex64> {
        Ok(self.eval_scaled(q, n, z)?.to_complex())
    }

    fn eval_scaled(&self, q: usize, n: u64, z: &[Complex64]) -> Result<ScaledComplex> {
        if q >= self.d || z.len() != self.d {
            return Err(Error::input(format!(
                "coordinate family: bad index {q} or dimension {}",
                z.len()
            )));
        }
        Ok(scaled_by(pow_scaled(z[q], n), self.scale))
    }
}

/// JSON declaration of a family: `{"d": 2, "Q": 2, "delta": 0.5, "kind": "coordinate"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyManifest {
    pub d: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    pub delta: f64,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl FamilyManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<Arc<dyn PolynomialFamily>> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::input(format!("delta = {} outside (0, 1]", self.delta)));
        }
        let scale = self.scale.unwrap_or(1.0);
        match self.kind.as_str() {
            "monomial" => {
                if self.d != 1 || self.q != 1 {
                    return Err(Error::input("the monomial family has d = 1 and Q = 1"));
                }
                Ok(Arc::new(Monomial {
                    delta: self.delta,
                    scale,
                }))
            }
            "coordinate" => {
                if self.d == 0 || self.q != self.d {
                    return Err(Error::input("the coordinate family has Q = d >= 1"));
                }
                Ok(Arc::new(Coordinate {
                    d: self.d,
                    delta: self.delta,
                    scale,
                }))
            }
            other => Err(Error::input(format!("unknown family kind {other:?}"))),
        }
    }
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut n = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= n).all(|&p| !n.is_multiple_of(p)) {
            out.push(n);
        }
        n += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut v = 0.0;
    while i > 0 {
        v += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    v
}

/// Deterministic points on the unit sphere of `ℂ^d`.
///
/// On the circle these are the `count` equispaced points. For `d ≥ 2` the
/// coordinate axes and the diagonal come first, followed by a randomly
/// shifted Halton sequence pushed to the sphere by Box–Muller.
pub fn sphere_points(d: usize, count: usize, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    if d == 0 {
        return Err(Error::input("dimension must be positive"));
    }
    if count < MIN_SPHERE_SAMPLES {
        return Err(Error::input(format!(
            "at least {MIN_SPHERE_SAMPLES} sphere samples are needed"
        )));
    }
    if d == 1 {
        return Ok(uniform_angles(count)
            .into_iter()
            .map(|a| vec![Complex64::from_polar(1.0, a)])
            .collect());
    }
    let mut points = Vec::with_capacity(count);
    for i in 0..d {
        let mut p = vec![Complex64::new(0.0, 0.0); d];
        p[i] = Complex64::new(1.0, 0.0);
        points.push(p);
    }
    points.push(vec![Complex64::new((d as f64).sqrt().recip(), 0.0); d]);
    points.truncate(count);

    let bases = primes(2 * d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..2 * d).map(|_| rng.gen::<f64>()).collect();
    let mut index = 1u64;
    while points.len() < count {
        let u: Vec<f64> = bases
            .iter()
            .zip(&shift)
            .map(|(&b, &s)| (radical_inverse(index, b) + s).fract())
            .collect();
        index += 1;
        let g: Vec<Complex64> = (0..d)
            .map(|i| {
                let u1 = u[2 * i].max(f64::MIN_POSITIVE);
                Complex64::from_polar((-2.0 * u1.ln()).sqrt(), 2.0 * PI * u[2 * i + 1])
            })
            .collect();
        let norm = g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            points.push(g.into_iter().map(|c| c / norm).collect());
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeReport {
    pub degree: u64,
    /// `max_{q, ζ} |W_q[n](ζ)|`.
    pub sup: f64,
    /// `min_ζ max_q |W_q[n](ζ)|`.
    pub min_max: f64,
    pub min_max_witness: usize,
    /// Largest relative residual of `W(λζ) = λ^n W(ζ)`.
    pub homogeneity_residual: f64,
    pub sup_passed: bool,
    pub min_max_passed: bool,
    pub homogeneity_passed: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyReport {
    pub degrees: Vec<DegreeReport>,
    pub passed: bool,
    pub delta_claimed: f64,
    pub sphere_samples: usize,
}

fn provider_value(fam: &dyn PolynomialFamily, q: usize, n: u64, z: &[Complex64]) -> Result<ScaledComplex> {
    let v = fam
        .eval_scaled(q, n, z)
        .map_err(|e| Error::numeric(format!("provider failed at degree {n}, index {q}: {e}")))?;
    if !v.mantissa.re.is_finite() || !v.mantissa.im.is_finite() || v.log_scale.is_nan() {
        return Err(Error::numeric(format!(
            "provider returned a non-finite value at degree {n}, index {q}"
        )));
    }
    Ok(v)
}

/// Rounding `λζ` moves the argument by about `ε`, and degree `n` multiplies
/// that by `n`.
fn homogeneity_tol(n: u64) -> f64 {
    HOMOGENEITY_TOL + 4.0 * n as f64 * f64::EPSILON
}

fn relative_gap(a: ScaledComplex, b: ScaledComplex) -> f64 {
    match (a.is_zero(), b.is_zero()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => {
            let s = a.log_scale.max(b.log_scale);
            let ca = a.mantissa * (a.log_scale - s).exp();
            let cb = b.mantissa * (b.log_scale - s).exp();
            (ca - cb).norm() / ca.norm().max(cb.norm())
        }
    }
}

/// Measures the sup bound, the common lower bound and homogeneity of the
/// family on `sphere_samples` deterministic sphere points for each degree.
pub fn verify_family(
    fam: &dyn PolynomialFamily,
    degrees: &[u64],
    sphere_samples: usize,
    seed: u64,
) -> Result<FamilyReport> {
    let delta = fam.delta_claimed();
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::input(format!("claimed delta = {delta} outside (0, 1]")));
    }
    if fam.q_count() == 0 {
        return Err(Error::input("the family has no polynomials"));
    }
    let d = fam.dimension();
    let points = sphere_points(d, sphere_samples, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let lambdas: Vec<Complex64> = (0..HOMOGENEITY_POINTS.min(points.len()))
        .map(|_| Complex64::from_polar(rng.gen_range(0.5..1.0), rng.gen_range(0.0..2.0 * PI)))
        .collect();

    let degrees = degrees
        .par_iter()
        .map(|&n| {
            if !fam.supports_degree(n) {
                return Err(Error::input(format!("the family does not provide degree {n}")));
            }
            let mut log_sup = f64::NEG_INFINITY;
            let mut log_min_max = f64::INFINITY;
            let mut min_max_witness = 0;
            for (i, z) in points.iter().enumerate() {
                let mut best = f64::NEG_INFINITY;
                for q in 0..fam.q_count() {
                    best = best.max(provider_value(fam, q, n, z)?.log_abs());
                }
                log_sup = log_sup.max(best);
                if best < log_min_max {
                    log_min_max = best;
                    min_max_witness = i;
                }
            }
            let mut residual = 0.0f64;
            for (z, &lambda) in points.iter().zip(&lambdas) {
                let scaled: Vec<Complex64> = z.iter().map(|c| c * lambda).collect();
                let ln = pow_scaled(lambda, n);
                for q in 0..fam.q_count() {
                    let lhs = provider_value(fam, q, n, &scaled)?;
                    let rhs = ln.mul(&provider_value(fam, q, n, z)?);
                    residual = residual.max(relative_gap(lhs, rhs));
                }
            }
            let sup = log_sup.exp();
            let min_max = log_min_max.exp();
            let sup_passed = sup <= 1.0 + SUP_TOL;
            let min_max_passed = min_max >= delta - SUP_TOL;
            let homogeneity_passed = residual <= homogeneity_tol(n);
            Ok(DegreeReport {
                degree: n,
                sup,
                min_max,
                min_max_witness,
                homogeneity_residual: residual,
                sup_passed,
                min_max_passed,
                homogeneity_passed,
                passed: sup_passed && min_max_passed && homogeneity_passed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FamilyReport {
        passed: degrees.iter().all(|r| r.passed),
        degrees,
        delta_claimed: delta,
        sphere_samples,
    })
}

/// `f_{q+sQ}(z) = Σ_j a_{2j+1+s} W_q[e_{2j+1+s}](z)` for `s ∈ {0, 1}` and
/// `q < Q`, followed by `f_{2Q} ≡ 1` (0-based).
#[derive(Clone)]
pub struct BallFunctionSystem {
    family: Arc<dyn PolynomialFamily>,
    parity: [LacunarySeries; 2],
    pub h: f64,
    pub t0: f64,
    pub t_max: f64,
    pub delta: f64,
    pub family_report: FamilyReport,
}

impl std::fmt::Debug for BallFunctionSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BallFunctionSystem")
            .field("d", &self.family.dimension())
            .field("Q", &self.family.q_count())
            .field("parity", &self.parity)
            .field("h", &self.h)
            .field("t0", &self.t0)
            .field("t_max", &self.t_max)
            .field("delta", &self.delta)
            .finish()
    }
}

/// Checks the gates and assembles the functions. The family is verified on
/// every exponent of the state.
pub fn build_ball_functions(
    state: &ConstructionState,
    family: Arc<dyn PolynomialFamily>,
    sphere_samples: usize,
    seed: u64,
) -> Result<BallFunctionSystem> {
    state.check_invariants()?;
    let delta = family.delta_claimed();
    let need = h_for_delta(delta)?;
    if state.h < need * (1.0 - 1e-12) {
        return Err(Error::precondition(format!(
            "delta = {delta} needs h >= {need}, state has h = {}",
            state.h
        )));
    }
    if let Some(n) = state.es.iter().find(|&&n| !family.supports_degree(n)) {
        return Err(Error::input(format!("the family does not provide degree {n}")));
    }
    let family_report = verify_family(family.as_ref(), &state.es, sphere_samples, seed)?;
    if let Some(bad) = family_report.degrees.iter().find(|r| !r.passed) {
        return Err(Error::precondition(format!(
            "family fails at degree {}: sup {:e}, min-of-max {:e}, homogeneity residual {:e}",
            bad.degree, bad.sup, bad.min_max, bad.homogeneity_residual
        )));
    }
    let pair = split_parity(state)?;
    Ok(BallFunctionSystem {
        family,
        parity: [pair.g1, pair.g2],
        h: pair.h,
        t0: pair.t0,
        t_max: pair.t_max,
        delta,
        family_report,
    })
}

/// `(log|W|, unit phase)` per term of each parity series, for one direction.
type DirectionCache = Vec<[Vec<(f64, Complex64)>; 2]>;

impl BallFunctionSystem {
    /// `2Q + 1`.
    pub fn count(&self) -> usize {
        2 * self.family.q_count() + 1
    }

    pub fn dimension(&self) -> usize {
        self.family.dimension()
    }

    pub fn family(&self) -> &dyn PolynomialFamily {
        self.family.as_ref()
    }

    /// Coefficients and exponents shared by `f_{q+sQ}` for every `q`.
    pub fn parity_series(&self, s: usize) -> &LacunarySeries {
        &self.parity[s]
    }

    fn direction(&self, zeta: &[Complex64]) -> Result<DirectionCache> {
        (0..self.family.q_count())
            .map(|q| {
                let per = |s: usize| {
                    self.parity[s]
                        .terms()
                        .iter()
                        .map(|t| {
                            let v = provider_value(self.family.as_ref(), q, t.exponent, zeta)?;
                            if v.is_zero() {
                                Ok((f64::NEG_INFINITY, Complex64::new(1.0, 0.0)))
                            } else {
                                Ok((v.log_abs(), v.mantissa / v.mantissa.norm()))
                            }
                        })
                        .collect::<Result<Vec<_>>>()
                };
                Ok([per(0)?, per(1)?])
            })
            .collect()
    }

    fn eval_cached(&self, cache: &DirectionCache, m: usize, log_t: f64) -> ScaledComplex {
        let qn = self.family.q_count();
        if m == 2 * qn {
            return ScaledComplex::from_complex(Complex64::new(1.0, 0.0));
        }
        let (s, q) = (m / qn, m % qn);
        sum_unit_terms(
            self.parity[s]
                .terms()
                .iter()
                .zip(&cache[q][s])
                .map(move |(t, &(lw, u))| (t.log_coeff + t.exponent as f64 * log_t + lw, u)),
        )
    }

    /// `f_m(z)` for `|z| < 1`, `m < 2Q + 1`.
    pub fn eval(&self, m: usize, z: &[Complex64]) -> Result<ScaledComplex> {
        if m >= self.count() {
            return Err(Error::input(format!("function index {m} out of range")));
        }
        if z.len() != self.dimension() {
            return Err(Error::input("point has the wrong dimension"));
        }
        if m == self.count() - 1 {
            return Ok(ScaledComplex::from_complex(Complex64::new(1.0, 0.0)));
        }
        let t = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(t < 1.0) {
            return Err(Error::domain(format!("|z| = {t} is not inside the unit ball")));
        }
        if t == 0.0 {
            // Every exponent is positive, so the series vanish at the origin.
            return Ok(ScaledComplex::ZERO);
        }
        let zeta: Vec<Complex64> = z.iter().map(|c| c / t).collect();
        Ok(self.eval_cached(&self.direction(&zeta)?, m, t.ln()))
    }

    /// `log Σ_{m} |f_m(z)|` over all `2Q + 1` functions.
    pub fn log_modulus_sum(&self, z: &[Complex64]) -> Result<f64> {
        let logs = (0..self.count())
            .map(|m| Ok(self.eval(m, z)?.log_abs()))
            .collect::<Result<Vec<_>>>()?;
        Ok(log_sum_exp(logs))
    }

    /// The slice `λ ↦ f_m(λζ)` of the unit disk.
    pub fn slice<'a>(&'a self, m: usize, zeta: Vec<Complex64>) -> BallSlice<'a> {
        BallSlice { sys: self, m, zeta }
    }
}

pub struct BallSlice<'a> {
    sys: &'a BallFunctionSystem,
    m: usize,
    zeta: Vec<Complex64>,
}

impl BallSlice<'_> {
    fn value(&self, lambda: Complex64) -> Result<ScaledComplex> {
        let z: Vec<Complex64> = self.zeta.iter().map(|c| c * lambda).collect();
        self.sys.eval(self.m, &z)
    }
}

impl DiskFunction for BallSlice<'_> {
    fn eval(&self, lambda: Complex64) -> Result<Complex64> {
        Ok(self.value(lambda)?.to_complex())
    }

    fn log_abs(&self, lambda: Complex64) -> Result<f64> {
        Ok(self.value(lambda)?.log_abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallCheckOptions {
    pub sphere_samples: usize,
    pub seed: u64,
    /// Radii of the inner grid `|z| ≤ t0` used for the global constant.
    pub inner_radii: usize,
}

impl Default for BallCheckOptions {
    fn default() -> Self {
        BallCheckOptions {
            sphere_samples: 256,
            seed: 0,
            inner_radii: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallWitness {
    pub margin: f64,
    pub t: f64,
    pub point: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallReport {
    pub passed: bool,
    /// `log(2δ/5) - h`.
    pub log_lower_constant: f64,
    /// Smallest `log Σ_{m<2Q}|f_m| - (log(2δ/5) - h + log ω)`.
    pub worst: BallWitness,
    /// Smallest `C` with `ω(|z|) ≤ C Σ_m |f_m(z)|` on the sampled ball.
    pub log_c: f64,
    pub c: f64,
    pub c_witness_t: f64,
    pub t_points: usize,
    pub sphere_samples: usize,
}

/// Certifies `(2δ/5) e^{-h} ω(t) < Σ_{m<2Q} |f_m(tζ)|` on `t_grid` times the
/// sphere sample, with slack `1e-9 · max(1, |log ω|)`.
pub fn ball_lower_bound_check(
    sys: &BallFunctionSystem,
    w: &WeightFunction,
    t_grid: &[f64],
    opts: BallCheckOptions,
) -> Result<BallReport> {
    for &t in t_grid {
        if !(t > sys.t0 && t <= sys.t_max) {
            return Err(Error::input(format!(
                "t = {t} lies outside the verified range ({}, {}]",
                sys.t0, sys.t_max
            )));
        }
    }
    if opts.inner_radii < 2 {
        return Err(Error::input("the inner grid needs at least two radii"));
    }
    let points = sphere_points(sys.dimension(), opts.sphere_samples, opts.seed)?;
    let low = (2.0 * sys.delta / 5.0).ln() - sys.h;
    let outer: Vec<(f64, f64)> = t_grid
        .iter()
        .map(|&t| Ok((t, w.log_omega(t)?)))
        .collect::<Result<_>>()?;
    let inner: Vec<(f64, f64)> = chebyshev_radii(sys.t0, opts.inner_radii)
        .into_iter()
        .map(|t| Ok((t, w.log_omega(t)?)))
        .collect::<Result<_>>()?;
    let last = sys.count() - 1;

    // Per direction: (worst reduced margin, witness) and (largest log C, t).
    let per_point = points
        .par_iter()
        .enumerate()
        .map(|(i, zeta)| {
            let cache = sys.direction(zeta)?;
            let log_sum = |t: f64| -> (f64, f64) {
                if t == 0.0 {
                    return (f64::NEG_INFINITY, 0.0);
                }
                let lt = t.ln();
                let parts = log_sum_exp(
                    (0..last)
                        .map(|m| sys.eval_cached(&cache, m, lt).log_abs())
                        .collect::<Vec<_>>(),
                );
                (parts, crate::numeric::log_add_exp(parts, 0.0))
            };
            let mut worst = (
                f64::INFINITY,
                BallWitness {
                    margin: f64::INFINITY,
                    t: f64::NAN,
                    point: i,
                },
            );
            let mut c = (f64::NEG_INFINITY, f64::NAN);
            for &(t, lw) in &outer {
                let (parts, all) = log_sum(t);
                let margin = parts - (low + lw);
                let reduced = margin / lw.abs().max(1.0);
                if reduced < worst.0 {
                    worst = (reduced, BallWitness { margin, t, point: i });
                }
                if lw - all > c.0 {
                    c = (lw - all, t);
                }
            }
            for &(t, lw) in &inner {
                let (_, all) = log_sum(t);
                if lw - all > c.0 {
                    c = (lw - all, t);
                }
            }
            Ok((worst, c))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut worst = (
        f64::INFINITY,
        BallWitness {
            margin: f64::INFINITY,
            t: f64::NAN,
            point: 0,
        },
    );
    let mut c = (f64::NEG_INFINITY, f64::NAN);
    for (pw, pc) in per_point {
        if pw.0 < worst.0 {
            worst = pw;
        }
        if pc.0 > c.0 {
            c = pc;
        }
    }
    Ok(BallReport {
        passed: worst.0 > -1e-9,
        log_lower_constant: low,
        worst: worst.1,
        log_c: c.0,
        c: c.0.exp(),
        c_witness_t: c.1,
        t_points: t_grid.len(),
        sphere_samples: points.len(),
    })
}
