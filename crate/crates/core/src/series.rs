//! Lacunary series with positive coefficients, the parity split of a
//! constructed state, the two-sided modulus certificate and the final
//! rotation that removes the zeros inside the inner disk.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use crate::construction::ConstructionState;
use crate::grid::{chebyshev_radii, uniform_angles};
use crate::numeric::{log_add_exp, NeumaierSum};
use crate::scaled::{ScaledComplex, DROP_THRESHOLD};
use crate::weight::WeightFunction;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Term {
    pub log_coeff: f64,
    pub exponent: u64,
}

/// `Σ exp(log_coeff) z^exponent` over finitely many terms with strictly
/// increasing exponents.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LacunarySeries {
    terms: Vec<Term>,
}

/// `u^n` for a unit complex number by repeated squaring, renormalising
/// each product back to the circle.
pub fn unit_pow(u: Complex64, mut n: u64) -> Complex64 {
    let mut base = u;
    let mut acc = Complex64::new(1.0, 0.0);
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
            acc /= acc.norm();
        }
        n >>= 1;
        if n > 0 {
            base *= base;
            base /= base.norm();
        }
    }
    acc
}

/// `e^{2πi j/n}` for `j = 0..n`, indexed exactly.
#[derive(Debug, Clone)]
pub struct AngleLattice {
    n: u64,
    units: Vec<Complex64>,
}

impl AngleLattice {
    pub fn new(n: usize) -> Self {
        let units = uniform_angles(n)
            .into_iter()
            .map(|a| Complex64::from_polar(1.0, a))
            .collect();
        AngleLattice { n: n as u64, units }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn angle(&self, j: u64) -> f64 {
        2.0 * PI * (j % self.n) as f64 / self.n as f64
    }

    /// `e^{2πi·e·j/n}`, reducing `e·j` modulo `n` in integers.
    #[inline]
    pub fn power(&self, j: u64, e: u64) -> Complex64 {
        let idx = ((e % self.n) as u128 * (j % self.n) as u128 % self.n as u128) as usize;
        self.units[idx]
    }
}

#[inline]
fn term_log(t: &Term, log_r: f64) -> f64 {
    if t.exponent == 0 {
        t.log_coeff
    } else {
        t.log_coeff + t.exponent as f64 * log_r
    }
}

impl LacunarySeries {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        if !terms.windows(2).all(|w| w[0].exponent < w[1].exponent) {
            return Err(Error::input("exponents must be strictly increasing"));
        }
        if terms
            .iter()
            .any(|t| t.log_coeff.is_nan() || t.log_coeff == f64::INFINITY)
        {
            return Err(Error::input("log coefficients must be finite or -inf"));
        }
        Ok(LacunarySeries { terms })
    }

    pub fn from_pairs(pairs: &[(f64, u64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(log_coeff, exponent)| Term { log_coeff, exponent })
                .collect(),
        )
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn exponents(&self) -> Vec<u64> {
        self.terms.iter().map(|t| t.exponent).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Divides by `z^{e_min}`; the first term becomes a nonzero constant.
    pub fn shift_down(&self) -> LacunarySeries {
        let e0 = self.terms.first().map_or(0, |t| t.exponent);
        LacunarySeries {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    log_coeff: t.log_coeff,
                    exponent: t.exponent - e0,
                })
                .collect(),
        }
    }

    /// Value at `z`, `|z| < 1`.
    pub fn eval(&self, z: Complex64) -> Result<ScaledComplex> {
        let r = z.norm();
        if !(r < 1.0) {
            return Err(Error::domain(format!("|z| = {r} is not inside the unit disk")));
        }
        let unit = if r == 0.0 { Complex64::new(1.0, 0.0) } else { z / r };
        Ok(self.eval_unit(r.ln(), unit))
    }

    /// Value at `exp(log_r) · unit`; `log_r = -inf` is the origin.
    pub fn eval_unit(&self, log_r: f64, unit: Complex64) -> ScaledComplex {
        self.at_radius(log_r).eval_unit(unit)
    }

    /// Value at `exp(log_r) · e^{2πi j/n}` on an angle lattice.
    pub fn eval_lattice(&self, log_r: f64, lattice: &AngleLattice, j: u64) -> ScaledComplex {
        self.at_radius(log_r).eval_lattice(lattice, j)
    }

    /// The terms that matter on the circle of radius `exp(log_r)`.
    pub fn at_radius(&self, log_r: f64) -> RadialTerms {
        let top = self
            .terms
            .iter()
            .map(|t| term_log(t, log_r))
            .fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return RadialTerms { top, terms: Vec::new() };
        }
        let terms = self
            .terms
            .iter()
            .filter_map(|t| {
                let d = term_log(t, log_r) - top;
                (d >= DROP_THRESHOLD).then(|| (d.exp(), t.exponent))
            })
            .collect();
        RadialTerms { top, terms }
    }

    /// `log Σ |terms|` at radius `exp(log_r)`.
    pub fn log_abs_majorant(&self, log_r: f64) -> f64 {
        crate::numeric::log_sum_exp(self.terms.iter().map(|t| term_log(t, log_r)).collect::<Vec<_>>())
    }
}

/// A series restricted to one circle: magnitudes relative to the largest
/// term, terms below [`DROP_THRESHOLD`] removed. Evaluating many angles of
/// the same radius through it skips the magnitude work.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTerms {
    top: f64,
    terms: Vec<(f64, u64)>,
}

impl RadialTerms {
    fn sum(&self, phase: impl Fn(u64) -> Complex64) -> ScaledComplex {
        if self.top == f64::NEG_INFINITY {
            return ScaledComplex::ZERO;
        }
        let mut re = NeumaierSum::new();
        let mut im = NeumaierSum::new();
        for &(mag, e) in &self.terms {
            let u = phase(e);
            re.add(mag * u.re);
            im.add(mag * u.im);
        }
        ScaledComplex::new(Complex64::new(re.value(), im.value()), self.top)
    }

    pub fn eval_unit(&self, unit: Complex64) -> ScaledComplex {
        self.sum(|e| unit_pow(unit, e))
    }

    pub fn eval_lattice(&self, lattice: &AngleLattice, j: u64) -> ScaledComplex {
        self.sum(|e| lattice.power(j, e))
    }
}

/// `G₁` carries the odd-indexed lines, `G₂` the even-indexed ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPair {
    pub g1: LacunarySeries,
    pub g2: LacunarySeries,
    pub t0: f64,
    pub h: f64,
    /// Upper end of the radii where the truncation is certified.
    pub t_max: f64,
}

pub fn split_parity(state: &ConstructionState) -> Result<SeriesPair> {
    if state.is_empty() {
        return Err(Error::input("the state has no lines"));
    }
    let mut odd = Vec::new();
    let mut even = Vec::new();
    for (i, (line, &e)) in state.lines.iter().zip(&state.es).enumerate() {
        let term = Term {
            log_coeff: line.log_a,
            exponent: e,
        };
        if i % 2 == 0 {
            odd.push(term);
        } else {
            even.push(term);
        }
    }
    Ok(SeriesPair {
        g1: LacunarySeries::new(odd)?,
        g2: LacunarySeries::new(even)?,
        t0: state.t0(),
        h: state.h,
        t_max: state.t_verified(),
    })
}

pub fn eval_series(s: &LacunarySeries, z: Complex64) -> Result<ScaledComplex> {
    s.eval(z)
}

/// `log(|G₁(z)| + |G₂(z)|)`.
pub fn modulus_sum(pair: &SeriesPair, z: Complex64) -> Result<f64> {
    Ok(log_add_exp(pair.g1.eval(z)?.log_abs(), pair.g2.eval(z)?.log_abs()))
}

/// `(log|G₁|, log|G₂|)` at `t · e^{2πi j/n}`.
pub fn pair_on_lattice(pair: &SeriesPair, t: f64, lattice: &AngleLattice, j: u64) -> (f64, f64) {
    let log_r = t.ln();
    (
        pair.g1.eval_lattice(log_r, lattice, j).log_abs(),
        pair.g2.eval_lattice(log_r, lattice, j).log_abs(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridWitness {
    pub margin: f64,
    pub t: f64,
    pub theta: f64,
}

impl GridWitness {
    fn none() -> Self {
        GridWitness {
            margin: f64::INFINITY,
            t: f64::NAN,
            theta: f64::NAN,
        }
    }

    /// Keeps the smaller margin; ties keep `self`, so folding in grid order
    /// is deterministic.
    fn min(self, other: GridWitness) -> GridWitness {
        if other.margin < self.margin {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub passed: bool,
    pub lower_passed: bool,
    pub upper_passed: bool,
    /// `log(2/5) - h`.
    pub log_lower_constant: f64,
    /// `log 4`.
    pub log_upper_constant: f64,
    /// Smallest `log(|G₁|+|G₂|) - (log(2/5) - h + log ω)`.
    pub worst_lower: GridWitness,
    /// Smallest `log 4 + log ω - log(|G₁|+|G₂|)`.
    pub worst_upper: GridWitness,
    pub t_points: usize,
    pub theta_count: usize,
}

/// Per-point record of the sandwich computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichSample {
    pub t: f64,
    pub theta: f64,
    pub log_g1_abs: f64,
    pub log_g2_abs: f64,
    pub log_sum: f64,
    pub log_omega: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
}

fn check_t_range(pair: &SeriesPair, t_grid: &[f64]) -> Result<()> {
    for &t in t_grid {
        if !(t > pair.t0 && t <= pair.t_max) {
            return Err(Error::input(format!(
                "t = {t} lies outside the verified range ({}, {}]",
                pair.t0, pair.t_max
            )));
        }
    }
    Ok(())
}

/// Evaluates the sandwich at every `(t, θ_j = 2πj/theta_count)`, rows in
/// grid order (t-major).
pub fn sandwich_samples(
    pair: &SeriesPair,
    w: &WeightFunction,
    t_grid: &[f64],
    theta_count: usize,
) -> Result<Vec<SandwichSample>> {
    check_t_range(pair, t_grid)?;
    let lattice = AngleLattice::new(theta_count.max(1));
    let low = (2.0f64 / 5.0).ln() - pair.h;
    let high = 2.0 * LN_2;
    let rows = t_grid
        .par_iter()
        .map(|&t| {
            let log_omega = w.log_omega(t)?;
            let (r1, r2) = (pair.g1.at_radius(t.ln()), pair.g2.at_radius(t.ln()));
            Ok((0..theta_count as u64)
                .map(|j| {
                    let a = r1.eval_lattice(&lattice, j).log_abs();
                    let b = r2.eval_lattice(&lattice, j).log_abs();
                    let log_sum = log_add_exp(a, b);
                    SandwichSample {
                        t,
                        theta: lattice.angle(j),
                        log_g1_abs: a,
                        log_g2_abs: b,
                        log_sum,
                        log_omega,
                        lower_margin: log_sum - (low + log_omega),
                        upper_margin: high + log_omega - log_sum,
                    }
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Certifies `(2/5) e^{-h} ω(t) < |G₁(z)| + |G₂(z)| < 4 ω(t)` on the grid
/// with slack `1e-9 · max(1, |log ω|)`.
pub fn sandwich_check(
    pair: &SeriesPair,
    w: &WeightFunction,
    t_grid: &[f64],
    theta_count: usize,
) -> Result<SandwichReport> {
    if theta_count == 0 {
        return Err(Error::input("theta_count must be positive"));
    }
    check_t_range(pair, t_grid)?;
    let lattice = AngleLattice::new(theta_count);
    let low = (2.0f64 / 5.0).ln() - pair.h;
    let high = 2.0 * LN_2;
    // Margins are compared after dividing by the slack scale, so the pass
    // test is a single sign check on the reduced minimum.
    let per_t = t_grid
        .par_iter()
        .map(|&t| {
            let log_omega = w.log_omega(t)?;
            let scale = log_omega.abs().max(1.0);
            let mut lower = (GridWitness::none(), f64::INFINITY);
            let mut upper = (GridWitness::none(), f64::INFINITY);
            let (r1, r2) = (pair.g1.at_radius(t.ln()), pair.g2.at_radius(t.ln()));
            for j in 0..theta_count as u64 {
                let a = r1.eval_lattice(&lattice, j).log_abs();
                let b = r2.eval_lattice(&lattice, j).log_abs();
                let log_sum = log_add_exp(a, b);
                let theta = lattice.angle(j);
                let lm = log_sum - (low + log_omega);
                let um = high + log_omega - log_sum;
                if lm / scale < lower.1 {
                    lower = (GridWitness { margin: lm, t, theta }, lm / scale);
                }
                if um / scale < upper.1 {
                    upper = (GridWitness { margin: um, t, theta }, um / scale);
                }
            }
            Ok((lower, upper))
        })
        .collect::<Result<Vec<_>>>()?;
    let pick = |a: (GridWitness, f64), b: (GridWitness, f64)| if b.1 < a.1 { b } else { a };
    let init = (GridWitness::none(), f64::INFINITY);
    let lower = per_t.iter().map(|p| p.0).fold(init, pick);
    let upper = per_t.iter().map(|p| p.1).fold(init, pick);
    let lower_passed = lower.1 > -1e-9;
    let upper_passed = upper.1 > -1e-9;
    Ok(SandwichReport {
        passed: lower_passed && upper_passed,
        lower_passed,
        upper_passed,
        log_lower_constant: low,
        log_upper_constant: high,
        worst_lower: lower.0,
        worst_upper: upper.0,
        t_points: t_grid.len(),
        theta_count,
    })
}

/// Polar sample of the closed inner disk `|z| ≤ t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InnerGrid {
    pub radii: usize,
    pub angles: usize,
}

impl Default for InnerGrid {
    fn default() -> Self {
        InnerGrid { radii: 100, angles: 64 }
    }
}

/// The sandwich grid appended to the inner grid when measuring constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterGrid {
    pub t_grid: Vec<f64>,
    pub angles: usize,
}

/// `f₁(z) = G̃₁(e^{iθ*} z)` with `G̃₁ = G₁ / z^{e₁}`, `f₂ = G₂`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjustedPair {
    pub theta_star: f64,
    /// Index of `θ*` among the candidates `2πc / theta_count`.
    pub candidate: usize,
    pub theta_count: usize,
    pub e1: u64,
    pub f1: LacunarySeries,
    pub f2: LacunarySeries,
    pub log_c_low: f64,
    pub log_c_high: f64,
    pub c_low: f64,
    pub c_high: f64,
    pub low_witness: GridWitness,
    pub high_witness: GridWitness,
    pub t0: f64,
    pub inner: InnerGrid,
    pub outer_points: usize,
}

/// A sampled point of the adjusted pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjustedSample {
    pub t: f64,
    pub theta: f64,
    /// `log(|f₁| + |f₂|)`.
    pub log_sum: f64,
    pub log_omega: f64,
}

impl AdjustedPair {
    /// `log(|f₁(z)| + |f₂(z)|)`.
    pub fn log_modulus_sum(&self, z: Complex64) -> Result<f64> {
        let rot = Complex64::from_polar(1.0, self.theta_star);
        Ok(log_add_exp(
            self.f1.eval(rot * z)?.log_abs(),
            self.f2.eval(z)?.log_abs(),
        ))
    }

    /// Every point the constants were measured on, in grid order.
    pub fn samples(&self, w: &WeightFunction, outer: &OuterGrid) -> Result<Vec<AdjustedSample>> {
        let rings = rings(self.inner, outer, self.theta_count, self.t0);
        let c = self.candidate as u64;
        let rows = rings
            .par_iter()
            .map(|ring| {
                let log_omega = w.log_omega(ring.t)?;
                let terms = ring.radial(&self.f1, &self.f2);
                Ok((0..ring.count)
                    .map(|j| AdjustedSample {
                        t: ring.t,
                        theta: ring.theta(j),
                        log_sum: ring.eval(&terms, j, c),
                        log_omega,
                    })
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(rows.into_iter().flatten().collect())
    }
}

/// One radius of the adjustment grid: points `t · e^{2πi j·stride/L}`; the
/// rotation by candidate `c` adds `c · rot_stride` on the same lattice.
struct Ring {
    t: f64,
    lattice: Arc<AngleLattice>,
    stride: u64,
    rot_stride: u64,
    count: u64,
}

impl Ring {
    fn theta(&self, j: u64) -> f64 {
        self.lattice.angle(j * self.stride)
    }

    fn radial(&self, f1: &LacunarySeries, f2: &LacunarySeries) -> (RadialTerms, RadialTerms) {
        (f1.at_radius(self.t.ln()), f2.at_radius(self.t.ln()))
    }

    fn eval(&self, terms: &(RadialTerms, RadialTerms), j: u64, c: u64) -> f64 {
        let a = terms
            .0
            .eval_lattice(&self.lattice, j * self.stride + c * self.rot_stride);
        let b = terms.1.eval_lattice(&self.lattice, j * self.stride);
        log_add_exp(a.log_abs(), b.log_abs())
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Inner Chebyshev rings followed by the outer rings.
fn rings(inner: InnerGrid, outer: &OuterGrid, theta_count: usize, t0: f64) -> Vec<Ring> {
    let nc = theta_count as u64;
    let lattice_for = |n: usize| {
        let n = n as u64;
        let l = n / gcd(n, nc) * nc;
        (Arc::new(AngleLattice::new(l as usize)), l / n, l / nc, n)
    };
    let mut out = Vec::new();
    let (lattice, stride, rot_stride, count) = lattice_for(inner.angles);
    for t in chebyshev_radii(t0, inner.radii) {
        out.push(Ring {
            t,
            lattice: lattice.clone(),
            stride,
            rot_stride,
            count,
        });
    }
    if !outer.t_grid.is_empty() {
        let (lattice, stride, rot_stride, count) = lattice_for(outer.angles);
        for &t in &outer.t_grid {
            out.push(Ring {
                t,
                lattice: lattice.clone(),
                stride,
                rot_stride,
                count,
            });
        }
    }
    out
}

/// Chooses `θ*` among `theta_count` equispaced rotations to maximise the
/// minimum of `(|f₁| + |f₂|) / ω` over the inner grid, then measures the
/// constants over the inner grid together with `outer`.
pub fn zero_adjust(
    pair: &SeriesPair,
    w: &WeightFunction,
    theta_count: usize,
    inner: InnerGrid,
    outer: &OuterGrid,
) -> Result<AdjustedPair> {
    if pair.g1.is_empty() {
        return Err(Error::input("G1 has no terms"));
    }
    if theta_count == 0 || inner.radii < 2 || inner.angles == 0 {
        return Err(Error::input("adjustment grids must be nonempty"));
    }
    if outer.angles == 0 && !outer.t_grid.is_empty() {
        return Err(Error::input("the outer grid needs at least one angle"));
    }
    check_t_range(pair, &outer.t_grid)?;
    let e1 = pair.g1.terms()[0].exponent;
    let f1 = pair.g1.shift_down();
    let f2 = pair.g2.clone();
    debug_assert!(f1.terms()[0].exponent == 0 && f1.terms()[0].log_coeff.is_finite());

    let rings = rings(inner, outer, theta_count, pair.t0);
    let inner_rings = &rings[..inner.radii];
    let inner_logs: Vec<f64> = inner_rings.iter().map(|r| w.log_omega(r.t)).collect::<Result<_>>()?;
    let inner_terms: Vec<_> = inner_rings.iter().map(|r| r.radial(&f1, &f2)).collect();

    let objective: Vec<f64> = (0..theta_count as u64)
        .into_par_iter()
        .map(|c| {
            let mut worst = f64::INFINITY;
            for ((ring, lw), terms) in inner_rings.iter().zip(&inner_logs).zip(&inner_terms) {
                for j in 0..ring.count {
                    worst = worst.min(ring.eval(terms, j, c) - lw);
                }
            }
            worst
        })
        .collect();
    let mut candidate = 0;
    for (c, &v) in objective.iter().enumerate() {
        if v > objective[candidate] {
            candidate = c;
        }
    }
    if !(objective[candidate] > f64::NEG_INFINITY) {
        return Err(Error::AdjustmentFailed(format!(
            "every one of the {theta_count} rotations vanishes somewhere on the inner grid"
        )));
    }

    let c = candidate as u64;
    let per_ring = rings
        .par_iter()
        .map(|ring| {
            let lw = w.log_omega(ring.t)?;
            let terms = ring.radial(&f1, &f2);
            let mut low = GridWitness::none();
            let mut high = GridWitness {
                margin: f64::NEG_INFINITY,
                t: f64::NAN,
                theta: f64::NAN,
            };
            for j in 0..ring.count {
                let v = ring.eval(&terms, j, c) - lw;
                let here = GridWitness {
                    margin: v,
                    t: ring.t,
                    theta: ring.theta(j),
                };
                low = low.min(here);
                if v > high.margin {
                    high = here;
                }
            }
            Ok((low, high))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut low = GridWitness::none();
    let mut high = GridWitness {
        margin: f64::NEG_INFINITY,
        t: f64::NAN,
        theta: f64::NAN,
    };
    for (l, h) in per_ring {
        low = low.min(l);
        if h.margin > high.margin {
            high = h;
        }
    }
    if !(low.margin > f64::NEG_INFINITY) {
        return Err(Error::AdjustmentFailed(
            "the adjusted pair vanishes on the sampled grid".into(),
        ));
    }
    Ok(AdjustedPair {
        theta_star: 2.0 * PI * candidate as f64 / theta_count as f64,
        candidate,
        theta_count,
        e1,
        f1,
        f2,
        log_c_low: low.margin,
        log_c_high: high.margin,
        c_low: low.margin.exp(),
        c_high: high.margin.exp(),
        low_witness: low,
        high_witness: high,
        t0: pair.t0,
        inner,
        outer_points: outer.t_grid.len() * outer.angles,
    })
}

/// Consecutive exponent ratios of a state.
pub fn frequency_profile(state: &ConstructionState) -> Vec<f64> {
    crate::construction::frequency_profile(&state.es)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{run_construction, ConstructionParams, TangentLine};
    use crate::grid::{t_grid, Spacing};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state_with_exponents(es: &[u64]) -> ConstructionState {
        let k = es.len();
        ConstructionState {
            h: 2.0,
            x0: -0.05,
            xs: (0..=k).map(|i| -0.05 / (i as f64 + 1.0)).collect(),
            lines: es
                .iter()
                .map(|&e| TangentLine {
                    xi: f64::NAN,
                    delta: e as f64 - 0.5,
                    log_a: e as f64,
                })
                .collect(),
            es: es.to_vec(),
            t_stop: None,
            k_max: None,
            root_tol: None,
            truncation: None,
            weight: None,
        }
    }

    fn direct(s: &LacunarySeries, z: Complex64) -> Complex64 {
        s.terms()
            .iter()
            .map(|t| t.log_coeff.exp() * z.powu(t.exponent as u32))
            .sum()
    }

    #[test]
    fn parity_split() {
        let pair = split_parity(&state_with_exponents(&[3, 5, 8, 13])).unwrap();
        assert_eq!(pair.g1.exponents(), vec![3, 8]);
        assert_eq!(pair.g2.exponents(), vec![5, 13]);
        let single = split_parity(&state_with_exponents(&[4])).unwrap();
        assert!(single.g2.is_empty());
    }

    #[test]
    fn single_term_values() {
        let s = LacunarySeries::from_pairs(&[(0.0, 2)]).unwrap();
        let v = s.eval(Complex64::new(0.5, 0.0)).unwrap().to_complex();
        assert!((v - Complex64::new(0.25, 0.0)).norm() < 1e-16);
        let big = LacunarySeries::from_pairs(&[(1000.0, 1)]).unwrap();
        let v = big.eval(Complex64::new(0.5, 0.0)).unwrap();
        assert!((v.log_abs() - (1000.0 - LN_2)).abs() < 1e-12);
        assert!(v.mantissa.norm() >= 1.0 && v.mantissa.norm() < 2.0);
        assert!(matches!(s.eval(Complex64::new(1.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn five_random_terms_match_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut e = 0;
        let terms: Vec<(f64, u64)> = (0..5)
            .map(|_| {
                e += rng.gen_range(1..6);
                (rng.gen_range(0.0..10.0), e)
            })
            .collect();
        let s = LacunarySeries::from_pairs(&terms).unwrap();
        let z = Complex64::from_polar(0.7, PI / 3.0);
        let got = s.eval(z).unwrap().to_complex();
        let want = direct(&s, z);
        assert!((got - want).norm() / want.norm() < 1e-12);
    }

    #[test]
    fn modulus_sum_edge_cases() {
        let pair = split_parity(&state_with_exponents(&[3])).unwrap();
        let z = Complex64::new(0.3, 0.4);
        let only = pair.g1.eval(z).unwrap().log_abs();
        assert_eq!(modulus_sum(&pair, z).unwrap(), only);
        assert_eq!(modulus_sum(&pair, Complex64::new(0.0, 0.0)).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn lattice_powers_match_unit_pow() {
        let lat = AngleLattice::new(256);
        for (j, e) in [(3u64, 7u64), (255, 123_456_789), (17, 1)] {
            let a = lat.power(j, e);
            let b = unit_pow(Complex64::from_polar(1.0, lat.angle(j)), e);
            // The input angle carries one rounding error, amplified e times.
            assert!((a - b).norm() < 1e-13 + 4.0 * e as f64 * f64::EPSILON, "{j} {e}");
        }
    }

    #[test]
    fn tampered_pair_fails_upper_bound() {
        let w = WeightFunction::ramey_ullrich();
        let s = run_construction(&w, &ConstructionParams::from_t0(2.0, 0.95, 0.9999)).unwrap();
        let pair = split_parity(&s).unwrap();
        let grid = t_grid(0.95, 0.9999, 200, Spacing::Log);
        assert!(sandwich_check(&pair, &w, &grid, 32).unwrap().passed);
        let mut bad = pair.clone();
        bad.g2.terms[0].log_coeff += 6.0;
        let rep = sandwich_check(&bad, &w, &grid, 32).unwrap();
        assert!(!rep.upper_passed);
        assert!(rep.worst_upper.margin < 0.0);
        assert!(rep.worst_upper.t > 0.95);
    }

    #[test]
    fn sandwich_rejects_out_of_range_radii() {
        let w = WeightFunction::ramey_ullrich();
        let s = run_construction(&w, &ConstructionParams::from_t0(2.0, 0.95, 0.9999)).unwrap();
        let pair = split_parity(&s).unwrap();
        assert!(matches!(sandwich_check(&pair, &w, &[0.9], 8), Err(Error::Input(_))));
        assert!(matches!(sandwich_check(&pair, &w, &[0.99999], 8), Err(Error::Input(_))));
    }

    #[test]
    fn constant_after_shift_has_no_zeros() {
        let pair = SeriesPair {
            g1: LacunarySeries::from_pairs(&[(0.0, 3)]).unwrap(),
            g2: LacunarySeries::default(),
            t0: 0.95,
            h: 2.0,
            t_max: 0.99,
        };
        let w = WeightFunction::ramey_ullrich();
        let adj = zero_adjust(
            &pair,
            &w,
            16,
            InnerGrid { radii: 10, angles: 8 },
            &OuterGrid {
                t_grid: vec![],
                angles: 0,
            },
        )
        .unwrap();
        assert_eq!(
            adj.f1.terms(),
            &[Term {
                log_coeff: 0.0,
                exponent: 0
            }]
        );
        assert!(adj.c_low > 0.0);
        // |f₁| = 1, so the constants are 1/ω at the extreme radii.
        assert!((adj.log_c_high - 0.0).abs() < 1e-15);
        assert!((adj.log_c_low + w.log_omega(0.95).unwrap()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn shift_never_decreases_modulus(
            logs in proptest::collection::vec(-5.0f64..5.0, 1..6),
            gaps in proptest::collection::vec(1u64..9, 6),
            r in 0.0f64..0.999,
            theta in 0.0f64..6.3,
        ) {
            let mut e = 0;
            let pairs: Vec<(f64, u64)> = logs.iter().zip(&gaps).map(|(&l, &g)| { e += g; (l, e) }).collect();
            let s = LacunarySeries::from_pairs(&pairs).unwrap();
            let z = Complex64::from_polar(r, theta);
            let a = s.eval(z).unwrap().log_abs();
            let b = s.shift_down().eval(z).unwrap().log_abs();
            prop_assert!(b >= a - 1e-12 * a.abs().max(1.0) || a == f64::NEG_INFINITY);
        }

        #[test]
        fn summation_is_order_independent(
            terms in proptest::collection::vec((-20.0f64..20.0, 0.0f64..6.3), 1..40),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            let a = crate::scaled::sum_polar_terms(terms.clone());
            let mut shuffled = terms.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let b = crate::scaled::sum_polar_terms(shuffled);
            let scale: f64 = terms.iter().map(|t| t.0.exp()).sum();
            prop_assert!((a.to_complex() - b.to_complex()).norm() <= 1e-12 * scale);
        }
    }
}
