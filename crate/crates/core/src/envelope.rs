//! Maximum modulus, the three-circles convexity test and the lower convex
//! envelope of `Φ` used to decide equivalence to a log-convex weight.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::grid::uniform_angles;
use crate::series::LacunarySeries;
use crate::weight::{PhiTable, WeightFunction};
use crate::{Error, Result};

/// A holomorphic function on the unit disk that can be sampled.
pub trait DiskFunction: Sync {
    fn eval(&self, z: Complex64) -> Result<Complex64>;

    fn log_abs(&self, z: Complex64) -> Result<f64> {
        Ok(self.eval(z)?.norm().ln())
    }
}

/// Polynomial with coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polynomial {
    pub coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Polynomial { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

impl DiskFunction for Polynomial {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok(self
            .coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c))
    }
}

impl DiskFunction for LacunarySeries {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok(LacunarySeries::eval(self, z)?.to_complex())
    }

    fn log_abs(&self, z: Complex64) -> Result<f64> {
        Ok(LacunarySeries::eval(self, z)?.log_abs())
    }
}

/// Adapter for plain closures.
pub struct FnDisk<F>(pub F);

impl<F> DiskFunction for FnDisk<F>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok((self.0)(z))
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(format!("radius {r} outside (0, 1)")));
    }
    Ok(())
}

/// `max_θ log|f(r e^{iθ})|` over `theta_count` equispaced angles.
pub fn max_modulus(f: &dyn DiskFunction, r: f64, theta_count: usize) -> Result<f64> {
    check_radius(r)?;
    if theta_count < 16 {
        return Err(Error::input("max_modulus needs at least 16 angles"));
    }
    let mut best = f64::NEG_INFINITY;
    for a in uniform_angles(theta_count) {
        best = best.max(f.log_abs(Complex64::from_polar(r, a))?);
    }
    Ok(best)
}

/// Grid maximum improved by golden-section search around the three largest
/// local maxima of the grid.
fn refined_max(f: &dyn DiskFunction, r: f64, n: usize) -> Result<f64> {
    let angles = uniform_angles(n);
    let vals = angles
        .iter()
        .map(|&a| f.log_abs(Complex64::from_polar(r, a)))
        .collect::<Result<Vec<_>>>()?;
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| vals[i] >= vals[(i + n - 1) % n] && vals[i] >= vals[(i + 1) % n])
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let step = 2.0 * PI / n as f64;
    let g = |a: f64| f.log_abs(Complex64::from_polar(r, a));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for &i in peaks.iter().take(3) {
        let (mut lo, mut hi) = (angles[i] - step, angles[i] + step);
        let mut c = hi - inv_phi * (hi - lo);
        let mut d = lo + inv_phi * (hi - lo);
        let (mut fc, mut fd) = (g(c)?, g(d)?);
        for _ in 0..64 {
            if fc > fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - inv_phi * (hi - lo);
                fc = g(c)?;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + inv_phi * (hi - lo);
                fd = g(d)?;
            }
        }
        best = best.max(fc).max(fd);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveMax {
    pub log_max: f64,
    /// Angle count of the last grid used.
    pub theta_count: usize,
    pub converged: bool,
}

pub const MAX_ADAPTIVE_ANGLES: usize = 1 << 16;

/// `log M(r)` with the angle grid doubled from `start` until successive
/// refined estimates agree to `1e-9` (at most `2^16` angles).
pub fn max_modulus_adaptive(f: &dyn DiskFunction, r: f64, start: usize) -> Result<AdaptiveMax> {
    check_radius(r)?;
    if start < 16 {
        return Err(Error::input("max_modulus needs at least 16 angles"));
    }
    let mut n = start;
    let mut est = refined_max(f, r, n)?;
    while n < MAX_ADAPTIVE_ANGLES {
        let next = refined_max(f, r, 2 * n)?;
        n *= 2;
        let done = (next - est).abs() < 1e-9;
        est = est.max(next);
        if done {
            return Ok(AdaptiveMax {
                log_max: est,
                theta_count: n,
                converged: true,
            });
        }
    }
    Ok(AdaptiveMax {
        log_max: est,
        theta_count: n,
        converged: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxModulusProfile {
    pub r_grid: Vec<f64>,
    /// `log M(r)`.
    pub values: Vec<f64>,
    pub theta_count: usize,
}

pub fn max_modulus_profile(f: &dyn DiskFunction, r_grid: &[f64], theta_count: usize) -> Result<MaxModulusProfile> {
    if !r_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::input("r grid must be strictly increasing"));
    }
    let values = r_grid
        .par_iter()
        .map(|&r| max_modulus(f, r, theta_count))
        .collect::<Result<Vec<_>>>()?;
    Ok(MaxModulusProfile {
        r_grid: r_grid.to_vec(),
        values,
        theta_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleMode {
    Fixed(usize),
    /// Doubling from the given count, see [`max_modulus_adaptive`].
    Adaptive(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HadamardReport {
    pub passed: bool,
    /// `log Σ_m M_{f_m}(r)` on the r grid.
    pub log_sum: Vec<f64>,
    /// Smallest second difference of `log S` in `log r`.
    pub min_second_difference: f64,
    pub witness_r: Option<f64>,
    pub tolerance: f64,
    pub unconverged_radii: usize,
}

pub const HADAMARD_TOL: f64 = 1e-7;

/// Checks that `log Σ_m M_{f_m}(r)` is convex in `log r`.
///
/// On a non-uniform grid the second difference at `i` is
/// `2(λ y_{i-1} + (1-λ) y_{i+1} - y_i)` with `λ` the interpolation weight of
/// `log r_i`; it equals the usual one on uniform grids.
pub fn hadamard_check(fs: &[&dyn DiskFunction], r_grid: &[f64], mode: AngleMode) -> Result<HadamardReport> {
    if r_grid.len() < 3 {
        return Err(Error::input("the r grid needs at least three points"));
    }
    if !r_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::input("r grid must be strictly increasing"));
    }
    for r in r_grid {
        check_radius(*r)?;
    }
    for (m, f) in fs.iter().enumerate() {
        if f.eval(Complex64::new(0.0, 0.0))? == Complex64::new(0.0, 0.0) {
            return Err(Error::precondition(format!("function {m} vanishes at the origin")));
        }
    }
    let per_r = r_grid
        .par_iter()
        .map(|&r| {
            let mut logs = Vec::with_capacity(fs.len());
            let mut unconverged = false;
            for f in fs {
                let v = match mode {
                    AngleMode::Fixed(n) => max_modulus(*f, r, n)?,
                    AngleMode::Adaptive(start) => {
                        let m = max_modulus_adaptive(*f, r, start)?;
                        unconverged |= !m.converged;
                        m.log_max
                    }
                };
                logs.push(v);
            }
            Ok((crate::numeric::log_sum_exp(logs), unconverged))
        })
        .collect::<Result<Vec<_>>>()?;
    let log_sum: Vec<f64> = per_r.iter().map(|p| p.0).collect();
    let unconverged_radii = per_r.iter().filter(|p| p.1).count();
    let u: Vec<f64> = r_grid.iter().map(|r| r.ln()).collect();
    let mut min_second_difference = f64::INFINITY;
    let mut witness_r = None;
    for i in 1..r_grid.len() - 1 {
        let lambda = (u[i + 1] - u[i]) / (u[i + 1] - u[i - 1]);
        let d = 2.0 * (lambda * log_sum[i - 1] + (1.0 - lambda) * log_sum[i + 1] - log_sum[i]);
        if d < min_second_difference {
            min_second_difference = d;
            witness_r = Some(r_grid[i]);
        }
    }
    Ok(HadamardReport {
        passed: min_second_difference >= -HADAMARD_TOL,
        log_sum,
        min_second_difference,
        witness_r,
        tolerance: HADAMARD_TOL,
        unconverged_radii,
    })
}

/// Seeded polynomials with degree in `1..=max_degree`, coefficients uniform
/// in the complex unit box and constant term 1.
pub fn random_polynomials(count: usize, max_degree: usize, seed: u64) -> Vec<Polynomial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let degree = rng.gen_range(1..=max_degree.max(1));
            let mut coeffs = vec![Complex64::new(1.0, 0.0)];
            for _ in 0..degree {
                coeffs.push(Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)));
            }
            Polynomial::new(coeffs)
        })
        .collect()
}

/// Lower convex hull of points sorted by strictly increasing `x`
/// (monotone chain); collinear interior points are dropped.
pub fn lower_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Values of the piecewise-linear function through `knots` at the sorted
/// abscissas `xs`, all inside the knot range.
fn interpolate_sorted(knots: &[(f64, f64)], xs: &[f64]) -> Vec<f64> {
    let mut seg = 0;
    xs.iter()
        .map(|&x| {
            while seg + 2 < knots.len() && knots[seg + 1].0 < x {
                seg += 1;
            }
            let (a, b) = (knots[seg], knots[(seg + 1).min(knots.len() - 1)]);
            if x == a.0 || a.0 == b.0 {
                a.1
            } else if x == b.0 {
                b.1
            } else {
                a.1 + (b.1 - a.1) / (b.0 - a.0) * (x - a.0)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeResult {
    /// `(x, Φ̂(x))` knots of the lower convex hull.
    pub hull_knots: Vec<(f64, f64)>,
    /// `max (Φ - Φ̂)` over the samples.
    pub gap: f64,
    pub gap_witness: f64,
    pub equivalent: bool,
    pub gap_bound: f64,
    pub samples: usize,
}

pub const DEFAULT_GAP_BOUND: f64 = 50.0;

impl EnvelopeResult {
    /// The hull as a weight, continued linearly past the last knot.
    pub fn to_weight(&self) -> Result<WeightFunction> {
        let (xs, phis) = self.hull_knots.iter().copied().unzip();
        WeightFunction::from_phi_knots(xs, phis)
    }

    /// The hull plus `eps · R` with a bounded strictly convex `R`, following
    /// the shape of `tail` past the last knot. The result passes the
    /// convexity gate and stays within `eps + gap` of `tail` on the sampled
    /// range.
    pub fn regularized(&self, eps: f64, tail: &WeightFunction) -> Result<WeightFunction> {
        let (xs, phis) = self.hull_knots.iter().copied().unzip();
        WeightFunction::regularized(PhiTable::new(xs, phis, false)?, eps, tail)
    }
}

/// Lower convex envelope of `Φ` sampled on `x_grid`.
pub fn log_convex_envelope(w: &WeightFunction, x_grid: &[f64], gap_bound: f64) -> Result<EnvelopeResult> {
    if x_grid.len() < 3 {
        return Err(Error::input("the envelope grid needs at least three points"));
    }
    if !x_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::input("grid must be strictly increasing"));
    }
    let points = x_grid.iter().map(|&x| Ok((x, w.phi(x)?))).collect::<Result<Vec<_>>>()?;
    let hull_knots = lower_hull(&points);
    let hull_vals = interpolate_sorted(&hull_knots, x_grid);
    let mut gap = 0.0f64;
    let mut gap_witness = x_grid[0];
    for ((x, phi), hv) in points.iter().zip(&hull_vals) {
        let g = phi - hv;
        if g > gap {
            gap = g;
            gap_witness = *x;
        }
    }
    Ok(EnvelopeResult {
        hull_knots,
        gap,
        gap_witness,
        equivalent: gap <= gap_bound,
        gap_bound,
        samples: x_grid.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceConstants {
    pub log_c1: f64,
    pub log_c2: f64,
    pub c1: f64,
    pub c2: f64,
    /// Set when `log(C2/C1)` exceeds the cap.
    pub unbounded: bool,
}

/// `C1 = min v/u`, `C2 = max v/u` from log samples on a shared grid.
pub fn equivalence_constants_log(log_u: &[f64], log_v: &[f64], log_cap: f64) -> Result<EquivalenceConstants> {
    if log_u.len() != log_v.len() || log_u.is_empty() {
        return Err(Error::input("samples must be nonempty and of equal length"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&a, &b) in log_u.iter().zip(log_v) {
        if a.is_nan() || b.is_nan() || a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
            return Err(Error::domain("samples must be positive"));
        }
        let d = b - a;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok(EquivalenceConstants {
        log_c1: lo,
        log_c2: hi,
        c1: lo.exp(),
        c2: hi.exp(),
        unbounded: !(hi - lo <= log_cap),
    })
}

pub fn equivalence_constants(u: &[f64], v: &[f64], log_cap: f64) -> Result<EquivalenceConstants> {
    if u.iter().chain(v).any(|s| !(*s > 0.0)) {
        return Err(Error::domain("samples must be positive"));
    }
    let lu: Vec<f64> = u.iter().map(|s| s.ln()).collect();
    let lv: Vec<f64> = v.iter().map(|s| s.ln()).collect();
    equivalence_constants_log(&lu, &lv, log_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{geomspace, linspace};
    use proptest::prelude::*;

    fn monomial(n: usize) -> Polynomial {
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        c[n] = Complex64::new(1.0, 0.0);
        Polynomial::new(c)
    }

    #[test]
    fn max_modulus_examples() {
        let z5 = monomial(5);
        assert!((max_modulus(&z5, 0.7, 64).unwrap() - 5.0 * 0.7f64.ln()).abs() < 1e-14);
        let p = Polynomial::new(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]);
        let m = max_modulus(&p, 0.999999, 64).unwrap();
        assert!((m.exp() - 2.0).abs() < 1e-5);
        let c = FnDisk(|_| Complex64::new(-3.0, 4.0));
        assert!((max_modulus(&c, 0.5, 16).unwrap() - 5f64.ln()).abs() < 1e-15);
        assert!(matches!(max_modulus(&c, 0.5, 8), Err(Error::Input(_))));
    }

    #[test]
    fn adaptive_refinement_finds_off_grid_peaks() {
        // The peak of |z - e^{iφ}|-type functions sits between grid angles.
        let f = FnDisk(|z: Complex64| Complex64::new(1.0, 0.0) + z * Complex64::from_polar(1.0, -0.123));
        let m = max_modulus_adaptive(&f, 0.9, 16).unwrap();
        assert!(m.converged);
        assert!((m.log_max - 1.9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hadamard_examples() {
        let r = geomspace(0.05, 0.95, 64);
        let p = Polynomial::new({
            let mut c = vec![Complex64::new(0.0, 0.0); 6];
            c[0] = Complex64::new(1.0, 0.0);
            c[5] = Complex64::new(1.0, 0.0);
            c
        });
        assert!(hadamard_check(&[&p], &r, AngleMode::Fixed(4096)).unwrap().passed);
        let c = FnDisk(|_| Complex64::new(2.0, 0.0));
        let rep = hadamard_check(&[&c], &r, AngleMode::Adaptive(16)).unwrap();
        assert!(rep.passed);
        assert!(rep.min_second_difference.abs() < 1e-14);
        let z = monomial(1);
        assert!(matches!(
            hadamard_check(&[&z], &r, AngleMode::Fixed(64)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn non_subharmonic_profile_is_caught() {
        // |f| = exp(-|z|²) is not the modulus of a holomorphic function.
        let f = FnDisk(|z: Complex64| Complex64::new((-z.norm_sqr()).exp(), 0.0));
        let rep = hadamard_check(&[&f], &linspace(0.1, 0.9, 20), AngleMode::Fixed(16)).unwrap();
        assert!(!rep.passed);
    }

    #[test]
    fn random_polynomials_are_seeded() {
        let a = random_polynomials(5, 30, 7);
        let b = random_polynomials(5, 30, 7);
        assert_eq!(a, b);
        assert!(a
            .iter()
            .all(|p| p.coeffs[0] == Complex64::new(1.0, 0.0) && p.degree() <= 30));
        assert_ne!(a, random_polynomials(5, 30, 8));
    }

    #[test]
    fn envelope_of_convex_phi_is_tight() {
        let w = WeightFunction::ramey_ullrich();
        let rep = log_convex_envelope(&w, &geomspace(-2.0, -1e-3, 400), DEFAULT_GAP_BOUND).unwrap();
        assert!(rep.gap <= 1e-9);
        assert!(rep.equivalent);
        assert_eq!(rep.hull_knots.len(), 400);
    }

    #[test]
    fn envelope_rejects_bad_grids() {
        let w = WeightFunction::ramey_ullrich();
        assert!(matches!(
            log_convex_envelope(&w, &[-1.0, -0.5], 50.0),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            log_convex_envelope(&w, &[-1.0, -0.5, -0.7], 50.0),
            Err(Error::Input(_))
        ));
    }

    /// O(n³) reference: a point is a lower-hull vertex iff no chord between
    /// two other points passes strictly below it.
    fn brute_force_gap(points: &[(f64, f64)]) -> f64 {
        let n = points.len();
        let mut gap = 0.0f64;
        for k in 0..n {
            let mut below = points[k].1;
            for i in 0..k {
                for j in k + 1..n {
                    let (a, b) = (points[i], points[j]);
                    let y = a.1 + (b.1 - a.1) * (points[k].0 - a.0) / (b.0 - a.0);
                    below = below.min(y);
                }
            }
            gap = gap.max(points[k].1 - below);
        }
        gap
    }

    #[test]
    fn bump_gap_matches_brute_force() {
        let w = WeightFunction::named("perturbed_bump", &[3.0, -1.0, 1e-3]).unwrap();
        let mut grid = linspace(-2.0, -0.01, 120);
        grid.push(-1.0);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let rep = log_convex_envelope(&w, &grid, DEFAULT_GAP_BOUND).unwrap();
        let pts: Vec<_> = grid.iter().map(|&x| (x, w.phi(x).unwrap())).collect();
        assert!((rep.gap - brute_force_gap(&pts)).abs() < 1e-12);
        assert!((rep.gap - 3.0).abs() < 1e-3);
        assert_eq!(rep.gap_witness, -1.0);
    }

    #[test]
    fn hull_is_idempotent() {
        let w = WeightFunction::named("perturbed_sawtooth", &[]).unwrap();
        let grid = linspace(-1.5, -0.01, 300);
        let first = log_convex_envelope(&w, &grid, DEFAULT_GAP_BOUND).unwrap();
        assert!(first.gap > 0.0);
        let again = log_convex_envelope(&first.to_weight().unwrap(), &grid, DEFAULT_GAP_BOUND).unwrap();
        assert!(again.gap <= 1e-12);
    }

    #[test]
    fn equivalence_examples() {
        let u = [1.0, 2.0, 5.0];
        let e = equivalence_constants(&u, &u, 50.0).unwrap();
        assert_eq!((e.c1, e.c2), (1.0, 1.0));
        let v: Vec<f64> = u.iter().map(|x| 3.0 * x).collect();
        let e = equivalence_constants(&u, &v, 50.0).unwrap();
        assert!((e.c1 - 3.0).abs() < 1e-15 && (e.c2 - 3.0).abs() < 1e-15);
        assert!(matches!(
            equivalence_constants(&u, &[1.0, 0.0, 1.0], 50.0),
            Err(Error::Domain(_))
        ));
        let wide = equivalence_constants_log(&[0.0, 0.0], &[0.0, 60.0], 50.0).unwrap();
        assert!(wide.unbounded);
    }

    proptest! {
        #[test]
        fn hull_slopes_increase_and_stay_below(ys in proptest::collection::vec(-10.0f64..10.0, 3..60)) {
            let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64 * 0.1 - 7.0, y)).collect();
            let hull = lower_hull(&pts);
            let slopes: Vec<f64> = hull.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
            prop_assert!(slopes.windows(2).all(|s| s[0] <= s[1]));
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let hv = interpolate_sorted(&hull, &xs);
            for (p, h) in pts.iter().zip(&hv) {
                prop_assert!(*h <= p.1 + 1e-12);
            }
            prop_assert!((hull.first().unwrap().0 - pts[0].0).abs() == 0.0);
            let gap = pts.iter().zip(&hv).map(|(p, h)| p.1 - h).fold(0.0, f64::max);
            prop_assert!((gap - brute_force_gap(&pts)).abs() < 1e-9);
        }

        #[test]
        fn max_modulus_grows_with_radius(seed in 0u64..500, r1 in 0.05f64..0.9, dr in 0.0f64..0.09) {
            let p = &random_polynomials(1, 12, seed)[0];
            let a = max_modulus_adaptive(p, r1, 64).unwrap().log_max;
            let b = max_modulus_adaptive(p, r1 + dr, 64).unwrap().log_max;
            prop_assert!(b >= a - 1e-9);
        }
    }
}
