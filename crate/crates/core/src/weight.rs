//! Radial weights `ω: [0, 1) → (0, ∞)` and the convex reparametrisation
//! `Φ(x) = log ω(eˣ)`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Weight description as read from and written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub family: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
}

impl WeightSpec {
    pub fn new(family: &str, params: &[f64]) -> Self {
        WeightSpec {
            family: family.to_string(),
            params: params.to_vec(),
            table: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

/// Tunable constants of the diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct WeightConfig {
    /// `Φ'` must grow by more than this between consecutive grid points.
    pub strictness_tol: f64,
    /// `check_doubling` reports failure at or above this constant.
    pub doubling_cap: f64,
    /// Unboundedness probe: `log ω(1 - unbounded_probe) > unbounded_threshold`.
    pub unbounded_probe: f64,
    pub unbounded_threshold: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            strictness_tol: 1e-10,
            doubling_cap: 1e6,
            unbounded_probe: 1e-6,
            unbounded_threshold: 10.0,
        }
    }
}

/// Piecewise-linear `Φ` over knots in `x = log t`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PhiTable {
    xs: Vec<f64>,
    phis: Vec<f64>,
    /// Continue the last segment linearly instead of failing above the last knot.
    extrapolate: bool,
}

impl PhiTable {
    pub(crate) fn new(xs: Vec<f64>, phis: Vec<f64>, extrapolate: bool) -> Result<Self> {
        if xs.len() < 2 || xs.len() != phis.len() {
            return Err(Error::input("a table needs at least two knots"));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::input("table abscissas must be strictly increasing"));
        }
        if xs.iter().chain(&phis).any(|v| !v.is_finite()) {
            return Err(Error::input("table entries must be finite"));
        }
        Ok(PhiTable { xs, phis, extrapolate })
    }

    fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        let mut xs = Vec::with_capacity(pairs.len());
        let mut phis = Vec::with_capacity(pairs.len());
        for &[t, w] in pairs {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::input(format!("table radius {t} outside (0, 1)")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::input(format!("table weight {w} must be positive")));
            }
            xs.push(t.ln());
            phis.push(w.ln());
        }
        Self::new(xs, phis, false)
    }

    pub(crate) fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.phis.iter().copied())
    }

    fn last_x(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    fn slope(&self, i: usize) -> f64 {
        (self.phis[i + 1] - self.phis[i]) / (self.xs[i + 1] - self.xs[i])
    }

    /// Value and right derivative (left derivative at the last knot).
    fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let n = self.xs.len();
        let i = self.xs.partition_point(|&k| k <= x);
        if i == 0 {
            return Ok((self.phis[0], 0.0));
        }
        if i == n {
            let s = self.slope(n - 2);
            if x == self.xs[n - 1] {
                return Ok((self.phis[n - 1], s));
            }
            if !self.extrapolate {
                return Err(Error::domain(format!(
                    "x = {x} lies beyond the last table knot {}",
                    self.xs[n - 1]
                )));
            }
            return Ok((self.phis[n - 1] + s * (x - self.xs[n - 1]), s));
        }
        let s = self.slope(i - 1);
        Ok((self.phis[i - 1] + s * (x - self.xs[i - 1]), s))
    }
}

#[derive(Debug, Clone)]
enum Kind {
    RameyUllrich,
    Power {
        a: f64,
    },
    ExpPower {
        alpha: f64,
    },
    DoubleExp {
        beta: f64,
    },
    LogPower {
        p: f64,
    },
    LogRatio {
        a: f64,
    },
    Tabulated(PhiTable),
    Bump {
        height: f64,
        center: f64,
        half_width: f64,
    },
    Sawtooth {
        amplitude: f64,
        period: f64,
    },
    UnboundedSawtooth {
        scale: f64,
        period: f64,
    },
    Regularized {
        hull: PhiTable,
        eps: f64,
        tail: Box<WeightFunction>,
        offset: f64,
    },
}

/// An immutable radial weight.
#[derive(Debug, Clone)]
pub struct WeightFunction {
    kind: Kind,
    spec: WeightSpec,
    derivative: DerivativeMode,
}

/// `ω(t)` together with its logarithm; `overflowed` is set when the plain
/// value is outside the f64 range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaValue {
    pub value: f64,
    pub log_value: f64,
    pub overflowed: bool,
}

fn param(params: &[f64], i: usize, default: f64, name: &str, positive: bool) -> Result<f64> {
    let v = params.get(i).copied().unwrap_or(default);
    if !v.is_finite() || (positive && v <= 0.0) {
        return Err(Error::input(format!(
            "parameter {name} = {v} must be a positive number"
        )));
    }
    Ok(v)
}

/// Triangle wave: 0 at the integers, 1 at the half-integers.
fn tri(u: f64) -> (f64, f64) {
    let f = u - u.floor();
    let v = 1.0 - (2.0 * f - 1.0).abs();
    let dv = if f < 0.5 { 2.0 } else { -2.0 };
    (v, dv)
}

fn check_finite(v: f64, what: &str, x: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric(format!("{what} is not finite at x = {x}")))
    }
}

/// `-log(1 - eˣ)` and its derivative.
fn ramey_phi(x: f64) -> (f64, f64) {
    let u = -x.exp_m1();
    (-u.ln(), x.exp() / u)
}

impl WeightFunction {
    pub fn from_spec(spec: &WeightSpec) -> Result<Self> {
        let p = &spec.params;
        let kind = match spec.family.as_str() {
            "ramey_ullrich" => Kind::RameyUllrich,
            "power" => Kind::Power {
                a: param(p, 0, 3.0, "a", true)?,
            },
            "exp_power" => Kind::ExpPower {
                alpha: param(p, 0, 1.0, "alpha", true)?,
            },
            "double_exp" => Kind::DoubleExp {
                beta: param(p, 0, 0.1, "beta", true)?,
            },
            "log_power" => Kind::LogPower {
                p: param(p, 0, 1.0, "p", true)?,
            },
            "log_ratio" => Kind::LogRatio {
                a: param(p, 0, 1.0, "a", true)?,
            },
            "tabulated" => {
                let table = spec
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::input("family tabulated requires a table"))?;
                Kind::Tabulated(PhiTable::from_pairs(table)?)
            }
            "perturbed" | "perturbed_bump" => Kind::Bump {
                height: param(p, 0, 3.0, "height", true)?,
                center: param(p, 1, -1.0, "center", false)?,
                half_width: param(p, 2, 1e-3, "half_width", true)?,
            },
            "perturbed_sawtooth" => Kind::Sawtooth {
                amplitude: param(p, 0, 0.05, "amplitude", true)?,
                period: param(p, 1, 0.1, "period", true)?,
            },
            "perturbed_unbounded_sawtooth" => Kind::UnboundedSawtooth {
                scale: param(p, 0, 1.0, "scale", true)?,
                period: param(p, 1, 0.5, "period", true)?,
            },
            other => return Err(Error::input(format!("unknown weight family {other:?}"))),
        };
        if let Kind::Bump { center, .. } = kind {
            if center >= 0.0 {
                return Err(Error::input("bump center must be negative"));
            }
        }
        Ok(WeightFunction {
            kind,
            spec: spec.clone(),
            derivative: DerivativeMode::Analytic,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: WeightSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn named(family: &str, params: &[f64]) -> Result<Self> {
        Self::from_spec(&WeightSpec::new(family, params))
    }

    /// `ω(t) = 1/(1-t)`.
    pub fn ramey_ullrich() -> Self {
        Self::named("ramey_ullrich", &[]).unwrap()
    }

    /// `ω(t) = exp((1-t)^{-α})`.
    pub fn exp_power(alpha: f64) -> Result<Self> {
        Self::named("exp_power", &[alpha])
    }

    /// Weight with piecewise-linear `Φ` through `(x_i, Φ_i)`, continued
    /// linearly past the last knot.
    pub fn from_phi_knots(xs: Vec<f64>, phis: Vec<f64>) -> Result<Self> {
        let table = PhiTable::new(xs, phis, true)?;
        let pairs = table.knots().map(|(x, p)| [x.exp(), p.exp()]).collect();
        Ok(WeightFunction {
            spec: WeightSpec {
                family: "tabulated".into(),
                params: vec![],
                table: Some(pairs),
            },
            kind: Kind::Tabulated(table),
            derivative: DerivativeMode::Analytic,
        })
    }

    /// Piecewise-linear `hull` plus `eps · R(x)` with the strictly convex,
    /// bounded `R(x) = -√(1 - eˣ)`. Past the last knot the shape of `tail`
    /// takes over, shifted to be continuous.
    pub(crate) fn regularized(hull: PhiTable, eps: f64, tail: &WeightFunction) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::input("regularization strength must be positive"));
        }
        let last = hull.last_x();
        let offset = hull.eval(last)?.0 - tail.phi(last)?;
        let mut params = vec![eps];
        params.extend(tail.spec.params.iter());
        Ok(WeightFunction {
            spec: WeightSpec {
                family: format!("regularized_hull({})", tail.family()),
                params,
                table: Some(hull.knots().map(|(x, p)| [x.exp(), p.exp()]).collect()),
            },
            kind: Kind::Regularized {
                hull,
                eps,
                tail: Box::new(tail.clone()),
                offset,
            },
            derivative: DerivativeMode::Analytic,
        })
    }

    pub fn with_derivative(mut self, mode: DerivativeMode) -> Self {
        self.derivative = mode;
        self
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.derivative
    }

    pub fn family(&self) -> &str {
        &self.spec.family
    }

    pub fn params(&self) -> &[f64] {
        &self.spec.params
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    /// Largest `x` where `Φ` is defined, when the family stops short of 0.
    pub fn domain_end(&self) -> Option<f64> {
        match &self.kind {
            Kind::Tabulated(t) if !t.extrapolate => Some(t.last_x()),
            _ => None,
        }
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.kind, Kind::Tabulated(_))
    }

    /// Builtin families with a closed form, i.e. not data driven.
    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, Kind::Tabulated(_) | Kind::Regularized { .. })
    }

    /// Abscissas where the family has a known feature (kinks, bump apex);
    /// grids that must resolve the feature should contain them.
    pub fn landmarks(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Bump { center, half_width, .. } => [center - half_width, *center, center + half_width]
                .into_iter()
                .filter(|x| *x < 0.0)
                .collect(),
            _ => vec![],
        }
    }

    fn phi_with_slope(&self, x: f64) -> Result<(f64, Option<f64>)> {
        let out = match &self.kind {
            Kind::RameyUllrich => {
                let (v, d) = ramey_phi(x);
                (v, Some(d))
            }
            Kind::Power { a } => {
                let (v, d) = ramey_phi(x);
                (a * v, Some(a * d))
            }
            Kind::ExpPower { alpha } => {
                let u = -x.exp_m1();
                let v = u.powf(-alpha);
                (v, Some(alpha * v / u * x.exp()))
            }
            Kind::DoubleExp { beta } => {
                let u = -x.exp_m1();
                let v = (beta / u).exp();
                (v, Some(v * beta / (u * u) * x.exp()))
            }
            Kind::LogPower { p } => {
                let v = (-x).powf(-p);
                (v, Some(p * v / -x))
            }
            Kind::LogRatio { a } => {
                // a · log(1 + 1/(-x)): log-like near 0, flat far out.
                let v = a * (-1.0 / x).ln_1p();
                (v, Some(a / (x * (x - 1.0))))
            }
            Kind::Tabulated(table) => {
                let (v, d) = table.eval(x)?;
                (v, Some(d))
            }
            Kind::Bump {
                height,
                center,
                half_width,
            } => {
                let (v, d) = ramey_phi(x);
                let r = (x - center) / half_width;
                if r.abs() < 1.0 {
                    let slope = if r < 0.0 {
                        height / half_width
                    } else {
                        -height / half_width
                    };
                    (v + height * (1.0 - r.abs()), Some(d + slope))
                } else {
                    (v, Some(d))
                }
            }
            Kind::Sawtooth { amplitude, period } => {
                let (v, d) = ramey_phi(x);
                if x > -1.0 {
                    let (s, ds) = tri(x / period);
                    (v + amplitude * s, Some(d + amplitude * ds / period))
                } else {
                    (v, Some(d))
                }
            }
            Kind::UnboundedSawtooth { scale, period } => {
                let (v, d) = ramey_phi(x);
                let (s, ds) = tri((-x).ln() / period);
                let amp = scale / -x;
                let g = amp * s;
                let dg = scale / (x * x) * s + amp * ds / (period * x);
                (v + g, Some(d + dg))
            }
            Kind::Regularized {
                hull,
                eps,
                tail,
                offset,
            } => {
                let u = -x.exp_m1();
                let r = -u.sqrt();
                let dr = x.exp() / (2.0 * u.sqrt());
                let (v, d) = if x > hull.last_x() {
                    (tail.phi(x)? + offset, tail.phi_prime(x)?)
                } else {
                    hull.eval(x)?
                };
                (v + eps * r, Some(d + eps * dr))
            }
        };
        Ok(out)
    }

    /// `Φ(x) = log ω(eˣ)` for `x < 0`.
    pub fn phi(&self, x: f64) -> Result<f64> {
        if !(x < 0.0) {
            return Err(Error::domain(format!("Φ is defined for x < 0, got {x}")));
        }
        let (v, _) = self.phi_with_slope(x)?;
        check_finite(v, "Φ", x)
    }

    /// `Φ'(x)`: closed form when available and selected, otherwise a central
    /// difference with step `max(ε^{1/3}|x|, 1e-8)` (halved toward 0 if
    /// needed to stay in the domain).
    pub fn phi_prime(&self, x: f64) -> Result<f64> {
        if !(x < 0.0) {
            return Err(Error::domain(format!("Φ' is defined for x < 0, got {x}")));
        }
        if self.derivative == DerivativeMode::Analytic {
            if let (_, Some(d)) = self.phi_with_slope(x)? {
                return check_finite(d, "Φ'", x);
            }
        }
        let mut step = (f64::EPSILON.cbrt() * x.abs()).max(1e-8);
        while x + step >= 0.0 {
            step = -x / 2.0;
        }
        let d = (self.phi(x + step)? - self.phi(x - step)?) / (2.0 * step);
        check_finite(d, "Φ'", x)
    }

    /// `Φ` (`order = 0`) or `Φ'` (`order = 1`).
    pub fn big_f(&self, x: f64, order: u8) -> Result<f64> {
        match order {
            0 => self.phi(x),
            1 => self.phi_prime(x),
            _ => Err(Error::input(format!("derivative order {order} is not supported"))),
        }
    }

    /// `log ω(t)` for `0 ≤ t < 1`.
    pub fn log_omega(&self, t: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::domain(format!("ω is defined on [0, 1), got t = {t}")));
        }
        let v = match &self.kind {
            Kind::RameyUllrich => -(-t).ln_1p(),
            Kind::Power { a } => -a * (-t).ln_1p(),
            Kind::ExpPower { alpha } => (1.0 - t).powf(-alpha),
            Kind::DoubleExp { beta } => (beta / (1.0 - t)).exp(),
            Kind::LogPower { p } => {
                if t == 0.0 {
                    0.0
                } else {
                    (-t.ln()).powf(-p)
                }
            }
            Kind::LogRatio { a } => {
                if t == 0.0 {
                    0.0
                } else {
                    a * (-1.0 / t.ln()).ln_1p()
                }
            }
            _ if t == 0.0 => match &self.kind {
                Kind::Tabulated(table) => table.phis[0],
                Kind::Regularized { hull, eps, .. } => hull.phis[0] - eps,
                _ => 0.0,
            },
            _ => return self.phi(t.ln()),
        };
        check_finite(v, "log ω", t)
    }

    pub fn omega(&self, t: f64) -> Result<OmegaValue> {
        let log_value = self.log_omega(t)?;
        let value = log_value.exp();
        Ok(OmegaValue {
            value,
            log_value,
            overflowed: !value.is_finite() || (value == 0.0 && log_value.is_finite()),
        })
    }
}

/// Strict convexity of `Φ` measured through the growth of `Φ'`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub is_strictly_convex: bool,
    pub min_slope_gap: f64,
    pub violation_points: Vec<f64>,
}

fn check_negative_grid(x_grid: &[f64]) -> Result<()> {
    if x_grid.len() < 3 {
        return Err(Error::input("a convexity grid needs at least three points"));
    }
    if !x_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::input("grid must be strictly increasing"));
    }
    if !(x_grid[x_grid.len() - 1] < 0.0) || x_grid.iter().any(|x| x.is_nan()) {
        return Err(Error::input("grid points must be negative"));
    }
    Ok(())
}

pub fn check_log_convexity(w: &WeightFunction, x_grid: &[f64], cfg: &WeightConfig) -> Result<ConvexityReport> {
    check_negative_grid(x_grid)?;
    let slopes = x_grid.iter().map(|&x| w.phi_prime(x)).collect::<Result<Vec<_>>>()?;
    let mut min_slope_gap = f64::INFINITY;
    let mut violation_points = Vec::new();
    for (i, pair) in slopes.windows(2).enumerate() {
        let gap = pair[1] - pair[0];
        min_slope_gap = min_slope_gap.min(gap);
        if !(gap > cfg.strictness_tol) {
            violation_points.push(x_grid[i]);
        }
    }
    Ok(ConvexityReport {
        is_strictly_convex: min_slope_gap > cfg.strictness_tol,
        min_slope_gap,
        violation_points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingReport {
    pub is_doubling: bool,
    pub a_estimate: f64,
    pub log_a_estimate: f64,
    /// The `s` attaining the maximum ratio.
    pub witness: f64,
}

/// `s = 2^{-j}`, `j = 0..=40`.
pub fn default_doubling_grid() -> Vec<f64> {
    (0..=40).map(|j| (-(j as f64)).exp2()).collect()
}

pub fn check_doubling(w: &WeightFunction, s_grid: &[f64], cfg: &WeightConfig) -> Result<DoublingReport> {
    if s_grid.is_empty() {
        return Err(Error::input("empty s grid"));
    }
    let mut best = f64::NEG_INFINITY;
    let mut witness = s_grid[0];
    for &s in s_grid {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::domain(format!("s = {s} outside (0, 1]")));
        }
        let ratio = match (w.log_omega(1.0 - s / 2.0), w.log_omega(1.0 - s)) {
            (Ok(a), Ok(b)) => a - b,
            (Err(Error::Numeric(_)), _) | (_, Err(Error::Numeric(_))) => f64::INFINITY,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        if ratio > best || best == f64::NEG_INFINITY {
            best = ratio;
            witness = s;
        }
    }
    let a_estimate = best.exp();
    Ok(DoublingReport {
        is_doubling: a_estimate.is_finite() && a_estimate < cfg.doubling_cap,
        a_estimate,
        log_a_estimate: best,
        witness,
    })
}

/// Sampled checks of the standing assumptions on `ω`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightDiagnostics {
    pub positive: bool,
    pub non_decreasing: bool,
    pub monotonicity_violations: Vec<f64>,
    /// `None` when unboundedness cannot be judged from the data.
    pub unbounded: Option<bool>,
    pub warnings: Vec<String>,
}

pub fn validate(w: &WeightFunction, t_grid: &[f64], cfg: &WeightConfig) -> Result<WeightDiagnostics> {
    let mut warnings = Vec::new();
    let mut positive = true;
    let mut logs = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        match w.log_omega(t) {
            Ok(v) => logs.push(v),
            Err(Error::Numeric(_)) => {
                positive = false;
                logs.push(f64::NAN);
            }
            Err(e) => return Err(e),
        }
    }
    let mut monotonicity_violations = Vec::new();
    for (i, pair) in logs.windows(2).enumerate() {
        if pair[1] < pair[0] {
            monotonicity_violations.push(t_grid[i + 1]);
        }
    }
    let unbounded = if w.is_builtin() {
        let probe = 1.0 - cfg.unbounded_probe;
        Some(match w.log_omega(probe) {
            Ok(v) => v > cfg.unbounded_threshold,
            Err(Error::Numeric(_)) => true,
            Err(e) => return Err(e),
        })
    } else {
        warnings.push("unboundedness is not checked for tabulated weights".to_string());
        None
    };
    Ok(WeightDiagnostics {
        positive,
        non_decreasing: monotonicity_violations.is_empty(),
        monotonicity_violations,
        unbounded,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{geomspace, linspace};
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn omega_examples() {
        let ru = WeightFunction::ramey_ullrich();
        assert_eq!(ru.omega(0.0).unwrap().value, 1.0);
        assert!(rel(ru.omega(0.5).unwrap().value, 2.0) < 1e-15);
        let ep = WeightFunction::exp_power(1.0).unwrap();
        assert!(rel(ep.omega(0.9).unwrap().value, 22026.465794806718) < 1e-12);
        assert!(matches!(ru.omega(1.0), Err(Error::Domain(_))));
        assert!(matches!(ru.omega(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn huge_omega_is_flagged() {
        let ep = WeightFunction::exp_power(2.0).unwrap();
        let v = ep.omega(0.999).unwrap();
        assert!(v.overflowed);
        assert!(rel(v.log_value, 1e6) < 1e-9);
    }

    #[test]
    fn phi_examples() {
        let ru = WeightFunction::ramey_ullrich();
        assert!((ru.big_f(0.5f64.ln(), 0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let lp = WeightFunction::named("log_power", &[1.0]).unwrap();
        assert!((lp.big_f(-1.0, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!((lp.big_f(-1.0, 1).unwrap() - 1.0).abs() < 1e-15);
        // ω(t) = exp(-1/log t)
        assert!((lp.log_omega((-1.0f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(ru.phi(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn double_exp_overflows_to_numeric_error() {
        let de = WeightFunction::named("double_exp", &[0.1]).unwrap();
        assert!(matches!(de.phi(-1e-6), Err(Error::Numeric(_))));
    }

    #[test]
    fn json_round_trip() {
        let w = WeightFunction::from_json(r#"{"family":"exp_power","params":[0.5]}"#).unwrap();
        assert_eq!(w.family(), "exp_power");
        let text = serde_json::to_string(w.spec()).unwrap();
        assert_eq!(text, r#"{"family":"exp_power","params":[0.5]}"#);
        assert!(WeightFunction::from_json(r#"{"family":"nope"}"#).is_err());
        assert!(WeightFunction::from_json(r#"{"family":"tabulated"}"#).is_err());
    }

    #[test]
    fn convexity_examples() {
        let cfg = WeightConfig::default();
        let ru = WeightFunction::ramey_ullrich();
        let grid = linspace(-2.0, -0.01, 100);
        assert!(check_log_convexity(&ru, &grid, &cfg).unwrap().is_strictly_convex);

        let linear = WeightFunction::from_phi_knots(vec![-3.0, -0.001], vec![1.0, 4.0]).unwrap();
        let rep = check_log_convexity(&linear, &linspace(-2.5, -0.5, 50), &cfg).unwrap();
        assert!(!rep.is_strictly_convex);
        assert!(rep.min_slope_gap.abs() < 1e-12);

        let saw = WeightFunction::named("perturbed_sawtooth", &[]).unwrap();
        let rep = check_log_convexity(&saw, &linspace(-0.9, -0.05, 400), &cfg).unwrap();
        assert!(!rep.violation_points.is_empty());
        // The concave corners sit at the half-periods.
        assert!(rep.violation_points.iter().any(|x| (x + 0.45).abs() < 0.01));
    }

    #[test]
    fn convexity_rejects_bad_grids() {
        let ru = WeightFunction::ramey_ullrich();
        let cfg = WeightConfig::default();
        assert!(matches!(
            check_log_convexity(&ru, &[-1.0, -0.5], &cfg),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            check_log_convexity(&ru, &[-1.0, -0.5, -0.7], &cfg),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            check_log_convexity(&ru, &[-1.0, -0.5, 0.0], &cfg),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn doubling_examples() {
        let cfg = WeightConfig::default();
        let grid = default_doubling_grid();
        let ru = check_doubling(&WeightFunction::ramey_ullrich(), &grid, &cfg).unwrap();
        assert!(ru.is_doubling);
        assert!((ru.a_estimate - 2.0).abs() < 1e-12);
        let p3 = check_doubling(&WeightFunction::named("power", &[3.0]).unwrap(), &grid, &cfg).unwrap();
        assert!((p3.a_estimate - 8.0).abs() < 1e-11);
        for alpha in [0.5, 1.0, 2.0] {
            let ep = WeightFunction::exp_power(alpha).unwrap();
            assert!(!check_doubling(&ep, &grid, &cfg).unwrap().is_doubling);
        }
    }

    #[test]
    fn tabulated_interpolates_phi() {
        let w = WeightFunction::from_spec(&WeightSpec {
            family: "tabulated".into(),
            params: vec![],
            table: Some(vec![[0.5, 2.0], [0.9, 10.0]]),
        })
        .unwrap();
        let mid = 0.5 * (0.5f64.ln() + 0.9f64.ln());
        let expected = 0.5 * (2f64.ln() + 10f64.ln());
        assert!((w.phi(mid).unwrap() - expected).abs() < 1e-14);
        assert_eq!(w.phi(-5.0).unwrap(), 2f64.ln());
        assert!(matches!(w.phi(-0.01), Err(Error::Domain(_))));
        assert_eq!(w.log_omega(0.0).unwrap(), 2f64.ln());
    }

    #[test]
    fn validation_flags() {
        let cfg = WeightConfig::default();
        let grid = linspace(0.0, 0.99, 200);
        let d = validate(&WeightFunction::ramey_ullrich(), &grid, &cfg).unwrap();
        assert!(d.positive && d.non_decreasing && d.unbounded == Some(true));
        let saw = WeightFunction::named("perturbed_sawtooth", &[]).unwrap();
        let d = validate(&saw, &linspace(0.4, 0.99, 2000), &cfg).unwrap();
        assert!(!d.non_decreasing);
        let tab = WeightFunction::from_phi_knots(vec![-1.0, -0.5], vec![0.0, 1.0]).unwrap();
        let d = validate(&tab, &grid, &cfg).unwrap();
        assert_eq!(d.unbounded, None);
        assert_eq!(d.warnings.len(), 1);
    }

    fn builtin_families() -> Vec<WeightFunction> {
        vec![
            WeightFunction::ramey_ullrich(),
            WeightFunction::named("power", &[3.0]).unwrap(),
            WeightFunction::named("power", &[0.5]).unwrap(),
            WeightFunction::exp_power(0.5).unwrap(),
            WeightFunction::exp_power(1.0).unwrap(),
            WeightFunction::exp_power(2.0).unwrap(),
            WeightFunction::named("double_exp", &[0.1]).unwrap(),
            WeightFunction::named("log_power", &[1.0]).unwrap(),
            WeightFunction::named("log_power", &[0.5]).unwrap(),
            WeightFunction::named("log_ratio", &[3.0]).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn phi_is_monotone(a in -5.0f64..-1e-3, b in -5.0f64..-1e-3) {
            let (x1, x2) = if a < b { (a, b) } else { (b, a) };
            for w in builtin_families() {
                prop_assert!(w.phi(x1).unwrap() <= w.phi(x2).unwrap());
            }
        }

        #[test]
        fn analytic_and_fd_derivatives_agree(x in -5.0f64..-1e-2) {
            for w in builtin_families() {
                let a = w.phi_prime(x).unwrap();
                let fd = w.clone().with_derivative(DerivativeMode::FiniteDifference).phi_prime(x).unwrap();
                prop_assert!(rel(fd, a) < 1e-6, "{} at {x}: {a} vs {fd}", w.family());
            }
        }

        #[test]
        fn omega_matches_exp_phi(t in 1e-3f64..0.999) {
            for w in builtin_families() {
                let direct = w.omega(t).unwrap().value;
                let via_phi = w.phi(t.ln()).unwrap().exp();
                if direct.is_finite() && via_phi.is_finite() {
                    prop_assert!(rel(via_phi, direct) < 1e-12, "{} at {t}", w.family());
                }
            }
        }
    }

    #[test]
    fn geometric_gate_grid_is_convex_for_builtins() {
        let cfg = WeightConfig::default();
        let grid = geomspace(0.95f64.ln(), 0.95f64.ln() * 1e-6, 256);
        for w in builtin_families().into_iter().filter(|w| w.family() != "double_exp") {
            assert!(
                check_log_convexity(&w, &grid, &cfg).unwrap().is_strictly_convex,
                "{}",
                w.family()
            );
        }
    }
}
