//! Tangent-line induction.
//!
//! Starting from `x_0 < 0`, each step finds the line `ℓ_k` tangent to `Φ`
//! that passes through `(x_{k-1}, Φ(x_{k-1}) - h)`, and the next abscissa
//! `x_k > x_{k-1}` where `ℓ_k` meets `Φ - h` again. Writing
//! `ℓ_k(x) = log a_k + δ_k x`, the exponents are `e_k = ⌊δ_k⌋ + 1`.

mod lemmas;

pub use lemmas::{verify_tangent_lemmas, LemmaCheck, LemmaReport, LemmaWitness};

use serde::{Deserialize, Serialize};

use crate::grid::geomspace;
use crate::numeric::{fmt17, serialize_f17, serialize_vec_f17};
use crate::weight::{check_log_convexity, WeightConfig, WeightFunction, WeightSpec};
use crate::{Error, Result};

/// Largest exponent that is still an exact integer in f64.
const MAX_EXPONENT: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionParams {
    /// Vertical gap between `Φ` and the chords, in units of `log ω`.
    pub h: f64,
    pub x0: f64,
    pub k_max: usize,
    /// Stop once `t_k > t_stop`.
    pub t_stop: f64,
    /// Relative bisection tolerance in `x`.
    pub root_tol: f64,
    /// Bracketing gives up once `|x|` drops below this.
    pub x_floor: f64,
    /// After reaching `t_stop`, lines keep being added until the discarded
    /// tail is below `exp(tail_log_threshold) · ω` on `[t_0, t_stop]`.
    pub tail_log_threshold: f64,
    /// Retry with `x_0 / 2` (at most 8 times) after an exponent collision.
    pub auto_restart: bool,
    pub gate_points: usize,
}

impl ConstructionParams {
    pub fn new(h: f64, x0: f64, t_stop: f64) -> Self {
        ConstructionParams {
            h,
            x0,
            k_max: 500,
            t_stop,
            root_tol: 1e-13,
            x_floor: 1e-16,
            tail_log_threshold: 1e-9f64.ln(),
            auto_restart: false,
            gate_points: 256,
        }
    }

    /// Parameters starting at `x_0 = log t0`.
    pub fn from_t0(h: f64, t0: f64, t_stop: f64) -> Self {
        Self::new(h, t0.ln(), t_stop)
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h >= 2.0) || !self.h.is_finite() {
            return Err(Error::input(format!("h must be at least 2, got {}", self.h)));
        }
        if !(self.x0 < 0.0) || !self.x0.is_finite() {
            return Err(Error::input(format!("x0 must be negative, got {}", self.x0)));
        }
        if !(self.t_stop > 0.0 && self.t_stop < 1.0) {
            return Err(Error::input(format!("t_stop must lie in (0, 1), got {}", self.t_stop)));
        }
        if self.k_max == 0 {
            return Err(Error::input("k_max must be positive"));
        }
        if !(self.root_tol > 0.0 && self.root_tol < 1e-3) {
            return Err(Error::input("root_tol must lie in (0, 1e-3)"));
        }
        if self.gate_points < 3 {
            return Err(Error::input("the convexity gate needs at least three points"));
        }
        Ok(())
    }
}

/// `ℓ(x) = log_a + delta · x`, tangent to `Φ` at `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentLine {
    /// Tangency abscissa; NaN when loaded from a state that did not record it.
    pub xi: f64,
    pub delta: f64,
    pub log_a: f64,
}

impl TangentLine {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.log_a + self.delta * x
    }

    /// `log a + e · x`: the line with its slope rounded up to the exponent.
    #[inline]
    pub fn value_with_exponent(&self, e: u64, x: f64) -> f64 {
        self.log_a + e as f64 * x
    }

    pub fn exponent(&self) -> u64 {
        self.delta.floor() as u64 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TStop,
    KMax,
    /// Continuing would exceed the exactly representable exponents.
    PrecisionExhausted,
}

/// Where the infinite construction was cut and how large the discarded tail
/// `Σ_{m>K} a_m t^{δ_m}` can be relative to `ω(t)` on `[t_0, t_stop]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub reason: StopReason,
    pub x_stop: f64,
    /// Log of the bound on tail / ω; `None` if it could not be computed.
    pub tail_log_bound: Option<f64>,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionState {
    pub h: f64,
    pub x0: f64,
    /// `x_0, …, x_K`.
    pub xs: Vec<f64>,
    /// `ℓ_1, …, ℓ_K`.
    pub lines: Vec<TangentLine>,
    pub es: Vec<u64>,
    pub t_stop: Option<f64>,
    pub k_max: Option<usize>,
    pub root_tol: Option<f64>,
    pub truncation: Option<Truncation>,
    pub weight: Option<WeightSpec>,
}

impl ConstructionState {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn ts(&self) -> Vec<f64> {
        self.xs.iter().map(|x| x.exp()).collect()
    }

    pub fn t0(&self) -> f64 {
        self.x0.exp()
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.delta).collect()
    }

    pub fn log_as(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.log_a).collect()
    }

    /// Upper end of the range where the truncated series is certified.
    pub fn t_verified(&self) -> f64 {
        match (&self.truncation, self.t_stop) {
            (Some(tr), _) => tr.x_stop.exp(),
            (None, Some(t)) => t,
            (None, None) => self.xs.last().copied().unwrap_or(self.x0).exp(),
        }
    }

    /// Structural invariants: lengths, strict monotonicity, signs.
    pub fn check_invariants(&self) -> Result<()> {
        let k = self.lines.len();
        if self.xs.len() != k + 1 || self.es.len() != k {
            return Err(Error::input(format!(
                "state has {} abscissas, {} lines and {} exponents",
                self.xs.len(),
                k,
                self.es.len()
            )));
        }
        if self.xs[0] != self.x0 {
            return Err(Error::input("xs[0] must equal x0"));
        }
        if !self.xs.windows(2).all(|w| w[0] < w[1]) || !(self.xs[k] < 0.0) {
            return Err(Error::input("xs must be strictly increasing and negative"));
        }
        if !self.lines.windows(2).all(|w| w[0].delta < w[1].delta) {
            return Err(Error::input("deltas must be strictly increasing"));
        }
        if !self.es.windows(2).all(|w| w[0] < w[1]) || self.es.first().is_some_and(|&e| e == 0) {
            return Err(Error::input("exponents must be strictly increasing positive integers"));
        }
        if self.lines.iter().any(|l| !(l.delta > 0.0) || !l.log_a.is_finite()) {
            return Err(Error::input("slopes must be positive and intercepts finite"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StateJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: StateJson = serde_json::from_str(text)?;
        let state = ConstructionState::try_from(raw)?;
        state.check_invariants()?;
        Ok(state)
    }
}

/// On-disk layout of a state.
#[derive(Serialize, Deserialize)]
struct StateJson {
    #[serde(serialize_with = "serialize_f17")]
    h: f64,
    #[serde(serialize_with = "serialize_f17")]
    x0: f64,
    #[serde(serialize_with = "serialize_vec_f17")]
    xs: Vec<f64>,
    #[serde(serialize_with = "serialize_vec_f17")]
    deltas: Vec<f64>,
    #[serde(serialize_with = "serialize_vec_f17")]
    log_as: Vec<f64>,
    es: Vec<u64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "serialize_opt_vec_f17"
    )]
    xis: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    root_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation: Option<TruncationJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<WeightSpec>,
}

#[derive(Serialize, Deserialize)]
struct TruncationJson {
    reason: StopReason,
    #[serde(serialize_with = "serialize_f17")]
    x_stop: f64,
    /// Rendered as a string so that infinities survive.
    tail_log_bound: Option<String>,
    certified: bool,
}

fn serialize_opt_vec_f17<S: serde::Serializer>(v: &Option<Vec<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => serialize_vec_f17(v, s),
        None => s.serialize_none(),
    }
}

impl From<&ConstructionState> for StateJson {
    fn from(s: &ConstructionState) -> Self {
        let xis: Vec<f64> = s.lines.iter().map(|l| l.xi).collect();
        StateJson {
            h: s.h,
            x0: s.x0,
            xs: s.xs.clone(),
            deltas: s.deltas(),
            log_as: s.log_as(),
            es: s.es.clone(),
            xis: xis.iter().all(|x| x.is_finite()).then_some(xis),
            t_stop: s.t_stop,
            k_max: s.k_max,
            root_tol: s.root_tol,
            truncation: s.truncation.as_ref().map(|t| TruncationJson {
                reason: t.reason,
                x_stop: t.x_stop,
                tail_log_bound: t.tail_log_bound.map(fmt17),
                certified: t.certified,
            }),
            weight: s.weight.clone(),
        }
    }
}

impl TryFrom<StateJson> for ConstructionState {
    type Error = Error;

    fn try_from(raw: StateJson) -> Result<Self> {
        let k = raw.deltas.len();
        if raw.log_as.len() != k {
            return Err(Error::input("deltas and log_as differ in length"));
        }
        let xis = match raw.xis {
            Some(v) if v.len() == k => v,
            Some(_) => return Err(Error::input("xis has the wrong length")),
            None => vec![f64::NAN; k],
        };
        let lines = (0..k)
            .map(|i| TangentLine {
                xi: xis[i],
                delta: raw.deltas[i],
                log_a: raw.log_as[i],
            })
            .collect();
        let truncation = match raw.truncation {
            Some(t) => Some(Truncation {
                reason: t.reason,
                x_stop: t.x_stop,
                tail_log_bound: match t.tail_log_bound {
                    Some(s) => Some(
                        s.parse::<f64>()
                            .map_err(|_| Error::input(format!("bad tail bound {s:?}")))?,
                    ),
                    None => None,
                },
                certified: t.certified,
            }),
            None => None,
        };
        Ok(ConstructionState {
            h: raw.h,
            x0: raw.x0,
            xs: raw.xs,
            lines,
            es: raw.es,
            t_stop: raw.t_stop,
            k_max: raw.k_max,
            root_tol: raw.root_tol,
            truncation,
            weight: raw.weight,
        })
    }
}

/// `h` large enough for the sum of the non-neighbouring terms to stay
/// below `δ/2` times the dominant one: `max(2, ln(1 + 4/δ))`.
pub fn h_for_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1], got {delta}")));
    }
    Ok((4.0 / delta).ln_1p().max(2.0))
}

/// Walks from `start` toward 0 until `f` turns non-negative, checking on the
/// way that `Φ'` keeps increasing. Returns `(last negative, first non-negative)`.
fn bracket_toward_zero(
    w: &WeightFunction,
    start: f64,
    x_floor: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let mut lo = start;
    let mut slope_lo = w.phi_prime(lo)?;
    let mut step = start.abs() * (-20f64).exp2();
    loop {
        let hi = (lo + step).min(lo / 2.0);
        if hi.abs() < x_floor || hi >= 0.0 {
            return Err(Error::NotUnbounded(format!(
                "no crossing found between {start} and {hi}; Φ grows too slowly near 0"
            )));
        }
        let slope_hi = w.phi_prime(hi)?;
        if !(slope_hi > slope_lo) {
            return Err(Error::NotStrictlyConvex(format!(
                "Φ' does not increase between x = {lo} and x = {hi}"
            )));
        }
        if f(hi)? >= 0.0 {
            return Ok((lo, hi));
        }
        lo = hi;
        slope_lo = slope_hi;
        step *= 2.0;
    }
}

/// Bisects an increasing `f` with `f(lo) < 0 <= f(hi)`; returns the final
/// `(lo, hi)` pair.
fn bisect(lo: f64, hi: f64, rel_tol: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > rel_tol * hi.abs() {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// One induction step from `x_prev`.
pub fn next_tangent(w: &WeightFunction, x_prev: f64, h: f64) -> Result<(TangentLine, f64)> {
    next_tangent_with(w, x_prev, h, 1e-13, 1e-16)
}

pub fn next_tangent_with(
    w: &WeightFunction,
    x_prev: f64,
    h: f64,
    root_tol: f64,
    x_floor: f64,
) -> Result<(TangentLine, f64)> {
    if !(x_prev < 0.0) {
        return Err(Error::domain(format!("x_prev must be negative, got {x_prev}")));
    }
    if !(h > 0.0) {
        return Err(Error::input("h must be positive"));
    }
    let anchor = w.phi(x_prev)? - h;

    // The tangent at ξ passes above the anchor for ξ near x_prev and below
    // it once ξ is far enough right; -G is increasing.
    let neg_g = |xi: f64| -> Result<f64> { Ok(-(w.phi(xi)? + w.phi_prime(xi)? * (x_prev - xi) - anchor)) };
    let (lo, hi) = bracket_toward_zero(w, x_prev, x_floor, neg_g)?;
    let (lo, hi) = bisect(lo, hi, root_tol, neg_g)?;
    let xi = lo + (hi - lo) / 2.0;
    let phi_xi = w.phi(xi)?;
    // Secant through the anchor and the tangency point: exact at the anchor,
    // and insensitive to kinks in Φ'.
    let delta = (phi_xi - anchor) / (xi - x_prev);
    let line = TangentLine {
        xi,
        delta,
        log_a: phi_xi - delta * xi,
    };

    let gap = |x: f64| -> Result<f64> { Ok(w.phi(x)? - h - (phi_xi + delta * (x - xi))) };
    let (lo, hi) = bracket_toward_zero(w, xi, x_floor, gap)?;
    let (lo, _) = bisect(lo, hi, root_tol, gap)?;
    Ok((line, lo))
}

fn gate(w: &WeightFunction, params: &ConstructionParams) -> Result<()> {
    let mut end = params.x0 * 1e-6;
    if let Some(limit) = w.domain_end() {
        end = end.min(limit);
    }
    if !(end > params.x0) {
        return Err(Error::domain(format!(
            "the weight is only defined up to x = {end}, not past x0 = {}",
            params.x0
        )));
    }
    let grid = geomspace(params.x0, end, params.gate_points);
    let report = check_log_convexity(w, &grid, &WeightConfig::default())?;
    if !report.is_strictly_convex {
        return Err(Error::NotStrictlyConvex(format!(
            "Φ' fails to increase on the gate grid (min slope gap {:e}, {} violations, first at x = {})",
            report.min_slope_gap,
            report.violation_points.len(),
            report.violation_points.first().copied().unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}

/// Log of the bound on the discarded tail relative to `ω` on `[x_0, x_stop]`,
/// given the first discarded line.
fn tail_bound(w: &WeightFunction, next: &TangentLine, x_stop: f64, h: f64) -> Result<f64> {
    Ok(next.value(x_stop) - w.phi(x_stop)? - (-(-h).exp()).ln_1p())
}

pub fn run_construction(w: &WeightFunction, params: &ConstructionParams) -> Result<ConstructionState> {
    params.validate()?;
    let mut p = params.clone();
    let mut restarts = 0;
    loop {
        match run_once(w, &p) {
            Err(Error::ExponentCollision { .. }) if p.auto_restart && restarts < 8 => {
                restarts += 1;
                p.x0 /= 2.0;
            }
            other => return other,
        }
    }
}

fn run_once(w: &WeightFunction, params: &ConstructionParams) -> Result<ConstructionState> {
    gate(w, params)?;
    let x_stop = params.t_stop.ln();
    let h = params.h;
    let step = |x: f64| next_tangent_with(w, x, h, params.root_tol, params.x_floor);

    let mut xs = vec![params.x0];
    let mut lines: Vec<TangentLine> = Vec::new();
    let mut es: Vec<u64> = Vec::new();

    let push = |xs: &mut Vec<f64>,
                lines: &mut Vec<TangentLine>,
                es: &mut Vec<u64>,
                line: TangentLine,
                x_next: f64|
     -> Result<()> {
        let k = lines.len() + 1;
        if !(line.delta < MAX_EXPONENT) {
            return Err(Error::PrecisionExhausted(format!(
                "slope {} at k={k} exceeds the exactly representable integers",
                line.delta
            )));
        }
        let x_prev = *xs.last().unwrap();
        if !(x_next > x_prev) || !(x_next < 0.0) || !(x_next.exp() > x_prev.exp()) || !(x_next.exp() < 1.0) {
            return Err(Error::PrecisionExhausted(format!(
                "abscissa x_{k} = {x_next} cannot be separated from x_{} = {x_prev} in double precision",
                k - 1
            )));
        }
        let e = line.exponent();
        if let Some(&prev) = es.last() {
            if e <= prev {
                return Err(Error::ExponentCollision {
                    k,
                    previous: prev,
                    current: e,
                });
            }
        }
        xs.push(x_next);
        lines.push(line);
        es.push(e);
        Ok(())
    };

    // Main phase: until t_k > t_stop or the cap.
    while lines.len() < params.k_max && !(xs.last().unwrap().exp() > params.t_stop) {
        let x_prev = *xs.last().unwrap();
        let (line, x_next) = step(x_prev)?;
        push(&mut xs, &mut lines, &mut es, line, x_next)?;
    }

    // Tail phase: the first discarded line must be negligible at the end of
    // the verified range.
    let x_last = *xs.last().unwrap();
    let x_stop = x_stop.min(x_last);
    let mut reason = if x_last.exp() > params.t_stop {
        StopReason::TStop
    } else {
        StopReason::KMax
    };
    let mut tail_log_bound: Option<f64>;
    loop {
        let x_prev = *xs.last().unwrap();
        let (line, x_next) = match step(x_prev) {
            Ok(n) => n,
            Err(Error::PrecisionExhausted(_) | Error::NotUnbounded(_) | Error::Numeric(_)) => {
                reason = StopReason::PrecisionExhausted;
                tail_log_bound = None;
                break;
            }
            Err(e) => return Err(e),
        };
        let bound = tail_bound(w, &line, x_stop, h)?;
        tail_log_bound = Some(bound);
        if bound <= params.tail_log_threshold {
            break;
        }
        if lines.len() >= params.k_max {
            reason = StopReason::KMax;
            break;
        }
        match push(&mut xs, &mut lines, &mut es, line, x_next) {
            Ok(()) => {}
            Err(Error::PrecisionExhausted(_)) => {
                reason = StopReason::PrecisionExhausted;
                tail_log_bound = None;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let certified = tail_log_bound.is_some_and(|b| b <= params.tail_log_threshold);

    Ok(ConstructionState {
        h,
        x0: params.x0,
        xs,
        lines,
        es,
        t_stop: Some(params.t_stop),
        k_max: Some(params.k_max),
        root_tol: Some(params.root_tol),
        truncation: Some(Truncation {
            reason,
            x_stop,
            tail_log_bound,
            certified,
        }),
        weight: Some(w.spec().clone()),
    })
}

/// Consecutive ratios `e_{k+1} / e_k`.
pub fn frequency_profile(es: &[u64]) -> Vec<f64> {
    es.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect()
}
