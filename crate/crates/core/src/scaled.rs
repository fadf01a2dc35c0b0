//! Complex numbers with a detached logarithmic scale.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::numeric::NeumaierSum;

/// Terms this far below the dominant one (in log magnitude) are discarded.
pub const DROP_THRESHOLD: f64 = -200.0;

/// `mantissa · exp(log_scale)` with `|mantissa| ∈ [1, 2)`; zero is the
/// zero mantissa with `log_scale = -inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledComplex {
    pub mantissa: Complex64,
    pub log_scale: f64,
}

impl ScaledComplex {
    pub const ZERO: ScaledComplex = ScaledComplex {
        mantissa: Complex64::new(0.0, 0.0),
        log_scale: f64::NEG_INFINITY,
    };

    pub fn new(value: Complex64, log_scale: f64) -> Self {
        if value == Complex64::new(0.0, 0.0) || log_scale == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let norm = value.norm();
        let mut k = norm.log2().floor();
        let mut m = norm / k.exp2();
        // log2 can land one ulp on the wrong side of a power of two.
        while m >= 2.0 {
            k += 1.0;
            m = norm / k.exp2();
        }
        while m < 1.0 {
            k -= 1.0;
            m = norm / k.exp2();
        }
        ScaledComplex {
            mantissa: value / k.exp2(),
            log_scale: log_scale + k * LN_2,
        }
    }

    pub fn from_complex(value: Complex64) -> Self {
        Self::new(value, 0.0)
    }

    /// `exp(log_abs) · e^{i·arg}`.
    pub fn from_polar(log_abs: f64, arg: f64) -> Self {
        let (s, c) = arg.sin_cos();
        Self::new(Complex64::new(c, s), log_abs)
    }

    pub fn is_zero(&self) -> bool {
        self.log_scale == f64::NEG_INFINITY
    }

    pub fn log_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mantissa.norm().ln() + self.log_scale
        }
    }

    pub fn arg(&self) -> f64 {
        self.mantissa.arg()
    }

    /// Plain complex value; overflows to infinity (or underflows to zero)
    /// outside the f64 range.
    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        self.mantissa * self.log_scale.exp()
    }

    pub fn mul(&self, other: &ScaledComplex) -> ScaledComplex {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.mantissa * other.mantissa, self.log_scale + other.log_scale)
    }

    pub fn add(&self, other: &ScaledComplex) -> ScaledComplex {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (hi, lo) = if self.log_scale >= other.log_scale {
            (self, other)
        } else {
            (other, self)
        };
        let d = lo.log_scale - hi.log_scale;
        if d < DROP_THRESHOLD {
            return *hi;
        }
        Self::new(hi.mantissa + lo.mantissa * d.exp(), hi.log_scale)
    }
}

/// Sum of `exp(log_mag_k) · e^{i·phase_k}` in the given order.
///
/// The dominant log magnitude is factored out, terms more than
/// [`DROP_THRESHOLD`] below it are skipped and the real and imaginary parts
/// are accumulated with compensation.
pub fn sum_polar_terms<I>(terms: I) -> ScaledComplex
where
    I: IntoIterator<Item = (f64, f64)>,
    I::IntoIter: Clone,
{
    let iter = terms.into_iter();
    let top = iter.clone().map(|(l, _)| l).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return ScaledComplex::ZERO;
    }
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for (l, phase) in iter {
        let d = l - top;
        if d < DROP_THRESHOLD {
            continue;
        }
        let mag = d.exp();
        let (s, c) = phase.sin_cos();
        re.add(mag * c);
        im.add(mag * s);
    }
    ScaledComplex::new(Complex64::new(re.value(), im.value()), top)
}

/// Same as [`sum_polar_terms`] with the phases given as unit complex numbers.
pub fn sum_unit_terms<I>(terms: I) -> ScaledComplex
where
    I: IntoIterator<Item = (f64, Complex64)>,
    I::IntoIter: Clone,
{
    let iter = terms.into_iter();
    let top = iter.clone().map(|(l, _)| l).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return ScaledComplex::ZERO;
    }
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for (l, unit) in iter {
        let d = l - top;
        if d < DROP_THRESHOLD {
            continue;
        }
        let mag = d.exp();
        re.add(mag * unit.re);
        im.add(mag * unit.im);
    }
    ScaledComplex::new(Complex64::new(re.value(), im.value()), top)
}
