//! Sampling grids.

use std::f64::consts::PI;

/// `n` equispaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * (i as f64) / ((n - 1) as f64)
                }
            })
            .collect(),
    }
}

/// `n` points from `a` to `b` inclusive with constant ratio; `a` and `b`
/// must share a sign and be nonzero.
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let sign = a.signum();
    let (la, lb) = (a.abs().ln(), b.abs().ln());
    let mut out: Vec<f64> = linspace(la, lb, n).into_iter().map(|l| sign * l.exp()).collect();
    if let Some(f) = out.first_mut() {
        *f = a;
    }
    if let Some(l) = out.last_mut() {
        *l = b;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    /// Equispaced in `t`.
    Linear,
    /// Equispaced in `log(1 - t)`, concentrating points near the circle.
    #[default]
    Log,
}

/// `n` radii in the half-open interval `(t_lo, t_hi]`, the last one equal
/// to `t_hi`.
pub fn t_grid(t_lo: f64, t_hi: f64, n: usize, spacing: Spacing) -> Vec<f64> {
    let mut out: Vec<f64> = match spacing {
        Spacing::Linear => (1..=n)
            .map(|i| t_lo + (t_hi - t_lo) * (i as f64) / (n as f64))
            .collect(),
        Spacing::Log => {
            let (la, lb) = ((1.0 - t_lo).ln(), (1.0 - t_hi).ln());
            (1..=n)
                .map(|i| 1.0 - (la + (lb - la) * (i as f64) / (n as f64)).exp())
                .collect()
        }
    };
    if let Some(l) = out.last_mut() {
        *l = t_hi;
    }
    out
}

/// Radii `t0 · sin(πi / (2(n-1)))`, `i = 0..n`: from the origin to `t0`,
/// clustered near `t0`.
pub fn chebyshev_radii(t0: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![t0],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    t0
                } else {
                    t0 * (PI * i as f64 / (2.0 * (n - 1) as f64)).sin()
                }
            })
            .collect(),
    }
}

/// Angles `2πj/n`, `j = 0..n`.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}
