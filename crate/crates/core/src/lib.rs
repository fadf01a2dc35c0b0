//! Holomorphic lacunary series whose moduli are equivalent to a log-convex
//! radial weight on the unit disk and on the unit ball.
//!
//! The crate is organised along the pipeline:
//!
//! * [`weight`] radial weights `ω`, the reparametrisation `Φ(x) = log ω(eˣ)`
//!   and their diagnostics,
//! * [`construction`] the tangent-line induction producing the sequences
//!   `x_k`, `δ_k`, `log a_k`, `e_k`, together with the auxiliary estimate
//!   verifier,
//! * [`series`] the pair `(G₁, G₂)`, stable evaluation anywhere in the disk,
//!   the sandwich certificate and the final zero adjustment,
//! * [`envelope`] the converse direction: maximum modulus, three-circles
//!   convexity checks and the lower convex envelope decision procedure,
//! * [`ball`] the transfer to the unit ball over pluggable homogeneous
//!   polynomial families.
//!
//! All magnitudes that can leave the `f64` range are carried in log form.

// `!(a < b)` is used on purpose so that NaN fails every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ball;
pub mod construction;
pub mod envelope;
mod error;
pub mod grid;
pub mod numeric;
pub mod scaled;
pub mod series;
pub mod weight;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use scaled::ScaledComplex;
