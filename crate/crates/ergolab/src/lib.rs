//! Numerical laboratory for stochastic differential equations that admit
//! invariant measures.
//!
//! The crate simulates autonomous SDEs `dX = b(X)dt + σ(X)dW` with fixed-step,
//! tamed, and exact schemes, and implements the estimator stack used to study
//! pathwise growth: exponential transforms `Y = e^{δV(X)}` with their drift
//! and noise rates, the martingale `M_t` and its quadratic variation,
//! Birkhoff running averages, law-of-iterated-logarithm ratios, growth
//! envelopes `V(X_t)/log t`, and the exponent bootstrap recursion. An
//! independent quadrature oracle provides ground-truth expectations for
//! gradient (Langevin/OU) models, and a separate lab covers
//! Marcinkiewicz–Zygmund scaled sums for heavy-tailed and dependent
//! stationary sequences.
//!
//! Everything is deterministic: driving noise comes from a counter-based
//! generator keyed by `(master_seed, path_id)`, so ensembles reproduce
//! bit-for-bit at any worker count.

pub mod error;
pub mod ergodic;
pub mod model;
pub mod oracle;
pub mod poly;
pub mod rng;
pub mod schedule;
pub mod simulate;
pub mod slln;
pub mod transform;

pub use error::{Error, Result};
