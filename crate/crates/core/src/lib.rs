//! Stochastic convex optimization with epoch-wise variance reduction (VISOR),
//! accelerated and plain stochastic-gradient inner loops under general Hilbert
//! norms, classic baselines (vanilla/averaged stochastic approximation, SAA),
//! ground-truth problem instances, and a seeded Monte-Carlo benchmark harness.
//!
//! Everything is deterministic given an explicit random stream: instances are
//! immutable, samplers are pure functions of `(x, stream)`, and sweeps derive
//! one stream per trial so results do not depend on execution order.

// negated float comparisons of the form `!(x > 0.0)` are deliberate: they
// reject NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod harness;
pub mod inner_asgd;
pub mod inner_sgd;
pub mod metrics;
pub mod normspace;
pub mod problems;
pub mod rng;
pub mod visor;

pub use error::{Error, Result};
pub use normspace::NormSpace;
pub use problems::{InstanceConstants, ProblemInstance};
pub use rng::{stream_from_seed, SampleStream};
