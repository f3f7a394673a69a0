//! Numerical laboratory for mixed p-spin spherical spin glasses.
//!
//! * [`mixture`] — the covariance function ξ and its derived models;
//! * [`variational`] — Crisanti–Sommers functionals, model types, decomposition;
//! * [`kacrice`] — complexity functions and the ground-state rate function;
//! * [`landscape`] — sampled Hamiltonians and their derivatives on the sphere;
//! * [`subag`] — randomized Hessian ascent;
//! * [`tree`] — ultrametric trees of near-optimisers, pruning and orthogonalization;
//! * [`output`] — deterministic JSON output.

// `!(x > 0.0)` is used deliberately throughout: it rejects NaN together with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kacrice;
pub mod landscape;
pub mod mixture;
pub mod optimize;
pub mod output;
pub mod rng;
pub mod subag;
pub mod tree;
pub mod variational;

pub use error::{Error, Result};
pub use mixture::{band_mixture, band_mixture_grad, submodel, submodel_root, AffineMixture, Covariance, Mixture};
pub use variational::{IntervalSet, ModelType, OneRSBParams, OrderParamFT, OrderParamZT};

/// Library version embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
