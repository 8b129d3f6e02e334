//! # suplab: a superposition laboratory
//!
//! Numerical testbed for local (test-time trained) versus global linear
//! estimators on sparse-concept worlds. A world holds an s-sparse concept map
//! into R^{d1}, a dense feature map into R^{d2} obtained by random
//! superposition (d2 << d1), and a linear ground truth in concept space.
//! The crate provides:
//!
//! - [`numeric`]: matrices, seeded streamed RNG, Adam, schedules, SVD/QR,
//!   finite-difference gradient checks;
//! - [`concepts`]: synthetic world generators, including the globally
//!   non-learnable instance whose population error for any global linear
//!   readout is exactly 1 - d2/d1;
//! - [`neighborhood`]: exact cosine k-NN / radius retrieval and geometry
//!   diagnostics (containment slack, sparse dual norm, noise concentration);
//! - [`estimators`]: minimum-norm least squares, the sparsity-constrained
//!   local estimator (exhaustive and greedy-OMP modes), ridge, k-NN
//!   regression, interference evaluation, and rate curves;
//! - [`sae`]: top-k sparse autoencoders with ghost gradients, decoder column
//!   normalization, dropout, sparsity ramps, plus the learned binary concept
//!   mask with straight-through gradients;
//! - [`classify`]: multinomial logistic heads, per-point fine-tuning,
//!   majority vote, k-means mixtures of experts, and temperature-calibrated
//!   predictive comparison;
//! - [`harness`]: config-driven experiments with bootstrap confidence
//!   intervals, IDX/embedding ingestion, CSV tables, and SVG plots;
//! - [`assumptions`]: the measurable predicates (eta_ang, eta_spa, eta_rep,
//!   kappa) that decide whether a world/neighborhood pair supports local
//!   sparse recovery.
//!
//! Every stochastic routine takes a [`numeric::SeededRng`]; identical
//! (seed, stream) pairs reproduce bit-identical results, and the harness
//! derives one stream per grid point so any run can be replayed alone.

pub mod assumptions;
pub mod concepts;
pub mod classify;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod neighborhood;
pub mod numeric;
pub mod sae;

pub use error::{Error, Result};
