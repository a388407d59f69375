//! Generalized labeled multi-Bernoulli (GLMB) point processes.
//!
//! The crate covers the density model ([`density`]), exact void probabilities
//! over spatial regions ([`void_prob`]), the closed-form Cauchy-Schwarz
//! divergence between GLMBs ([`cs_divergence`]), the GLMB Bayes recursion
//! ([`filter`]), constrained myopic sensor control ([`control`]) and a scenario
//! harness with OSPA scoring ([`scenario`]). A Poisson reference
//! implementation ([`poisson`]) and brute-force set-integral oracles
//! ([`oracle`]) are kept alongside for cross-checking.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.
//! Results never depend on the worker count.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Quadrature nodes are kept as published.
#![allow(clippy::excessive_precision)]

pub mod assignment;
pub mod control;
pub mod cs_divergence;
pub mod cubature;
pub mod density;
pub mod error;
pub mod filter;
pub mod gaussian;
pub mod label;
pub mod oracle;
pub mod par;
pub mod poisson;
pub mod region;
pub mod rng;
pub mod scenario;
pub mod serialize;
pub mod void_prob;

pub use cs_divergence::{cs_divergence, glmb_inner_product, GlmbInnerProduct};
pub use density::{CardinalityDistribution, GlmbComponent, GlmbDensity};
pub use error::{GlmbError, Result};
pub use gaussian::{Gaussian, GaussianIntensity, GaussianMixture, Matrix, Vector};
pub use label::Label;
pub use region::Region;
pub use void_prob::{escape_probability, glmb_void_probability};
