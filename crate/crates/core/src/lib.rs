//! Numerical laboratory for counting similar copies of simplices and distance
//! graphs inside fractal measures.
//!
//! The pipeline runs from fractal measures ([`measure_forge`]) through
//! band-limited mollification ([`mollify`]) to Monte Carlo counting
//! functionals over configuration spaces ([`estimators`]), with the
//! configuration geometry in [`euclid_config`] and [`graph_config`], samplers
//! in [`sampler`], Fourier-side diagnostics in [`spectral`] and a direct
//! pattern search in [`patternscan`].

// `!(x > 0.0)` rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod quadrature;
pub mod radial;
pub mod rng;
pub mod stats;

pub mod measure_forge;
pub mod mollify;
pub mod euclid_config;
pub mod graph_config;
pub mod sampler;
pub mod estimators;
pub mod spectral;
pub mod patternscan;

pub use error::{Error, Result};
