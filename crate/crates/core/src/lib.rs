//! Information geometry of the Gamma and Weibull manifolds applied to
//! texture retrieval: special functions, densities and estimators, Fisher
//! metrics and geodesics, divergences, graph-based geodesic approximation,
//! DTCWT signatures and retrieval evaluation.

pub mod distributions;
pub mod divergences;
pub mod error;
pub mod features;
pub mod geometry;
pub mod graph;
pub mod quadrature;
pub mod retrieval;
pub mod specfun;
pub mod synth;

pub use distributions::Family;
pub use error::{Error, Result};
