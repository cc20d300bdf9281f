//! Numerical engine for Riemannian Lie algebroids over a local chart.
//!
//! An algebroid is given by its anchor `b^{si}(x)` and bracket coefficients
//! `C_st^u(x)` as analytic expressions; a fiber metric `g_ij(x)` makes it
//! Riemannian. From these the crate computes the Levi-Civita A-connection,
//! geodesics, parallel transport, Jacobi fields, the Hamiltonian form of the
//! geodesic flow, the O'Neill splitting along the anchor kernel and
//! variations of A-paths.

pub mod algebroid;
pub mod catalog;
pub mod chartfile;
pub mod cli;
pub mod error;
pub mod hamiltonian;
pub mod metric;
pub mod numeric;
pub mod oneill;
pub mod paths;
pub mod scalar_field;
pub mod variations;

pub use algebroid::{AVector, AlgebroidChart, BracketEntry, SectionField, ValidationReport};
pub use error::{Error, Result};
pub use metric::{MetricField, RiemannianAlgebroid};
pub use scalar_field::ScalarField;
