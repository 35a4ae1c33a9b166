//! Discrete one-phase Bernoulli (Alt–Caffarelli) free boundary problems on
//! weighted graphs and simplicial meshes.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`] builds metric measure complexes (intervals, rectangles,
//!   cones, the doubled equilateral triangle and tensor products) and answers
//!   distance, ball and shell queries;
//! * [`field`] holds nonnegative vector fields, the weight `Q` and positivity
//!   masks;
//! * [`energy`] assembles the discrete functional and the competitor
//!   constructions used to certify minimality;
//! * [`harmonic`] solves constrained Dirichlet problems and extracts the
//!   Laplacian measure;
//! * [`minimize`] computes minimizers with two independent methods, a brute
//!   force oracle and a move-catalogue certificate;
//! * [`diagnostics`] measures Weiss density, growth, densities, perimeter,
//!   Euler–Lagrange densities and blow-ups.
//!
//! Data-parallel loops go through [`exec::Exec`], which dispatches to rayon
//! when the `parallel` feature is enabled and runs sequentially otherwise.

// NaN-rejecting checks are written as `!(x > 0.0)`; index loops mirror the
// sparse kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod exec;
pub mod field;
pub mod geometry;
pub mod harmonic;
pub mod linalg;
pub mod minimize;
pub mod numeric;

pub use error::{Error, Result};
pub use exec::Exec;
pub use field::{PositivityMask, QField, VectorField};
pub use geometry::{DistanceField, MetricComplex};

/// Default positivity threshold in field units.
pub const DEFAULT_TAU: f64 = 1e-12;
