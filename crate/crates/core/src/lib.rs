//! Mode-by-mode solver for antisymmetric harmonic functions on radial model manifolds
//! with long flat necks, with the Poisson maps, metric-variation formulas and
//! response matrices built on top of it.

// Negated float comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod geometry;
pub mod green_maps;
pub mod mode_matrix;
pub mod mode_solver;
pub mod quadrature;
pub mod radial_ode;
pub mod sweep;
pub mod variation;

pub use error::{Error, Result};
