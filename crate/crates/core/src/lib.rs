//! Numerical geometry of generalized Cheeger-Gromoll metrics on tangent
//! bundles of statistical manifolds.
//!
//! The crate computes, from a symbolic manifold spec (metric plus skewness
//! tensor or statistical Christoffel symbols), the full base geometry, the
//! lifted metric and its connection and curvature in the adapted frame via
//! closed forms, and the same quantities from scratch in induced
//! coordinates as an independent oracle for cross-validation.

pub mod analysis;
pub mod cgbundle;
pub mod error;
pub mod expr;
pub mod oracle;
pub mod jet;
pub mod linalg;
pub mod models;
pub mod statman;

pub use error::{GeomError, Result};
