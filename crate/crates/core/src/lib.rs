//! Truncated Schrödinger problems `-Δu + min(V, k) u = f` with Dirichlet
//! data on the unit interval and the unit disk, their limits as `k -> ∞`,
//! and the boundary behaviour of those limits.

pub mod boundary;
pub mod decimal;
pub mod error;
pub mod extrapolate;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod potential;
pub mod quadrature;
pub mod solver;
pub mod singular;
pub mod source;

pub use error::{Error, Result};
pub use geometry::{BoundaryPoint, Domain, Grid, Point};
pub use potential::{PotentialSpec, TruncationLadder};
pub use source::{SourceField, SourceSpec};
