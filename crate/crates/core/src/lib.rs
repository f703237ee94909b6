//! Quasi-periodic Nicholson delay systems with patch structure.
//!
//! - [`model`] and [`conditions`]: the coefficient family over the torus base
//!   flow and checks of the structural hypotheses and the invariant zone.
//! - [`dde`]: fixed-step Gauss-Legendre and Bogacki-Shampine integration of
//!   delay systems with Hermite dense output.
//! - [`spectral`]: linearization at zero, block decomposition of the migration
//!   bound matrix, Lyapunov exponents and the persistence verdict.
//! - [`attractor`]: pullback limits over a torus grid and parameter studies.

pub mod attractor;
pub mod conditions;
pub mod dde;
pub mod error;
mod linalg;
pub mod model;
pub mod modelfile;
pub mod spectral;
pub mod svg;
pub mod torus;

pub use error::{AttractorError, ModelError, SolverError, SpectralError};
pub use model::{CoeffValues, Family, Nonlinearity, ParamSet, Shape, SystemSpec};
pub use torus::TorusPoint;
