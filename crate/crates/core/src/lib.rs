//! Harmonic analysis for reflection-group weights: root systems, Dunkl
//! operators, weighted spherical integration, h-harmonic expansions,
//! localization/uncertainty functionals on the sphere, and their transfers
//! to the unit ball and the standard simplex.

pub mod error;
pub mod poly;
pub mod reflection;
pub mod operators;
pub mod quadrature;
pub mod harmonics;
pub mod uncertainty;
pub mod transfer;
pub mod samples;
pub mod report;
pub mod tolerances;

pub use error::{CoreError, Result};
pub use operators::{angular_derivative, OperatorContext};
pub use poly::{MPoly, Mode, Poly, Rat};
pub use reflection::{reflect, weight_eval, Family, Multiplicity, RootSystem};
