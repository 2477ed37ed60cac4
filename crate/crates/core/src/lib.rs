//! Pseudospectral simulation of the Landau-Lifshitz flow of a planar director
//! field under the Oseen-Frank energy, with energy-law diagnostics and
//! Littlewood-Paley tools.

pub mod cli_io;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod initial;
pub mod littlewood_paley;
pub mod oracle;
pub mod oseen_frank;
pub mod profile;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{DirectorField, GridSpec, ScalarField, Vec3, VectorField3};
pub use oseen_frank::{EnergyBreakdown, FrankConstants, GilbertParams};
