//! Stochastic frailty models for mortality.
//!
//! Death counts and exposures on a Lexis window are modelled as Poisson with
//! intensity `nu'(I) F (+ G)`, where `F` is a baseline model fragilized by a
//! frailty distribution and `G` an optional background term. Fitting uses a
//! pseudo-likelihood in which the integrated baseline `I` is replaced by the
//! transform of the empirical cumulative hazard. Forecasts run the period
//! index forward as a random walk with drift.

pub mod baseline;
pub mod data;
pub mod error;
pub mod estimation;
pub mod forecast;
pub mod frailty;
pub mod lexis;
pub mod numeric;
pub mod optim;

pub use baseline::{BaselineModel, BaselineParams};
pub use data::{MortalitySurface, RateSurface};
pub use error::{Error, Result};
pub use frailty::{FrailtyFamily, FrailtySpec};
pub use lexis::{Grid, LexisWindow};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
