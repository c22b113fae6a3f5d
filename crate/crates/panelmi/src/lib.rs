//! Multiple imputation of non-ignorable panel attrition in two-wave
//! categorical panel studies with refreshment samples.
//!
//! The crate provides:
//!
//! - a panel/refreshment data model with structural-missingness semantics
//!   ([`data`], [`io`]);
//! - seeded, splittable random streams and the conjugate samplers the Gibbs
//!   steps need ([`stochastic`]);
//! - truncated stick-breaking latent-class models, with wave-2 multinomials
//!   either pooled across attrition status or split by it, estimated by a
//!   blocked Gibbs sampler ([`state`], [`gibbs`]);
//! - a simulation bench with analytic oracles, a complete-case baseline, and
//!   accuracy metrics across replications ([`sim`]);
//! - posterior predictive checks and chain health diagnostics
//!   ([`diagnostics`]);
//! - combining rules and survey-weighted ratio estimates for analyzing the
//!   retained completed datasets ([`mi`]).

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod mi;
pub mod sim;
pub mod state;
pub mod stochastic;

pub use error::{Error, Result};
