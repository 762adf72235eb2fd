//! Identifiable factor analysis for mixed continuous and binary variables.
//!
//! The observed distribution is a Gaussian mixture over all binary patterns
//! with Ising mixing weights, so the likelihood is available in closed form
//! by enumerating the `2^q` binary states. Loadings are norm-constrained
//! (every row of the dimensionless loading matrix has the same norm `c`),
//! and [`canon::canonicalize`] fixes the remaining rotational freedom.

pub mod baseline;
pub mod biplot;
pub mod canon;
pub mod data;
pub mod error;
pub mod fit;
pub mod io;
pub mod model;
pub mod params;
pub mod random_model;
pub mod sample;
pub mod states;
pub mod synth;

pub use canon::{canonicalize, CanonicalModel};
pub use data::{Column, ColumnKind, Dataset, Row, Schema};
pub use error::{Error, Result, MAX_BINARY};
pub use fit::{bic, count_free_params, fit, log_likelihood, FitConfig, FitResult, FreeParams};
pub use model::{factor_scores, FactorScore, MixingTable, Model, MomentSummary, PosteriorResult};
pub use params::ModelParams;
pub use sample::sample;
pub use states::{enumerate_states, BitState};
