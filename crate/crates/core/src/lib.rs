//! Bayesian optimal designs for choice experiments with mixtures.
//!
//! The crate covers the Scheffé model expansions on the simplex, the
//! multinomial logit information matrix, D- and I-type criteria (local and
//! averaged over prior draws), quasi-random prior draws, a multi-start
//! coordinate-exchange optimizer and design diagnostics.

pub mod brent;
pub mod choice;
pub mod criteria;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod optimizer;
pub mod priors;
pub mod simplex;

pub use brent::brent_minimize;
pub use choice::{choice_probabilities, information_matrix, Design, InfoMatrix, ParamVector};
pub use criteria::{
    bayes_d, bayes_i, evaluate, local_d, local_i, moments_matrix, CriterionKind, CriterionValue,
    MomentsMatrix,
};
pub use diagnostics::{
    diagnose, fds_data, prediction_variance, utility_balance, within_set_distances, BalanceMode,
    DiagnosticsReport, FdsSeries, Summary,
};
pub use error::{Error, Result};
pub use optimizer::{coordinate_exchange, improve_design, OptimResult, OptimizerConfig};
pub use priors::{cocktail_prior, prior_draws, sweetener_prior, DrawMatrix, PriorSpec};
pub use simplex::{
    cox_adjust, pseudo_to_actual, actual_to_pseudo, scheffe_expand, IngredientBounds,
    MixturePoint, ModelSpec, ScheffeOrder,
};
