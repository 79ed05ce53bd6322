//! JSON run configuration.

use std::path::{Path, PathBuf};

use optimix_core::diagnostics::{BalanceMode, DEFAULT_FDS_POINTS, DEFAULT_FDS_SEED};
use optimix_core::{
    prior_draws, CriterionKind, DrawMatrix, IngredientBounds, ModelSpec, OptimizerConfig,
    PriorSpec, ScheffeOrder,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::read_draws;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub q: usize,
    pub order: ScheffeOrder,
    pub choice_sets: usize,
    pub alternatives: usize,
    pub criterion: CriterionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorConfig>,
    /// Point parameter vector for local criteria.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    /// Lower bounds on the actual ingredient proportions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bounds: Option<Vec<f64>>,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub fds: FdsSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Leading Halton points to discard.
    #[serde(default)]
    pub skip: usize,
    /// Precomputed draws (CSV, relative to the config file) used instead of
    /// generating Halton draws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws_file: Option<PathBuf>,
}

fn default_draws() -> usize {
    128
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub n_starts: usize,
    pub max_sweeps: usize,
    pub brent_tol: f64,
    pub improvement_tol: f64,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            n_starts: d.n_starts,
            max_sweeps: d.max_sweeps,
            brent_tol: d.brent_tol,
            improvement_tol: d.improvement_tol,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdsSettings {
    pub points: usize,
    pub seed: u64,
    pub balance: BalanceMode,
}

impl Default for FdsSettings {
    fn default() -> Self {
        Self {
            points: DEFAULT_FDS_POINTS,
            seed: DEFAULT_FDS_SEED,
            balance: BalanceMode::DrawAverage,
        }
    }
}

/// A validated configuration together with everything derived from it.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub config: RunConfig,
    pub spec: ModelSpec,
    pub draws: DrawMatrix,
    pub bounds: Option<IngredientBounds>,
}

impl LoadedConfig {
    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.config.optimizer;
        OptimizerConfig {
            n_starts: o.n_starts,
            max_sweeps: o.max_sweeps,
            brent_tol: o.brent_tol,
            improvement_tol: o.improvement_tol,
            seed: o.seed,
            criterion: self.config.criterion,
        }
    }

    /// D and I kinds matching the configured parameter information.
    pub fn evaluation_kinds(&self) -> (CriterionKind, CriterionKind) {
        if self.config.prior.is_some() {
            (CriterionKind::BayesD, CriterionKind::BayesI)
        } else {
            (CriterionKind::LocalD, CriterionKind::LocalI)
        }
    }
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

pub fn load(path: &Path) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::at(path, None, format!("cannot read config: {e}")))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::at(path, Some(e.line()), e))?;
    validate(path, &text, config)
}

fn validate(path: &Path, text: &str, config: RunConfig) -> CliResult<LoadedConfig> {
    let err = |key: &str, msg: String| CliError::at(path, line_of(text, key), msg);

    let spec = ModelSpec::new(config.q, config.order).map_err(|e| err("q", e.to_string()))?;
    let r = spec.r();
    if config.choice_sets == 0 {
        return Err(err("choice_sets", "choice_sets must be at least 1".into()));
    }
    if config.alternatives < 2 {
        return Err(err("alternatives", "alternatives must be at least 2".into()));
    }
    let o = &config.optimizer;
    if o.n_starts == 0 {
        return Err(err("n_starts", "n_starts must be at least 1".into()));
    }
    if o.max_sweeps == 0 {
        return Err(err("max_sweeps", "max_sweeps must be at least 1".into()));
    }
    if !(o.brent_tol > 0.0) {
        return Err(err("brent_tol", "brent_tol must be positive".into()));
    }
    if !(o.improvement_tol > 0.0) {
        return Err(err("improvement_tol", "improvement_tol must be positive".into()));
    }
    if config.fds.points < 100 {
        return Err(err(
            "points",
            format!("fds.points must be at least 100, got {}", config.fds.points),
        ));
    }

    let bounds = match &config.lower_bounds {
        None => None,
        Some(lower) => {
            if lower.len() != config.q {
                return Err(err(
                    "lower_bounds",
                    format!("lower_bounds has {} entries but q = {}", lower.len(), config.q),
                ));
            }
            Some(IngredientBounds::new(lower.clone()).map_err(|e| err("lower_bounds", e.to_string()))?)
        }
    };

    let draws = match (&config.prior, &config.beta) {
        (Some(_), Some(_)) => {
            return Err(err("beta", "give either prior or beta, not both".into()));
        }
        (None, None) => {
            return Err(err("criterion", "a prior or a beta vector is required".into()));
        }
        (None, Some(beta)) => {
            if config.criterion.is_bayesian() {
                return Err(err(
                    "criterion",
                    format!("{} needs a prior, not a point beta", config.criterion.as_str()),
                ));
            }
            if beta.len() != r {
                return Err(err(
                    "beta",
                    format!(
                        "beta has {} entries but the {} model with q = {} has {r} parameters",
                        beta.len(),
                        config.order.as_str(),
                        config.q
                    ),
                ));
            }
            if beta.iter().any(|v| !v.is_finite()) {
                return Err(err("beta", "beta entries must be finite".into()));
            }
            DrawMatrix::single(beta.clone()).map_err(|e| err("beta", e.to_string()))?
        }
        (Some(prior), None) => {
            if !config.criterion.is_bayesian() {
                return Err(err(
                    "criterion",
                    format!("{} needs a point beta, not a prior", config.criterion.as_str()),
                ));
            }
            prior_matrix(path, text, prior, r)?
        }
    };

    Ok(LoadedConfig {
        path: path.to_path_buf(),
        config,
        spec,
        draws,
        bounds,
    })
}

fn prior_matrix(path: &Path, text: &str, prior: &PriorConfig, r: usize) -> CliResult<DrawMatrix> {
    let err = |key: &str, msg: String| CliError::at(path, line_of(text, key), msg);
    if prior.mean.len() != r {
        return Err(err(
            "mean",
            format!("prior mean has {} entries but the model has {r} parameters", prior.mean.len()),
        ));
    }
    if prior.covariance.len() != r {
        return Err(err(
            "covariance",
            format!("covariance has {} rows, expected {r}", prior.covariance.len()),
        ));
    }
    if let Some(i) = prior.covariance.iter().position(|row| row.len() != r) {
        return Err(err(
            "covariance",
            format!(
                "covariance row {} has {} entries, expected {r}",
                i + 1,
                prior.covariance[i].len()
            ),
        ));
    }
    if prior.draws == 0 {
        return Err(err("draws", "prior draws must be at least 1".into()));
    }
    let spec = PriorSpec::new(prior.mean.clone(), prior.covariance.clone(), prior.draws)
        .map_err(|e| err("covariance", e.to_string()))?;
    if let Some(file) = &prior.draws_file {
        let resolved = match path.parent() {
            Some(dir) if file.is_relative() => dir.join(file),
            _ => file.clone(),
        };
        let draws = read_draws(&resolved, r)?;
        if draws.len() != prior.draws {
            return Err(err(
                "draws_file",
                format!("draws_file has {} rows but prior.draws = {}", draws.len(), prior.draws),
            ));
        }
        return Ok(draws);
    }
    prior_draws(&spec, prior.skip).map_err(|e| err("covariance", e.to_string()))
}
