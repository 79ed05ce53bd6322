use std::path::{Path, PathBuf};

use optimix_core::criteria::evaluate;
use optimix_core::{
    coordinate_exchange, diagnose, CriterionValue, DiagnosticsReport, DrawMatrix, Error,
    OptimResult,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{self, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::io::{draws_hash, read_design, write_design, write_draws, write_report};

const DEFAULT_OUT: &str = "optimix-out";

fn out_dir(cfg: &LoadedConfig, out: Option<&Path>) -> CliResult<PathBuf> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn draws_json(draws: &DrawMatrix) -> serde_json::Value {
    json!({
        "rows": draws.len(),
        "params": draws.params(),
        "sha256": draws_hash(draws),
    })
}

#[derive(Debug)]
pub struct OptimizeOutcome {
    pub result: OptimResult,
    pub out_dir: PathBuf,
}

/// Runs the multi-start optimizer and writes design.csv and result.json
/// (plus design_rounded.csv when `round` is given).
pub fn cmd_optimize(config: &Path, out: Option<&Path>, round: Option<usize>) -> CliResult<OptimizeOutcome> {
    let cfg = config::load(config)?;
    let c = &cfg.config;
    let result = coordinate_exchange(
        &cfg.spec,
        &cfg.draws,
        c.choice_sets,
        c.alternatives,
        &cfg.optimizer_config(),
    )
    .map_err(|e| match e {
        Error::AllStartsFailed { .. } => CliError::Optimization(e.to_string()),
        other => CliError::Validation(other.to_string()),
    })?;

    let dir = out_dir(&cfg, out)?;
    write_design(&dir.join("design.csv"), &result.design, cfg.bounds.as_ref(), None)?;
    if let Some(d) = round {
        write_design(
            &dir.join("design_rounded.csv"),
            &result.design,
            cfg.bounds.as_ref(),
            Some(d),
        )?;
    }
    let summary = json!({
        "software": "optimix",
        "version": env!("CARGO_PKG_VERSION"),
        "criterion": result.criterion,
        "best_start": result.best_start,
        "per_start_history": result.per_start_history,
        "draws": draws_json(&cfg.draws),
        "config": c,
    });
    write_json(&dir.join("result.json"), &summary)?;
    Ok(OptimizeOutcome {
        result,
        out_dir: dir,
    })
}

#[derive(Debug)]
pub struct EvaluateOutcome {
    pub d: CriterionValue,
    pub i: CriterionValue,
    pub report: DiagnosticsReport,
    pub out_dir: PathBuf,
}

/// Evaluates a design CSV: D and I criteria under the configured prior plus
/// FDS, balance and distance series.
pub fn cmd_evaluate(design: &Path, config: &Path, out: Option<&Path>) -> CliResult<EvaluateOutcome> {
    let cfg = config::load(config)?;
    let d = read_design(design, cfg.spec.q(), cfg.bounds.as_ref())?;
    let (dk, ik) = cfg.evaluation_kinds();
    let invalid = |e: Error| CliError::Validation(e.to_string());
    let dv = evaluate(dk, &d, &cfg.draws, &cfg.spec).map_err(invalid)?;
    let iv = evaluate(ik, &d, &cfg.draws, &cfg.spec).map_err(invalid)?;
    let f = &cfg.config.fds;
    let report = diagnose(&d, &cfg.draws, &cfg.spec, f.points, f.seed, f.balance).map_err(|e| match e {
        Error::SingularInformation => {
            CliError::Validation("design information matrix is singular for every draw".into())
        }
        other => invalid(other),
    })?;

    let dir = out_dir(&cfg, out)?;
    write_report(&dir, &report)?;
    let summary = json!({
        "software": "optimix",
        "version": env!("CARGO_PKG_VERSION"),
        "choice_sets": d.sets(),
        "alternatives": d.alternatives(),
        "criteria": { "d": dv, "i": iv },
        "fds": {
            "points": f.points,
            "seed": f.seed,
            "excluded_draws": report.fds.excluded_draws,
            "mean": report.fds.mean(),
            "summary": report.summary.fds,
        },
        "balance_mode": f.balance,
        "balance": report.summary.balance,
        "distances": report.summary.distances,
        "draws": draws_json(&cfg.draws),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(EvaluateOutcome {
        d: dv,
        i: iv,
        report,
        out_dir: dir,
    })
}

/// Writes the configured draw matrix as CSV.
pub fn cmd_draws(config: &Path, out: &Path) -> CliResult<DrawMatrix> {
    let cfg = config::load(config)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_draws(out, &cfg.draws)?;
    Ok(cfg.draws)
}
