//! Multi-start mixture coordinate exchange.
//!
//! Each start draws a random design and then optimizes one ingredient
//! proportion at a time, in (choice set, alternative, ingredient) order. A
//! proportion is moved along the Cox direction, so the other proportions of
//! the same alternative are rescaled to keep the mixture on the simplex. The
//! best value along that direction is located with Brent's method on [0, 1].
//! Sweeps repeat until a full pass accepts no move.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brent::brent_minimize;
use crate::choice::{set_information_into, Design, SetScratch, MAX_PARAMS};
use crate::criteria::{
    self, cached_moments_matrix, d_from_info, i_from_info, log_mean_exp, CriterionKind,
    CriterionValue, INVALID_PENALTY,
};
use crate::error::{Error, Result};
use crate::priors::DrawMatrix;
use crate::simplex::{cox_adjust_in_place, uniform_point, ModelSpec, SIMPLEX_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub n_starts: usize,
    pub max_sweeps: usize,
    /// Brent tolerance in coordinate units.
    pub brent_tol: f64,
    /// Minimum criterion decrease for a move to be accepted.
    pub improvement_tol: f64,
    pub seed: u64,
    pub criterion: CriterionKind,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            n_starts: 80,
            max_sweeps: 100,
            brent_tol: 1e-4,
            improvement_tol: 1e-6,
            seed: 2021,
            criterion: CriterionKind::BayesI,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::InvalidArgument("n_starts must be at least 1".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be at least 1".into()));
        }
        if !(self.brent_tol > 0.0) || !(self.improvement_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a single start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub start: usize,
    pub initial: CriterionValue,
    pub criterion: CriterionValue,
    pub sweeps: usize,
    pub accepted_moves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub design: Design,
    pub criterion: CriterionValue,
    pub best_start: usize,
    pub per_start_history: Vec<StartSummary>,
}

/// Criterion evaluation with cached per-set information contributions, so a
/// change to one alternative only recomputes its own choice set.
struct IncrementalEvaluator<'a> {
    spec: ModelSpec,
    draws: &'a DrawMatrix,
    moments: Option<&'a [f64]>,
    r: usize,
    alternatives: usize,
    sets: usize,
    /// Expansion vectors, (set, alternative) major, r each.
    fs: Vec<f64>,
    /// Per draw, per set r×r contributions.
    contrib: Vec<f64>,
    /// Per draw r×r information matrices.
    total: Vec<f64>,
    // scratch
    set_fs: Vec<f64>,
    set_scratch: SetScratch,
    candidate: Vec<f64>,
    info: Vec<f64>,
    factor: Vec<f64>,
    solve: Vec<f64>,
    per_draw: Vec<f64>,
}

impl<'a> IncrementalEvaluator<'a> {
    fn new(
        spec: ModelSpec,
        draws: &'a DrawMatrix,
        moments: Option<&'a [f64]>,
        design: &Design,
    ) -> Self {
        let r = spec.r();
        let (sets, alternatives) = (design.sets(), design.alternatives());
        let mut ev = Self {
            spec,
            draws,
            moments,
            r,
            alternatives,
            sets,
            fs: vec![0.0; sets * alternatives * r],
            contrib: vec![0.0; draws.len() * sets * r * r],
            total: vec![0.0; draws.len() * r * r],
            set_fs: vec![0.0; alternatives * r],
            set_scratch: SetScratch::new(alternatives, r),
            candidate: vec![0.0; r * r],
            info: vec![0.0; r * r],
            factor: vec![0.0; r * r],
            solve: vec![0.0; r],
            per_draw: vec![0.0; draws.len()],
        };
        for s in 0..sets {
            for j in 0..alternatives {
                let k = (s * alternatives + j) * r;
                spec.expand_into(design.point(s, j), &mut ev.fs[k..k + r]);
            }
            ev.refresh_set(s);
        }
        ev.refresh_totals();
        ev
    }

    fn set_slice(&self, s: usize) -> std::ops::Range<usize> {
        let width = self.alternatives * self.r;
        s * width..(s + 1) * width
    }

    fn refresh_set(&mut self, s: usize) {
        let (r, sets) = (self.r, self.sets);
        let range = self.set_slice(s);
        for (d, beta) in self.draws.rows().enumerate() {
            let k = (d * sets + s) * r * r;
            set_information_into(
                &self.fs[range.clone()],
                beta,
                r,
                &mut self.set_scratch,
                &mut self.contrib[k..k + r * r],
            );
        }
    }

    fn refresh_totals(&mut self) {
        let rr = self.r * self.r;
        for d in 0..self.draws.len() {
            let total = &mut self.total[d * rr..(d + 1) * rr];
            total.iter_mut().for_each(|v| *v = 0.0);
            for s in 0..self.sets {
                let k = (d * self.sets + s) * rr;
                for (t, c) in total.iter_mut().zip(&self.contrib[k..k + rr]) {
                    *t += c;
                }
            }
        }
    }

    /// Per-draw criterion of `info`, or `None` when singular.
    fn draw_value(&mut self) -> Option<f64> {
        match self.moments {
            None => d_from_info(&self.info, self.r, &mut self.factor),
            Some(w) => i_from_info(&self.info, self.r, w, &mut self.factor, &mut self.solve),
        }
    }

    fn aggregate(&self) -> f64 {
        let v = match self.moments {
            None => log_mean_exp(&self.per_draw),
            Some(_) => self.per_draw.iter().sum::<f64>() / self.per_draw.len() as f64,
        };
        if v.is_finite() {
            v
        } else {
            INVALID_PENALTY
        }
    }

    /// Penalized criterion of the current design.
    fn current(&mut self) -> f64 {
        let rr = self.r * self.r;
        for d in 0..self.draws.len() {
            self.info.copy_from_slice(&self.total[d * rr..(d + 1) * rr]);
            match self.draw_value() {
                Some(v) => self.per_draw[d] = v,
                None => return INVALID_PENALTY,
            }
        }
        self.aggregate()
    }

    /// Penalized criterion with alternative `j` of set `s` replaced by `x`.
    fn candidate(&mut self, s: usize, j: usize, x: &[f64]) -> f64 {
        let (r, rr) = (self.r, self.r * self.r);
        let range = self.set_slice(s);
        self.set_fs.copy_from_slice(&self.fs[range]);
        self.spec.expand_into(x, &mut self.set_fs[j * r..(j + 1) * r]);
        for d in 0..self.draws.len() {
            let beta = self.draws.row(d);
            set_information_into(
                &self.set_fs,
                beta,
                r,
                &mut self.set_scratch,
                &mut self.candidate,
            );
            let old = &self.contrib[(d * self.sets + s) * rr..(d * self.sets + s + 1) * rr];
            let total = &self.total[d * rr..(d + 1) * rr];
            for k in 0..rr {
                self.info[k] = total[k] - old[k] + self.candidate[k];
            }
            match self.draw_value() {
                Some(v) => self.per_draw[d] = v,
                None => return INVALID_PENALTY,
            }
        }
        self.aggregate()
    }

    fn commit(&mut self, s: usize, j: usize, x: &[f64]) {
        let r = self.r;
        let k = (s * self.alternatives + j) * r;
        self.spec.expand_into(x, &mut self.fs[k..k + r]);
        self.refresh_set(s);
        self.refresh_totals();
    }
}

fn check_inputs(spec: &ModelSpec, draws: &DrawMatrix, sets: usize, alternatives: usize) -> Result<()> {
    if draws.params() != spec.r() {
        return Err(Error::Dimension {
            what: "prior draw length",
            expected: spec.r(),
            actual: draws.params(),
        });
    }
    if spec.r() > MAX_PARAMS {
        return Err(Error::InvalidArgument(format!(
            "models with more than {MAX_PARAMS} parameters are not supported"
        )));
    }
    if sets == 0 || alternatives < 2 {
        return Err(Error::InvalidArgument(
            "need at least one choice set of at least two alternatives".into(),
        ));
    }
    Ok(())
}

fn kind_matches_draws(kind: CriterionKind, draws: &DrawMatrix) -> Result<()> {
    if !kind.is_bayesian() && draws.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "{} needs a single parameter vector, got {} draws",
            kind.as_str(),
            draws.len()
        )));
    }
    Ok(())
}

/// Random initial design: every alternative uniform on the simplex.
pub fn random_design(q: usize, sets: usize, alternatives: usize, rng: &mut ChaCha8Rng) -> Design {
    let mut x = Vec::with_capacity(sets * alternatives * q);
    for _ in 0..sets * alternatives {
        x.extend(uniform_point(q, rng));
    }
    Design::from_flat(sets, alternatives, q, x)
}

/// Generator for start `start`: one ChaCha stream per start, so start k draws
/// the same initial design regardless of how many starts run.
pub fn start_rng(seed: u64, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    rng
}

/// Runs coordinate exchange from `design` until convergence.
///
/// Returns the improved design with its (incrementally tracked, penalized)
/// criterion, the number of sweeps and the number of accepted moves.
pub fn improve_design(
    spec: &ModelSpec,
    draws: &DrawMatrix,
    mut design: Design,
    config: &OptimizerConfig,
) -> Result<(Design, f64, usize, usize)> {
    check_inputs(spec, draws, design.sets(), design.alternatives())?;
    design.check_spec(spec)?;
    let moments = if config.criterion.is_d() {
        None
    } else {
        Some(cached_moments_matrix(spec))
    };
    let mut ev = IncrementalEvaluator::new(
        *spec,
        draws,
        moments.as_ref().map(|w| w.factor()),
        &design,
    );
    let q = spec.q();
    let mut current = ev.current();
    let mut sweeps = 0;
    let mut accepted = 0;
    let mut trial = vec![0.0; q];
    let mut base = vec![0.0; q];

    while sweeps < config.max_sweeps {
        sweeps += 1;
        let mut moved = false;
        for s in 0..design.sets() {
            for j in 0..design.alternatives() {
                for i in 0..q {
                    base.copy_from_slice(design.point(s, j));
                    let mut objective = |v: f64| {
                        trial.copy_from_slice(&base);
                        cox_adjust_in_place(&mut trial, i, v);
                        ev.candidate(s, j, &trial)
                    };
                    let (mut best_v, mut best_f) =
                        brent_minimize(&mut objective, 0.0, 1.0, config.brent_tol);
                    // Brent never evaluates the endpoints; vertices and edges
                    // are common optima for mixture designs.
                    for edge in [0.0, 1.0] {
                        let f = objective(edge);
                        if f < best_f {
                            best_v = edge;
                            best_f = f;
                        }
                    }
                    if best_f < current - config.improvement_tol {
                        let point = design.point_mut(s, j);
                        cox_adjust_in_place(point, i, best_v);
                        debug_assert!(
                            (point.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
                                && point.iter().all(|&v| v >= 0.0),
                            "move left the simplex"
                        );
                        let point = point.to_vec();
                        ev.commit(s, j, &point);
                        let updated = ev.current();
                        debug_assert!(updated <= current, "accepted move worsened criterion");
                        current = updated;
                        accepted += 1;
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            break;
        }
    }
    Ok((design, current, sweeps, accepted))
}

fn run_start(
    spec: &ModelSpec,
    draws: &DrawMatrix,
    sets: usize,
    alternatives: usize,
    config: &OptimizerConfig,
    start: usize,
) -> Result<(Design, StartSummary)> {
    let mut rng = start_rng(config.seed, start);
    let initial_design = random_design(spec.q(), sets, alternatives, &mut rng);
    let initial = criteria::evaluate(config.criterion, &initial_design, draws, spec)?;
    let (design, _, sweeps, accepted_moves) = improve_design(spec, draws, initial_design, config)?;
    let criterion = criteria::evaluate(config.criterion, &design, draws, spec)?;
    Ok((
        design,
        StartSummary {
            start,
            initial,
            criterion,
            sweeps,
            accepted_moves,
        },
    ))
}

/// Multi-start coordinate exchange. Starts run in parallel on the current
/// rayon pool; the result does not depend on the number of threads.
///
/// Local criterion kinds expect a single-row draw matrix holding β.
pub fn coordinate_exchange(
    spec: &ModelSpec,
    draws: &DrawMatrix,
    sets: usize,
    alternatives: usize,
    config: &OptimizerConfig,
) -> Result<OptimResult> {
    config.validate()?;
    check_inputs(spec, draws, sets, alternatives)?;
    kind_matches_draws(config.criterion, draws)?;

    let runs: Vec<(Design, StartSummary)> = (0..config.n_starts)
        .into_par_iter()
        .map(|start| run_start(spec, draws, sets, alternatives, config, start))
        .collect::<Result<_>>()?;

    let mut best: Option<usize> = None;
    for (k, (_, summary)) in runs.iter().enumerate() {
        let better = match best {
            None => summary.criterion.valid,
            Some(b) => summary.criterion.is_better_than(&runs[b].1.criterion),
        };
        if better {
            best = Some(k);
        }
    }
    let history: Vec<StartSummary> = runs.iter().map(|(_, s)| *s).collect();
    let Some(best) = best else {
        return Err(Error::AllStartsFailed {
            starts: config.n_starts,
        });
    };
    let (design, summary) = runs.into_iter().nth(best).expect("index in range");
    Ok(OptimResult {
        design,
        criterion: summary.criterion,
        best_start: best,
        per_start_history: history,
    })
}
