//! Local and Bayesian D- and I-optimality criteria.
//!
//! Lower values are better for every criterion. Singular information matrices
//! never raise an error here; they yield an invalid [`CriterionValue`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::choice::{information_matrix, Design, InfoMatrix, ParamVector};
use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky};
use crate::priors::DrawMatrix;
use crate::simplex::ModelSpec;

/// Value substituted for invalid criteria inside the optimizer.
pub const INVALID_PENALTY: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    LocalD,
    BayesD,
    LocalI,
    BayesI,
}

impl CriterionKind {
    pub fn is_d(self) -> bool {
        matches!(self, CriterionKind::LocalD | CriterionKind::BayesD)
    }

    pub fn is_bayesian(self) -> bool {
        matches!(self, CriterionKind::BayesD | CriterionKind::BayesI)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CriterionKind::LocalD => "local_d",
            CriterionKind::BayesD => "bayes_d",
            CriterionKind::LocalI => "local_i",
            CriterionKind::BayesI => "bayes_i",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub kind: CriterionKind,
    pub value: f64,
    pub valid: bool,
}

impl CriterionValue {
    pub fn valid(kind: CriterionKind, value: f64) -> Self {
        if value.is_finite() {
            Self {
                kind,
                value,
                valid: true,
            }
        } else {
            Self::invalid(kind)
        }
    }

    pub fn invalid(kind: CriterionKind) -> Self {
        Self {
            kind,
            value: f64::NAN,
            valid: false,
        }
    }

    /// The value, or [`INVALID_PENALTY`] when invalid.
    pub fn penalized(&self) -> f64 {
        if self.valid {
            self.value
        } else {
            INVALID_PENALTY
        }
    }

    /// Strict improvement; invalid values lose to every valid one.
    pub fn is_better_than(&self, other: &CriterionValue) -> bool {
        match (self.valid, other.valid) {
            (true, false) => true,
            (false, _) => false,
            (true, true) => self.value < other.value,
        }
    }
}

/// Simplex moments matrix W = ∫ f(x) fᵀ(x) dx over the (q−1)-simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentsMatrix {
    r: usize,
    w: Vec<f64>,
    /// Lower Cholesky factor of `w`.
    factor: Vec<f64>,
}

impl MomentsMatrix {
    pub fn dim(&self) -> usize {
        self.r
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.r + j]
    }

    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    pub fn trace(&self) -> f64 {
        (0..self.r).map(|i| self.get(i, i)).sum()
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// ∫ Π x_i^{p_i} dx over the simplex, as Π Γ(p_i + 1) / Γ(q + Σ p_i).
pub fn simplex_monomial_integral(exponents: &[u32]) -> f64 {
    let q = exponents.len() as u32;
    let total: u32 = exponents.iter().sum();
    let numerator: f64 = exponents.iter().map(|&p| factorial(p)).product();
    numerator / factorial(q + total - 1)
}

/// Exact moments matrix for `spec`, built from the Dirichlet integral.
pub fn moments_matrix(spec: &ModelSpec) -> MomentsMatrix {
    let exps = spec.monomial_exponents();
    let r = spec.r();
    let mut w = vec![0.0; r * r];
    let mut combined = vec![0u32; spec.q()];
    for a in 0..r {
        for b in 0..=a {
            for (c, (ea, eb)) in combined.iter_mut().zip(exps[a].iter().zip(&exps[b])) {
                *c = ea + eb;
            }
            let v = simplex_monomial_integral(&combined);
            w[a * r + b] = v;
            w[b * r + a] = v;
        }
    }
    // The Scheffé monomials are linearly independent on the simplex, so W is
    // positive definite.
    let mut factor = vec![0.0; r * r];
    let ok = linalg::factor_into(&w, r, &mut factor);
    assert!(ok, "moments matrix is not positive definite");
    MomentsMatrix { r, w, factor }
}

/// Moments matrix shared across callers; computed once per model.
pub fn cached_moments_matrix(spec: &ModelSpec) -> Arc<MomentsMatrix> {
    static CACHE: OnceLock<Mutex<HashMap<ModelSpec, Arc<MomentsMatrix>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(*spec)
        .or_insert_with(|| Arc::new(moments_matrix(spec)))
        .clone()
}

/// −(1/r) log det I, or `None` when I is singular.
#[inline]
pub(crate) fn d_from_info(info: &[f64], r: usize, l: &mut [f64]) -> Option<f64> {
    if !linalg::factor_into(info, r, l) {
        return None;
    }
    Some(-linalg::log_det_from_factor(l, r) / r as f64)
}

/// tr(I⁻¹ W) given the Cholesky factor of W, or `None` when I is singular.
#[inline]
pub(crate) fn i_from_info(
    info: &[f64],
    r: usize,
    w_factor: &[f64],
    l: &mut [f64],
    scratch: &mut [f64],
) -> Option<f64> {
    if !linalg::factor_into(info, r, l) {
        return None;
    }
    Some(linalg::trace_inv_factored(l, r, w_factor, scratch))
}

/// log((1/R) Σ exp(v_i)) without overflow.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + (sum / values.len() as f64).ln()
}

/// D-criterion of an explicit information matrix.
pub fn d_criterion_of(info: &InfoMatrix) -> CriterionValue {
    let r = info.dim();
    let mut l = vec![0.0; r * r];
    match d_from_info(info.as_slice(), r, &mut l) {
        Some(v) => CriterionValue::valid(CriterionKind::LocalD, v),
        None => CriterionValue::invalid(CriterionKind::LocalD),
    }
}

/// I-criterion of an explicit information matrix.
pub fn i_criterion_of(info: &InfoMatrix, w: &MomentsMatrix) -> CriterionValue {
    let r = info.dim();
    let mut l = vec![0.0; r * r];
    let mut scratch = vec![0.0; r];
    match i_from_info(info.as_slice(), r, w.factor(), &mut l, &mut scratch) {
        Some(v) => CriterionValue::valid(CriterionKind::LocalI, v),
        None => CriterionValue::invalid(CriterionKind::LocalI),
    }
}

fn check_moments(spec: &ModelSpec, w: &MomentsMatrix) -> Result<()> {
    if w.dim() != spec.r() {
        return Err(Error::Dimension {
            what: "moments matrix",
            expected: spec.r(),
            actual: w.dim(),
        });
    }
    Ok(())
}

fn check_draws(spec: &ModelSpec, draws: &DrawMatrix) -> Result<()> {
    if draws.params() != spec.r() {
        return Err(Error::Dimension {
            what: "prior draw length",
            expected: spec.r(),
            actual: draws.params(),
        });
    }
    if draws.len() == 0 {
        return Err(Error::InvalidArgument("at least one prior draw is required".into()));
    }
    Ok(())
}

/// Locally D-optimal criterion −(1/r) log det I(X, β).
pub fn local_d(design: &Design, beta: &ParamVector, spec: &ModelSpec) -> Result<CriterionValue> {
    let info = information_matrix(design, beta, spec)?;
    Ok(d_criterion_of(&info))
}

/// Locally I-optimal criterion tr(I⁻¹(X, β) W).
pub fn local_i(
    design: &Design,
    beta: &ParamVector,
    spec: &ModelSpec,
    w: &MomentsMatrix,
) -> Result<CriterionValue> {
    check_moments(spec, w)?;
    let info = information_matrix(design, beta, spec)?;
    Ok(i_criterion_of(&info, w))
}

/// Bayesian D-criterion: log of the draw average of det(I⁻¹)^{1/r}.
pub fn bayes_d(design: &Design, draws: &DrawMatrix, spec: &ModelSpec) -> Result<CriterionValue> {
    check_draws(spec, draws)?;
    let mut per_draw = Vec::with_capacity(draws.len());
    for beta in draws.rows() {
        let v = local_d(design, &ParamVector(beta.to_vec()), spec)?;
        if !v.valid {
            return Ok(CriterionValue::invalid(CriterionKind::BayesD));
        }
        per_draw.push(v.value);
    }
    Ok(CriterionValue::valid(
        CriterionKind::BayesD,
        log_mean_exp(&per_draw),
    ))
}

/// Bayesian I-criterion: draw average of tr(I⁻¹ W).
pub fn bayes_i(
    design: &Design,
    draws: &DrawMatrix,
    spec: &ModelSpec,
    w: &MomentsMatrix,
) -> Result<CriterionValue> {
    check_draws(spec, draws)?;
    check_moments(spec, w)?;
    let mut total = 0.0;
    for beta in draws.rows() {
        let v = local_i(design, &ParamVector(beta.to_vec()), spec, w)?;
        if !v.valid {
            return Ok(CriterionValue::invalid(CriterionKind::BayesI));
        }
        total += v.value;
    }
    Ok(CriterionValue::valid(
        CriterionKind::BayesI,
        total / draws.len() as f64,
    ))
}

/// Evaluates `kind` on a design. Local kinds use the first draw as β.
pub fn evaluate(
    kind: CriterionKind,
    design: &Design,
    draws: &DrawMatrix,
    spec: &ModelSpec,
) -> Result<CriterionValue> {
    check_draws(spec, draws)?;
    let beta = || ParamVector(draws.row(0).to_vec());
    match kind {
        CriterionKind::LocalD => local_d(design, &beta(), spec),
        CriterionKind::BayesD => bayes_d(design, draws, spec),
        CriterionKind::LocalI => local_i(design, &beta(), spec, &cached_moments_matrix(spec)),
        CriterionKind::BayesI => bayes_i(design, draws, spec, &cached_moments_matrix(spec)),
    }
}

/// Explicit-inverse helper kept public for cross-checks in diagnostics.
pub fn factor_info(info: &InfoMatrix) -> Option<Cholesky> {
    Cholesky::factor(info.as_slice(), info.dim())
}
