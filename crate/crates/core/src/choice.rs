//! Multinomial logit choice probabilities and the Fisher information of a design.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{MixturePoint, ModelSpec, SIMPLEX_TOL};

/// S choice sets of J alternatives, each a mixture of q ingredients.
///
/// Points are stored flat in (set, alternative, ingredient) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    sets: usize,
    alternatives: usize,
    q: usize,
    x: Vec<f64>,
}

impl Design {
    /// Builds a design from `sets * alternatives` points listed set by set.
    pub fn new(sets: usize, alternatives: usize, points: Vec<MixturePoint>) -> Result<Self> {
        if sets == 0 {
            return Err(Error::InvalidArgument("a design needs at least one choice set".into()));
        }
        if alternatives < 2 {
            return Err(Error::InvalidArgument(
                "choice sets need at least two alternatives".into(),
            ));
        }
        if points.len() != sets * alternatives {
            return Err(Error::Dimension {
                what: "design points",
                expected: sets * alternatives,
                actual: points.len(),
            });
        }
        let q = points[0].q();
        let mut x = Vec::with_capacity(points.len() * q);
        for p in &points {
            if p.q() != q {
                return Err(Error::Dimension {
                    what: "ingredients per alternative",
                    expected: q,
                    actual: p.q(),
                });
            }
            x.extend_from_slice(p.as_slice());
        }
        Ok(Self {
            sets,
            alternatives,
            q,
            x,
        })
    }

    pub(crate) fn from_flat(sets: usize, alternatives: usize, q: usize, x: Vec<f64>) -> Self {
        debug_assert_eq!(x.len(), sets * alternatives * q);
        Self {
            sets,
            alternatives,
            q,
            x,
        }
    }

    pub fn sets(&self) -> usize {
        self.sets
    }

    pub fn alternatives(&self) -> usize {
        self.alternatives
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn point(&self, set: usize, alt: usize) -> &[f64] {
        let start = (set * self.alternatives + alt) * self.q;
        &self.x[start..start + self.q]
    }

    pub(crate) fn point_mut(&mut self, set: usize, alt: usize) -> &mut [f64] {
        let start = (set * self.alternatives + alt) * self.q;
        &mut self.x[start..start + self.q]
    }

    /// Alternatives of one choice set as a flat J×q slice.
    pub fn set_points(&self, set: usize) -> &[f64] {
        let width = self.alternatives * self.q;
        &self.x[set * width..(set + 1) * width]
    }

    pub fn flat(&self) -> &[f64] {
        &self.x
    }

    pub fn points(&self) -> Vec<MixturePoint> {
        self.x
            .chunks(self.q)
            .map(|c| MixturePoint::from_raw(c.to_vec()))
            .collect()
    }

    /// Concatenation of the choice sets of `self` and `other`.
    pub fn concat(&self, other: &Design) -> Result<Design> {
        if self.alternatives != other.alternatives || self.q != other.q {
            return Err(Error::InvalidArgument("designs have different shapes".into()));
        }
        let mut x = self.x.clone();
        x.extend_from_slice(&other.x);
        Ok(Self::from_flat(self.sets + other.sets, self.alternatives, self.q, x))
    }

    /// Largest deviation of any alternative from the unit-sum constraint or
    /// nonnegativity.
    pub fn feasibility_error(&self) -> f64 {
        self.x
            .chunks(self.q)
            .map(|c| {
                let sum: f64 = c.iter().sum();
                let neg = c.iter().fold(0.0f64, |m, &v| m.max(-v));
                (sum - 1.0).abs().max(neg)
            })
            .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self) -> bool {
        self.feasibility_error() <= SIMPLEX_TOL
    }

    pub(crate) fn check_spec(&self, spec: &ModelSpec) -> Result<()> {
        if self.q != spec.q() {
            return Err(Error::Dimension {
                what: "design ingredients vs model",
                expected: spec.q(),
                actual: self.q,
            });
        }
        Ok(())
    }
}

/// Utility coefficients in the identifiable parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn new(beta: Vec<f64>, spec: &ModelSpec) -> Result<Self> {
        if beta.len() != spec.r() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: spec.r(),
                actual: beta.len(),
            });
        }
        Ok(Self(beta))
    }

    pub fn zeros(spec: &ModelSpec) -> Self {
        Self(vec![0.0; spec.r()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// r×r information matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    r: usize,
    m: Vec<f64>,
}

impl InfoMatrix {
    pub fn from_vec(r: usize, m: Vec<f64>) -> Self {
        assert_eq!(m.len(), r * r, "information matrix must be r×r");
        Self { r, m }
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.r + j]
    }
}

/// Softmax of `utilities` into `probs`, shifting by the maximum utility.
#[inline]
pub fn softmax_into(utilities: &[f64], probs: &mut [f64]) {
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (p, u) in probs.iter_mut().zip(utilities) {
        *p = (u - max).exp();
        total += *p;
    }
    probs.iter_mut().for_each(|p| *p /= total);
}

/// Choice probabilities of the alternatives in one choice set.
pub fn choice_probabilities(
    set: &[MixturePoint],
    beta: &ParamVector,
    spec: &ModelSpec,
) -> Result<Vec<f64>> {
    if beta.0.len() != spec.r() {
        return Err(Error::Dimension {
            what: "parameter vector",
            expected: spec.r(),
            actual: beta.0.len(),
        });
    }
    let mut f = vec![0.0; spec.r()];
    let mut utilities = Vec::with_capacity(set.len());
    for x in set {
        if x.q() != spec.q() {
            return Err(Error::Dimension {
                what: "mixture point vs model ingredients",
                expected: spec.q(),
                actual: x.q(),
            });
        }
        spec.expand_into(x.as_slice(), &mut f);
        utilities.push(dot(&f, &beta.0));
    }
    let mut probs = vec![0.0; set.len()];
    softmax_into(&utilities, &mut probs);
    Ok(probs)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reusable buffers for per-set information contributions.
#[derive(Debug, Clone)]
pub(crate) struct SetScratch {
    pub utilities: Vec<f64>,
    pub probs: Vec<f64>,
    pub mean_f: Vec<f64>,
}

impl SetScratch {
    pub fn new(alternatives: usize, r: usize) -> Self {
        Self {
            utilities: vec![0.0; alternatives],
            probs: vec![0.0; alternatives],
            mean_f: vec![0.0; r],
        }
    }
}

/// Writes X_sᵀ(P_s − p_s p_sᵀ)X_s into `out` (r×r) given the J expansion
/// vectors of the set as a flat J×r slice.
///
/// Uses the centered form Σ_j p_j (f_j − f̄)(f_j − f̄)ᵀ with f̄ = Σ_j p_j f_j,
/// which is algebraically identical and keeps the result exactly PSD.
#[inline]
pub(crate) fn set_information_into(
    fs: &[f64],
    beta: &[f64],
    r: usize,
    scratch: &mut SetScratch,
    out: &mut [f64],
) {
    let j_count = scratch.probs.len();
    if j_count == 2 {
        // p₁p₂ (f₁ − f₂)(f₁ − f₂)ᵀ
        let (f1, f2) = fs[..2 * r].split_at(r);
        let mut d = [0.0f64; 64];
        let mut t = 0.0;
        for a in 0..r {
            d[a] = f1[a] - f2[a];
            t += d[a] * beta[a];
        }
        let e = (-t.abs()).exp();
        let w = e / ((1.0 + e) * (1.0 + e));
        for a in 0..r {
            let wa = w * d[a];
            for b in 0..=a {
                let v = wa * d[b];
                out[a * r + b] = v;
                out[b * r + a] = v;
            }
        }
        return;
    }
    for j in 0..j_count {
        scratch.utilities[j] = dot(&fs[j * r..(j + 1) * r], beta);
    }
    softmax_into(&scratch.utilities, &mut scratch.probs);
    scratch.mean_f.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..j_count {
        let p = scratch.probs[j];
        for (m, f) in scratch.mean_f.iter_mut().zip(&fs[j * r..(j + 1) * r]) {
            *m += p * f;
        }
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut centered = [0.0f64; 64];
    for j in 0..j_count {
        let p = scratch.probs[j];
        let f = &fs[j * r..(j + 1) * r];
        for a in 0..r {
            centered[a] = f[a] - scratch.mean_f[a];
        }
        for a in 0..r {
            let pa = p * centered[a];
            let row = &mut out[a * r..a * r + a + 1];
            for (b, v) in row.iter_mut().enumerate() {
                *v += pa * centered[b];
            }
        }
    }
    for a in 0..r {
        for b in 0..a {
            out[b * r + a] = out[a * r + b];
        }
    }
}

/// Largest supported parameter count (buffer size in the hot path).
pub const MAX_PARAMS: usize = 64;

/// Fisher information I(X, β) = Σ_s X_sᵀ(P_s − p_s p_sᵀ)X_s.
pub fn information_matrix(
    design: &Design,
    beta: &ParamVector,
    spec: &ModelSpec,
) -> Result<InfoMatrix> {
    design.check_spec(spec)?;
    let r = spec.r();
    if beta.0.len() != r {
        return Err(Error::Dimension {
            what: "parameter vector",
            expected: r,
            actual: beta.0.len(),
        });
    }
    if r > MAX_PARAMS {
        return Err(Error::InvalidArgument(format!(
            "models with more than {MAX_PARAMS} parameters are not supported"
        )));
    }
    let j_count = design.alternatives();
    let mut fs = vec![0.0; j_count * r];
    let mut scratch = SetScratch::new(j_count, r);
    let mut contribution = vec![0.0; r * r];
    let mut total = vec![0.0; r * r];
    for s in 0..design.sets() {
        for j in 0..j_count {
            spec.expand_into(design.point(s, j), &mut fs[j * r..(j + 1) * r]);
        }
        set_information_into(&fs, &beta.0, r, &mut scratch, &mut contribution);
        for (t, c) in total.iter_mut().zip(&contribution) {
            *t += c;
        }
    }
    Ok(InfoMatrix::from_vec(r, total))
}
