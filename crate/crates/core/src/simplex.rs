//! Geometry and model algebra on the (q-1)-simplex.
//!
//! Scheffé expansions use the identifiable parameterization in which the
//! linear term of the last ingredient is dropped. The expansion vector is laid
//! out as: linear terms `x_1..x_{q-1}`, then pairwise products `x_i x_k`
//! (i < k, lexicographic), then triple products `x_i x_k x_l` (lexicographic).
//! Priors, moments matrices and information matrices all share this order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the unit-sum constraint.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Scheffé polynomial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheffeOrder {
    FirstOrder,
    SecondOrder,
    SpecialCubic,
}

impl ScheffeOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheffeOrder::FirstOrder => "first_order",
            ScheffeOrder::SecondOrder => "second_order",
            ScheffeOrder::SpecialCubic => "special_cubic",
        }
    }
}

/// Number of identifiable utility parameters for `q` ingredients.
pub fn param_count(q: usize, order: ScheffeOrder) -> Result<usize> {
    if q < 2 {
        return Err(Error::TooFewIngredients { q });
    }
    Ok(match order {
        ScheffeOrder::FirstOrder => q - 1,
        ScheffeOrder::SecondOrder => (q * q + q) / 2 - 1,
        ScheffeOrder::SpecialCubic => {
            if q < 3 {
                return Err(Error::SpecialCubicNeedsThree { q });
            }
            (q * q * q + 5 * q) / 6 - 1
        }
    })
}

/// Ingredient count, model order and the derived parameter count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    q: usize,
    order: ScheffeOrder,
    r: usize,
}

impl ModelSpec {
    pub fn new(q: usize, order: ScheffeOrder) -> Result<Self> {
        let r = param_count(q, order)?;
        Ok(Self { q, order, r })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn order(&self) -> ScheffeOrder {
        self.order
    }

    /// Length of the expansion vector.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Exponent vector (length q) of every component of the expansion.
    pub fn monomial_exponents(&self) -> Vec<Vec<u32>> {
        let q = self.q;
        let mut out = Vec::with_capacity(self.r);
        for i in 0..q - 1 {
            let mut e = vec![0; q];
            e[i] = 1;
            out.push(e);
        }
        if self.order != ScheffeOrder::FirstOrder {
            for i in 0..q {
                for k in i + 1..q {
                    let mut e = vec![0; q];
                    e[i] = 1;
                    e[k] = 1;
                    out.push(e);
                }
            }
        }
        if self.order == ScheffeOrder::SpecialCubic {
            for i in 0..q {
                for k in i + 1..q {
                    for l in k + 1..q {
                        let mut e = vec![0; q];
                        e[i] = 1;
                        e[k] = 1;
                        e[l] = 1;
                        out.push(e);
                    }
                }
            }
        }
        debug_assert_eq!(out.len(), self.r);
        out
    }

    /// Writes the expansion of `x` into `out` without validation.
    ///
    /// `x.len()` must equal `q` and `out.len()` must equal `r`.
    #[inline]
    pub fn expand_into(&self, x: &[f64], out: &mut [f64]) {
        let q = self.q;
        let mut n = 0;
        out[..q - 1].copy_from_slice(&x[..q - 1]);
        n += q - 1;
        if self.order == ScheffeOrder::FirstOrder {
            return;
        }
        for i in 0..q {
            for k in i + 1..q {
                out[n] = x[i] * x[k];
                n += 1;
            }
        }
        if self.order == ScheffeOrder::SpecialCubic {
            for i in 0..q {
                for k in i + 1..q {
                    let xik = x[i] * x[k];
                    for l in k + 1..q {
                        out[n] = xik * x[l];
                        n += 1;
                    }
                }
            }
        }
    }
}

/// A point on the simplex: q nonnegative proportions summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePoint(Vec<f64>);

impl MixturePoint {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        let sum = check_coordinates(&x)?;
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotOnSimplex { sum });
        }
        Ok(Self(x))
    }

    /// Accepts proportions whose sum is within `tol` of one and rescales
    /// them to sum to one. Points already on the simplex are kept bit for
    /// bit. Used for rounded tabular input.
    pub fn renormalized(x: Vec<f64>, tol: f64) -> Result<Self> {
        let sum = check_coordinates(&x)?;
        if (sum - 1.0).abs() > tol || sum <= 0.0 {
            return Err(Error::NotOnSimplex { sum });
        }
        if (sum - 1.0).abs() <= SIMPLEX_TOL {
            return Ok(Self(x));
        }
        Ok(Self(x.into_iter().map(|v| v / sum).collect()))
    }

    /// The i-th vertex of the simplex with `q` ingredients.
    pub fn vertex(q: usize, i: usize) -> Self {
        let mut x = vec![0.0; q];
        x[i] = 1.0;
        Self(x)
    }

    pub fn centroid(q: usize) -> Self {
        Self(vec![1.0 / q as f64; q])
    }

    pub(crate) fn from_raw(x: Vec<f64>) -> Self {
        Self(x)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn q(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn check_coordinates(x: &[f64]) -> Result<f64> {
    x.iter().enumerate().try_fold(0.0, |sum, (index, &value)| {
        if value.is_finite() && (-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&value) {
            Ok(sum + value)
        } else {
            Err(Error::InvalidCoordinate { index, value })
        }
    })
}

/// Expansion vector f(x) of length r.
pub fn scheffe_expand(x: &MixturePoint, spec: &ModelSpec) -> Result<Vec<f64>> {
    if x.q() != spec.q() {
        return Err(Error::Dimension {
            what: "mixture point vs model ingredients",
            expected: spec.q(),
            actual: x.q(),
        });
    }
    let mut out = vec![0.0; spec.r()];
    spec.expand_into(x.as_slice(), &mut out);
    Ok(out)
}

/// Moves coordinate `i` to `new_value` along the Cox effect direction, in place.
///
/// The remaining proportions are rescaled so that the point stays on the
/// simplex. When `x[i]` is one the remainder is split equally.
pub fn cox_adjust_in_place(x: &mut [f64], i: usize, new_value: f64) {
    let q = x.len();
    let new_value = new_value.clamp(0.0, 1.0);
    let old = x[i];
    let rest = 1.0 - old;
    if rest <= f64::EPSILON {
        let share = (1.0 - new_value) / (q - 1) as f64;
        for (k, v) in x.iter_mut().enumerate() {
            *v = if k == i { new_value } else { share };
        }
    } else {
        let scale = (1.0 - new_value) / rest;
        for (k, v) in x.iter_mut().enumerate() {
            *v = if k == i { new_value } else { (*v * scale).max(0.0) };
        }
    }
    let sum: f64 = x.iter().sum();
    if sum != 1.0 {
        x.iter_mut().for_each(|v| *v /= sum);
    }
}

/// Cox-direction move of coordinate `i` to `new_value`.
pub fn cox_adjust(x: &MixturePoint, i: usize, new_value: f64) -> Result<MixturePoint> {
    if i >= x.q() {
        return Err(Error::Dimension {
            what: "coordinate index",
            expected: x.q(),
            actual: i,
        });
    }
    if !(0.0..=1.0).contains(&new_value) {
        return Err(Error::InvalidCoordinate {
            index: i,
            value: new_value,
        });
    }
    let mut v = x.0.clone();
    cox_adjust_in_place(&mut v, i, new_value);
    Ok(MixturePoint(v))
}

/// Lower bounds on the actual ingredient proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngredientBounds {
    lower: Vec<f64>,
    total: f64,
}

impl IngredientBounds {
    pub fn new(lower: Vec<f64>) -> Result<Self> {
        for (index, &value) in lower.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::NegativeBound { index, value });
            }
        }
        let total: f64 = lower.iter().sum();
        if total >= 1.0 {
            return Err(Error::BoundsTooLarge { sum: total });
        }
        Ok(Self { lower, total })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Sum of the lower bounds.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn q(&self) -> usize {
        self.lower.len()
    }
}

/// Maps pseudocomponents to actual proportions: `a_i = L_i + (1 - L) x_i`.
pub fn pseudo_to_actual(x: &MixturePoint, bounds: &IngredientBounds) -> Result<Vec<f64>> {
    if x.q() != bounds.q() {
        return Err(Error::Dimension {
            what: "mixture point vs bounds",
            expected: bounds.q(),
            actual: x.q(),
        });
    }
    let scale = 1.0 - bounds.total;
    Ok(x.0
        .iter()
        .zip(&bounds.lower)
        .map(|(xi, li)| li + scale * xi)
        .collect())
}

/// Maps actual proportions to pseudocomponents: `x_i = (a_i - L_i) / (1 - L)`.
pub fn actual_to_pseudo(a: &[f64], bounds: &IngredientBounds) -> Result<MixturePoint> {
    if a.len() != bounds.q() {
        return Err(Error::Dimension {
            what: "actual proportions vs bounds",
            expected: bounds.q(),
            actual: a.len(),
        });
    }
    let scale = 1.0 - bounds.total;
    let mut x = Vec::with_capacity(a.len());
    for (index, (&ai, &li)) in a.iter().zip(&bounds.lower).enumerate() {
        if ai < li - SIMPLEX_TOL {
            return Err(Error::BelowBound {
                index,
                value: ai,
                bound: li,
            });
        }
        x.push(((ai - li) / scale).max(0.0));
    }
    MixturePoint::new(x)
}

/// Draws `n` points uniformly on the simplex with `q` ingredients.
///
/// Each point normalizes `q` independent unit-rate exponential draws, which is
/// a Dirichlet(1, ..., 1) sample.
pub fn sample_simplex_uniform(q: usize, n: usize, seed: u64) -> Vec<MixturePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| MixturePoint(uniform_point(q, &mut rng)))
        .collect()
}

/// One uniform simplex point from an arbitrary generator.
pub fn uniform_point<R: rand::Rng + ?Sized>(q: usize, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = (0..q).map(|_| Exp1.sample(rng)).collect();
    let sum: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= sum);
    x
}

/// Euclidean distance between two proportion vectors.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
