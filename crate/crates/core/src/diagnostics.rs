//! Design diagnostics: prediction variance, fraction-of-design-space curves,
//! utility balance and within-set distances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice::{information_matrix, softmax_into, Design, ParamVector};
use crate::criteria::factor_info;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::priors::DrawMatrix;
use crate::simplex::{distance, sample_simplex_uniform, MixturePoint, ModelSpec};

/// Default number of uniform simplex points in an FDS curve.
pub const DEFAULT_FDS_POINTS: usize = 10_000;
pub const DEFAULT_FDS_SEED: u64 = 20_210_301;

/// Minimum, median and maximum of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            median: median_sorted(&v),
            max: v[v.len() - 1],
        })
    }
}

pub fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Var[Û(x)] = fᵀ(x) I⁻¹(X, β) f(x).
pub fn prediction_variance(
    x: &MixturePoint,
    design: &Design,
    beta: &ParamVector,
    spec: &ModelSpec,
) -> Result<f64> {
    let f = crate::simplex::scheffe_expand(x, spec)?;
    let info = information_matrix(design, beta, spec)?;
    let chol = factor_info(&info).ok_or(Error::SingularInformation)?;
    let mut scratch = vec![0.0; spec.r()];
    Ok(chol.inv_quad_form(&f, &mut scratch))
}

/// Fraction-of-design-space series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdsSeries {
    /// (fraction, draw-averaged prediction variance), variance ascending.
    pub points: Vec<(f64, f64)>,
    /// Draws skipped because their information matrix was singular.
    pub excluded_draws: usize,
    pub seed: u64,
}

impl FdsSeries {
    pub fn variances(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn median(&self) -> f64 {
        median_sorted(&self.variances())
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().map(|p| p.1).sum::<f64>() / self.points.len() as f64
    }
}

/// FDS data: `n_points` uniform simplex points, each with its prediction
/// variance averaged over all non-singular draws, sorted ascending and paired
/// with fractions (k − 0.5)/n.
pub fn fds_data(
    design: &Design,
    draws: &DrawMatrix,
    spec: &ModelSpec,
    n_points: usize,
    seed: u64,
) -> Result<FdsSeries> {
    if n_points < 100 {
        return Err(Error::InvalidArgument(format!(
            "FDS needs at least 100 points, got {n_points}"
        )));
    }
    let mut factors: Vec<Cholesky> = Vec::with_capacity(draws.len());
    for beta in draws.rows() {
        let info = information_matrix(design, &ParamVector(beta.to_vec()), spec)?;
        if let Some(c) = factor_info(&info) {
            factors.push(c);
        }
    }
    let excluded_draws = draws.len() - factors.len();
    if factors.is_empty() {
        return Err(Error::SingularInformation);
    }
    let points = sample_simplex_uniform(spec.q(), n_points, seed);
    let r = spec.r();
    let mut variances: Vec<f64> = points
        .par_iter()
        .map(|x| {
            let mut f = vec![0.0; r];
            let mut scratch = vec![0.0; r];
            spec.expand_into(x.as_slice(), &mut f);
            let total: f64 = factors
                .iter()
                .map(|c| c.inv_quad_form(&f, &mut scratch))
                .sum();
            total / factors.len() as f64
        })
        .collect();
    variances.sort_by(f64::total_cmp);
    let n = n_points as f64;
    let points: Vec<(f64, f64)> = variances
        .into_iter()
        .enumerate()
        .map(|(k, v)| ((k as f64 + 0.5) / n, v))
        .collect();
    debug_assert!(points.windows(2).all(|w| w[0].1 <= w[1].1));
    Ok(FdsSeries {
        points,
        excluded_draws,
        seed,
    })
}

/// Per choice set, the product of the J choice probabilities averaged over
/// the draws.
pub fn utility_balance(design: &Design, draws: &DrawMatrix, spec: &ModelSpec) -> Result<Vec<f64>> {
    if draws.params() != spec.r() {
        return Err(Error::Dimension {
            what: "prior draw length",
            expected: spec.r(),
            actual: draws.params(),
        });
    }
    if design.q() != spec.q() {
        return Err(Error::Dimension {
            what: "design ingredients vs model",
            expected: spec.q(),
            actual: design.q(),
        });
    }
    let (r, alts) = (spec.r(), design.alternatives());
    let mut f = vec![0.0; r];
    let mut utilities = vec![0.0; alts];
    let mut probs = vec![0.0; alts];
    let mut out = Vec::with_capacity(design.sets());
    for s in 0..design.sets() {
        let mut total = 0.0;
        for beta in draws.rows() {
            for (j, u) in utilities.iter_mut().enumerate() {
                spec.expand_into(design.point(s, j), &mut f);
                *u = crate::choice::dot(&f, beta);
            }
            softmax_into(&utilities, &mut probs);
            total += probs.iter().product::<f64>();
        }
        out.push(total / draws.len() as f64);
    }
    Ok(out)
}

/// All pairwise Euclidean distances between alternatives, per choice set.
pub fn within_set_distances(design: &Design) -> Vec<Vec<f64>> {
    (0..design.sets())
        .map(|s| {
            let mut d = Vec::new();
            for a in 0..design.alternatives() {
                for b in a + 1..design.alternatives() {
                    d.push(distance(design.point(s, a), design.point(s, b)));
                }
            }
            d
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummaries {
    pub fds: Summary,
    pub balance: Summary,
    pub distances: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub fds: FdsSeries,
    pub balance: Vec<f64>,
    pub distances: Vec<Vec<f64>>,
    pub summary: SeriesSummaries,
}

/// How choice probabilities are averaged for the balance series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    /// Mean over draws of the per-draw probability product.
    #[default]
    DrawAverage,
    /// Probability product at the mean of the draws.
    PriorMean,
}

pub fn diagnose(
    design: &Design,
    draws: &DrawMatrix,
    spec: &ModelSpec,
    n_points: usize,
    seed: u64,
    balance_mode: BalanceMode,
) -> Result<DiagnosticsReport> {
    let fds = fds_data(design, draws, spec, n_points, seed)?;
    let balance = match balance_mode {
        BalanceMode::DrawAverage => utility_balance(design, draws, spec)?,
        BalanceMode::PriorMean => {
            utility_balance(design, &DrawMatrix::single(draws.mean())?, spec)?
        }
    };
    let distances = within_set_distances(design);
    let flat: Vec<f64> = distances.iter().flatten().copied().collect();
    let summary = SeriesSummaries {
        fds: Summary::of(&fds.variances()).expect("non-empty"),
        balance: Summary::of(&balance).expect("non-empty"),
        distances: Summary::of(&flat).unwrap_or(Summary {
            min: 0.0,
            median: 0.0,
            max: 0.0,
        }),
    };
    Ok(DiagnosticsReport {
        fds,
        balance,
        distances,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{bayes_i, moments_matrix};
    use crate::priors::{cocktail_prior, prior_draws};
    use crate::simplex::ScheffeOrder;

    fn cubic() -> ModelSpec {
        ModelSpec::new(3, ScheffeOrder::SpecialCubic).unwrap()
    }

    fn random_design(sets: usize, seed: u64) -> Design {
        Design::new(sets, 2, sample_simplex_uniform(3, sets * 2, seed)).unwrap()
    }

    #[test]
    fn variance_at_vertex_with_unit_information() {
        // First order, q = 3: r = 2. Two sets whose information is exactly I_2
        // at β = 0: each contributes (f1 − f2)(f1 − f2)ᵀ / 4 = 2 e eᵀ / 4 ...
        // so use vertex pairs scaled by replication instead.
        let spec = ModelSpec::new(3, ScheffeOrder::FirstOrder).unwrap();
        let v = |i| MixturePoint::vertex(3, i);
        // (e1, e3) adds diag(1/4, 0); (e2, e3) adds diag(0, 1/4). Four copies → I.
        let mut pts = Vec::new();
        for _ in 0..4 {
            pts.extend([v(0), v(2), v(1), v(2)]);
        }
        let d = Design::new(8, 2, pts).unwrap();
        let beta = ParamVector::zeros(&spec);
        let info = information_matrix(&d, &beta, &spec).unwrap();
        assert_eq!(info.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        let pv = prediction_variance(&v(0), &d, &beta, &spec).unwrap();
        assert!((pv - 1.0).abs() < 1e-15);
    }

    #[test]
    fn variance_matches_explicit_inverse_and_is_positive() {
        let spec = cubic();
        let d = random_design(16, 3);
        let beta = ParamVector(vec![1.36, 1.57, 2.47, -0.43, 0.50, 1.09]);
        let info = information_matrix(&d, &beta, &spec).unwrap();
        // explicit inverse by Gauss-Jordan
        let n = 6;
        let mut m = info.as_slice().to_vec();
        let mut inv = vec![0.0; 36];
        for i in 0..n {
            inv[i * n + i] = 1.0;
        }
        for c in 0..n {
            let piv = m[c * n + c];
            for k in 0..n {
                m[c * n + k] /= piv;
                inv[c * n + k] /= piv;
            }
            for i in 0..n {
                if i != c {
                    let f = m[i * n + c];
                    for k in 0..n {
                        m[i * n + k] -= f * m[c * n + k];
                        inv[i * n + k] -= f * inv[c * n + k];
                    }
                }
            }
        }
        for x in sample_simplex_uniform(3, 20, 8) {
            let f = crate::simplex::scheffe_expand(&x, &spec).unwrap();
            let mut want = 0.0;
            for a in 0..n {
                for b in 0..n {
                    want += f[a] * inv[a * n + b] * f[b];
                }
            }
            let got = prediction_variance(&x, &d, &beta, &spec).unwrap();
            assert!(got > 0.0);
            assert!(((got - want) / want).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_design_is_reported() {
        let spec = cubic();
        let x = MixturePoint::centroid(3);
        let d = Design::new(2, 2, vec![x.clone(); 4]).unwrap();
        assert_eq!(
            prediction_variance(&x, &d, &ParamVector::zeros(&spec), &spec),
            Err(Error::SingularInformation)
        );
    }

    #[test]
    fn fds_is_sorted_and_halves_with_replication() {
        let spec = cubic();
        let d = random_design(8, 12);
        let draws = DrawMatrix::single(vec![0.01; 6]).unwrap();
        let one = fds_data(&d, &draws, &spec, 500, 1).unwrap();
        let doubled = fds_data(&d.concat(&d).unwrap(), &draws, &spec, 500, 1).unwrap();
        assert!(one.points.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!((one.points[0].0 - 0.001).abs() < 1e-15);
        for (a, b) in one.points.iter().zip(&doubled.points) {
            assert!((a.1 / 2.0 - b.1).abs() < 1e-9 * a.1);
        }
        assert!(fds_data(&d, &draws, &spec, 99, 1).is_err());
    }

    #[test]
    fn fds_mean_tracks_bayes_i() {
        let spec = cubic();
        let d = random_design(16, 21);
        let draws = prior_draws(&cocktail_prior(32), 0).unwrap();
        let fds = fds_data(&d, &draws, &spec, 10_000, 5).unwrap();
        let ib = bayes_i(&d, &draws, &spec, &moments_matrix(&spec)).unwrap().value;
        let volume = 0.5; // 1 / (q − 1)!
        let rel = (fds.mean() - ib / volume).abs() / (ib / volume);
        assert!(rel < 0.02, "relative gap {rel}");
    }

    #[test]
    fn balance_examples() {
        let spec = cubic();
        let d = random_design(5, 2);
        let zero = DrawMatrix::single(vec![0.0; 6]).unwrap();
        for p in utility_balance(&d, &zero, &spec).unwrap() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        let d = Design::new(
            1,
            2,
            vec![MixturePoint::vertex(3, 0), MixturePoint::vertex(3, 2)],
        )
        .unwrap();
        let huge = DrawMatrix::single(vec![60.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(utility_balance(&d, &huge, &spec).unwrap()[0] < 1e-25);

        // relabeling alternatives leaves the product unchanged
        let d = random_design(4, 40);
        let swapped = Design::new(
            4,
            2,
            (0..4)
                .flat_map(|s| {
                    [
                        MixturePoint::new(d.point(s, 1).to_vec()).unwrap(),
                        MixturePoint::new(d.point(s, 0).to_vec()).unwrap(),
                    ]
                })
                .collect(),
        )
        .unwrap();
        let draws = prior_draws(&cocktail_prior(16), 0).unwrap();
        let a = utility_balance(&d, &draws, &spec).unwrap();
        let b = utility_balance(&swapped, &draws, &spec).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
            assert!(*x > 0.0 && *x <= 0.25 + 1e-12);
        }
    }

    #[test]
    fn distance_examples() {
        let v = |i| MixturePoint::vertex(3, i);
        let p = |a: f64, b: f64, c: f64| MixturePoint::new(vec![a, b, c]).unwrap();
        let d = Design::new(
            3,
            2,
            vec![
                v(0),
                v(0),
                v(0),
                v(1),
                p(0.0, 1.0, 0.0),
                p(0.6, 0.4, 0.0),
            ],
        )
        .unwrap();
        let dist = within_set_distances(&d);
        assert_eq!(dist[0], vec![0.0]);
        assert!((dist[1][0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((dist[2][0] - 0.72f64.sqrt()).abs() < 1e-15);
        assert!((dist[2][0] - 0.849).abs() < 1e-3);

        let three = Design::new(1, 3, vec![v(0), v(1), v(2)]).unwrap();
        assert_eq!(within_set_distances(&three)[0].len(), 3);
    }

    #[test]
    fn report_summaries() {
        let spec = cubic();
        let d = random_design(16, 30);
        let draws = prior_draws(&cocktail_prior(16), 0).unwrap();
        let rep = diagnose(&d, &draws, &spec, 200, 3, BalanceMode::DrawAverage).unwrap();
        assert_eq!(rep.balance.len(), 16);
        assert_eq!(rep.distances.len(), 16);
        assert!(rep.summary.fds.min <= rep.summary.fds.median);
        assert!(rep.summary.distances.max <= 2f64.sqrt());
        let at_mean = diagnose(&d, &draws, &spec, 200, 3, BalanceMode::PriorMean).unwrap();
        assert_ne!(at_mean.balance, rep.balance);
        assert_eq!(Summary::of(&[3.0, 1.0, 2.0, 4.0]).unwrap().median, 2.5);
    }
}
