//! Multivariate normal priors and their quasi-random (Halton) draws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The first 25 primes; column `d` of a Halton matrix uses `PRIMES[d]`.
pub const PRIMES: [u64; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    value
}

/// `n × dim` Halton matrix (row-major). Row `i` holds the radical inverses of
/// index `i + 1 + skip` in the first `dim` prime bases.
pub fn halton(n: usize, dim: usize, skip: usize) -> Result<Vec<Vec<f64>>> {
    if dim > PRIMES.len() {
        return Err(Error::TooManyDimensions {
            dim,
            max: PRIMES.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("Halton sequence needs n >= 1".into()));
    }
    Ok((0..n)
        .map(|i| {
            let index = (i + 1 + skip) as u64;
            PRIMES[..dim]
                .iter()
                .map(|&b| radical_inverse(index, b))
                .collect()
        })
        .collect())
}

/// Standard normal quantile Φ⁻¹(u).
///
/// Acklam's rational approximation followed by one Halley step against the
/// complementary error function; absolute error well below 1e-9.
pub fn normal_inverse_cdf(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::ProbabilityOutOfRange(u));
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const LOW: f64 = 0.02425;

    let x = if u < LOW {
        let t = (-2.0 * u.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    } else if u <= 1.0 - LOW {
        let t = u - 0.5;
        let s = t * t;
        (((((A[0] * s + A[1]) * s + A[2]) * s + A[3]) * s + A[4]) * s + A[5]) * t
            / (((((B[0] * s + B[1]) * s + B[2]) * s + B[3]) * s + B[4]) * s + 1.0)
    } else {
        let t = (-2.0 * (1.0 - u).ln()).sqrt();
        -(((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    };

    // Halley refinement
    let e = 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2) - u;
    let g = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - g / (1.0 + 0.5 * x * g))
}

/// Multivariate normal prior N(mean, cov) approximated with `draws` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub draws: usize,
}

impl PriorSpec {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>, draws: usize) -> Result<Self> {
        let spec = Self { mean, cov, draws };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.mean.len();
        if self.draws == 0 {
            return Err(Error::InvalidArgument("a prior needs at least one draw".into()));
        }
        if self.cov.len() != r {
            return Err(Error::Dimension {
                what: "covariance rows",
                expected: r,
                actual: self.cov.len(),
            });
        }
        for row in &self.cov {
            if row.len() != r {
                return Err(Error::Dimension {
                    what: "covariance columns",
                    expected: r,
                    actual: row.len(),
                });
            }
        }
        for i in 0..r {
            for j in 0..i {
                let diff = (self.cov[i][j] - self.cov[j][i]).abs();
                if diff > 1e-10 {
                    return Err(Error::NotSymmetric { row: i, col: j, diff });
                }
            }
        }
        Ok(())
    }

    /// Lower Cholesky factor of the symmetrized covariance (row-major).
    pub fn cholesky_factor(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let r = self.dim();
        let mut a = vec![0.0; r * r];
        for i in 0..r {
            for j in 0..r {
                a[i * r + j] = 0.5 * (self.cov[i][j] + self.cov[j][i]);
            }
        }
        psd_cholesky(&a, r)
    }
}

/// Cholesky factor of a positive semidefinite matrix; zero pivots yield zero
/// columns, clearly negative pivots are an error.
fn psd_cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    let tol = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -tol || !d.is_finite() {
            return Err(Error::NotPositiveSemidefinite { column: j, pivot: d });
        }
        if d <= tol {
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if s.abs() > tol.sqrt().max(1e-9) {
                    return Err(Error::NotPositiveSemidefinite { column: j, pivot: d });
                }
            }
            continue;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// R × r matrix of parameter draws, one draw per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawMatrix {
    params: usize,
    data: Vec<f64>,
}

impl DrawMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let params = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || params == 0 {
            return Err(Error::InvalidArgument("draw matrix must be non-empty".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * params);
        for row in &rows {
            if row.len() != params {
                return Err(Error::Dimension {
                    what: "draw row length",
                    expected: params,
                    actual: row.len(),
                });
            }
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite draw value {bad}")));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { params, data })
    }

    /// A single draw; local criteria are Bayesian criteria with R = 1.
    pub fn single(beta: Vec<f64>) -> Result<Self> {
        Self::from_rows(vec![beta])
    }

    /// Number of draws R.
    pub fn len(&self) -> usize {
        self.data.len() / self.params
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Parameter count r.
    pub fn params(&self) -> usize {
        self.params
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.params..(i + 1) * self.params]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.params)
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.params];
        for row in self.rows() {
            m.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// Halton-based prior draws: β⁽ⁱ⁾ = β₀ + L z⁽ⁱ⁾ with Σ₀ = L Lᵀ and
/// z⁽ⁱ⁾ the normal quantiles of Halton row i.
pub fn prior_draws(prior: &PriorSpec, skip: usize) -> Result<DrawMatrix> {
    let r = prior.dim();
    if r == 0 {
        return Err(Error::InvalidArgument("prior mean is empty".into()));
    }
    let l = prior.cholesky_factor()?;
    let points = halton(prior.draws, r, skip)?;
    let mut rows = Vec::with_capacity(prior.draws);
    let mut z = vec![0.0; r];
    for point in points {
        for (zi, u) in z.iter_mut().zip(&point) {
            *zi = normal_inverse_cdf(*u)?;
        }
        let row: Vec<f64> = (0..r)
            .map(|i| prior.mean[i] + (0..=i).map(|k| l[i * r + k] * z[k]).sum::<f64>())
            .collect();
        rows.push(row);
    }
    DrawMatrix::from_rows(rows)
}

/// Mean and covariance of the cocktail prior (three ingredients, special cubic).
pub fn cocktail_prior(draws: usize) -> PriorSpec {
    PriorSpec {
        mean: vec![1.36, 1.57, 2.47, -0.43, 0.50, 1.09],
        cov: vec![
            vec![6.14, 5.00, 2.74, -0.43, -2.81, -3.33],
            vec![5.00, 6.76, 4.47, -1.79, -6.13, -3.51],
            vec![2.74, 4.47, 3.45, -1.38, -4.71, -2.17],
            vec![-0.43, -1.79, -1.38, 1.18, 2.39, 0.71],
            vec![-2.81, -6.13, -4.71, 2.39, 7.43, 2.71],
            vec![-3.33, -3.51, -2.17, 0.71, 2.71, 2.49],
        ],
        draws,
    }
}

/// Sweetener prior with uncertainty level `kappa`, already in the
/// identified parameterization.
pub fn sweetener_prior(kappa: f64, draws: usize) -> PriorSpec {
    let k = kappa;
    PriorSpec {
        mean: vec![0.86, 0.21, 3.07, 2.34, 3.24, -20.59],
        cov: vec![
            vec![2.0 * k, k, 0.0, 0.0, 0.0, 0.0],
            vec![k, 2.0 * k, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, k, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, k, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, k, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, k],
        ],
        draws,
    }
}
