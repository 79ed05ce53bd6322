//! Small dense symmetric matrices and their Cholesky factorization.
//!
//! Matrices are stored row-major in flat slices. All sizes in this crate are
//! tiny (r is at most a few dozen), so plain loops beat any BLAS dispatch.

/// Pivots below this fraction of the largest diagonal entry count as singular.
pub const RELATIVE_PIVOT_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors the symmetric matrix `a` (n×n, row-major).
    ///
    /// Returns `None` when a pivot falls below `RELATIVE_PIVOT_TOL` times the
    /// largest diagonal entry, i.e. the matrix is singular for our purposes.
    pub fn factor(a: &[f64], n: usize) -> Option<Self> {
        let mut l = vec![0.0; n * n];
        if factor_into(a, n, &mut l) {
            Some(Self { n, l })
        } else {
            None
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_matrix(&self) -> &[f64] {
        &self.l
    }

    /// log det A.
    pub fn log_det(&self) -> f64 {
        log_det_from_factor(&self.l, self.n)
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        solve_in_place(&self.l, self.n, b);
    }

    /// bᵀ A⁻¹ b, computed as ‖L⁻¹ b‖².
    pub fn inv_quad_form(&self, b: &[f64], scratch: &mut [f64]) -> f64 {
        inv_quad_form(&self.l, self.n, b, scratch)
    }

    /// tr(A⁻¹ W) for symmetric `w`.
    pub fn trace_inv_product(&self, w: &[f64]) -> f64 {
        let mut scratch = vec![0.0; self.n * self.n];
        trace_inv_product(&self.l, self.n, w, &mut scratch)
    }
}

/// Cholesky factorization into a caller-provided buffer. Returns false on a
/// (numerically) singular or indefinite matrix.
#[inline]
pub fn factor_into(a: &[f64], n: usize, l: &mut [f64]) -> bool {
    let mut max_diag = 0.0f64;
    for i in 0..n {
        max_diag = max_diag.max(a[i * n + i]);
    }
    if !(max_diag > 0.0) || !max_diag.is_finite() {
        return false;
    }
    let threshold = RELATIVE_PIVOT_TOL * max_diag;
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > threshold) {
            return false;
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
        for i in 0..j {
            l[i * n + j] = 0.0;
        }
    }
    true
}

#[inline]
pub fn log_det_from_factor(l: &[f64], n: usize) -> f64 {
    2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>()
}

#[inline]
fn forward_in_place(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

#[inline]
fn backward_in_place(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

#[inline]
pub fn solve_in_place(l: &[f64], n: usize, b: &mut [f64]) {
    forward_in_place(l, n, b);
    backward_in_place(l, n, b);
}

#[inline]
pub fn inv_quad_form(l: &[f64], n: usize, b: &[f64], scratch: &mut [f64]) -> f64 {
    let y = &mut scratch[..n];
    y.copy_from_slice(b);
    forward_in_place(l, n, y);
    y.iter().map(|v| v * v).sum()
}

/// tr(A⁻¹ W) by solving against each column of W. `scratch` needs n entries.
#[inline]
pub fn trace_inv_product(l: &[f64], n: usize, w: &[f64], scratch: &mut [f64]) -> f64 {
    let col = &mut scratch[..n];
    let mut trace = 0.0;
    for c in 0..n {
        for i in 0..n {
            col[i] = w[i * n + c];
        }
        solve_in_place(l, n, col);
        trace += col[c];
    }
    trace
}

/// tr(A⁻¹ C Cᵀ) = ‖L⁻¹ C‖²_F for a lower-triangular `c`. `scratch` needs n
/// entries.
#[inline]
pub fn trace_inv_factored(l: &[f64], n: usize, c: &[f64], scratch: &mut [f64]) -> f64 {
    let mut inv_diag = [0.0f64; 64];
    for i in 0..n {
        inv_diag[i] = 1.0 / l[i * n + i];
    }
    let y = &mut scratch[..n];
    let mut total = 0.0;
    for k in 0..n {
        // column k of C is zero above row k, so is its solve
        for i in k..n {
            let mut s = c[i * n + k];
            for (lij, yj) in l[i * n + k..i * n + i].iter().zip(&y[k..i]) {
                s -= lij * yj;
            }
            y[i] = s * inv_diag[i];
            total += y[i] * y[i];
        }
    }
    total
}

/// Maximum absolute asymmetry |a_ij - a_ji|.
pub fn asymmetry(a: &[f64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((a[i * n + j] - a[j * n + i]).abs());
        }
    }
    worst
}
