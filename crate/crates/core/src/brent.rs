//! Brent's derivative-free univariate minimization.

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - sqrt(5)) / 2
const MAX_ITER: usize = 500;

/// Minimizes `f` on `[lo, hi]`, returning `(x*, f(x*))`.
///
/// Golden-section steps are mixed with successive parabolic interpolation.
/// For a unimodal objective the returned point lies within `tol` of the
/// minimizer (up to the resolution of f64 function values near a flat
/// optimum). The endpoints themselves are never evaluated.
pub fn brent_minimize<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let tol = tol.abs().max(4.0 * f64::EPSILON);
    let eps = f64::EPSILON;

    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..MAX_ITER {
        let m = 0.5 * (a + b);
        let tol1 = tol / 3.0 + eps * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }

        let mut golden = true;
        if e.abs() > tol1 {
            // parabola through (v, fv), (w, fw), (x, fx)
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);

        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let (x, fx) = brent_minimize(|x| (x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-8);
        assert!((x - 0.3).abs() <= 1e-8);
        assert!(fx <= 1e-16);
    }

    #[test]
    fn cosine() {
        let (x, fx) = brent_minimize(f64::cos, 2.0, 4.0, 1e-8);
        assert!((x - std::f64::consts::PI).abs() <= 1e-7);
        assert!((fx + 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant() {
        let mut calls = 0;
        let (x, fx) = brent_minimize(
            |_| {
                calls += 1;
                4.5
            },
            -1.0,
            2.0,
            1e-6,
        );
        assert!((-1.0..=2.0).contains(&x));
        assert_eq!(fx, 4.5);
        assert!(calls < MAX_ITER);
    }

    #[test]
    fn monotone_runs_to_the_boundary() {
        let (x, _) = brent_minimize(|x| -x, 0.0, 1.0, 1e-4);
        assert!(1.0 - x <= 1e-4);
        let (x, _) = brent_minimize(|x| x, 0.0, 1.0, 1e-4);
        assert!(x <= 1e-4);
    }

    #[test]
    fn reversed_bounds() {
        let (x, _) = brent_minimize(|x| (x - 0.3) * (x - 0.3), 1.0, 0.0, 1e-8);
        assert!((x - 0.3).abs() <= 1e-8);
    }
}
