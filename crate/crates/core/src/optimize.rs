//! Bounded one-dimensional maximization (Brent: golden section with
//! parabolic interpolation).

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - sqrt 5) / 2

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Local maximum of `f` on `[lo, hi]`, located to within `xtol`.
pub fn maximize_bounded<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> Maximum
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut g = |x: f64| -f(x);

    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = g(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut evaluations = 1;

    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        let tol = 1e-12 * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }

        let mut golden_step = true;
        if e.abs() > tol {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let prev_e = e;
            e = d;
            if p.abs() < (0.5 * q * prev_e).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < mid { tol } else { -tol };
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x < mid { b - x } else { a - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol {
            x + d
        } else if d > 0.0 {
            x + tol
        } else {
            x - tol
        };
        let fu = g(u);
        evaluations += 1;

        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }

    Maximum {
        x,
        value: -fx,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_peak() {
        let m = maximize_bounded(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-10, 200);
        assert!((m.x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn respects_bounds() {
        let m = maximize_bounded(|x| x, 0.0, 2.0, 1e-9, 200);
        assert!(m.x <= 2.0 && m.x > 2.0 - 1e-6);
        let m = maximize_bounded(|x| -x, 1.0, 2.0, 1e-9, 200);
        assert!(m.x >= 1.0 && m.x < 1.0 + 1e-6);
    }

    #[test]
    fn non_quadratic_peak() {
        let m = maximize_bounded(|x: f64| (3.0 * x).sin() * (-x).exp(), 0.0, 1.0, 1e-10, 200);
        // d/dx: 3 cos 3x = sin 3x  =>  tan 3x = 3
        let expect = 3f64.atan() / 3.0;
        assert!((m.x - expect).abs() < 1e-8);
    }
}
