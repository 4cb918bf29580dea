//! Bounded quasi-Newton minimizer.
//!
//! Limited-memory BFGS with gradient projection onto box bounds and a
//! backtracking Armijo line search along the projected path. The problems
//! solved here have one or two variables (log kernel hyperparameters), so
//! robustness matters more than large-scale performance.

use crate::num::Real;

pub struct Options<R> {
    pub max_iters: usize,
    pub history: usize,
    pub grad_tol: R,
}

impl<R: Real> Default for Options<R> {
    fn default() -> Self {
        Options {
            max_iters: 100,
            history: 8,
            grad_tol: R::lit(1e-7),
        }
    }
}

pub struct Solution<R> {
    pub x: Vec<R>,
    pub value: R,
    pub iterations: usize,
}

fn project<R: Real>(x: &mut [R], bounds: &[(R, R)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        if *xi < lo {
            *xi = lo;
        } else if *xi > hi {
            *xi = hi;
        }
    }
}

/// Infinity norm of the projected gradient.
fn projected_grad_norm<R: Real>(x: &[R], g: &[R], bounds: &[(R, R)]) -> R {
    let mut norm = R::zero();
    for i in 0..x.len() {
        let step = x[i] - g[i];
        let clipped = step.max(bounds[i].0).min(bounds[i].1);
        norm = norm.max((x[i] - clipped).abs());
    }
    norm
}

/// Minimizes `f` subject to box bounds. `f` returns value and gradient.
/// The best iterate ever evaluated is returned, so the result never
/// exceeds the value at `x0`.
pub fn minimize<R, F>(mut f: F, x0: &[R], bounds: &[(R, R)], opts: &Options<R>) -> Solution<R>
where
    R: Real,
    F: FnMut(&[R]) -> (R, Vec<R>),
{
    assert_eq!(x0.len(), bounds.len());
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, bounds);
    let (mut fx, mut g) = f(&x);

    let mut best_x = x.clone();
    let mut best_f = fx;

    let mut s_hist: Vec<Vec<R>> = Vec::new();
    let mut y_hist: Vec<Vec<R>> = Vec::new();
    let mut rho_hist: Vec<R> = Vec::new();

    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        iterations += 1;
        if projected_grad_norm(&x, &g, bounds) <= opts.grad_tol {
            break;
        }

        // Two-loop recursion for d = -H g.
        let mut q = g.clone();
        let m = s_hist.len();
        let mut alphas = vec![R::zero(); m];
        for i in (0..m).rev() {
            let a = rho_hist[i] * dotv(&s_hist[i], &q);
            alphas[i] = a;
            for k in 0..n {
                q[k] = q[k] - a * y_hist[i][k];
            }
        }
        let gamma = if m > 0 {
            let sy = dotv(&s_hist[m - 1], &y_hist[m - 1]);
            let yy = dotv(&y_hist[m - 1], &y_hist[m - 1]);
            if yy > R::zero() { sy / yy } else { R::one() }
        } else {
            R::one()
        };
        for qk in q.iter_mut() {
            *qk = *qk * gamma;
        }
        for i in 0..m {
            let beta = rho_hist[i] * dotv(&y_hist[i], &q);
            for k in 0..n {
                q[k] = q[k] + s_hist[i][k] * (alphas[i] - beta);
            }
        }
        let d: Vec<R> = q.iter().map(|&v| -v).collect();

        // Backtracking along the projected path.
        let gd = dotv(&g, &d);
        let descent = if gd < R::zero() { gd } else { -dotv(&g, &g) };
        let dir: Vec<R> = if gd < R::zero() {
            d
        } else {
            g.iter().map(|&v| -v).collect()
        };

        let c1 = R::lit(1e-4);
        let mut t = R::one();
        let mut accepted = false;
        for _ in 0..40 {
            let mut xt: Vec<R> = x.iter().zip(&dir).map(|(&xi, &di)| xi + t * di).collect();
            project(&mut xt, bounds);
            if xt == x {
                break;
            }
            let (ft, gt) = f(&xt);
            if ft < best_f {
                best_f = ft;
                best_x = xt.clone();
            }
            if ft <= fx + c1 * t * descent {
                let s: Vec<R> = xt.iter().zip(&x).map(|(&a, &b)| a - b).collect();
                let yv: Vec<R> = gt.iter().zip(&g).map(|(&a, &b)| a - b).collect();
                let sy = dotv(&s, &yv);
                if sy > R::lit(1e-12) {
                    s_hist.push(s);
                    y_hist.push(yv);
                    rho_hist.push(R::one() / sy);
                    if s_hist.len() > opts.history {
                        s_hist.remove(0);
                        y_hist.remove(0);
                        rho_hist.remove(0);
                    }
                }
                x = xt;
                fx = ft;
                g = gt;
                accepted = true;
                break;
            }
            t = t * R::lit(0.5);
        }
        if !accepted {
            break;
        }
    }

    Solution {
        x: best_x,
        value: best_f,
        iterations,
    }
}

fn dotv<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_unconstrained_minimum() {
        let f = |x: &[f64]| {
            let v = (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2);
            (v, vec![2.0 * (x[0] - 3.0), 4.0 * (x[1] + 1.0)])
        };
        let sol = minimize(f, &[0.0, 0.0], &[(-10.0, 10.0), (-10.0, 10.0)], &Options::default());
        assert!((sol.x[0] - 3.0).abs() < 1e-6);
        assert!((sol.x[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn active_bound_is_respected() {
        let f = |x: &[f64]| ((x[0] - 3.0).powi(2), vec![2.0 * (x[0] - 3.0)]);
        let sol = minimize(f, &[0.0], &[(-1.0, 1.0)], &Options::default());
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rosenbrock_in_box() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (v, g)
        };
        let sol = minimize(
            f,
            &[-1.2, 1.0],
            &[(-2.0, 2.0), (-2.0, 2.0)],
            &Options { max_iters: 2000, ..Options::default() },
        );
        assert!(sol.value < 1e-8, "value {}", sol.value);
    }

    #[test]
    fn never_worse_than_start() {
        // A nasty oscillatory function; best-seen tracking keeps the
        // result at or below the initial value.
        let f = |x: &[f64]| ((x[0].sin() * 50.0).sin() + x[0] * x[0], {
            vec![(x[0].sin() * 50.0).cos() * 50.0 * x[0].cos() + 2.0 * x[0]]
        });
        let start = f(&[0.4]).0;
        let sol = minimize(f, &[0.4], &[(-2.0, 2.0)], &Options::default());
        assert!(sol.value <= start + 1e-15);
    }
}
