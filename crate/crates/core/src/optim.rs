//! Quasi-Newton minimisation with finite-difference gradients.
//!
//! The objectives minimised here (negative restricted log-likelihoods) are
//! smooth but expensive, low dimensional and have no analytic gradient, so a
//! dense BFGS with central differences is the right tool. Gradient
//! coordinates are independent and are evaluated through [`crate::parallel`].

use crate::parallel::{map_indices, Parallelism};

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Stop when the relative objective change falls below this.
    pub rel_tol: f64,
    pub grad_tol: f64,
    /// Largest allowed move of any coordinate in one line-search step.
    pub max_step: f64,
    pub parallelism: Parallelism,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iter: 500,
            rel_tol: 1e-8,
            grad_tol: 1e-6,
            max_step: 4.0,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Central-difference gradient.
pub fn numerical_gradient<F>(f: &F, x: &[f64], parallelism: Parallelism) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    map_indices(parallelism, x.len(), |i| {
        let h = 1e-5 * x[i].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let fp = eval(f, &xp);
        let fm = eval(f, &xm);
        if fp.is_finite() && fm.is_finite() {
            (fp - fm) / (2.0 * h)
        } else {
            // One-sided fallback next to a barrier.
            let f0 = eval(f, x);
            if fp.is_finite() {
                (fp - f0) / h
            } else if fm.is_finite() {
                (f0 - fm) / h
            } else {
                0.0
            }
        }
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises `f` from `x0` with BFGS and a backtracking Armijo line search.
///
/// Non-finite objective values are treated as `+inf`, so a caller can
/// express hard constraints by returning NaN outside the feasible region.
pub fn minimize<F>(f: F, x0: &[f64], opts: &OptimOptions) -> OptimResult
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = eval(&f, &x);
    if n == 0 {
        return OptimResult {
            x,
            value: fx,
            iterations: 0,
            grad_norm: 0.0,
            converged: true,
        };
    }
    let mut g = numerical_gradient(&f, &x, opts.parallelism);
    // Inverse Hessian approximation, row-major.
    let mut h = identity(n);
    let mut scaled = false;
    let mut converged = false;
    let mut iterations = 0;
    let mut small_steps = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < opts.grad_tol {
            converged = true;
            break;
        }
        let mut d = matvec(&h, &g);
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            h = identity(n);
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut t = if dmax > opts.max_step {
            opts.max_step / dmax
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..50 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let fnew = eval(&f, &xn);
            if fnew <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if h != identity(n) {
                h = identity(n);
                scaled = false;
                continue;
            }
            // No descent possible along the steepest direction either.
            converged = true;
            break;
        };

        let gn = numerical_gradient(&f, &xn, opts.parallelism);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
            if !scaled {
                let gamma = sy / dot(&yv, &yv);
                h = identity(n);
                h.iter_mut().for_each(|v| *v *= gamma);
                scaled = true;
            }
            bfgs_update(&mut h, &s, &yv, sy);
        }

        let rel = (fx - fnew).abs() / (fx.abs() + 1e-10);
        x = xn;
        fx = fnew;
        g = gn;
        if rel < opts.rel_tol {
            small_steps += 1;
            if small_steps >= 2 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }

    OptimResult {
        grad_norm: dot(&g, &g).sqrt(),
        x,
        value: fx,
        iterations,
        converged,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn matvec(h: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| dot(&h[i * n..(i + 1) * n], v)).collect()
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let hy = matvec(h, y);
    let yhy = dot(y, &hy);
    let rho = 1.0 / sy;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
    }
}
