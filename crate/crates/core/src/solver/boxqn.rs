//! Limited-memory quasi-Newton minimization subject to `x ≥ 0`.
//!
//! Two-metric projection: variables pinned at the bound with an outward
//! gradient are held fixed, the curvature pairs act on the rest, and the
//! step is projected back onto the orthant before the Armijo test.

use std::collections::VecDeque;

use crate::error::{Error, Result};

use super::SolverConfig;

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
const BINDING_EPS_MAX: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxStatus {
    GradientTol,
    ValueTol,
    MaxIter,
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct BoxOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// ∞-norm of the projected gradient at `x`.
    pub pg_norm: f64,
    pub status: BoxStatus,
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    inv_sy: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|min(x, g)|` per coordinate: zero exactly at a KKT point of `min f, x ≥ 0`.
fn projected_grad_norm(x: &[f64], g: &[f64]) -> f64 {
    x.iter().zip(g).map(|(xi, gi)| xi.min(*gi).abs()).fold(0.0, f64::max)
}

/// Minimizes `f` over the nonnegative orthant. `f(x, g)` returns the value and
/// writes the gradient; a non-finite value marks `x` as infeasible and makes
/// the line search back off.
pub fn minimize_box<F>(f: F, x0: Vec<f64>, cfg: &SolverConfig) -> Result<BoxOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    minimize_box_scaled(f, x0, None, cfg)
}

/// [`minimize_box`] with a diagonal change of variables `u = x ∘ √curvature`.
///
/// `curvature` estimates the diagonal of the Hessian (entries > 0). Iterates,
/// gradients and stopping tests reported back are in the original `x`.
pub fn minimize_box_scaled<F>(
    mut f: F,
    x0: Vec<f64>,
    curvature: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<BoxOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let root: Vec<f64> = match curvature {
        Some(c) => {
            if c.len() != n || c.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(crate::error::invalid("curvature must hold one positive finite entry per variable"));
            }
            c.iter().map(|v| v.sqrt()).collect()
        }
        None => vec![1.0; n],
    };
    // Work in u-space; `f` is always called with x = u / √c.
    let mut xbuf = vec![0.0; n];
    let mut f = |u: &[f64], gu: &mut [f64]| {
        for i in 0..n {
            xbuf[i] = u[i] / root[i];
        }
        let v = f(&xbuf, gu);
        for i in 0..n {
            gu[i] /= root[i];
        }
        v
    };
    let mut x: Vec<f64> = x0.iter().zip(&root).map(|(v, r)| v.max(0.0) * r).collect();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        let iterate = x.iter().zip(&root).map(|(u, r)| u / r).collect();
        return Err(Error::NumericalFailure { message: format!("objective is {fx} at the starting point"), iterate });
    }

    let mut mem: VecDeque<Pair> = VecDeque::with_capacity(cfg.memory);
    let mut free = vec![true; n];
    let mut dir = vec![0.0; n];
    let mut alphas = vec![0.0; cfg.memory];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    let mut status = BoxStatus::MaxIter;
    let mut iterations = 0;
    // x_i·g_i is invariant under the scaling, so |min(x, g)| is evaluated in
    // original coordinates as |min(u/√c, g_u·√c)|.
    let pg_orig = |u: &[f64], gu: &[f64]| -> f64 {
        u.iter().zip(gu).zip(&root).map(|((ui, gi), r)| (ui / r).min(gi * r).abs()).fold(0.0, f64::max)
    };
    while iterations < cfg.inner_max_iter {
        let pg = pg_orig(&x, &g);
        if pg <= cfg.inner_grad_tol {
            status = BoxStatus::GradientTol;
            break;
        }
        let pg = projected_grad_norm(&x, &g);
        let eps = pg.min(BINDING_EPS_MAX);
        for i in 0..n {
            free[i] = !(x[i] <= eps && g[i] > 0.0);
        }

        // Two-loop recursion restricted to free coordinates; `dir` stays zero
        // off the free set, so plain dot products suffice.
        for i in 0..n {
            dir[i] = if free[i] { g[i] } else { 0.0 };
        }
        for (k, p) in mem.iter().enumerate().rev() {
            let a = p.inv_sy * dot(&p.s, &dir);
            alphas[k] = a;
            for i in 0..n {
                if free[i] {
                    dir[i] -= a * p.y[i];
                }
            }
        }
        if let Some(p) = mem.back() {
            let gamma = 1.0 / (p.inv_sy * dot(&p.y, &p.y));
            dir.iter_mut().for_each(|v| *v *= gamma);
        }
        for (k, p) in mem.iter().enumerate() {
            let b = p.inv_sy * dot(&p.y, &dir);
            for i in 0..n {
                if free[i] {
                    dir[i] += p.s[i] * (alphas[k] - b);
                }
            }
        }
        dir.iter_mut().for_each(|v| *v = -*v);

        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) || mem.is_empty() {
            if !mem.is_empty() {
                mem.clear();
            }
            for i in 0..n {
                dir[i] = if free[i] { -g[i] } else { 0.0 };
            }
            slope = dot(&g, &dir);
            if !(slope < 0.0) {
                // Only bound-pinned coordinates remain; the point is stationary.
                status = BoxStatus::GradientTol;
                break;
            }
        }

        let mut t = if mem.is_empty() { (1.0 / dot(&dir, &dir).sqrt()).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                x_new[i] = (x[i] + t * dir[i]).max(0.0);
            }
            let f_new = f(&x_new, &mut g_new);
            evaluations += 1;
            let decrease: f64 = g.iter().zip(&x_new).zip(&x).map(|((gi, a), b)| gi * (a - b)).sum();
            if f_new.is_finite() && f_new <= fx + ARMIJO_C1 * decrease && g_new.iter().all(|v| v.is_finite()) {
                accepted = Some(f_new);
                break;
            }
            let t_quad = if f_new.is_finite() {
                let denom = 2.0 * (f_new - fx - t * slope);
                if denom > 0.0 {
                    -slope * t * t / denom
                } else {
                    0.5 * t
                }
            } else {
                0.1 * t
            };
            t = t_quad.clamp(0.1 * t, 0.5 * t);
        }
        let Some(f_new) = accepted else {
            if !mem.is_empty() {
                mem.clear();
                continue;
            }
            status = BoxStatus::LineSearchStalled;
            break;
        };
        iterations += 1;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&y, &y) && sy > 0.0 {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back(Pair { s, y, inv_sy: 1.0 / sy });
        }

        let f_old = fx;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        if f_old - fx <= cfg.inner_ftol * f_old.abs().max(fx.abs()).max(1.0) {
            status = BoxStatus::ValueTol;
            break;
        }
    }

    let pg_norm = pg_orig(&x, &g);
    let x = x.iter().zip(&root).map(|(u, r)| u / r).collect();
    Ok(BoxOutcome { x, value: fx, iterations, evaluations, pg_norm, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::lu_solve;
    use ndarray::{Array2, Axis};

    fn tight() -> SolverConfig {
        SolverConfig { inner_grad_tol: 1e-10, inner_ftol: 0.0, inner_max_iter: 2000, ..SolverConfig::default() }
    }

    #[test]
    fn one_dimensional_interior_and_bound() {
        let out = minimize_box(
            |x, g| {
                g[0] = x[0] - 1.0;
                0.5 * (x[0] - 1.0).powi(2)
            },
            vec![0.0],
            &tight(),
        )
        .unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-9);

        let out = minimize_box(
            |x, g| {
                g[0] = x[0] + 1.0;
                0.5 * (x[0] + 1.0).powi(2)
            },
            vec![3.0],
            &tight(),
        )
        .unwrap();
        assert_eq!(out.x[0], 0.0);
        assert_eq!(out.status, BoxStatus::GradientTol);
    }

    #[test]
    fn spd_quadratic_matches_direct_solve() {
        use rand::Rng as _;
        let mut rng = crate::rng::rng_from_seed(17);
        let n = 10;
        let b_mat = Array2::from_shape_fn((n, n), |_| rng.random::<f64>() - 0.5);
        let a = b_mat.t().dot(&b_mat) + Array2::<f64>::eye(n);
        // Interior minimizer so the bound stays inactive.
        let x_star = Array2::from_shape_fn((n, 1), |_| 0.5 + rng.random::<f64>());
        let rhs = a.dot(&x_star);
        let direct = lu_solve(a.clone(), rhs.clone()).unwrap();
        let out = minimize_box(
            |x, g| {
                let xv = ndarray::ArrayView1::from(x);
                let ax = a.dot(&xv);
                for i in 0..n {
                    g[i] = ax[i] - rhs[[i, 0]];
                }
                0.5 * xv.dot(&ax) - xv.dot(&rhs.index_axis(Axis(1), 0))
            },
            vec![0.0; n],
            &tight(),
        )
        .unwrap();
        for i in 0..n {
            assert!((out.x[i] - direct[[i, 0]]).abs() < 1e-5, "{:?} vs {direct:?}", out.x);
        }
    }

    #[test]
    fn active_bounds_satisfy_kkt() {
        // min ½‖x − c‖² with some negative targets: solution is max(c, 0).
        let c = [1.5, -2.0, 0.3, -0.1, 4.0];
        let out = minimize_box(
            |x, g| {
                let mut v = 0.0;
                for i in 0..5 {
                    g[i] = x[i] - c[i];
                    v += 0.5 * g[i] * g[i];
                }
                v
            },
            vec![1.0; 5],
            &tight(),
        )
        .unwrap();
        for i in 0..5 {
            assert!((out.x[i] - c[i].max(0.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let r = minimize_box(|_, _| f64::NAN, vec![1.0], &tight());
        assert!(matches!(r, Err(Error::NumericalFailure { .. })));
    }

    #[test]
    fn infinite_region_is_avoided() {
        // f = +inf for x > 2, so the line search must back off.
        let out = minimize_box(
            |x, g| {
                if x[0] > 2.0 {
                    return f64::INFINITY;
                }
                g[0] = -1.0;
                -x[0]
            },
            vec![0.0],
            &SolverConfig { inner_max_iter: 200, ..tight() },
        )
        .unwrap();
        assert!(out.x[0] <= 2.0 && out.x[0] > 1.9);
    }
}
