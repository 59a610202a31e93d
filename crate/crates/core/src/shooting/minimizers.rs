//! Two-dimensional local minimizers used by the shooting search.
//!
//! Each takes an objective, and where needed a gradient, plus a projection that
//! maps trial points back into the admissible domain. Objective failures abort
//! the run and are returned to the caller.

use crate::error::Result;

pub(crate) type Point = [f64; 2];

/// Final iterate of a local minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub x: Point,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// A termination criterion was met before the iteration cap.
    pub terminated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub initial_step: Point,
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: [0.05, 0.05 * std::f64::consts::PI],
            x_tol: 1e-6,
            f_tol: 1e-10,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    /// Upper bound on the length of a trial step.
    pub max_step: f64,
    pub x_tol: f64,
    pub g_tol: f64,
    pub max_iter: usize,
    /// Difference step for the Hessian (Newton only).
    pub hessian_step: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_step: 0.1,
            x_tol: 1e-10,
            g_tol: 1e-10,
            max_iter: 500,
            hessian_step: 1e-4,
        }
    }
}

fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

fn lerp(from: &Point, to: &Point, t: f64) -> Point {
    [from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])]
}

/// Downhill simplex search.
pub fn nelder_mead<F, P>(f: F, project: P, x0: Point, opts: &NelderMeadOptions) -> Result<Outcome>
where
    F: Fn(Point) -> Result<f64>,
    P: Fn(Point) -> Point,
{
    let mut evaluations = 0;
    let mut eval = |x: Point| {
        evaluations += 1;
        f(x)
    };

    let start = project(x0);
    let mut simplex: Vec<(Point, f64)> = Vec::with_capacity(3);
    simplex.push((start, eval(start)?));
    for k in 0..2 {
        let mut v = start;
        v[k] += opts.initial_step[k];
        let v = project(v);
        simplex.push((v, eval(v)?));
    }

    let mut iterations = 0;
    let mut terminated = false;
    while iterations < opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0];
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| dist(v, &best.0))
            .fold(0.0, f64::max);
        if diameter < opts.x_tol || simplex[2].1 - best.1 < opts.f_tol {
            terminated = true;
            break;
        }
        iterations += 1;

        let worst = simplex[2];
        let centroid = lerp(&simplex[0].0, &simplex[1].0, 0.5);
        let xr = project(lerp(&centroid, &worst.0, -opts.reflection));
        let fr = eval(xr)?;

        if fr < best.1 {
            let xe = project(lerp(&centroid, &xr, opts.expansion));
            let fe = eval(xe)?;
            simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[1].1 {
            simplex[2] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = project(lerp(&centroid, &xr, opts.contraction));
            (xc, eval(xc)?)
        } else {
            let xc = project(lerp(&centroid, &worst.0, opts.contraction));
            (xc, eval(xc)?)
        };
        if fc < fr.min(worst.1) {
            simplex[2] = (xc, fc);
            continue;
        }
        for vertex in simplex.iter_mut().skip(1) {
            let v = project(lerp(&best.0, &vertex.0, opts.shrink));
            *vertex = (v, eval(v)?);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(Outcome {
        x: simplex[0].0,
        fx: simplex[0].1,
        iterations,
        evaluations,
        terminated,
    })
}

/// Backtracking (Armijo) search along `dir`. Returns the accepted point and value,
/// or `None` when no sufficient decrease was found.
fn backtrack<F, P>(
    f: &mut F,
    project: &P,
    x: Point,
    fx: f64,
    g: &Point,
    dir: Point,
) -> Result<Option<(Point, f64)>>
where
    F: FnMut(Point) -> Result<f64>,
    P: Fn(Point) -> Point,
{
    let slope = dot(g, &dir);
    let mut alpha = 1.0;
    for _ in 0..40 {
        let trial = project([x[0] + alpha * dir[0], x[1] + alpha * dir[1]]);
        let ft = f(trial)?;
        if ft <= fx + 1e-4 * alpha * slope && ft < fx {
            return Ok(Some((trial, ft)));
        }
        alpha *= 0.5;
    }
    Ok(None)
}

fn cap(dir: Point, max_step: f64) -> Point {
    let n = norm(&dir);
    if n > max_step {
        [dir[0] * max_step / n, dir[1] * max_step / n]
    } else {
        dir
    }
}

/// Quasi-Newton search with the BFGS inverse-Hessian update.
pub fn bfgs<F, G, P>(f: F, grad: G, project: P, x0: Point, opts: &DescentOptions) -> Result<Outcome>
where
    F: Fn(Point) -> Result<f64>,
    G: Fn(Point) -> Result<Point>,
    P: Fn(Point) -> Point,
{
    let mut evaluations = 0;
    let mut eval = |x: Point| {
        evaluations += 1;
        f(x)
    };
    let mut x = project(x0);
    let mut fx = eval(x)?;
    let mut g = grad(x)?;
    let mut hinv = [[1.0, 0.0], [0.0, 1.0]];
    let mut iterations = 0;
    let mut terminated = false;

    while iterations < opts.max_iter {
        if norm(&g) < opts.g_tol {
            terminated = true;
            break;
        }
        iterations += 1;
        let mut dir = [
            -(hinv[0][0] * g[0] + hinv[0][1] * g[1]),
            -(hinv[1][0] * g[0] + hinv[1][1] * g[1]),
        ];
        if dot(&dir, &g) >= 0.0 {
            hinv = [[1.0, 0.0], [0.0, 1.0]];
            dir = [-g[0], -g[1]];
        }
        let dir = cap(dir, opts.max_step);
        let Some((x_new, f_new)) = backtrack(&mut eval, &project, x, fx, &g, dir)? else {
            terminated = true;
            break;
        };
        let g_new = grad(x_new)?;
        let s = [x_new[0] - x[0], x_new[1] - x[1]];
        let y = [g_new[0] - g[0], g_new[1] - g[1]];
        x = x_new;
        fx = f_new;
        g = g_new;
        if norm(&s) < opts.x_tol {
            terminated = true;
            break;
        }
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) {
            // H+ = (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy = [
                hinv[0][0] * y[0] + hinv[0][1] * y[1],
                hinv[1][0] * y[0] + hinv[1][1] * y[1],
            ];
            let yhy = dot(&y, &hy);
            for i in 0..2 {
                for j in 0..2 {
                    hinv[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        } else {
            hinv = [[1.0, 0.0], [0.0, 1.0]];
        }
    }
    Ok(Outcome {
        x,
        fx,
        iterations,
        evaluations,
        terminated,
    })
}

/// Newton iteration on a finite-difference Hessian of `grad`, falling back to
/// steepest descent whenever the Hessian is not positive definite.
pub fn newton<F, G, P>(f: F, grad: G, project: P, x0: Point, opts: &DescentOptions) -> Result<Outcome>
where
    F: Fn(Point) -> Result<f64>,
    G: Fn(Point) -> Result<Point>,
    P: Fn(Point) -> Point,
{
    let mut evaluations = 0;
    let mut eval = |x: Point| {
        evaluations += 1;
        f(x)
    };
    let mut x = project(x0);
    let mut fx = eval(x)?;
    let mut g = grad(x)?;
    let mut iterations = 0;
    let mut terminated = false;

    while iterations < opts.max_iter {
        if norm(&g) < opts.g_tol {
            terminated = true;
            break;
        }
        iterations += 1;
        let h = fd_hessian(&grad, &project, x, opts.hessian_step)?;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let mut dir = if h[0][0] > 0.0 && det > 0.0 {
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            ]
        } else {
            [-g[0], -g[1]]
        };
        if dot(&dir, &g) >= 0.0 {
            dir = [-g[0], -g[1]];
        }
        let dir = cap(dir, opts.max_step);
        let Some((x_new, f_new)) = backtrack(&mut eval, &project, x, fx, &g, dir)? else {
            terminated = true;
            break;
        };
        let step = dist(&x_new, &x);
        x = x_new;
        fx = f_new;
        g = grad(x)?;
        if step < opts.x_tol {
            terminated = true;
            break;
        }
    }
    Ok(Outcome {
        x,
        fx,
        iterations,
        evaluations,
        terminated,
    })
}

/// Symmetrized central-difference Jacobian of `grad`.
fn fd_hessian<G, P>(grad: &G, project: &P, x: Point, step: f64) -> Result<[[f64; 2]; 2]>
where
    G: Fn(Point) -> Result<Point>,
    P: Fn(Point) -> Point,
{
    let mut h = [[0.0; 2]; 2];
    for j in 0..2 {
        let mut plus = x;
        plus[j] += step;
        let mut minus = x;
        minus[j] -= step;
        let (plus, minus) = (project(plus), project(minus));
        let width = plus[j] - minus[j];
        let (gp, gm) = (grad(plus)?, grad(minus)?);
        for i in 0..2 {
            h[i][j] = (gp[i] - gm[i]) / width;
        }
    }
    let off = 0.5 * (h[0][1] + h[1][0]);
    h[0][1] = off;
    h[1][0] = off;
    Ok(h)
}
