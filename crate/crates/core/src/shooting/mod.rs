//! Shooting solver for the two-point boundary value problem.
//!
//! Every unknown initial value is fixed by a point `(u, φ_u)` of the unit disc.
//! For each such point the reduced system is integrated up to `ξ_max`, and the
//! error `D` is the smallest Euclidean norm of the final-condition residuals over
//! that window. Minimizing `D` over the disc yields the optimal initial point and
//! the scaled conversion time `Ξ` at which the minimum occurs.

mod minimizers;

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use minimizers::{DescentOptions, NelderMeadOptions, Outcome};

use crate::dynamics::{integrate_with, Integrator, ScaledState, Trajectory, XiGrid, DEFAULT_STEP};
use crate::error::{QbError, Result};
use crate::export::write_row;
use crate::interp::hermite;
use crate::phases::conversion_time;

/// Error level below which a conversion counts as achieved (0.1 %).
pub const CONVERGENCE_THRESHOLD: f64 = 1e-3;

/// Forward-difference step for the gradient of `D`.
pub const FD_EPS: f64 = 1e-6;

/// Tolerance of the golden-section refinement in `ξ`.
pub const XI_TOL: f64 = 1e-8;

pub const DEFAULT_MAX_ITER: usize = 500;

pub const DEFAULT_XI_MAX: f64 = 5.0;

pub const SCAN_CSV_HEADER: &str = "u,phi_u,D,xi_star";

pub const BASIN_CSV_HEADER: &str = "u0,phi_u0,converged,u_star,phi_u_star,D,xi_qb";

/// Polar coordinates of the initial pulse amplitudes on the unit disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialPoint {
    pub u: f64,
    pub phi_u: f64,
}

impl InitialPoint {
    /// Checked constructor: `u ∈ [0, 1]`, `φ_u ∈ [0, 2π]`.
    pub fn new(u: f64, phi_u: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&u) {
            return Err(QbError::Domain {
                what: "u",
                value: u,
                domain: "[0, 1]",
            });
        }
        if !(0.0..=TAU).contains(&phi_u) {
            return Err(QbError::Domain {
                what: "phi_u",
                value: phi_u,
                domain: "[0, 2pi]",
            });
        }
        Ok(Self { u, phi_u })
    }

    /// Maps an arbitrary point into the domain: `u` is reflected at 0 and 1,
    /// `φ_u` is wrapped modulo 2π.
    pub fn wrapped(u: f64, phi_u: f64) -> Self {
        let mut u = u.rem_euclid(2.0);
        if u > 1.0 {
            u = 2.0 - u;
        }
        Self {
            u,
            phi_u: phi_u.rem_euclid(TAU),
        }
    }

    /// The mirror point `(u, 2π − φ_u)`.
    pub fn mirror(&self) -> Self {
        Self {
            u: self.u,
            phi_u: (TAU - self.phi_u).rem_euclid(TAU),
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.u, self.phi_u]
    }
}

/// Local minimization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    NelderMead,
    #[serde(rename = "BFGS")]
    Bfgs,
    Newton,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::NelderMead, Method::Bfgs, Method::Newton];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::NelderMead => "nelder-mead",
            Method::Bfgs => "bfgs",
            Method::Newton => "newton",
        })
    }
}

impl FromStr for Method {
    type Err = QbError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nelder-mead" | "neldermead" | "nm" => Ok(Method::NelderMead),
            "bfgs" => Ok(Method::Bfgs),
            "newton" => Ok(Method::Newton),
            other => Err(QbError::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// Error `D` of one initial point together with where it is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEval {
    pub d: f64,
    pub xi_star: f64,
    pub deviation: [f64; 6],
}

/// Outcome of a local minimization of `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingResult {
    pub x_star: InitialPoint,
    pub xi_qb: f64,
    pub d_error: f64,
    pub converged: bool,
    pub method: Method,
    pub iterations: usize,
    pub evaluations: usize,
}

impl ShootingResult {
    /// Conversion time `u²Ξ²` in units of `ħ/E` for pulse energy `energy`.
    pub fn t_qb(&self, energy: f64) -> f64 {
        conversion_time(self.x_star.u, self.xi_qb, energy)
    }

    pub fn report(&self, energy: f64) -> ShootingReport {
        ShootingReport {
            u: self.x_star.u,
            phi_u: self.x_star.phi_u,
            xi_qb: self.xi_qb,
            d_error: self.d_error,
            method: self.method,
            converged: self.converged,
            t_qb_hbar_over_e: self.t_qb(energy),
        }
    }
}

/// JSON shape of a [`ShootingResult`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingReport {
    pub u: f64,
    pub phi_u: f64,
    pub xi_qb: f64,
    pub d_error: f64,
    pub method: Method,
    pub converged: bool,
    #[serde(rename = "t_qb_hbar_over_E")]
    pub t_qb_hbar_over_e: f64,
}

/// Final-condition residuals of a single state:
/// `(u₂, u₁ − w_Wr, u₃ − w_gW′, |ψ_W|, |ψ_W′|, |ψ_g| − |ψ_r|)`.
pub fn deviation_of(s: &ScaledState) -> [f64; 6] {
    [
        s.u2,
        s.u1 - s.w_wr,
        s.u3 - s.w_gwp,
        s.psi_w,
        s.psi_wp,
        s.psi_g - s.psi_r,
    ]
}

fn deviation_raw(y: &[f64; 10]) -> [f64; 6] {
    [y[1], y[0] - y[3], y[2] - y[5], y[7], y[8], y[6] - y[9]]
}

fn norm6(d: &[f64; 6]) -> f64 {
    d.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Residual vector of `traj` at scaled time `xi`.
pub fn deviation_vector(traj: &Trajectory, xi: f64) -> Result<[f64; 6]> {
    Ok(deviation_of(&traj.interpolate(xi)?))
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Smallest residual norm over the whole trajectory.
///
/// A pass over the stored nodes picks the best node (earliest on ties); golden
/// section on the Hermite interpolant over the two adjacent cells then refines
/// `ξ`. The refined value is kept only if it improves on the node value.
pub fn min_deviation(traj: &Trajectory, xi_tol: f64) -> ErrorEval {
    let mut best = 0;
    let mut best_norm = f64::INFINITY;
    for i in 0..traj.len() {
        let n = norm6(&deviation_of(&traj.state(i)));
        if n < best_norm {
            best_norm = n;
            best = i;
        }
    }
    let node = ErrorEval {
        d: best_norm,
        xi_star: traj.xi(best),
        deviation: deviation_of(&traj.state(best)),
    };

    let lo = traj.xi(best.saturating_sub(1));
    let hi = traj.xi((best + 1).min(traj.len() - 1));
    if hi <= lo {
        return node;
    }
    let i_left = best.saturating_sub(1);
    let eval = |xi: f64| {
        // Evaluate on the cell that contains `xi` among the two bracketing cells.
        let i = if xi < traj.xi(best) || best + 1 >= traj.len() {
            i_left
        } else {
            best
        };
        let y = hermite(
            traj.xi(i),
            traj.xi(i + 1),
            &traj.state(i).to_array(),
            &traj.derivative(i),
            &traj.state(i + 1).to_array(),
            &traj.derivative(i + 1),
            xi,
        );
        let d = deviation_raw(&y);
        (norm6(&d), d)
    };

    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c).0;
    let mut fd = eval(d).0;
    while (b - a).abs() > xi_tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d).0;
        }
    }
    let xi = 0.5 * (a + b);
    let (n, dev) = eval(xi);
    if n < node.d {
        ErrorEval {
            d: n,
            xi_star: xi,
            deviation: dev,
        }
    } else {
        node
    }
}

/// Gradient of `‖r(x)‖₂` from forward differences of the residual vector `r`:
/// `∂ⱼ‖r‖ = r · (r(x + ε eⱼ) − r(x)) / (ε ‖r‖)`.
///
/// Where `x + ε eⱼ` leaves `bounds` the backward difference is used instead.
pub fn norm_gradient<const N: usize, F>(
    residual: F,
    x: [f64; 2],
    eps: f64,
    bounds: [(f64, f64); 2],
) -> Result<[f64; 2]>
where
    F: Fn([f64; 2]) -> Result<[f64; N]>,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(QbError::Domain {
            what: "eps",
            value: eps,
            domain: "(0, inf)",
        });
    }
    let r0 = residual(x)?;
    let n0 = r0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n0 == 0.0 {
        return Ok([0.0, 0.0]);
    }
    let mut grad = [0.0; 2];
    for j in 0..2 {
        let mut probe = x;
        let forward = x[j] + eps <= bounds[j].1;
        probe[j] += if forward { eps } else { -eps };
        let rj = residual(probe)?;
        let sign = if forward { 1.0 } else { -1.0 };
        grad[j] = (0..N)
            .map(|k| r0[k] * sign * (rj[k] - r0[k]) / eps)
            .sum::<f64>()
            / n0;
    }
    Ok(grad)
}

/// Solver settings shared by every shooting operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shooter {
    pub xi_max: f64,
    pub step: f64,
    pub integrator: Integrator,
    pub xi_tol: f64,
    pub eps: f64,
    pub threshold: f64,
    pub max_iter: usize,
}

impl Default for Shooter {
    fn default() -> Self {
        Self {
            xi_max: DEFAULT_XI_MAX,
            step: DEFAULT_STEP,
            integrator: Integrator::Rk4,
            xi_tol: XI_TOL,
            eps: FD_EPS,
            threshold: CONVERGENCE_THRESHOLD,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

const DISC: [(f64, f64); 2] = [(0.0, 1.0), (0.0, TAU)];

fn project(p: [f64; 2]) -> [f64; 2] {
    InitialPoint::wrapped(p[0], p[1]).as_array()
}

impl Shooter {
    pub fn new(xi_max: f64) -> Result<Self> {
        XiGrid::with_step(xi_max, DEFAULT_STEP)?;
        Ok(Self {
            xi_max,
            ..Self::default()
        })
    }

    pub fn with_xi_max(&self, xi_max: f64) -> Self {
        Self { xi_max, ..*self }
    }

    pub fn grid(&self) -> Result<XiGrid> {
        XiGrid::with_step(self.xi_max, self.step)
    }

    pub fn trajectory(&self, x0: InitialPoint) -> Result<Trajectory> {
        integrate_with(x0, &self.grid()?, self.integrator)
    }

    /// `D(x0) = min over ξ ∈ [0, ξ_max] of ‖d(ξ)‖₂` and the minimizing `ξ`.
    pub fn error_d(&self, x0: InitialPoint) -> Result<ErrorEval> {
        Ok(min_deviation(&self.trajectory(x0)?, self.xi_tol))
    }

    fn error_at(&self, p: [f64; 2]) -> Result<ErrorEval> {
        self.error_d(InitialPoint::wrapped(p[0], p[1]))
    }

    /// Finite-difference gradient `(∂D/∂u, ∂D/∂φ_u)` with step `eps`.
    pub fn grad_d(&self, x0: InitialPoint, eps: f64) -> Result<[f64; 2]> {
        norm_gradient(|p| Ok(self.error_at(p)?.deviation), x0.as_array(), eps, DISC)
    }

    /// Local minimization of `D` from `x_init`.
    pub fn minimize(&self, x_init: InitialPoint, method: Method) -> Result<ShootingResult> {
        let f = |p: [f64; 2]| Ok(self.error_at(p)?.d);
        let g = |p: [f64; 2]| {
            norm_gradient(|q| Ok(self.error_at(q)?.deviation), p, self.eps, DISC)
        };
        let x0 = x_init.as_array();
        let outcome = match method {
            Method::NelderMead => {
                let opts = NelderMeadOptions {
                    max_iter: self.max_iter,
                    ..Default::default()
                };
                minimizers::nelder_mead(f, project, x0, &opts)?
            }
            Method::Bfgs => {
                let opts = DescentOptions {
                    max_iter: self.max_iter,
                    ..Default::default()
                };
                minimizers::bfgs(f, g, project, x0, &opts)?
            }
            Method::Newton => {
                let opts = DescentOptions {
                    max_iter: self.max_iter,
                    ..Default::default()
                };
                minimizers::newton(f, g, project, x0, &opts)?
            }
        };
        let x_star = InitialPoint::wrapped(outcome.x[0], outcome.x[1]);
        let eval = self.error_d(x_star)?;
        Ok(ShootingResult {
            x_star,
            xi_qb: eval.xi_star,
            d_error: eval.d,
            converged: outcome.terminated && eval.d < self.threshold,
            method,
            iterations: outcome.iterations,
            evaluations: outcome.evaluations,
        })
    }

    /// Local minimizations from the centres of an `n × n` grid of cells over the disc,
    /// in row-major order of `(u, φ_u)`.
    pub fn multistart(&self, n: usize, method: Method) -> Result<Vec<ShootingResult>> {
        if n == 0 {
            return Err(QbError::InvalidArgument("multistart grid must be non-empty".into()));
        }
        (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let u = (i as f64 + 0.5) / n as f64;
                let phi = TAU * (j as f64 + 0.5) / n as f64;
                self.minimize(InitialPoint::wrapped(u, phi), method)
            })
            .collect()
    }

    /// Multistart search returning the fastest converged conversion, or the
    /// lowest-error result when nothing converged.
    pub fn solve(&self, n: usize, method: Method) -> Result<ShootingResult> {
        let results = self.multistart(n, method)?;
        Ok(pick_solution(&results).expect("multistart returns at least one result"))
    }

    /// Samples `D` on `u = i/n`, `φ_u = 2πj/n`, `i, j = 0..=n`. With `minimize`,
    /// a local search is also run from every sample to record its basin.
    pub fn grid_scan(&self, n: usize, minimize: Option<Method>) -> Result<ScanMap> {
        if n < 2 {
            return Err(QbError::InvalidArgument("scan resolution must be at least 2".into()));
        }
        let side = n + 1;
        let points = (0..side * side)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / side, k % side);
                let x = InitialPoint::new(i as f64 / n as f64, TAU * j as f64 / n as f64)?;
                let eval = self.error_d(x)?;
                let basin = match minimize {
                    Some(method) => Some(self.minimize(x, method)?),
                    None => None,
                };
                Ok(ScanPoint {
                    x,
                    d: eval.d,
                    xi_star: eval.xi_star,
                    basin,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScanMap {
            n,
            xi_max: self.xi_max,
            points,
        })
    }
}

/// Chooses the earliest converged conversion among `results`.
///
/// Results within 10⁻³ of the earliest `Ξ` are treated as one solution family;
/// within it the representative with `φ_u ≤ π` and the smallest error wins. When
/// nothing converged, the lowest-error result is returned.
pub fn pick_solution(results: &[ShootingResult]) -> Option<ShootingResult> {
    let converged: Vec<_> = results.iter().filter(|r| r.converged).collect();
    if converged.is_empty() {
        return results
            .iter()
            .min_by(|a, b| a.d_error.total_cmp(&b.d_error))
            .copied();
    }
    let earliest = converged
        .iter()
        .map(|r| r.xi_qb)
        .fold(f64::INFINITY, f64::min);
    let family: Vec<_> = converged
        .into_iter()
        .filter(|r| r.xi_qb <= earliest + 1e-3)
        .collect();
    let upper: Vec<_> = family
        .iter()
        .filter(|r| r.x_star.phi_u <= PI)
        .copied()
        .collect();
    let pool = if upper.is_empty() { family } else { upper };
    pool.into_iter()
        .min_by(|a, b| a.d_error.total_cmp(&b.d_error))
        .copied()
}

/// One sample of a [`ScanMap`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub x: InitialPoint,
    pub d: f64,
    pub xi_star: f64,
    /// Local minimization started here, when requested.
    pub basin: Option<ShootingResult>,
}

/// Error landscape over the initial-value disc.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanMap {
    pub n: usize,
    pub xi_max: f64,
    pub points: Vec<ScanPoint>,
}

impl ScanMap {
    /// Sample with the smallest `D` (first in scan order on ties).
    pub fn argmin(&self) -> &ScanPoint {
        let mut best = &self.points[0];
        for p in &self.points[1..] {
            if p.d < best.d {
                best = p;
            }
        }
        best
    }

    /// Sample at grid indices `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> &ScanPoint {
        &self.points[i * (self.n + 1) + j]
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{SCAN_CSV_HEADER}")?;
        for p in &self.points {
            write_row(out, &[p.x.u, p.x.phi_u, p.d, p.xi_star])?;
        }
        Ok(())
    }

    /// Basin membership of each start point; only samples with a local search are written.
    pub fn write_basins_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{BASIN_CSV_HEADER}")?;
        for p in &self.points {
            if let Some(b) = &p.basin {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    crate::export::fmt_full(p.x.u),
                    crate::export::fmt_full(p.x.phi_u),
                    u8::from(b.converged),
                    crate::export::fmt_full(b.x_star.u),
                    crate::export::fmt_full(b.x_star.phi_u),
                    crate::export::fmt_full(b.d_error),
                    crate::export::fmt_full(b.xi_qb),
                )?;
            }
        }
        Ok(())
    }
}

/// Row of the `ξ_max` verification sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiMaxRow {
    pub xi_max: f64,
    /// Smallest `D` found over the disc.
    pub best_d: f64,
    /// Earliest converged conversion time, or the `ξ*` of the best point when
    /// no start converged.
    pub xi: f64,
    pub x: InitialPoint,
    pub converged: bool,
}

/// For every `ξ_max`, multistart-minimizes `D` and records the best error and
/// the conversion time.
pub fn verify_xi_max(
    base: &Shooter,
    xi_values: &[f64],
    starts: usize,
    method: Method,
) -> Result<Vec<XiMaxRow>> {
    if xi_values.is_empty() {
        return Err(QbError::InvalidArgument("no xi_max values given".into()));
    }
    xi_values
        .iter()
        .map(|&xi_max| {
            if !(xi_max.is_finite() && xi_max > 0.0) {
                return Err(QbError::Domain {
                    what: "xi_max",
                    value: xi_max,
                    domain: "(0, inf)",
                });
            }
            let shooter = base.with_xi_max(xi_max);
            let results = shooter.multistart(starts, method)?;
            let best_d = results
                .iter()
                .map(|r| r.d_error)
                .fold(f64::INFINITY, f64::min);
            let pick = pick_solution(&results).expect("non-empty multistart");
            Ok(XiMaxRow {
                xi_max,
                best_d,
                xi: pick.xi_qb,
                x: pick.x_star,
                converged: pick.converged,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_point_domain() {
        assert!(InitialPoint::new(0.5, 1.0).is_ok());
        assert!(InitialPoint::new(1.0, TAU).is_ok());
        assert!(InitialPoint::new(-0.1, 1.0).is_err());
        assert!(InitialPoint::new(1.1, 1.0).is_err());
        assert!(InitialPoint::new(0.5, -0.1).is_err());
        assert!(InitialPoint::new(0.5, 7.0).is_err());
    }

    #[test]
    fn wrapping_reflects_and_wraps() {
        let p = InitialPoint::wrapped(1.1, TAU + 0.5);
        assert!((p.u - 0.9).abs() < 1e-15);
        assert!((p.phi_u - 0.5).abs() < 1e-15);
        let p = InitialPoint::wrapped(-0.2, -0.5);
        assert!((p.u - 0.2).abs() < 1e-15);
        assert!((p.phi_u - (TAU - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("BFGS".parse::<Method>().unwrap(), Method::Bfgs);
        assert_eq!("nelder-mead".parse::<Method>().unwrap(), Method::NelderMead);
        assert_eq!("newton".parse::<Method>().unwrap(), Method::Newton);
        assert!("simplex".parse::<Method>().is_err());
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
    }

    #[test]
    fn deviation_at_start() {
        let s = Shooter::default().with_xi_max(1.0);
        let x0 = InitialPoint::new(0.6, 0.7).unwrap();
        let traj = s.trajectory(x0).unwrap();
        let d = deviation_vector(&traj, 0.0).unwrap();
        let expect = [0.6 * 0.7f64.sin(), 0.6 * 0.7f64.cos() - 1.0, 0.0, 1.0, 0.0, 0.0];
        for (a, b) in d.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(deviation_vector(&traj, 1.5).is_err());
    }

    #[test]
    fn undriven_error_is_sqrt_two_at_zero() {
        let s = Shooter::default().with_xi_max(2.0);
        let e = s.error_d(InitialPoint::new(0.0, 0.0).unwrap()).unwrap();
        // d = (0, -1, 0, 1, 0, 0) at every ξ; ties resolve to the earliest node.
        assert!((e.d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(e.xi_star, 0.0);
    }

    #[test]
    fn refinement_never_increases_the_node_minimum() {
        let s = Shooter::default().with_xi_max(3.0);
        let traj = s.trajectory(InitialPoint::new(0.93, 1.0).unwrap()).unwrap();
        let refined = min_deviation(&traj, XI_TOL);
        let node_best = (0..traj.len())
            .map(|i| norm6(&deviation_of(&traj.state(i))))
            .fold(f64::INFINITY, f64::min);
        assert!(refined.d <= node_best);
    }

    #[test]
    fn norm_gradient_of_linear_residual() {
        // r(x) = A x + b has ‖r‖ gradient Aᵀ r / ‖r‖.
        let a = [[1.0, 2.0], [-0.5, 0.3], [0.7, -1.1]];
        let b = [0.2, -0.4, 0.9];
        let r = |x: [f64; 2]| -> Result<[f64; 3]> {
            Ok(std::array::from_fn(|k| a[k][0] * x[0] + a[k][1] * x[1] + b[k]))
        };
        let x = [0.3, 0.8];
        let r0 = r(x).unwrap();
        let n0 = norm6(&[r0[0], r0[1], r0[2], 0.0, 0.0, 0.0]);
        let exact: [f64; 2] =
            std::array::from_fn(|j| (0..3).map(|k| a[k][j] * r0[k]).sum::<f64>() / n0);
        let g = norm_gradient(r, x, 1e-6, [(0.0, 1.0), (0.0, 1.0)]).unwrap();
        for j in 0..2 {
            assert!((g[j] - exact[j]).abs() < 1e-5);
        }
        // Upper bound forces the backward difference in both coordinates.
        let g = norm_gradient(r, [1.0, 1.0], 1e-6, [(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let r1 = r([1.0, 1.0]).unwrap();
        let n1 = norm6(&[r1[0], r1[1], r1[2], 0.0, 0.0, 0.0]);
        for j in 0..2 {
            let e = (0..3).map(|k| a[k][j] * r1[k]).sum::<f64>() / n1;
            assert!((g[j] - e).abs() < 1e-5);
        }
        assert!(norm_gradient(r, x, 0.0, DISC).is_err());
    }

    #[test]
    fn pick_prefers_earliest_converged() {
        let mk = |xi: f64, d: f64, phi: f64, converged: bool| ShootingResult {
            x_star: InitialPoint { u: 0.9, phi_u: phi },
            xi_qb: xi,
            d_error: d,
            converged,
            method: Method::NelderMead,
            iterations: 1,
            evaluations: 1,
        };
        let rs = [
            mk(6.4, 1e-6, 4.0, true),
            mk(2.7236, 3e-4, 5.3, true),
            mk(2.7235, 3.1e-4, 0.97, true),
            mk(1.0, 1e-2, 1.0, false),
        ];
        let p = pick_solution(&rs).unwrap();
        assert_eq!(p.x_star.phi_u, 0.97);
        let none = [mk(2.0, 0.5, 1.0, false), mk(2.0, 0.2, 1.0, false)];
        assert_eq!(pick_solution(&none).unwrap().d_error, 0.2);
    }
}
