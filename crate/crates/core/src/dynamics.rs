//! Reduced brachistochrone dynamics in scaled time.
//!
//! With all phases constant, the complex equations of motion for the pulses,
//! the off-diagonal Lagrange multipliers and the four state amplitudes reduce
//! to a closed real system for their moduli. Time is measured in units of
//! `1/|λ_Wr(0)|`, so the costate vector always has unit norm.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{ensure_finite, QbError, Result};
use crate::export::write_row;
use crate::interp::{bracket, hermite};
use crate::shooting::InitialPoint;

/// Number of real unknowns in the reduced system.
pub const STATE_DIM: usize = 10;

/// Default fixed RK4 step in scaled time.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Tolerated undershoot below zero for a modulus.
pub const TOL_NEG: f64 = 1e-9;

/// Tolerance on the state normalization.
pub const TOL_NORM: f64 = 1e-8;

/// CSV header for trajectory export.
pub const TRAJECTORY_CSV_HEADER: &str = "xi,u1,u2,u3,w_wr,w_gr,w_gwp,psi_g,psi_w,psi_wp,psi_r";

/// The ten scaled moduli evolved in scaled time.
///
/// Fields are stored signed: the integrator never clamps, so a component that
/// overshoots zero shows up as a small negative value. Use [`ScaledState::clamped`]
/// to read physical moduli.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ScaledState {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub w_wr: f64,
    pub w_gr: f64,
    pub w_gwp: f64,
    pub psi_g: f64,
    pub psi_w: f64,
    pub psi_wp: f64,
    pub psi_r: f64,
}

impl ScaledState {
    /// Initial conditions at `ξ = 0` for the polar parametrization `x0`:
    /// pulses `(u cos φ_u, u sin φ_u, 0)`, costate `(1, 0, 0)` and the system in `|W⟩`.
    pub fn initial(x0: InitialPoint) -> Self {
        let (s, c) = x0.phi_u.sin_cos();
        Self {
            u1: x0.u * c,
            u2: x0.u * s,
            w_wr: 1.0,
            psi_w: 1.0,
            ..Self::default()
        }
    }

    pub fn from_array(a: [f64; STATE_DIM]) -> Self {
        let [u1, u2, u3, w_wr, w_gr, w_gwp, psi_g, psi_w, psi_wp, psi_r] = a;
        Self {
            u1,
            u2,
            u3,
            w_wr,
            w_gr,
            w_gwp,
            psi_g,
            psi_w,
            psi_wp,
            psi_r,
        }
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.u1, self.u2, self.u3, self.w_wr, self.w_gr, self.w_gwp, self.psi_g, self.psi_w,
            self.psi_wp, self.psi_r,
        ]
    }

    pub fn pulses(&self) -> [f64; 3] {
        [self.u1, self.u2, self.u3]
    }

    /// Costate moduli in the order `(w_Wr, w_gr, w_gW′)`.
    pub fn costate(&self) -> [f64; 3] {
        [self.w_wr, self.w_gr, self.w_gwp]
    }

    /// State moduli in basis order `(ggg, W, W′, rrr)`.
    pub fn amplitudes(&self) -> [f64; 4] {
        [self.psi_g, self.psi_w, self.psi_wp, self.psi_r]
    }

    /// `u₁² + u₂² + u₃²`, the scaled pulse power.
    pub fn pulse_power(&self) -> f64 {
        self.u1 * self.u1 + self.u2 * self.u2 + self.u3 * self.u3
    }

    /// `w_Wr² + w_gr² + w_gW′²`, the scaled multiplier power.
    pub fn costate_power(&self) -> f64 {
        self.w_wr * self.w_wr + self.w_gr * self.w_gr + self.w_gwp * self.w_gwp
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes().iter().map(|a| a * a).sum()
    }

    pub fn min_component(&self) -> f64 {
        self.to_array().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Copy with every field clamped at zero from below.
    pub fn clamped(&self) -> Self {
        Self::from_array(self.to_array().map(|v| v.max(0.0)))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Derivatives `(du₁, du₂, du₃, dw_Wr, dw_gr, dw_gW′)` of the pulse and costate moduli.
pub fn rhs_costate(s: &ScaledState) -> Result<[f64; 6]> {
    ensure_finite(&s.to_array(), "scaled state")?;
    let d = rhs(&s.to_array());
    Ok([d[0], d[1], d[2], d[3], d[4], d[5]])
}

/// Derivatives `(d|ψ_g|, d|ψ_W|, d|ψ_W′|, d|ψ_r|)` of the state moduli.
pub fn rhs_state(s: &ScaledState) -> Result<[f64; 4]> {
    ensure_finite(&s.to_array(), "scaled state")?;
    let d = rhs(&s.to_array());
    Ok([d[6], d[7], d[8], d[9]])
}

#[inline]
pub(crate) fn rhs(y: &[f64; STATE_DIM]) -> [f64; STATE_DIM] {
    let [u1, u2, u3, w_wr, w_gr, w_gwp, pg, pw, pwp, pr] = *y;
    [
        -u2 * w_gwp,
        u1 * w_gwp - u3 * w_wr,
        u2 * w_wr,
        -u1 * w_gr,
        u1 * w_wr - u3 * w_gwp,
        u3 * w_gr,
        u1 * pw,
        -u1 * pg - u2 * pwp,
        u2 * pw - u3 * pr,
        u3 * pwp,
    ]
}

/// Uniform grid `0 = ξ₀ < … < ξ_N = xi_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiGrid {
    xi_max: f64,
    n_steps: usize,
}

impl XiGrid {
    pub fn new(xi_max: f64, n_steps: usize) -> Result<Self> {
        if !(xi_max.is_finite() && xi_max > 0.0) {
            return Err(QbError::Domain {
                what: "xi_max",
                value: xi_max,
                domain: "(0, inf)",
            });
        }
        if n_steps == 0 {
            return Err(QbError::InvalidArgument("n_steps must be positive".into()));
        }
        Ok(Self { xi_max, n_steps })
    }

    /// Grid whose spacing does not exceed `step`.
    pub fn with_step(xi_max: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(QbError::Domain {
                what: "step",
                value: step,
                domain: "(0, inf)",
            });
        }
        let n = (xi_max / step - 1e-9).ceil().max(1.0) as usize;
        Self::new(xi_max, n)
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step(&self) -> f64 {
        self.xi_max / self.n_steps as f64
    }

    /// The `i`-th node; the last node is exactly `xi_max`.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.xi_max
        } else {
            i as f64 * self.xi_max / self.n_steps as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.node(i)).collect()
    }
}

/// Integration scheme for the reduced system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Integrator {
    /// Classical fixed-step fourth-order Runge-Kutta on the grid spacing.
    #[default]
    Rk4,
    /// Dormand-Prince 5(4) with step control, landing on every grid node.
    Adaptive { rtol: f64, atol: f64 },
}

impl Integrator {
    pub fn adaptive() -> Self {
        Integrator::Adaptive {
            rtol: 1e-10,
            atol: 1e-10,
        }
    }
}

/// Densely stored solution of the reduced system on an [`XiGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: XiGrid,
    nodes: Vec<f64>,
    states: Vec<[f64; STATE_DIM]>,
    derivs: Vec<[f64; STATE_DIM]>,
}

/// Largest deviations of the conserved quantities along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantReport {
    pub pulse_power_drift: f64,
    pub costate_power_drift: f64,
    pub norm_drift: f64,
    pub min_component: f64,
}

impl InvariantReport {
    /// Conservation laws within `tol` and no modulus below `-tol_neg`.
    pub fn holds(&self, tol: f64, tol_neg: f64) -> bool {
        self.pulse_power_drift < tol
            && self.costate_power_drift < tol
            && self.norm_drift < tol
            && self.min_component >= -tol_neg
    }
}

impl Trajectory {
    pub fn grid(&self) -> &XiGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn xi(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn state(&self, i: usize) -> ScaledState {
        ScaledState::from_array(self.states[i])
    }

    pub fn derivative(&self, i: usize) -> [f64; STATE_DIM] {
        self.derivs[i]
    }

    pub fn first(&self) -> ScaledState {
        self.state(0)
    }

    pub fn last(&self) -> ScaledState {
        self.state(self.len() - 1)
    }

    pub fn states(&self) -> impl Iterator<Item = ScaledState> + '_ {
        self.states.iter().map(|a| ScaledState::from_array(*a))
    }

    /// State at arbitrary `xi` by cubic Hermite interpolation using the stored right-hand sides.
    pub fn interpolate(&self, xi: f64) -> Result<ScaledState> {
        if !(0.0..=self.grid.xi_max).contains(&xi) {
            return Err(QbError::Domain {
                what: "xi",
                value: xi,
                domain: "[0, xi_max]",
            });
        }
        Ok(ScaledState::from_array(self.interpolate_raw(xi)))
    }

    pub(crate) fn interpolate_raw(&self, xi: f64) -> [f64; STATE_DIM] {
        let i = bracket(&self.nodes, xi);
        hermite(
            self.nodes[i],
            self.nodes[i + 1],
            &self.states[i],
            &self.derivs[i],
            &self.states[i + 1],
            &self.derivs[i + 1],
            xi,
        )
    }

    /// Conservation diagnostics over nodes with `ξ ≤ upto`.
    pub fn check_invariants(&self, upto: f64) -> InvariantReport {
        let s0 = self.first();
        let (p0, c0) = (s0.pulse_power(), s0.costate_power());
        let mut report = InvariantReport {
            pulse_power_drift: 0.0,
            costate_power_drift: 0.0,
            norm_drift: 0.0,
            min_component: f64::INFINITY,
        };
        for (xi, s) in self.nodes.iter().zip(self.states()) {
            if *xi > upto {
                break;
            }
            report.pulse_power_drift = report.pulse_power_drift.max((s.pulse_power() - p0).abs());
            report.costate_power_drift =
                report.costate_power_drift.max((s.costate_power() - c0).abs());
            report.norm_drift = report.norm_drift.max((s.norm_sq() - 1.0).abs());
            report.min_component = report.min_component.min(s.min_component());
        }
        report
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
        let mut row = [0.0; STATE_DIM + 1];
        for (xi, s) in self.nodes.iter().zip(&self.states) {
            row[0] = *xi;
            row[1..].copy_from_slice(s);
            write_row(out, &row)?;
        }
        Ok(())
    }
}

/// Integrates from the polar initial point `x0` with fixed-step RK4.
pub fn integrate(x0: InitialPoint, grid: &XiGrid) -> Trajectory {
    rk4(ScaledState::initial(x0).to_array(), grid)
}

/// Integrates from `x0` with the chosen scheme.
pub fn integrate_with(x0: InitialPoint, grid: &XiGrid, integrator: Integrator) -> Result<Trajectory> {
    integrate_from(ScaledState::initial(x0), grid, integrator)
}

/// Integrates an arbitrary initial state.
pub fn integrate_from(
    initial: ScaledState,
    grid: &XiGrid,
    integrator: Integrator,
) -> Result<Trajectory> {
    ensure_finite(&initial.to_array(), "initial state")?;
    match integrator {
        Integrator::Rk4 => Ok(rk4(initial.to_array(), grid)),
        Integrator::Adaptive { rtol, atol } => dopri(initial.to_array(), grid, rtol, atol),
    }
}

#[inline]
fn axpy(y: &[f64; STATE_DIM], a: f64, k: &[f64; STATE_DIM]) -> [f64; STATE_DIM] {
    std::array::from_fn(|i| y[i] + a * k[i])
}

#[inline]
pub(crate) fn rk4_step(y: &[f64; STATE_DIM], k1: &[f64; STATE_DIM], h: f64) -> [f64; STATE_DIM] {
    let k2 = rhs(&axpy(y, 0.5 * h, k1));
    let k3 = rhs(&axpy(y, 0.5 * h, &k2));
    let k4 = rhs(&axpy(y, h, &k3));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn rk4(y0: [f64; STATE_DIM], grid: &XiGrid) -> Trajectory {
    let nodes = grid.values();
    let mut states = Vec::with_capacity(nodes.len());
    let mut derivs = Vec::with_capacity(nodes.len());
    let mut y = y0;
    let mut k = rhs(&y);
    states.push(y);
    derivs.push(k);
    for w in nodes.windows(2) {
        y = rk4_step(&y, &k, w[1] - w[0]);
        k = rhs(&y);
        states.push(y);
        derivs.push(k);
    }
    Trajectory {
        grid: *grid,
        nodes,
        states,
        derivs,
    }
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const MAX_REJECTIONS: usize = 100_000;
const MIN_STEP: f64 = 1e-14;

fn dopri(y0: [f64; STATE_DIM], grid: &XiGrid, rtol: f64, atol: f64) -> Result<Trajectory> {
    debug_assert_eq!(DP_C.len(), DP_A.len());
    if !(rtol > 0.0 && atol > 0.0) {
        return Err(QbError::InvalidArgument("tolerances must be positive".into()));
    }
    let nodes = grid.values();
    let mut states = Vec::with_capacity(nodes.len());
    let mut derivs = Vec::with_capacity(nodes.len());
    let mut y = y0;
    let mut xi = 0.0;
    let mut h = grid.step().min(1e-2);
    let mut rejections = 0;
    states.push(y);
    derivs.push(rhs(&y));

    for &target in &nodes[1..] {
        while xi < target {
            let step = h.min(target - xi);
            let mut k = [[0.0; STATE_DIM]; 7];
            k[0] = rhs(&y);
            for s in 1..7 {
                let ys: [f64; STATE_DIM] = std::array::from_fn(|i| {
                    y[i] + step * (0..s).map(|j| DP_A[s][j] * k[j][i]).sum::<f64>()
                });
                k[s] = rhs(&ys);
            }
            let y5: [f64; STATE_DIM] =
                std::array::from_fn(|i| y[i] + step * (0..7).map(|j| DP_B5[j] * k[j][i]).sum::<f64>());
            let err = (0..STATE_DIM)
                .map(|i| {
                    let e = step * (0..7).map(|j| (DP_B5[j] - DP_B4[j]) * k[j][i]).sum::<f64>();
                    e.abs() / (atol + rtol * y[i].abs().max(y5[i].abs()))
                })
                .fold(0.0, f64::max);
            if !err.is_finite() {
                return Err(QbError::Integration {
                    xi,
                    reason: "non-finite error estimate",
                });
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                xi = if step == target - xi { target } else { xi + step };
                y = y5;
                // Only grow the proposal when the full step was taken.
                if step == h {
                    h *= factor;
                }
            } else {
                rejections += 1;
                h = step * factor;
                if rejections > MAX_REJECTIONS {
                    return Err(QbError::Integration {
                        xi,
                        reason: "step rejections exhausted",
                    });
                }
                if h < MIN_STEP {
                    return Err(QbError::Integration {
                        xi,
                        reason: "step size underflow",
                    });
                }
            }
        }
        states.push(y);
        derivs.push(rhs(&y));
    }
    Ok(Trajectory {
        grid: *grid,
        nodes,
        states,
        derivs,
    })
}
