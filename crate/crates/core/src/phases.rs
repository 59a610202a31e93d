//! Constant-phase bookkeeping and reconstruction of physical pulses.
//!
//! All pulse, multiplier and amplitude phases are time independent. Two pulse
//! phases and the GHZ phase are free; everything else follows from them. The
//! reduced moduli together with these phases determine the complex Rabi
//! frequencies, and the scaling `ξ = |λ_Wr(0)| t` converts scaled time to
//! physical time in units of `ħ/E` (ħ = 1 throughout).

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{self, Write};

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{Trajectory, STATE_DIM};
use crate::error::{QbError, Result};
use crate::export::write_row;
use crate::shooting::InitialPoint;

/// Ratios `Ω_n / Ω_rn` between the effective couplings and the single-atom
/// Rabi frequencies of the driving lasers: `√3`, `2`, `√3`.
pub const LASER_COUPLING_FACTORS: [f64; 3] = [1.732_050_807_568_877_2, 2.0, 1.732_050_807_568_877_2];

pub const PULSE_CSV_HEADER: &str = "t,abs_om1,arg_om1,abs_om2,arg_om2,abs_om3,arg_om3";

/// Reduces an angle to `(−π, π]`.
pub fn reduce_angle(a: f64) -> f64 {
    // Adding zero turns a negative zero into a positive one.
    let r = a.rem_euclid(TAU) + 0.0;
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// The full set of constant phases. Values are kept unreduced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseSet {
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
    pub phi_wr: f64,
    pub phi_gr: f64,
    pub phi_gwp: f64,
    pub phi_g: f64,
    pub phi_w: f64,
    pub phi_wp: f64,
    pub phi_r: f64,
    pub varphi: f64,
}

/// Derives every constrained phase from the free ones `φ₁`, `φ₃`, the GHZ
/// phase `φ` and the amplitude phase `φ_W`.
pub fn derive_phases(phi1: f64, phi3: f64, varphi: f64, phi_w: f64) -> Result<PhaseSet> {
    crate::error::ensure_finite(&[phi1, phi3, varphi, phi_w], "phases")?;
    Ok(PhaseSet {
        phi1,
        phi3,
        varphi,
        phi_w,
        phi2: -phi1 - phi3 - varphi - FRAC_PI_2,
        phi_wr: -phi1 - varphi,
        phi_gwp: -phi3 - varphi,
        phi_gr: -varphi - FRAC_PI_2,
        phi_g: phi_w + phi1 - FRAC_PI_2,
        phi_wp: phi_w + phi1 + phi3 + varphi,
        phi_r: phi_w + phi1 + varphi - FRAC_PI_2,
    })
}

impl PhaseSet {
    pub fn pulses(&self) -> [f64; 3] {
        [self.phi1, self.phi2, self.phi3]
    }

    /// Multiplier phases `(φ_Wr, φ_gr, φ_gW′)`.
    pub fn costate(&self) -> [f64; 3] {
        [self.phi_wr, self.phi_gr, self.phi_gwp]
    }

    /// Amplitude phases in basis order `(ggg, W, W′, rrr)`.
    pub fn amplitudes(&self) -> [f64; 4] {
        [self.phi_g, self.phi_w, self.phi_wp, self.phi_r]
    }

    /// Copy with every phase reduced to `(−π, π]`, for reporting.
    pub fn reduced(&self) -> Self {
        Self {
            phi1: reduce_angle(self.phi1),
            phi2: reduce_angle(self.phi2),
            phi3: reduce_angle(self.phi3),
            phi_wr: reduce_angle(self.phi_wr),
            phi_gr: reduce_angle(self.phi_gr),
            phi_gwp: reduce_angle(self.phi_gwp),
            phi_g: reduce_angle(self.phi_g),
            phi_w: reduce_angle(self.phi_w),
            phi_wp: reduce_angle(self.phi_wp),
            phi_r: reduce_angle(self.phi_r),
            varphi: reduce_angle(self.varphi),
        }
    }
}

impl Default for PhaseSet {
    fn default() -> Self {
        derive_phases(0.0, 0.0, 0.0, 0.0).expect("finite")
    }
}

/// Minimal conversion time `u² Ξ² ħ/E`.
pub fn conversion_time(u: f64, xi: f64, energy: f64) -> f64 {
    u * u * xi * xi / energy
}

/// Complex Rabi frequencies sampled on a time grid in units of `ħ/E`.
///
/// Each pulse is a signed real amplitude times a constant phase factor. The
/// amplitudes are the reduced moduli rescaled by `|λ_Wr(0)|`; they can dip
/// marginally below zero where a modulus meets its boundary value of zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalPulses {
    pub t: Vec<f64>,
    pub amplitude: Vec<[f64; 3]>,
    /// `d amplitude / dt`, used for Hermite resampling.
    pub slope: Vec<[f64; 3]>,
    pub phases: [f64; 3],
    pub energy: f64,
    pub t_qb: f64,
    /// `|λ_Wr(0)|`, the factor between scaled and physical frequencies.
    pub lambda_wr0: f64,
}

impl PhysicalPulses {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Complex `Ω_n` at node `i`.
    pub fn omega(&self, i: usize) -> [Complex64; 3] {
        std::array::from_fn(|n| Complex64::from_polar(1.0, self.phases[n]) * self.amplitude[i][n])
    }

    /// Modulus and argument of each pulse at node `i`. A negative amplitude is
    /// reported as its absolute value with the argument shifted by π.
    pub fn polar(&self, i: usize) -> [(f64, f64); 3] {
        std::array::from_fn(|n| {
            let a = self.amplitude[i][n];
            let arg = if a < 0.0 {
                self.phases[n] + PI
            } else {
                self.phases[n]
            };
            (a.abs(), reduce_angle(arg))
        })
    }

    /// `∫ Σ|Ω_n|² dt` by the trapezoidal rule.
    pub fn energy_trapezoid(&self) -> f64 {
        let power = |i: usize| self.amplitude[i].iter().map(|a| a * a).sum::<f64>();
        self.t
            .windows(2)
            .enumerate()
            .map(|(i, w)| 0.5 * (w[1] - w[0]) * (power(i) + power(i + 1)))
            .sum()
    }

    /// Recomputes `slope` from the amplitudes with second-order finite differences.
    pub fn refresh_slopes(&mut self) {
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|n| {
                let col: Vec<f64> = self.amplitude.iter().map(|a| a[n]).collect();
                finite_difference(&self.t, &col)
            })
            .collect();
        self.slope = (0..self.t.len())
            .map(|i| [cols[0][i], cols[1][i], cols[2][i]])
            .collect();
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{PULSE_CSV_HEADER}")?;
        for i in 0..self.len() {
            let p = self.polar(i);
            write_row(
                out,
                &[self.t[i], p[0].0, p[0].1, p[1].0, p[1].1, p[2].0, p[2].1],
            )?;
        }
        Ok(())
    }
}

/// Second-order derivative estimate on a possibly non-uniform grid: three-point
/// centred stencil inside, three-point one-sided stencils at both ends.
pub fn finite_difference(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    assert_eq!(n, y.len());
    match n {
        0 => return Vec::new(),
        1 => return vec![0.0],
        2 => {
            let s = (y[1] - y[0]) / (t[1] - t[0]);
            return vec![s, s];
        }
        _ => {}
    }
    let three_point = |i0: usize, at: usize| {
        let (x0, x1, x2) = (t[i0], t[i0 + 1], t[i0 + 2]);
        let x = t[at];
        // Derivative of the quadratic through the three points, evaluated at x.
        y[i0] * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y[i0 + 1] * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y[i0 + 2] * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    (0..n)
        .map(|i| {
            if i == 0 {
                three_point(0, 0)
            } else if i == n - 1 {
                three_point(n - 3, n - 1)
            } else {
                three_point(i - 1, i)
            }
        })
        .collect()
}

/// Converts a converged scaled solution into physical pulses on `[0, T_QB]`.
///
/// Nodes of `traj` below `Ξ` are kept and a final node is interpolated at
/// `ξ = Ξ` exactly. With `T = u²Ξ²/E` and `|λ_Wr(0)| = Ξ/T`, physical time is
/// `t = ξ/|λ_Wr(0)|` and `Ω_n = |λ_Wr(0)| u_n e^{iφ_n}`.
pub fn to_physical(
    traj: &Trajectory,
    x_star: InitialPoint,
    xi_qb: f64,
    phases: &PhaseSet,
    energy: f64,
) -> Result<PhysicalPulses> {
    if !(energy.is_finite() && energy > 0.0) {
        return Err(QbError::Domain {
            what: "energy",
            value: energy,
            domain: "(0, inf)",
        });
    }
    if x_star.u <= 0.0 {
        return Err(QbError::Degenerate("u = 0 gives an infinite conversion time"));
    }
    if !(xi_qb > 0.0 && xi_qb <= traj.grid().xi_max()) {
        return Err(QbError::Domain {
            what: "xi_qb",
            value: xi_qb,
            domain: "(0, xi_max]",
        });
    }
    let t_qb = conversion_time(x_star.u, xi_qb, energy);
    let lambda = xi_qb / t_qb;

    // Nodes closer than half a step to Ξ are dropped so the last interval stays
    // comparable to the others.
    let cut = xi_qb - 0.5 * traj.grid().step();
    let mut xi: Vec<f64> = traj.nodes().iter().copied().take_while(|&x| x < cut).collect();
    let mut raw: Vec<[f64; STATE_DIM]> = (0..xi.len()).map(|i| traj.state(i).to_array()).collect();
    let mut der: Vec<[f64; STATE_DIM]> = (0..xi.len()).map(|i| traj.derivative(i)).collect();
    let end = traj.interpolate_raw(xi_qb);
    xi.push(xi_qb);
    raw.push(end);
    der.push(crate::dynamics::rhs(&end));

    let t: Vec<f64> = xi.iter().map(|x| x / lambda).collect();
    let amplitude = raw.iter().map(|y| [lambda * y[0], lambda * y[1], lambda * y[2]]).collect();
    // dΩ/dt = λ · du/dξ · dξ/dt = λ² du/dξ
    let l2 = lambda * lambda;
    let slope = der.iter().map(|d| [l2 * d[0], l2 * d[1], l2 * d[2]]).collect();

    Ok(PhysicalPulses {
        t,
        amplitude,
        slope,
        phases: phases.pulses(),
        energy,
        t_qb,
        lambda_wr0: lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (reduce_angle(a - b)).abs() < 1e-12
    }

    #[test]
    fn zero_free_phases() {
        let p = derive_phases(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(close(p.phi2, -FRAC_PI_2));
        assert!(close(p.phi_gr, -FRAC_PI_2));
        assert!(close(p.phi_wr, 0.0));
        assert!(close(p.phi_gwp, 0.0));
    }

    #[test]
    fn substitution_example() {
        let p = derive_phases(PI / 4.0, PI / 3.0, PI, 0.0).unwrap();
        assert!(close(p.phi2, -PI / 4.0 - PI / 3.0 - PI - FRAC_PI_2));
        let r = p.reduced();
        assert!(r.phi2 > -PI && r.phi2 <= PI);
        assert!(close(r.phi2, p.phi2));
    }

    #[test]
    fn ghz_phase_difference() {
        for &(a, b, v, w) in &[(0.1, 0.2, 0.3, 0.4), (-2.0, 5.0, 1.0, 3.0), (0.0, 0.0, PI, 0.0)] {
            let p = derive_phases(a, b, v, w).unwrap();
            assert!(((p.phi_r - p.phi_g) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_phase_rejected() {
        assert!(derive_phases(f64::NAN, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn reduce_angle_range() {
        assert_eq!(reduce_angle(PI), PI);
        assert!((reduce_angle(-PI) - PI).abs() < 1e-15);
        assert!((reduce_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn headline_time_arithmetic() {
        let t = conversion_time(0.957, 2.72, 1.0);
        assert!((t - 6.8).abs() < 0.05, "{t}");
        assert!((conversion_time(0.957, 2.72, 2.0) - t / 2.0).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_is_exact_on_quadratics() {
        let t = [0.0, 0.1, 0.25, 0.3, 0.7, 1.0];
        let y: Vec<f64> = t.iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        let d = finite_difference(&t, &y);
        for (x, dx) in t.iter().zip(d) {
            assert!((dx - (6.0 * x - 1.0)).abs() < 1e-12);
        }
    }
}
