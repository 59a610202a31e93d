//! Trapezoidal pulses of the dynamical-symmetry protocol and the duration they
//! need at a given pulse energy.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{QbError, Result};
use crate::propagator::PulseSampler;

/// Moduli `|c₁|, |c₂|, |c₃|` of the pulse coefficients.
pub const COEFFS: [f64; 3] = [1.225, 1.420, 2.352];

pub const TAU_MAX: f64 = 1.0 / 3.0;

pub fn coeff_power() -> f64 {
    COEFFS.iter().map(|c| c * c).sum()
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=TAU_MAX).contains(&tau) {
        return Err(QbError::Domain {
            what: "tau",
            value: tau,
            domain: "[0, 1/3]",
        });
    }
    Ok(())
}

/// Trapezoid with rise and fall fractions `tau`; `tau = 0` is the rectangle.
pub fn trapezoid_f(x: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(QbError::Domain {
            what: "x",
            value: x,
            domain: "[0, 1]",
        });
    }
    Ok(if tau == 0.0 {
        1.0
    } else if x < tau {
        x / tau
    } else if x > 1.0 - tau {
        (1.0 - x) / tau
    } else {
        1.0
    })
}

/// `∫₀¹ f² dx = (3 − 4τ)/3`.
pub fn shape_integral(tau: f64) -> f64 {
    (3.0 - 4.0 * tau) / 3.0
}

/// Duration in units of `ħ/E` at which the pulses carry energy `energy`.
pub fn t_ds_for_energy(tau: f64, energy: f64) -> Result<f64> {
    check_tau(tau)?;
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(QbError::Domain {
            what: "energy",
            value: energy,
            domain: "(0, inf)",
        });
    }
    Ok(coeff_power() * shape_integral(tau) / ((1.0 - tau).powi(2) * energy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DsParams {
    pub tau: f64,
    pub energy: f64,
    pub t_ds: f64,
}

impl DsParams {
    pub fn new(tau: f64, energy: f64) -> Result<Self> {
        Ok(Self {
            tau,
            energy,
            t_ds: t_ds_for_energy(tau, energy)?,
        })
    }
}

/// Real pulses `Ω_n(t) = c_n f(t/T)/(T(1 − τ))` with positive coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsPulses {
    pub params: DsParams,
}

pub fn ds_pulses(params: DsParams) -> DsPulses {
    DsPulses { params }
}

impl DsPulses {
    pub fn amplitudes(&self, t: f64) -> [f64; 3] {
        let p = &self.params;
        let x = (t / p.t_ds).clamp(0.0, 1.0);
        let f = trapezoid_f(x, p.tau).expect("validated tau");
        let scale = f / (p.t_ds * (1.0 - p.tau));
        COEFFS.map(|c| c * scale)
    }

    /// `∫ Σ Ω_n² dt` by the trapezoidal rule on `n` uniform intervals.
    pub fn energy(&self, n: usize) -> f64 {
        let t = self.params.t_ds;
        let h = t / n as f64;
        let power = |k: usize| self.amplitudes(k as f64 * h).iter().map(|a| a * a).sum::<f64>();
        h * ((0..=n).map(power).sum::<f64>() - 0.5 * (power(0) + power(n)))
    }
}

impl PulseSampler for DsPulses {
    fn duration(&self) -> f64 {
        self.params.t_ds
    }

    fn sample(&self, t: f64) -> [Complex64; 3] {
        self.amplitudes(t).map(|a| Complex64::new(a, 0.0))
    }
}

/// One row of the duration comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub tau: f64,
    pub t_ds: f64,
    pub t_qb: f64,
    pub ratio: f64,
}

/// Compares the trapezoid duration to `t_qb` at equal energy for each `tau`.
pub fn compare(taus: &[f64], t_qb: f64, energy: f64) -> Result<Vec<Comparison>> {
    if !(t_qb > 0.0 && t_qb.is_finite()) {
        return Err(QbError::Domain {
            what: "t_qb",
            value: t_qb,
            domain: "(0, inf)",
        });
    }
    taus.iter()
        .map(|&tau| {
            let t_ds = t_ds_for_energy(tau, energy)?;
            Ok(Comparison {
                tau,
                t_ds,
                t_qb,
                ratio: t_ds / t_qb,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinks_are_continuous() {
        for &tau in &[0.1, 0.25, TAU_MAX] {
            assert!((trapezoid_f(tau, tau).unwrap() - 1.0).abs() < 1e-15);
            assert!((trapezoid_f(1.0 - tau, tau).unwrap() - 1.0).abs() < 1e-15);
            assert_eq!(trapezoid_f(0.0, tau).unwrap(), 0.0);
            assert_eq!(trapezoid_f(1.0, tau).unwrap(), 0.0);
        }
        assert_eq!(trapezoid_f(0.5, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn domains() {
        assert!(trapezoid_f(-0.1, 0.2).is_err());
        assert!(trapezoid_f(1.1, 0.2).is_err());
        assert!(trapezoid_f(0.5, 0.4).is_err());
        assert!(t_ds_for_energy(0.0, 0.0).is_err());
        assert!(compare(&[0.0], -1.0, 1.0).is_err());
    }

    #[test]
    fn peak_ratio() {
        let p = ds_pulses(DsParams::new(0.2, 1.0).unwrap());
        let a = p.amplitudes(0.5 * p.params.t_ds);
        assert!((a[2] / a[0] - 2.352 / 1.225).abs() < 1e-14);
    }

    #[test]
    fn energy_scales_inversely_with_duration() {
        let a = t_ds_for_energy(0.1, 1.0).unwrap();
        let b = t_ds_for_energy(0.1, 2.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-14);
    }
}
