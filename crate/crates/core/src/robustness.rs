//! Sensitivity of the GHZ fidelity to smooth deformations of one pulse envelope,
//! `δ|Ω_n(t)| = t_n sin(2πκt/T) d|Ω_n|/dt`.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QbError, Result};
use crate::export::write_row;
use crate::phases::{finite_difference, PhaseSet, PhysicalPulses};
use crate::propagator::{fidelity_ghz, propagate, ComplexState};

pub const SWEEP_CSV_HEADER: &str = "pulse_index,kappa,t_n_over_Tqb,infidelity";
pub const DEFAULT_KAPPAS: [u32; 3] = [1, 2, 3];

/// `{0, 0.02, …, 0.2}`, in units of the conversion time.
pub fn default_fractions() -> Vec<f64> {
    (0..=10).map(|k| k as f64 * 0.02).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionSpec {
    /// Pulse index, 1 to 3.
    pub n: usize,
    /// Distortion timescale in `ħ/E`.
    pub t_n: f64,
    pub kappa: u32,
}

impl DistortionSpec {
    pub fn new(n: usize, t_n: f64, kappa: u32) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(QbError::InvalidArgument(format!("pulse index {n} not in 1..=3")));
        }
        if !(t_n >= 0.0 && t_n.is_finite()) {
            return Err(QbError::Domain {
                what: "t_n",
                value: t_n,
                domain: "[0, inf)",
            });
        }
        if kappa < 1 {
            return Err(QbError::InvalidArgument("kappa must be at least 1".into()));
        }
        Ok(Self { n, t_n, kappa })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distorted {
    pub pulses: PhysicalPulses,
    /// Set when some distorted modulus went negative and was clamped to zero.
    pub clamped: bool,
}

/// Applies the distortion to pulse `spec.n`; phases and other pulses are untouched.
pub fn distort(pulses: &PhysicalPulses, spec: DistortionSpec) -> Distorted {
    let mut out = pulses.clone();
    if spec.t_n == 0.0 {
        return Distorted {
            pulses: out,
            clamped: false,
        };
    }
    let k = spec.n - 1;
    let period = pulses.t_qb;
    let modulus: Vec<f64> = pulses.amplitude.iter().map(|a| a[k].abs()).collect();
    let dm = finite_difference(&pulses.t, &modulus);
    let mut clamped = false;
    for (i, amp) in out.amplitude.iter_mut().enumerate() {
        let phase = 2.0 * std::f64::consts::PI * f64::from(spec.kappa) * pulses.t[i] / period;
        let mut m = modulus[i] + spec.t_n * phase.sin() * dm[i];
        if m < 0.0 {
            m = 0.0;
            clamped = true;
        }
        amp[k] = if amp[k] < 0.0 { -m } else { m };
    }
    out.refresh_slopes();
    Distorted { pulses: out, clamped }
}

/// `1 − F_GHZ(T)` after propagating `e^{iφ_W}|W⟩` under `pulses`.
pub fn infidelity(pulses: &PhysicalPulses, phases: &PhaseSet, n_steps: usize) -> Result<f64> {
    let t_end = pulses.t.last().copied().unwrap_or(0.0);
    let run = propagate(ComplexState::w_state(phases.phi_w), pulses, t_end, n_steps)?;
    Ok((1.0 - fidelity_ghz(run.last(), phases.varphi)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub pulse_index: usize,
    pub kappa: u32,
    pub t_n_over_tqb: f64,
    /// `None` when the propagation failed; see `error`.
    pub infidelity: Option<f64>,
    pub clamped: bool,
    pub error: Option<String>,
}

/// Evaluates every `(index, κ, t_n/T)` combination. Cells are computed in
/// parallel and returned in index-major, then κ, then `t_n` order. A failed
/// cell records its error and the sweep continues.
pub fn infidelity_sweep(
    pulses: &PhysicalPulses,
    phases: &PhaseSet,
    indices: &[usize],
    kappas: &[u32],
    fractions: &[f64],
    n_steps: usize,
) -> Vec<SweepCell> {
    let combos: Vec<(usize, u32, f64)> = indices
        .iter()
        .flat_map(|&n| {
            kappas
                .iter()
                .flat_map(move |&k| fractions.iter().map(move |&f| (n, k, f)))
        })
        .collect();
    combos
        .par_iter()
        .map(|&(n, kappa, frac)| {
            let outcome = DistortionSpec::new(n, frac * pulses.t_qb, kappa).and_then(|spec| {
                let d = distort(pulses, spec);
                infidelity(&d.pulses, phases, n_steps).map(|v| (v, d.clamped))
            });
            match outcome {
                Ok((v, clamped)) => SweepCell {
                    pulse_index: n,
                    kappa,
                    t_n_over_tqb: frac,
                    infidelity: Some(v),
                    clamped,
                    error: None,
                },
                Err(e) => SweepCell {
                    pulse_index: n,
                    kappa,
                    t_n_over_tqb: frac,
                    infidelity: None,
                    clamped: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Failed cells are written with `NaN` infidelity.
pub fn write_sweep_csv<W: Write>(out: &mut W, cells: &[SweepCell]) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for c in cells {
        write!(out, "{},{},", c.pulse_index, c.kappa)?;
        write_row(out, &[c.t_n_over_tqb, c.infidelity.unwrap_or(f64::NAN)])?;
    }
    Ok(())
}
