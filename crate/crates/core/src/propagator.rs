//! Full complex propagation in the four-state manifold `{|ggg⟩, |W⟩, |W′⟩, |rrr⟩}`.
//!
//! This is independent of the reduced real system and serves as its oracle:
//! pulses reconstructed from a scaled solution are fed through `i∂ψ/∂t = H(t)ψ`
//! with the tridiagonal effective Hamiltonian, and the resulting amplitudes,
//! GHZ fidelity and `F = H + Λ` dynamics are compared against the reduced
//! solution.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{ScaledState, Trajectory, DEFAULT_STEP};
use crate::error::{QbError, Result};
use crate::export::write_row;
use crate::interp::{bracket, hermite};
use crate::phases::{PhaseSet, PhysicalPulses};

pub type Matrix4 = [[Complex64; 4]; 4];

/// Norm drift beyond which a propagation is rejected.
pub const MAX_NORM_DRIFT: f64 = 1e-6;

pub const FIDELITY_CSV_HEADER: &str = "t,fidelity";
pub const COMPONENTS_CSV_HEADER: &str = "t,abs_psi_g,abs_psi_w,abs_psi_wp,abs_psi_r";

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Amplitudes on `(ggg, W, W′, rrr)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexState(pub [Complex64; 4]);

impl ComplexState {
    /// `e^{iφ_W} |W⟩`.
    pub fn w_state(phase: f64) -> Self {
        Self([ZERO, Complex64::from_polar(1.0, phase), ZERO, ZERO])
    }

    /// `(|ggg⟩ + e^{iφ}|rrr⟩)/√2`.
    pub fn ghz(varphi: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self([
            Complex64::new(s, 0.0),
            ZERO,
            ZERO,
            Complex64::from_polar(s, varphi),
        ])
    }

    /// State with the given signed moduli and phases.
    pub fn from_polar(moduli: [f64; 4], phases: [f64; 4]) -> Self {
        Self(std::array::from_fn(|k| Complex64::from_polar(1.0, phases[k]) * moduli[k]))
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn moduli(&self) -> [f64; 4] {
        self.0.map(|c| c.norm())
    }
}

/// Time-dependent complex pulses `(Ω₁, Ω₂, Ω₃)` on `[0, duration]`.
pub trait PulseSampler: Sync {
    fn duration(&self) -> f64;
    fn sample(&self, t: f64) -> [Complex64; 3];
}

/// Adapter turning a closure into a [`PulseSampler`].
pub struct FnPulses<F> {
    pub duration: f64,
    pub f: F,
}

impl<F> PulseSampler for FnPulses<F>
where
    F: Fn(f64) -> [Complex64; 3] + Sync,
{
    fn duration(&self) -> f64 {
        self.duration
    }

    fn sample(&self, t: f64) -> [Complex64; 3] {
        (self.f)(t)
    }
}

impl PulseSampler for PhysicalPulses {
    fn duration(&self) -> f64 {
        *self.t.last().unwrap_or(&0.0)
    }

    /// Cubic Hermite on the amplitudes with the constant phases applied.
    fn sample(&self, t: f64) -> [Complex64; 3] {
        let n = self.t.len();
        let amp = if n < 2 {
            self.amplitude.first().copied().unwrap_or([0.0; 3])
        } else {
            let t = t.clamp(self.t[0], self.t[n - 1]);
            let i = bracket(&self.t, t);
            hermite(
                self.t[i],
                self.t[i + 1],
                &self.amplitude[i],
                &self.slope[i],
                &self.amplitude[i + 1],
                &self.slope[i + 1],
                t,
            )
        };
        std::array::from_fn(|k| Complex64::from_polar(1.0, self.phases[k]) * amp[k])
    }
}

/// The effective Hamiltonian with couplings only between neighbouring states.
pub fn hamiltonian(omega: [Complex64; 3]) -> Matrix4 {
    let mut h = [[ZERO; 4]; 4];
    for k in 0..3 {
        h[k][k + 1] = omega[k];
        h[k + 1][k] = omega[k].conj();
    }
    h
}

#[inline]
fn schrodinger_rhs(omega: &[Complex64; 3], psi: &[Complex64; 4]) -> [Complex64; 4] {
    let hpsi = [
        omega[0] * psi[1],
        omega[0].conj() * psi[0] + omega[1] * psi[2],
        omega[1].conj() * psi[1] + omega[2] * psi[3],
        omega[2].conj() * psi[2],
    ];
    hpsi.map(|v| -I * v)
}

/// Sampled solution of the complex Schrödinger equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub t: Vec<f64>,
    pub states: Vec<ComplexState>,
}

impl Propagation {
    pub fn last(&self) -> &ComplexState {
        self.states.last().expect("propagation holds the initial state")
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.norm_sq() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// RK4 steps that match the reduced integrator's default scaled step for pulses
/// reconstructed with `|λ_Wr(0)| = lambda_wr0`.
pub fn default_steps(pulses: &PhysicalPulses) -> usize {
    let xi_end = pulses.duration() * pulses.lambda_wr0;
    ((xi_end / DEFAULT_STEP).ceil() as usize).max(1)
}

/// Propagates `initial` under `pulses` over `[0, t_end]` with `n_steps` RK4 steps.
/// The state is never renormalized; a norm drift above [`MAX_NORM_DRIFT`] is an error.
pub fn propagate<P: PulseSampler + ?Sized>(
    initial: ComplexState,
    pulses: &P,
    t_end: f64,
    n_steps: usize,
) -> Result<Propagation> {
    if n_steps == 0 {
        return Err(QbError::InvalidArgument("n_steps must be positive".into()));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(QbError::Domain {
            what: "t_end",
            value: t_end,
            domain: "[0, inf)",
        });
    }
    if (initial.norm_sq() - 1.0).abs() > 1e-8 {
        return Err(QbError::InvalidArgument("initial state is not normalized".into()));
    }
    let dt = t_end / n_steps as f64;
    let mut t = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut psi = initial.0;
    t.push(0.0);
    states.push(initial);
    for k in 0..n_steps {
        let t0 = k as f64 * dt;
        let om0 = pulses.sample(t0);
        let om_mid = pulses.sample(t0 + 0.5 * dt);
        let om1 = pulses.sample(t0 + dt);
        let k1 = schrodinger_rhs(&om0, &psi);
        let y: [Complex64; 4] = std::array::from_fn(|i| psi[i] + k1[i] * (0.5 * dt));
        let k2 = schrodinger_rhs(&om_mid, &y);
        let y: [Complex64; 4] = std::array::from_fn(|i| psi[i] + k2[i] * (0.5 * dt));
        let k3 = schrodinger_rhs(&om_mid, &y);
        let y: [Complex64; 4] = std::array::from_fn(|i| psi[i] + k3[i] * dt);
        let k4 = schrodinger_rhs(&om1, &y);
        psi = std::array::from_fn(|i| {
            psi[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0)
        });
        let state = ComplexState(psi);
        let drift = (state.norm_sq() - 1.0).abs();
        if !drift.is_finite() || drift > MAX_NORM_DRIFT {
            return Err(QbError::NormDrift {
                drift,
                limit: MAX_NORM_DRIFT,
            });
        }
        t.push(if k + 1 == n_steps { t_end } else { t0 + dt });
        states.push(state);
    }
    Ok(Propagation { t, states })
}

/// `|⟨GHZ(φ)|ψ⟩| = |ψ_g + e^{−iφ} ψ_r| / √2`.
pub fn fidelity_ghz(state: &ComplexState, varphi: f64) -> f64 {
    let overlap = state.0[0] + Complex64::from_polar(1.0, -varphi) * state.0[3];
    overlap.norm() * std::f64::consts::FRAC_1_SQRT_2
}

/// GHZ fidelity for phase-constrained states, `(|ψ_g| + |ψ_r|)/√2`, independent of `φ`.
pub fn fidelity_from_moduli(psi_g: f64, psi_r: f64) -> f64 {
    (psi_g.abs() + psi_r.abs()) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn write_fidelity_csv<W: Write>(
    out: &mut W,
    rows: impl IntoIterator<Item = (f64, f64)>,
) -> io::Result<()> {
    writeln!(out, "{FIDELITY_CSV_HEADER}")?;
    for (t, f) in rows {
        write_row(out, &[t, f])?;
    }
    Ok(())
}

pub fn write_components_csv<W: Write>(
    out: &mut W,
    rows: impl IntoIterator<Item = (f64, [f64; 4])>,
) -> io::Result<()> {
    writeln!(out, "{COMPONENTS_CSV_HEADER}")?;
    for (t, m) in rows {
        write_row(out, &[t, m[0].abs(), m[1].abs(), m[2].abs(), m[3].abs()])?;
    }
    Ok(())
}

/// Hermitian 4×4 matrix `F = H + Λ` in scaled units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FMatrix(pub Matrix4);

fn matmul(a: &Matrix4, b: &Matrix4) -> Matrix4 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..4).map(|k| a[i][k] * b[k][j]).sum()))
}

impl FMatrix {
    pub fn trace_pow(&self, n: u32) -> Complex64 {
        let mut p = self.0;
        for _ in 1..n {
            p = matmul(&p, &self.0);
        }
        (0..4).map(|i| p[i][i]).sum()
    }

    /// Largest `|F_ij − conj(F_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut e: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                e = e.max((self.0[i][j] - self.0[j][i].conj()).norm());
            }
        }
        e
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Scaled Hamiltonian `H/|λ_Wr(0)|` at one state.
pub fn h_matrix(s: &ScaledState, phases: &PhaseSet) -> FMatrix {
    let p = phases.pulses();
    let om = [s.u1, s.u2, s.u3];
    FMatrix(hamiltonian(std::array::from_fn(|k| {
        Complex64::from_polar(1.0, p[k]) * om[k]
    })))
}

/// Scaled `F = H + Λ` with vanishing diagonal multipliers.
pub fn f_matrix(s: &ScaledState, phases: &PhaseSet) -> FMatrix {
    let mut f = h_matrix(s, phases).0;
    let lam = |m: f64, phase: f64| Complex64::from_polar(1.0, phase) * m;
    let l_wr = lam(s.w_wr, phases.phi_wr);
    let l_gr = lam(s.w_gr, phases.phi_gr);
    let l_gwp = lam(s.w_gwp, phases.phi_gwp);
    f[0][2] = l_gwp;
    f[2][0] = l_gwp.conj();
    f[0][3] = l_gr;
    f[3][0] = l_gr.conj();
    f[1][3] = l_wr;
    f[3][1] = l_wr.conj();
    FMatrix(f)
}

/// Diagnostics of the complex `F` dynamics reconstructed from a reduced trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FEvolutionReport {
    /// Max over interior nodes and entries of `|dF/dξ + i[H, F]|`, with `dF/dξ`
    /// from centred differences.
    pub max_residual: f64,
    /// Max of `|Tr F²(ξ) − Tr F²(0)| / |Tr F²(0)|`.
    pub trace_f2_drift: f64,
    /// Max of `|Tr F³(ξ) − Tr F³(0)| / max(|Tr F³(0)|, ‖F(0)‖³)`.
    pub trace_f3_drift: f64,
    pub max_hermiticity_error: f64,
}

/// Rebuilds `F(ξ)` and `H(ξ)` at every node and measures how well `Ḟ = −i[H, F]`
/// and the trace invariants hold.
pub fn check_f_evolution(traj: &Trajectory, phases: &PhaseSet) -> FEvolutionReport {
    let fs: Vec<FMatrix> = traj.states().map(|s| f_matrix(&s, phases)).collect();
    let hs: Vec<FMatrix> = traj.states().map(|s| h_matrix(&s, phases)).collect();

    let mut max_residual: f64 = 0.0;
    for i in 1..fs.len().saturating_sub(1) {
        let width = traj.xi(i + 1) - traj.xi(i - 1);
        let hf = matmul(&hs[i].0, &fs[i].0);
        let fh = matmul(&fs[i].0, &hs[i].0);
        for r in 0..4 {
            for c in 0..4 {
                let df = (fs[i + 1].0[r][c] - fs[i - 1].0[r][c]) / width;
                let res = df + I * (hf[r][c] - fh[r][c]);
                max_residual = max_residual.max(res.norm());
            }
        }
    }

    let t2_0 = fs[0].trace_pow(2);
    let t3_0 = fs[0].trace_pow(3);
    let scale3 = t3_0.norm().max(fs[0].frobenius().powi(3));
    let mut trace_f2_drift: f64 = 0.0;
    let mut trace_f3_drift: f64 = 0.0;
    let mut max_hermiticity_error: f64 = 0.0;
    for f in &fs {
        trace_f2_drift = trace_f2_drift.max((f.trace_pow(2) - t2_0).norm() / t2_0.norm());
        trace_f3_drift = trace_f3_drift.max((f.trace_pow(3) - t3_0).norm() / scale3);
        max_hermiticity_error = max_hermiticity_error.max(f.hermiticity_error());
    }
    FEvolutionReport {
        max_residual,
        trace_f2_drift,
        trace_f3_drift,
        max_hermiticity_error,
    }
}

/// Boundary structure of `F` at `ξ = 0` and at the conversion time, in physical
/// units (scaled values multiplied by `|λ_Wr(0)|`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub omega3_start: f64,
    pub omega2_end: f64,
    /// `|λ_Wr(T)| − |Ω₁(T)|`.
    pub wr_minus_omega1_end: f64,
    /// `|λ_gW′(T)| − |Ω₃(T)|`.
    pub gwp_minus_omega3_end: f64,
    /// Largest deviation of `F(0)` from its required sparsity pattern.
    pub f_start_residual: f64,
    /// Largest deviation of `F(T)` from the pattern fixed by the GHZ target.
    pub f_end_residual: f64,
    /// `e^{iφ} λ_gr(T) / |λ_gr(T)|`; purely imaginary when `Tr F³` is conserved.
    pub lambda_gr_orientation: [f64; 2],
}

/// Evaluates the boundary structure of a solution ending at `xi_qb`.
pub fn boundary_check(
    traj: &Trajectory,
    xi_qb: f64,
    phases: &PhaseSet,
    lambda_wr0: f64,
) -> Result<BoundaryReport> {
    let s0 = traj.first();
    let st = traj.interpolate(xi_qb)?;
    let f0 = f_matrix(&s0, phases).0;
    let ft = f_matrix(&st, phases).0;

    // F(0): only the W row/column may be populated.
    let f_start_residual = [f0[0][0], f0[0][2], f0[0][3], f0[2][2], f0[2][3], f0[3][3]]
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);

    // F(T) pattern with ψ(T) = GHZ(φ): F₀₂ = e^{−iφ}Ω₃*, F₁₃ = e^{−iφ}Ω₁*, F₁₂ = 0.
    let e = Complex64::from_polar(1.0, -phases.varphi);
    let f_end_residual = [
        ft[0][2] - e * ft[2][3].conj(),
        ft[1][3] - e * ft[0][1].conj(),
        ft[1][2],
        ft[1][1],
        ft[2][2],
    ]
    .iter()
    .map(|c| c.norm())
    .fold(0.0, f64::max)
        * lambda_wr0;

    let orient = if ft[0][3].norm() > 0.0 {
        Complex64::from_polar(1.0, phases.varphi) * ft[0][3] / ft[0][3].norm()
    } else {
        ZERO
    };

    Ok(BoundaryReport {
        omega3_start: lambda_wr0 * s0.u3.abs(),
        omega2_end: lambda_wr0 * st.u2.abs(),
        wr_minus_omega1_end: lambda_wr0 * (st.w_wr.abs() - st.u1.abs()),
        gwp_minus_omega3_end: lambda_wr0 * (st.w_gwp.abs() - st.u3.abs()),
        f_start_residual,
        f_end_residual,
        lambda_gr_orientation: [orient.re, orient.im],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phases::derive_phases;

    #[test]
    fn zero_pulses_leave_state_constant() {
        let pulses = FnPulses {
            duration: 3.0,
            f: |_| [ZERO; 3],
        };
        let init = ComplexState::w_state(0.3);
        let out = propagate(init, &pulses, 3.0, 100).unwrap();
        assert_eq!(*out.last(), init);
    }

    #[test]
    fn short_time_matches_first_order_expansion() {
        let w = 0.7;
        let pulses = FnPulses {
            duration: 1.0,
            f: move |_| [Complex64::new(w, 0.0); 3],
        };
        let init = ComplexState::w_state(0.0);
        let h = hamiltonian([Complex64::new(w, 0.0); 3]);
        for &dt in &[1e-2, 5e-3] {
            let out = propagate(init, &pulses, dt, 1).unwrap();
            let approx: [Complex64; 4] = std::array::from_fn(|i| {
                init.0[i] - I * dt * (0..4).map(|k| h[i][k] * init.0[k]).sum::<Complex64>()
            });
            let err = (0..4)
                .map(|i| (out.last().0[i] - approx[i]).norm())
                .fold(0.0, f64::max);
            // Second-order remainder: |H²ψ| dt²/2.
            assert!(err < w * w * 2.0 * dt * dt, "dt={dt} err={err}");
            assert!(err > 0.1 * w * w * dt * dt);
        }
    }

    #[test]
    fn ghz_fidelities() {
        for &v in &[0.0, 1.0, std::f64::consts::PI] {
            assert!((fidelity_ghz(&ComplexState::ghz(v), v) - 1.0).abs() < 1e-15);
            assert_eq!(fidelity_ghz(&ComplexState::w_state(0.0), v), 0.0);
        }
    }

    #[test]
    fn moduli_formula_matches_overlap_on_constrained_phases() {
        let p = derive_phases(0.4, -1.2, 2.0, 0.7).unwrap();
        let st = ComplexState::from_polar([0.6, 0.3, 0.2, 0.5], p.amplitudes());
        let direct = fidelity_ghz(&st, p.varphi);
        assert!((direct - fidelity_from_moduli(0.6, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_initial_state_is_rejected() {
        let pulses = FnPulses {
            duration: 1.0,
            f: |_| [ZERO; 3],
        };
        let bad = ComplexState([Complex64::new(1.0, 0.0); 4]);
        assert!(propagate(bad, &pulses, 1.0, 10).is_err());
        assert!(propagate(ComplexState::w_state(0.0), &pulses, 1.0, 0).is_err());
    }

    #[test]
    fn norm_drift_is_reported() {
        // Steps far too coarse for the coupling strength.
        let pulses = FnPulses {
            duration: 10.0,
            f: |_| [Complex64::new(50.0, 0.0); 3],
        };
        let r = propagate(ComplexState::w_state(0.0), &pulses, 10.0, 10);
        assert!(matches!(r, Err(QbError::NormDrift { .. })));
    }

    #[test]
    fn f_matrix_is_hermitian_with_zero_diagonal() {
        let s = ScaledState {
            u1: 0.3,
            u2: 0.4,
            u3: 0.5,
            w_wr: 0.6,
            w_gr: 0.7,
            w_gwp: 0.8,
            ..Default::default()
        };
        let f = f_matrix(&s, &derive_phases(1.0, 2.0, 3.0, 0.0).unwrap());
        assert!(f.hermiticity_error() < 1e-15);
        for i in 0..4 {
            assert_eq!(f.0[i][i], ZERO);
        }
        // Tr F² = 2 Σ|entries above diagonal|².
        let expect = 2.0 * (0.09 + 0.16 + 0.25 + 0.36 + 0.49 + 0.64);
        assert!((f.trace_pow(2).re - expect).abs() < 1e-12);
        // Every closed triangle of entries carries total phase ±π/2, so Tr F³ vanishes.
        assert!(f.trace_pow(3).norm() < 1e-12);
    }
}
