use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qbrachy_core::dynamics::{
    integrate, integrate_with, rhs_costate, rhs_state, Integrator, ScaledState, XiGrid,
    TRAJECTORY_CSV_HEADER,
};
use qbrachy_core::phases::derive_phases;
use qbrachy_core::propagator::{f_matrix, h_matrix};
use qbrachy_core::shooting::InitialPoint;

fn commutator_rhs(s: &ScaledState, phi: (f64, f64, f64, f64)) -> ([f64; 6], [f64; 4]) {
    let phases = derive_phases(phi.0, phi.1, phi.2, phi.3).unwrap();
    let h = h_matrix(s, &phases).0;
    let f = f_matrix(s, &phases).0;
    let i = Complex64::new(0.0, 1.0);
    // dF/dξ = −i[H, F]
    let df = |r: usize, c: usize| -> Complex64 {
        let hf: Complex64 = (0..4).map(|k| h[r][k] * f[k][c]).sum();
        let fh: Complex64 = (0..4).map(|k| f[r][k] * h[k][c]).sum();
        -i * (hf - fh)
    };
    let unphase = |z: Complex64, phase: f64| z * Complex64::from_polar(1.0, -phase);
    let entries = [
        (df(0, 1), phases.phi1),
        (df(1, 2), phases.phi2),
        (df(2, 3), phases.phi3),
        (df(1, 3), phases.phi_wr),
        (df(0, 3), phases.phi_gr),
        (df(0, 2), phases.phi_gwp),
    ];
    let mut costate = [0.0; 6];
    for (k, (z, p)) in entries.into_iter().enumerate() {
        let r = unphase(z, p);
        assert!(r.im.abs() < 1e-12, "entry {k} not real: {r}");
        costate[k] = r.re;
    }
    // dψ/dξ = −iHψ
    let amp = phases.amplitudes();
    let m = s.amplitudes();
    let psi: Vec<Complex64> = (0..4).map(|k| Complex64::from_polar(1.0, amp[k]) * m[k]).collect();
    let mut state = [0.0; 4];
    for r in 0..4 {
        let d: Complex64 = -i * (0..4).map(|k| h[r][k] * psi[k]).sum::<Complex64>();
        let d = unphase(d, amp[r]);
        assert!(d.im.abs() < 1e-12, "amplitude {r} not real: {d}");
        state[r] = d.re;
    }
    (costate, state)
}

#[test]
fn reduced_rhs_matches_complex_commutator() {
    let s = ScaledState {
        u1: 0.3,
        u2: 0.4,
        u3: 0.5,
        w_wr: 0.6,
        w_gr: 0.7,
        w_gwp: 0.8,
        psi_g: 0.1,
        psi_w: 0.2,
        psi_wp: 0.3,
        psi_r: 0.4,
    };
    for phi in [(0.0, 0.0, 0.0, 0.0), (0.7, -1.3, 2.1, 0.4), (PI, PI / 3.0, -PI, 5.0)] {
        let (c, st) = commutator_rhs(&s, phi);
        let rc = rhs_costate(&s).unwrap();
        let rs = rhs_state(&s).unwrap();
        for k in 0..6 {
            assert!((c[k] - rc[k]).abs() < 1e-12, "costate {k}: {} vs {}", c[k], rc[k]);
        }
        for k in 0..4 {
            assert!((st[k] - rs[k]).abs() < 1e-12, "state {k}: {} vs {}", st[k], rs[k]);
        }
    }
}

#[test]
fn optimal_point_reaches_ghz_moduli() {
    let x0 = InitialPoint::new(0.957, 0.311 * PI).unwrap();
    let traj = integrate(x0, &XiGrid::with_step(2.72, 1e-3).unwrap());
    let end = traj.last();
    let target = std::f64::consts::FRAC_1_SQRT_2;
    assert!((end.psi_g - target).abs() < 1e-3, "{}", end.psi_g);
    assert!((end.psi_r - target).abs() < 1e-3, "{}", end.psi_r);
}

#[test]
fn step_halving_changes_final_state_below_tolerance() {
    let x0 = InitialPoint::new(0.957, 0.311 * PI).unwrap();
    let a = integrate(x0, &XiGrid::with_step(5.0, 1e-3).unwrap()).last();
    let b = integrate(x0, &XiGrid::with_step(5.0, 5e-4).unwrap()).last();
    let diff = a
        .to_array()
        .iter()
        .zip(b.to_array())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-6, "{diff}");
}

#[test]
fn rk4_error_shrinks_with_fourth_order() {
    let x0 = InitialPoint::new(0.8, 1.0).unwrap();
    let reference = integrate_with(x0, &XiGrid::new(3.0, 10).unwrap(), Integrator::adaptive())
        .unwrap()
        .last()
        .to_array();
    let err = |n: usize| {
        integrate(x0, &XiGrid::new(3.0, n).unwrap())
            .last()
            .to_array()
            .iter()
            .zip(reference)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2, e3) = (err(50), err(100), err(200));
    let (o1, o2) = ((e1 / e2).log2(), (e2 / e3).log2());
    assert!((3.7..4.3).contains(&o1), "order {o1}");
    assert!((3.7..4.3).contains(&o2), "order {o2}");
}

#[test]
fn trajectory_csv_round_trip() {
    let x0 = InitialPoint::new(0.5, 2.0).unwrap();
    let traj = integrate(x0, &XiGrid::new(1.0, 8).unwrap());
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(TRAJECTORY_CSV_HEADER));
    for (i, line) in lines.enumerate() {
        let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals.len(), 11);
        assert_eq!(vals[0], traj.xi(i));
        assert_eq!(&vals[1..], &traj.state(i).to_array());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conserved_quantities(u in 0.0f64..=1.0, phi in 0.0f64..(2.0 * PI)) {
        let x0 = InitialPoint::new(u, phi).unwrap();
        let traj = integrate(x0, &XiGrid::with_step(5.0, 1e-3).unwrap());
        let r = traj.check_invariants(f64::INFINITY);
        prop_assert!(r.pulse_power_drift < 1e-8);
        prop_assert!(r.costate_power_drift < 1e-8);
        prop_assert!(r.norm_drift < 1e-8);
        prop_assert!((traj.first().pulse_power() - u * u).abs() < 1e-14);
    }

    #[test]
    fn mirror_symmetry(u in 0.0f64..=1.0, phi in 0.0f64..(2.0 * PI)) {
        let x0 = InitialPoint::new(u, phi).unwrap();
        let grid = XiGrid::with_step(3.0, 1e-3).unwrap();
        let a = integrate(x0, &grid);
        let b = integrate(x0.mirror(), &grid);
        for i in (0..a.len()).step_by(97) {
            let (p, q) = (a.state(i), b.state(i));
            let mirrored = [p.u1, -p.u2, -p.u3, p.w_wr, p.w_gr, -p.w_gwp, p.psi_g, p.psi_w, -p.psi_wp, p.psi_r];
            for (m, v) in mirrored.iter().zip(q.to_array()) {
                prop_assert!((m - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn array_round_trip(v in proptest::array::uniform10(-10.0f64..10.0)) {
        prop_assert_eq!(ScaledState::from_array(v).to_array(), v);
    }

    #[test]
    fn costate_rhs_preserves_both_powers(v in proptest::array::uniform10(-1.0f64..1.0)) {
        let s = ScaledState::from_array(v);
        let c = rhs_costate(&s).unwrap();
        let st = rhs_state(&s).unwrap();
        let dp = s.u1 * c[0] + s.u2 * c[1] + s.u3 * c[2];
        let dw = s.w_wr * c[3] + s.w_gr * c[4] + s.w_gwp * c[5];
        let dn = s.psi_g * st[0] + s.psi_w * st[1] + s.psi_wp * st[2] + s.psi_r * st[3];
        prop_assert!(dp.abs() < 1e-14);
        prop_assert!(dw.abs() < 1e-14);
        prop_assert!(dn.abs() < 1e-14);
    }
}
