use std::f64::consts::PI;
use std::sync::OnceLock;

use qbrachy_core::ds_baseline::{
    compare, ds_pulses, shape_integral, t_ds_for_energy, trapezoid_f, DsParams, COEFFS, TAU_MAX,
};
use qbrachy_core::phases::{derive_phases, to_physical, PhaseSet, PhysicalPulses};
use qbrachy_core::propagator::{default_steps, propagate, ComplexState, PulseSampler};
use qbrachy_core::robustness::{
    default_fractions, distort, infidelity, infidelity_sweep, write_sweep_csv, DistortionSpec,
    SWEEP_CSV_HEADER,
};
use qbrachy_core::shooting::{InitialPoint, Method, Shooter};

fn optimal_pulses() -> &'static (PhysicalPulses, PhaseSet) {
    static CELL: OnceLock<(PhysicalPulses, PhaseSet)> = OnceLock::new();
    CELL.get_or_init(|| {
        let sh = Shooter::default();
        let r = sh
            .minimize(InitialPoint::new(0.9, 0.3 * PI).unwrap(), Method::NelderMead)
            .unwrap();
        let traj = sh.trajectory(r.x_star).unwrap();
        let ph = derive_phases(0.2, 0.5, 1.0, 0.0).unwrap();
        (to_physical(&traj, r.x_star, r.xi_qb, &ph, 1.0).unwrap(), ph)
    })
}

#[test]
fn shape_integral_by_quadrature() {
    for &tau in &[0.0, 0.1, 0.2, TAU_MAX] {
        let n = 200_000;
        let h = 1.0 / n as f64;
        // Midpoint rule; exact up to the two kinks.
        let q: f64 = (0..n)
            .map(|k| trapezoid_f((k as f64 + 0.5) * h, tau).unwrap().powi(2) * h)
            .sum();
        assert!((q - shape_integral(tau)).abs() < 1e-8, "tau={tau} q={q}");
    }
    assert!((shape_integral(TAU_MAX) - 5.0 / 9.0).abs() < 1e-15);
}

#[test]
fn durations_at_unit_energy() {
    let sum: f64 = COEFFS.iter().map(|c| c * c).sum();
    assert!((sum - 9.05).abs() < 5e-3);
    assert!((t_ds_for_energy(0.0, 1.0).unwrap() - sum).abs() < 1e-12);
    let t13 = t_ds_for_energy(TAU_MAX, 1.0).unwrap();
    assert!((t13 - sum * (5.0 / 9.0) / (4.0 / 9.0)).abs() < 1e-12);
}

#[test]
fn pulses_carry_requested_energy() {
    for &tau in &[0.0, 0.15, TAU_MAX] {
        for &e in &[1.0, 3.0] {
            let p = ds_pulses(DsParams::new(tau, e).unwrap());
            let got = p.energy(100_000);
            assert!((got / e - 1.0).abs() < 1e-4, "tau={tau} E={e} got={got}");
        }
    }
}

#[test]
fn trapezoid_has_single_flat_point_free_segment_at_max_rise() {
    let p = ds_pulses(DsParams::new(TAU_MAX, 1.0).unwrap());
    let t = p.duration();
    let peak = p.amplitudes(0.5 * t)[0];
    assert!((p.amplitudes(t / 3.0)[0] - peak).abs() < 1e-12);
    assert!((p.amplitudes(2.0 * t / 3.0)[0] - peak).abs() < 1e-12);
    assert!(p.amplitudes(0.3 * t)[0] < peak);
    assert!(p.amplitudes(0.7 * t)[0] < peak);
}

#[test]
fn ratios_against_optimal_time() {
    let (pulses, _) = optimal_pulses();
    let taus: Vec<f64> = (0..=10).map(|k| k as f64 * TAU_MAX / 10.0).collect();
    let rows = compare(&taus, pulses.t_qb, 1.0).unwrap();
    assert!((rows[0].ratio - 1.33).abs() < 0.02, "{:?}", rows[0]);
    assert!((rows[10].ratio - 1.66).abs() < 0.02, "{:?}", rows[10]);
    assert!(rows.windows(2).all(|w| w[1].ratio > w[0].ratio));
}

#[test]
fn ds_pulses_propagate_without_norm_loss() {
    let p = ds_pulses(DsParams::new(0.2, 1.0).unwrap());
    let run = propagate(ComplexState::w_state(0.0), &p, p.duration(), 20_000).unwrap();
    assert!(run.max_norm_drift() < 1e-8);
}

#[test]
fn zero_distortion_baseline() {
    let (pulses, ph) = optimal_pulses();
    let base = infidelity(pulses, ph, default_steps(pulses)).unwrap();
    assert!(base < 1e-3, "{base}");
    for n in 1..=3 {
        let d = distort(pulses, DistortionSpec::new(n, 0.0, 2).unwrap());
        assert_eq!(&d.pulses, pulses);
    }
}

#[test]
fn first_pulse_is_least_affected() {
    let (pulses, _) = optimal_pulses();
    let spec = |n| DistortionSpec::new(n, 0.1 * pulses.t_qb, 1).unwrap();
    let change = |n: usize| {
        let d = distort(pulses, spec(n)).pulses;
        d.amplitude
            .iter()
            .zip(&pulses.amplitude)
            .map(|(a, b)| (a[n - 1] - b[n - 1]).abs())
            .fold(0.0, f64::max)
    };
    assert!(change(1) < change(2));
    assert!(change(1) < change(3));
    // Sine zeros pin the end points.
    let d = distort(pulses, spec(2)).pulses;
    assert_eq!(d.amplitude[0][1], pulses.amplitude[0][1]);
    let last = pulses.len() - 1;
    assert!((d.amplitude[last][1] - pulses.amplitude[last][1]).abs() < 1e-12);
}

#[test]
fn sweep_properties() {
    let (pulses, ph) = optimal_pulses();
    let fractions = default_fractions();
    let kappas = [1, 2, 3];
    let cells = infidelity_sweep(pulses, ph, &[1, 2, 3], &kappas, &fractions, default_steps(pulses));
    assert_eq!(cells.len(), 3 * kappas.len() * fractions.len());
    let get = |n: usize, k: u32, f: usize| {
        cells
            .iter()
            .find(|c| c.pulse_index == n && c.kappa == k && c.t_n_over_tqb == fractions[f])
            .unwrap()
            .infidelity
            .unwrap()
    };
    for c in &cells {
        let v = c.infidelity.unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    let realistic = fractions.iter().filter(|&&f| f <= 0.15 + 1e-12).count();
    for n in 1..=3 {
        assert!(get(n, 1, 0) < 1e-3);
        for f in 1..realistic {
            assert!(get(n, 1, f) >= get(n, 1, f - 1), "n={n} f={f}");
            assert!(get(n, 1, f) < 0.1);
        }
        // Continuity at zero: the first step changes the baseline only slightly.
        assert!(get(n, 1, 1) - get(n, 1, 0) < 1e-2);
    }
    for &k in &kappas {
        for f in 0..fractions.len() {
            if k == 3 && fractions[f] < 0.07 {
                continue;
            }
            assert!(get(1, k, f) <= get(3, k, f), "k={k} f={f}");
        }
    }
    // At the fastest modulation the quadratic response of the third pulse is the
    // smaller one, so weak distortions of it cost less than those of the first.
    assert!(get(3, 3, 1) < get(1, 3, 1));

    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &cells).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some(SWEEP_CSV_HEADER));
    assert_eq!(text.lines().count(), cells.len() + 1);
}

#[test]
fn sweep_records_failed_cells() {
    let (pulses, ph) = optimal_pulses();
    // A single propagation step cannot keep the norm; the cell reports an error.
    let cells = infidelity_sweep(pulses, ph, &[2], &[1], &[0.0, 0.1], 1);
    assert_eq!(cells.len(), 2);
    assert!(cells.iter().all(|c| c.infidelity.is_none() && c.error.is_some()));
    // Invalid indices surface per cell as well.
    let cells = infidelity_sweep(pulses, ph, &[4], &[1], &[0.1], 100);
    assert!(cells[0].error.is_some());
}
