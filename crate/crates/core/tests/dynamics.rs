use adiacz::device::{DeviceParams, HilbertLabel};
use adiacz::dynamics::{
    calibrate_amplitude, conditional_phase, dressed_coupler_frequency, evolve, fit_oscillation, incoherent_error,
    leakage_amplification, propagate_fixed, to_bare_frequency, CalibrationOptions, EvolveOptions, FluxEnvelopeFamily,
    FrequencyConvention, StateSet,
};
use adiacz::error::Error;
use adiacz::presets::measured_device;
use adiacz::pulse::{cosine_flux_pulse, fourier_cosine, WaveUnit, Waveform};
use adiacz::spectrum::{anchor_point, TrackOptions};
use adiacz::Complex;
use proptest::prelude::*;
use std::f64::consts::PI;

fn measured() -> (DeviceParams, f64) {
    let p = measured_device();
    let idle = p.idle_frequency().unwrap();
    (p.device(), idle)
}

fn concat(a: &Waveform, b: &Waveform) -> Waveform {
    let mut samples = a.samples.clone();
    samples.extend_from_slice(&b.samples[1..]);
    Waveform::new(samples, a.dt, WaveUnit::CouplerMhz).unwrap()
}

#[test]
fn uncoupled_device_has_no_conditional_phase() {
    let (dev, idle) = measured();
    let dev = dev.with_zero_couplings();
    let pulse = cosine_flux_pulse(&dev.coupler, idle, 3500.0, 24.0, 0.01).unwrap();
    let r = conditional_phase(&dev, &pulse, &EvolveOptions::default()).unwrap();
    assert!(r.phase.min(2.0 * PI - r.phase) < 1e-9);
    assert!(r.leakage.iter().all(|&l| l < 1e-12));
}

#[test]
fn constant_pulse_at_idle_is_the_identity_in_the_rotating_frame() {
    let (dev, idle) = measured();
    let pulse = Waveform::constant(idle, 30.0, 0.01, WaveUnit::CouplerMhz).unwrap();
    let r = conditional_phase(&dev, &pulse, &EvolveOptions::default()).unwrap();
    assert!(r.state_phases.iter().all(|p| p.abs() < 1e-9));
    assert!(r.leakage.iter().all(|&l| l < 1e-12));
}

#[test]
fn consecutive_pulses_compose() {
    let (dev, idle) = measured();
    let a = cosine_flux_pulse(&dev.coupler, idle, 3450.0, 12.0, 0.01).unwrap();
    let b = cosine_flux_pulse(&dev.coupler, idle, 3300.0, 8.0, 0.01).unwrap();
    let idle_point = anchor_point(&dev, idle, &TrackOptions::default()).unwrap();
    let start = StateSet::from_real_columns(&idle_point.vectors, &[0, 4, 13]);
    let step = 0.005;
    let two = propagate_fixed(&dev, &b, &propagate_fixed(&dev, &a, &start, step).unwrap(), step).unwrap();
    let one = propagate_fixed(&dev, &concat(&a, &b), &start, step).unwrap();
    let worst = two.data.iter().zip(&one.data).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "composition error {worst}");
}

#[test]
fn evolve_rejects_unnormalized_states() {
    let (dev, idle) = measured();
    let pulse = Waveform::constant(idle, 1.0, 0.01, WaveUnit::CouplerMhz).unwrap();
    let mut psi = vec![Complex::new(0.0, 0.0); 27];
    psi[0] = Complex::new(2.0, 0.0);
    assert!(evolve(&dev, &pulse, &psi, &EvolveOptions::default()).is_err());
}

#[test]
fn evolve_reports_computational_phases() {
    let (dev, idle) = measured();
    let pulse = cosine_flux_pulse(&dev.coupler, idle, 3400.0, 24.0, 0.01).unwrap();
    let mut psi = vec![Complex::new(0.0, 0.0); 27];
    psi[13] = Complex::new(1.0, 0.0);
    let r = evolve(&dev, &pulse, &psi, &EvolveOptions::default()).unwrap();
    assert!(r.unitary_check < 1e-9);
    assert!(r.halving_shift.unwrap() < 1e-6);
    assert!(r.phase_per_computational_state.is_some());
}

#[test]
fn frequency_pulses_outside_the_coupler_range_are_rejected() {
    let (dev, idle) = measured();
    let mut w = Waveform::constant(idle, 2.0, 0.01, WaveUnit::CouplerMhz).unwrap();
    w.samples[50] = dev.coupler.max_frequency() + 10.0;
    let r = conditional_phase(&dev, &w, &EvolveOptions::default());
    assert!(matches!(r, Err(Error::SampleOutOfRange { index: 50, .. })));
}

#[test]
fn longer_pulses_leak_less() {
    let (dev, _) = measured();
    let idle_flux = measured_device().operating.idle_flux.unwrap();
    let mut leak = Vec::new();
    for t in [24.0, 40.0, 80.0, 200.0] {
        let env = fourier_cosine(t, &[0.5], 0.02).unwrap();
        let fam = FluxEnvelopeFamily { envelope: &env, device: &dev, idle_flux };
        let cal = calibrate_amplitude(&dev, &fam, PI, &CalibrationOptions::default()).unwrap();
        assert!((cal.result.phase - PI).abs() < 1e-4);
        leak.push(cal.result.leakage.iter().sum::<f64>());
    }
    assert!(leak.windows(2).all(|w| w[1] <= w[0]), "leakage {leak:?}");
    assert!(leak[3] < 1e-4);
}

#[test]
fn unreachable_phase_is_reported() {
    let (dev, _) = measured();
    let env = fourier_cosine(10.0, &[0.5], 0.02).unwrap();
    let fam = FluxEnvelopeFamily { envelope: &env, device: &dev, idle_flux: 0.45 };
    let mut opts = CalibrationOptions::default();
    opts.scan_points = 4;
    assert!(matches!(calibrate_amplitude(&dev, &fam, 40.0 * PI, &opts), Err(Error::Unreachable { .. })));
}

#[test]
fn dressed_and_bare_conventions_invert() {
    let (dev, idle) = measured();
    let d = dressed_coupler_frequency(&dev, idle, 3400.0).unwrap();
    let bare = to_bare_frequency(&dev, idle, d, FrequencyConvention::Dressed).unwrap();
    assert!((bare - 3400.0).abs() < 1e-6);
    assert_eq!(to_bare_frequency(&dev, idle, 3400.0, FrequencyConvention::Bare).unwrap(), 3400.0);
}

#[test]
fn leakage_map_conserves_population() {
    let (dev, idle) = measured();
    let pulse = cosine_flux_pulse(&dev.coupler, idle, 3500.0, 24.0, 0.01).unwrap();
    let delays: Vec<f64> = (0..200).map(|i| 0.1 * i as f64).collect();
    let map = leakage_amplification(&dev, &pulse, &delays, 20).unwrap();
    assert!(map.max_sum_deviation < 1e-6);
    for row in &map.populations {
        assert!(row[0][0] > 1.0 - 1e-12);
        for cycle in row {
            assert!(cycle.iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
        }
    }
    for row in &map.cycle_averaged {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
    assert!(map.averaged_trace(HilbertLabel::new(0, 2, 0)).unwrap().iter().any(|&p| p > 1e-6));
}

#[test]
fn oscillation_fit_on_a_leakage_trace_is_physical() {
    let (dev, idle) = measured();
    let pulse = cosine_flux_pulse(&dev.coupler, idle, 3500.0, 24.0, 0.01).unwrap();
    let map = leakage_amplification(&dev, &pulse, &[8.6], 30).unwrap();
    let trace = map.cycle_trace(0, HilbertLabel::new(1, 1, 0)).unwrap();
    let cycles: Vec<usize> = (1..=30).collect();
    let fit = fit_oscillation(&cycles, &trace[1..]).unwrap();
    assert!(fit.mu.cos().abs() <= 1.0 && fit.a.is_finite() && fit.b.is_finite());
    assert!(fit.residual_rms < 0.05);
}

#[test]
fn incoherent_error_is_linear_in_time() {
    let r = incoherent_error(28.0, 81.4, 111.1, 91.2, 124.8);
    assert!((incoherent_error(56.0, 81.4, 111.1, 91.2, 124.8) - 2.0 * r).abs() < 1e-18);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn evolution_is_unitary(target in 2800.0f64..3610.0, t in 5.0f64..30.0) {
        let (dev, idle) = measured();
        let pulse = cosine_flux_pulse(&dev.coupler, idle, target, t, 0.01).unwrap();
        let r = conditional_phase(&dev, &pulse, &EvolveOptions::unchecked(0.01)).unwrap();
        prop_assert!(r.unitary_check < 1e-9);
        prop_assert!(r.leakage.iter().all(|&l| (0.0..=1.0).contains(&l)));
    }
}
