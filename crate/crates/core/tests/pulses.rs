use adiacz::adiabaticity::{
    adiabatic_factor, dfactor_from_spectrum, total_d, total_d_adaptive, DFactorCurve, DFactorOptions,
};
use adiacz::device::{DeviceParams, HilbertLabel, COMPUTATIONAL};
use adiacz::presets::measured_device;
use adiacz::pulse::{
    awp_from_integral, cosine_flux_pulse, envelope_to_flux, fourier_cosine, slepian_like_speed_profile,
    waveform_flux_to_freq, waveform_freq_to_flux, AwpIntegral, WaveUnit, Waveform,
};
use adiacz::spectrum::track_spectrum;
use adiacz::RAD_PER_MHZ_NS;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const L11: HilbertLabel = HilbertLabel::new(1, 1, 0);

fn measured() -> (DeviceParams, f64) {
    let p = measured_device();
    let idle = p.idle_frequency().unwrap();
    (p.device(), idle)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn awp_integral(dev: &DeviceParams, idle: f64) -> (DFactorCurve, AwpIntegral) {
    let curve =
        total_d_adaptive(dev, idle, dev.coupler.max_frequency(), idle, 1e-4, &DFactorOptions::default()).unwrap();
    let integral = AwpIntegral::new(&curve, idle).unwrap();
    (curve, integral)
}

#[test]
fn d_components_are_symmetric_non_negative_and_bounded_by_total() {
    let (dev, idle) = measured();
    let grid = linspace(idle, 3500.0, 80);
    let spec = track_spectrum(&dev, &grid, idle).unwrap();
    let curve = dfactor_from_spectrum(&dev, &spec, &spec.labels.clone(), &DFactorOptions::default()).unwrap();
    let l02 = HilbertLabel::new(0, 2, 0);
    let ik = curve.component(L11, l02).unwrap();
    let ki = curve.component(l02, L11).unwrap();
    for (a, b) in ik.iter().zip(&ki) {
        let (a, b) = (a.unwrap(), b.unwrap());
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
    }
    for &src in &spec.labels {
        let own = curve.component(src, src).unwrap();
        assert!(own.iter().all(|v| v.is_none_or(|v| v == 0.0)));
        let per = curve.per_state_curve(src).unwrap();
        for l in &spec.labels {
            for (p, v) in curve.component(src, *l).unwrap().iter().enumerate() {
                if let Some(v) = v {
                    assert!(*v >= 0.0 && *v <= per[p] * (1.0 + 1e-12));
                }
            }
        }
    }
}

#[test]
fn d_is_gauge_invariant() {
    let (dev, idle) = measured();
    let grid = linspace(idle, 3400.0, 40);
    let mut spec = track_spectrum(&dev, &grid, idle).unwrap();
    let opts = DFactorOptions::default();
    let before = dfactor_from_spectrum(&dev, &spec, &COMPUTATIONAL, &opts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for v in spec.vectors.iter_mut() {
        for k in 0..v.dim() {
            if rng.random_bool(0.5) {
                for i in 0..v.dim() {
                    v[(i, k)] = -v[(i, k)];
                }
            }
        }
    }
    let after = dfactor_from_spectrum(&dev, &spec, &COMPUTATIONAL, &opts).unwrap();
    for (a, b) in before.total.iter().zip(&after.total) {
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }
}

#[test]
fn double_excitation_channel_dominates_eleven() {
    let p = measured_device();
    let dev = p.device();
    let b = p.operating.zz_zero_bracket.unwrap();
    let idle = adiacz::spectrum::find_zz_zero(&dev, (b[0], b[1])).unwrap();
    let curve = adiabatic_factor(&dev, &linspace(idle, 3500.0, 200), L11, idle).unwrap();
    assert_eq!(curve.dominant_partner(L11).unwrap().0, HilbertLabel::new(0, 2, 0));
}

#[test]
fn total_d_sums_the_sources() {
    let (dev, idle) = measured();
    let grid = linspace(idle, 3400.0, 30);
    let curve = total_d(&dev, &grid, idle, None).unwrap();
    for p in 0..grid.len() {
        let sum: f64 = curve.sources.iter().map(|&s| curve.per_state_curve(s).unwrap()[p]).sum();
        assert!((curve.total[p] - sum).abs() <= 1e-12 * sum);
    }
}

#[test]
fn fourier_cosine_returns_to_zero_and_peaks_at_one() {
    let w = fourier_cosine(24.0, &[0.5, -0.1], 0.01).unwrap();
    assert_eq!(w.first(), 0.0);
    assert_eq!(w.last(), 0.0);
    assert!((w.value_at(12.0) - 1.0).abs() < 1e-12);
    assert!(fourier_cosine(24.0, &[0.4], 0.01).is_err());
}

#[test]
fn negative_second_harmonic_rises_more_slowly() {
    let plain = fourier_cosine(24.0, &[0.5], 0.01).unwrap();
    let shaped = fourier_cosine(24.0, &[0.5, -0.1], 0.01).unwrap();
    assert!(shaped.samples[1] < plain.samples[1]);
}

#[test]
fn flux_round_trip_preserves_the_waveform() {
    let (dev, idle) = measured();
    let w = cosine_flux_pulse(&dev.coupler, idle, 3500.0, 24.0, 0.01).unwrap();
    assert!((w.first() - idle).abs() < 1e-9 && (w.last() - idle).abs() < 1e-9);
    assert!((w.max() - 3500.0).abs() < 1e-6);
    let back = waveform_flux_to_freq(&waveform_freq_to_flux(&w, &dev.coupler).unwrap(), &dev.coupler).unwrap();
    for (a, b) in w.samples.iter().zip(&back.samples) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn envelope_maps_to_flux_around_idle() {
    let env = fourier_cosine(20.0, &[0.5], 0.01).unwrap();
    let flux = envelope_to_flux(&env, 0.35, 0.2).unwrap();
    assert_eq!(flux.unit, WaveUnit::Flux);
    assert_eq!(flux.first(), 0.35);
    assert!((flux.min() - 0.15).abs() < 1e-12);
}

#[test]
fn awp_starts_and_ends_at_idle() {
    let (dev, idle) = measured();
    let (_, integral) = awp_integral(&dev, idle);
    let w = awp_from_integral(&integral, 24.0, 0.3, 0.01).unwrap();
    assert_eq!(w.first(), idle);
    assert_eq!(w.last(), idle);
}

#[test]
fn awp_peak_grows_with_lambda_until_range_exceeded() {
    let (dev, idle) = measured();
    let (_, integral) = awp_integral(&dev, idle);
    let lmax = integral.max_lambda(24.0);
    let peaks: Vec<f64> =
        (1..=10).map(|k| awp_from_integral(&integral, 24.0, lmax * k as f64 / 10.0, 0.01).unwrap().max()).collect();
    assert!(peaks.windows(2).all(|w| w[1] > w[0]));
    assert!(awp_from_integral(&integral, 24.0, lmax * 1.01, 0.01).is_err());
}

#[test]
fn awp_speed_is_inverse_to_d() {
    // dG/dt = D dω/dt = λ sin(2πt/t_cz) along the trajectory.
    let (dev, idle) = measured();
    let (_, integral) = awp_integral(&dev, idle);
    let (t_cz, lambda) = (24.0, 0.3);
    let w = awp_from_integral(&integral, t_cz, lambda, 0.001).unwrap();
    let speed = slepian_like_speed_profile(&w).unwrap();
    let mut checked = 0;
    for (k, (&f, &v)) in w.samples.iter().zip(&speed).enumerate() {
        let s = (2.0 * PI * k as f64 * w.dt / t_cz).sin();
        if s > 0.2 {
            let lhs = integral.d_at(f) * RAD_PER_MHZ_NS * v;
            assert!((lhs / (lambda * s) - 1.0).abs() < 1e-2, "t={} ratio {}", k as f64 * w.dt, lhs / (lambda * s));
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn waveform_interpolates_linearly() {
    let w = Waveform::new(vec![0.0, 1.0, 3.0], 0.5, WaveUnit::CouplerMhz).unwrap();
    assert_eq!(w.duration(), 1.0);
    assert_eq!(w.value_at(0.25), 0.5);
    assert_eq!(w.value_at(0.75), 2.0);
    assert!(Waveform::new(vec![], 0.5, WaveUnit::CouplerMhz).is_err());
    assert!(Waveform::new(vec![1.0], 0.0, WaveUnit::CouplerMhz).is_err());
}
