//! Time-domain studies: calibrated CZ pulses and repeated-pulse leakage maps.

use adiacz::adiabaticity::{total_d_adaptive, DFactorOptions};
use adiacz::device::{flux_to_frequency, frequency_to_flux};
use adiacz::dynamics::{
    calibrate_amplitude, dominant_line, dressed_coupler_frequency, incoherent_error, leakage_amplification_with,
    peak_spacing, to_bare_frequency, AwpFamily, Calibration, CalibrationOptions, ConditionalPhase, EvolveOptions,
    FluxEnvelopeFamily, LeakageOptions, PeakSpacing, SpectralLine,
};
use adiacz::io::Table;
use adiacz::presets::DevicePreset;
use adiacz::pulse::{cosine_flux_pulse, fourier_cosine, AwpIntegral, PulseDescriptor};
use serde::Serialize;

use super::{idle_frequency, parse_label, zz_zero};
use crate::config::{PulseShape, StudyConfig};
use crate::output::{column, Writer};
use crate::CliError;

/// Relative tolerance of the adaptive D grid behind AWP pulses.
const AWP_GRID_TOL: f64 = 1e-4;

#[derive(Debug, Serialize)]
struct PulseReport {
    descriptor: PulseDescriptor,
    idle_frequency_mhz: f64,
    target_phase: f64,
    scale: f64,
    conditional_phase: ConditionalPhase,
    max_bare_frequency_mhz: f64,
    max_dressed_frequency_mhz: f64,
    monotone_scan: bool,
    evaluations: usize,
    /// Present when the preset carries coherence times.
    incoherent_error: Option<f64>,
}

pub fn pulse(cfg: &StudyConfig, preset: &DevicePreset, out: &mut Writer) -> Result<(), CliError> {
    let c = &cfg.pulse;
    let dev = preset.device();
    let idle_flux = match c.idle_flux.or(preset.operating.idle_flux) {
        Some(phi) => phi,
        None => frequency_to_flux(&dev.coupler, idle_frequency(preset)?)?,
    };
    let idle = flux_to_frequency(&dev.coupler, idle_flux);
    let opts = CalibrationOptions {
        evolve: EvolveOptions { dt_solver: c.dt_solver, ..EvolveOptions::default() },
        ..CalibrationOptions::default()
    };

    let (cal, descriptor): (Calibration, PulseDescriptor) = match c.shape {
        PulseShape::FourierCosine => {
            let env = fourier_cosine(c.t_cz, &c.coefficients, c.dt)?.with_padding(c.pad_before, c.pad_after);
            let fam = FluxEnvelopeFamily { envelope: &env, device: &dev, idle_flux };
            let cal = calibrate_amplitude(&dev, &fam, c.target_phase, &opts)?;
            let descriptor = PulseDescriptor::FourierCosine {
                t_cz: c.t_cz,
                coefficients: c.coefficients.clone(),
                dt: c.dt,
                idle_flux,
                amplitude: cal.scale,
                pad_before: c.pad_before,
                pad_after: c.pad_after,
            };
            (cal, descriptor)
        }
        PulseShape::Awp => {
            let fmax = dev.coupler.max_frequency();
            let curve = total_d_adaptive(&dev, idle, fmax, idle, AWP_GRID_TOL, &DFactorOptions::default())?;
            let integral = AwpIntegral::new(&curve, idle)?;
            let fam = AwpFamily { integral: &integral, t_cz: c.t_cz, dt: c.dt, pad: (c.pad_before, c.pad_after) };
            let cal = calibrate_amplitude(&dev, &fam, c.target_phase, &opts)?;
            let descriptor = PulseDescriptor::Awp {
                t_cz: c.t_cz,
                lambda: cal.scale,
                start_freq: idle,
                dt: c.dt,
                pad_before: c.pad_before,
                pad_after: c.pad_after,
            };
            (cal, descriptor)
        }
    };

    let incoherent = preset
        .operating
        .coherence
        .map(|co| incoherent_error(cal.waveform.duration(), co.t1_us[0], co.t2e_us[0], co.t1_us[1], co.t2e_us[1]));
    let report = PulseReport {
        descriptor,
        idle_frequency_mhz: idle,
        target_phase: c.target_phase,
        scale: cal.scale,
        max_bare_frequency_mhz: cal.max_frequency,
        max_dressed_frequency_mhz: dressed_coupler_frequency(&dev, idle, cal.max_frequency)?,
        monotone_scan: cal.monotone,
        evaluations: cal.evaluations,
        incoherent_error: incoherent,
        conditional_phase: cal.result,
    };
    out.csv("waveform.csv", cal.waveform.to_table())?;
    out.json("pulse.json", &report)
}

#[derive(Debug, Serialize)]
struct TraceSummary {
    state: String,
    /// Absent when the trace has fewer than three resolvable peaks.
    spacing: Option<PeakSpacing>,
    dominant_line: Option<SpectralLine>,
}

#[derive(Debug, Serialize)]
struct LeakageReport {
    idle_mhz: f64,
    target_bare_mhz: f64,
    t_cz: f64,
    max_cycles: usize,
    single_pulse_fidelity: f64,
    max_sum_deviation: f64,
    traces: Vec<TraceSummary>,
}

pub fn leakage(cfg: &StudyConfig, preset: &DevicePreset, out: &mut Writer) -> Result<(), CliError> {
    let c = &cfg.leakage;
    let dev = preset.device();
    let idle = match c.idle {
        Some(f) => f,
        None => match zz_zero(preset)? {
            Some(f) => f,
            None => idle_frequency(preset)?,
        },
    };
    let target = to_bare_frequency(&dev, idle, c.target, c.target_convention)?;
    let delays = c.delays.resolve(0.0, 20.0)?;
    let record = c.record.iter().map(|s| parse_label(s)).collect::<Result<Vec<_>, _>>()?;
    let pulse = cosine_flux_pulse(&dev.coupler, idle, target, c.t_cz, c.dt)?;
    let opts = LeakageOptions { record: record.clone(), ..LeakageOptions::new(c.max_cycles) };
    let map = leakage_amplification_with(&dev, &pulse, &delays, &opts)?;

    let traces: Vec<Vec<f64>> = record.iter().map(|&l| map.averaged_trace(l)).collect::<Result<_, _>>()?;
    let mut header = vec!["delay_ns".to_string()];
    header.extend(record.iter().map(|&l| format!("p_{}", column(l))));
    let mut table = Table::new(header);
    table.comments.push(format!("populations averaged over N = 1..{} pulses", c.max_cycles));
    for (i, &d) in delays.iter().enumerate() {
        let mut row = vec![d];
        row.extend(traces.iter().map(|t| t[i]));
        table.push_numbers(&row);
    }
    out.csv("leakage_averaged.csv", table)?;

    if c.write_cycles {
        let mut header = vec!["delay_ns".to_string(), "cycle".into()];
        header.extend(record.iter().map(|&l| format!("p_{}", column(l))));
        let mut table = Table::new(header);
        for (i, &d) in delays.iter().enumerate() {
            let per: Vec<Vec<f64>> = record.iter().map(|&l| map.cycle_trace(i, l)).collect::<Result<_, _>>()?;
            for n in 0..=c.max_cycles {
                let mut row = vec![d, n as f64];
                row.extend(per.iter().map(|t| t[n]));
                table.push_numbers(&row);
            }
        }
        out.csv("leakage_cycles.csv", table)?;
    }

    let summaries = record
        .iter()
        .zip(&traces)
        .map(|(&l, t)| TraceSummary {
            state: l.to_string(),
            spacing: peak_spacing(&delays, t).ok(),
            dominant_line: dominant_line(&delays, t).ok(),
        })
        .collect();
    out.json(
        "peaks.json",
        &LeakageReport {
            idle_mhz: idle,
            target_bare_mhz: target,
            t_cz: c.t_cz,
            max_cycles: c.max_cycles,
            single_pulse_fidelity: map.single_pulse_fidelity,
            max_sum_deviation: map.max_sum_deviation,
            traces: summaries,
        },
    )
}
