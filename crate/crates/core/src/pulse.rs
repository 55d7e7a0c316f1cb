//! Gate pulse synthesis: Fourier-cosine envelopes, adiabatically weighted
//! pulses (AWP) and conversions between coupler frequency and flux.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::adiabaticity::{bridged_total, DFactorCurve};
use crate::device::{flux_to_frequency, frequency_to_flux, TunableCouplerParams};
use crate::error::{Error, Result};
use crate::io::{fmt_num, Table};
use crate::{angular, RAD_PER_MHZ_NS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveUnit {
    /// Bare coupler frequency in MHz.
    #[serde(rename = "MHz")]
    CouplerMhz,
    /// Flux in Φ₀.
    #[serde(rename = "Phi0")]
    Flux,
    #[serde(rename = "normalized")]
    Normalized,
}

impl WaveUnit {
    pub fn as_str(&self) -> &'static str {
        match self {
            WaveUnit::CouplerMhz => "MHz",
            WaveUnit::Flux => "Phi0",
            WaveUnit::Normalized => "normalized",
        }
    }
}

/// Uniformly sampled pulse. Sample `i` sits at `pad_before + i·dt`; the
/// first and last samples are held through the pads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub dt: f64,
    pub unit: WaveUnit,
    pub pad_before: f64,
    pub pad_after: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, dt: f64, unit: WaveUnit) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("waveform has no samples".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("waveform dt must be positive".into()));
        }
        Ok(Waveform { samples, dt, unit, pad_before: 0.0, pad_after: 0.0 })
    }

    pub fn constant(value: f64, duration: f64, dt: f64, unit: WaveUnit) -> Result<Self> {
        let n = (duration / dt).round().max(1.0) as usize + 1;
        Waveform::new(vec![value; n], duration / (n - 1) as f64, unit)
    }

    pub fn with_padding(mut self, before: f64, after: f64) -> Self {
        self.pad_before = before.max(0.0);
        self.pad_after = after.max(0.0);
        self
    }

    pub fn active_duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.pad_before + self.active_duration() + self.pad_after
    }

    pub fn first(&self) -> f64 {
        self.samples[0]
    }

    pub fn last(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Linear interpolation at time `t` (ns from the start of the padding).
    pub fn value_at(&self, t: f64) -> f64 {
        let x = (t - self.pad_before) / self.dt;
        if x <= 0.0 {
            return self.first();
        }
        let last = self.samples.len() - 1;
        if x >= last as f64 {
            return self.last();
        }
        let i = x.floor() as usize;
        let f = x - i as f64;
        self.samples[i] * (1.0 - f) + self.samples[i + 1] * f
    }

    pub fn map(&self, unit: WaveUnit, f: impl Fn(f64) -> f64) -> Waveform {
        Waveform { samples: self.samples.iter().map(|&x| f(x)).collect(), unit, ..self.clone() }
    }

    /// Rows `t_ns,value,unit`; pads appear as held samples at t = 0 and at
    /// the end.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(vec!["t_ns".into(), "value".into(), "unit".into()]);
        let unit = self.unit.as_str().to_string();
        if self.pad_before > 0.0 {
            t.push_row(vec![fmt_num(0.0), fmt_num(self.first()), unit.clone()]);
        }
        for (i, &v) in self.samples.iter().enumerate() {
            t.push_row(vec![fmt_num(self.pad_before + i as f64 * self.dt), fmt_num(v), unit.clone()]);
        }
        if self.pad_after > 0.0 {
            t.push_row(vec![fmt_num(self.duration()), fmt_num(self.last()), unit.clone()]);
        }
        t
    }
}

fn sample_count(t_cz: f64, dt: f64) -> Result<usize> {
    if !(t_cz > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter("t_cz and dt must be positive".into()));
    }
    Ok(((t_cz / dt).round() as usize).max(2) + 1)
}

/// `V(t) = Σ_n a_n [1 − cos(2π n t / t_cz)]` with `a_n = coefficients[n−1]`,
/// sampled on [0, t_cz]. The odd coefficients must sum to 0.5 so that
/// `V(t_cz/2)` is 1 for any even-term content.
pub fn fourier_cosine(t_cz: f64, coefficients: &[f64], dt: f64) -> Result<Waveform> {
    let odd: f64 = coefficients.iter().step_by(2).sum();
    if (odd - 0.5).abs() > 1e-12 {
        return Err(Error::ConstraintViolation(format!("odd Fourier coefficients sum to {odd}, expected 0.5")));
    }
    let n = sample_count(t_cz, dt)?;
    let step = t_cz / (n - 1) as f64;
    let mut samples: Vec<f64> = (0..n)
        .map(|k| {
            let t = k as f64 * step;
            coefficients.iter().enumerate().map(|(i, a)| a * (1.0 - (2.0 * PI * (i + 1) as f64 * t / t_cz).cos())).sum()
        })
        .collect();
    samples[0] = 0.0;
    samples[n - 1] = 0.0;
    Waveform::new(samples, step, WaveUnit::Normalized)
}

/// Flux pulse `Φ(t) = idle_flux − amplitude · V(t)` from a normalized
/// envelope. Positive amplitudes move toward zero flux, i.e. up in frequency.
pub fn envelope_to_flux(envelope: &Waveform, idle_flux: f64, amplitude: f64) -> Result<Waveform> {
    if envelope.unit != WaveUnit::Normalized {
        return Err(Error::InvalidParameter("envelope must be normalized".into()));
    }
    Ok(envelope.map(WaveUnit::Flux, |v| idle_flux - amplitude * v))
}

pub fn waveform_flux_to_freq(w: &Waveform, coupler: &TunableCouplerParams) -> Result<Waveform> {
    if w.unit != WaveUnit::Flux {
        return Err(Error::InvalidParameter("waveform must be in flux units".into()));
    }
    Ok(w.map(WaveUnit::CouplerMhz, |phi| flux_to_frequency(coupler, phi)))
}

pub fn waveform_freq_to_flux(w: &Waveform, coupler: &TunableCouplerParams) -> Result<Waveform> {
    if w.unit != WaveUnit::CouplerMhz {
        return Err(Error::InvalidParameter("waveform must be in MHz".into()));
    }
    let samples = w
        .samples
        .iter()
        .enumerate()
        .map(|(index, &f)| frequency_to_flux(coupler, f).map_err(|_| Error::SampleOutOfRange { index, value: f }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Waveform { samples, unit: WaveUnit::Flux, ..w.clone() })
}

/// Cosine flux pulse from `idle` to a bare maximum of `target` (both MHz),
/// returned in coupler frequency.
pub fn cosine_flux_pulse(
    coupler: &TunableCouplerParams,
    idle: f64,
    target: f64,
    t_cz: f64,
    dt: f64,
) -> Result<Waveform> {
    let idle_flux = frequency_to_flux(coupler, idle)?;
    let target_flux = frequency_to_flux(coupler, target)?;
    let env = fourier_cosine(t_cz, &[0.5], dt)?;
    let mut w = waveform_flux_to_freq(&envelope_to_flux(&env, idle_flux, idle_flux - target_flux)?, coupler)?;
    let n = w.samples.len();
    w.samples[0] = idle;
    w.samples[n - 1] = idle;
    Ok(w)
}

/// Sweep speed `dω_c/dt` in MHz/ns: central differences inside, one-sided
/// at the ends.
pub fn slepian_like_speed_profile(w: &Waveform) -> Result<Vec<f64>> {
    if w.unit != WaveUnit::CouplerMhz {
        return Err(Error::InvalidParameter("speed profile needs a frequency waveform".into()));
    }
    let s = &w.samples;
    let n = s.len();
    if n == 1 {
        return Ok(vec![0.0]);
    }
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                (s[1] - s[0]) / w.dt
            } else if i == n - 1 {
                (s[n - 1] - s[n - 2]) / w.dt
            } else {
                (s[i + 1] - s[i - 1]) / (2.0 * w.dt)
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct AwpSpec {
    pub t_cz: f64,
    /// Speed coefficient in rad; `λ t_cz / π` is the largest G reached.
    pub lambda: f64,
    pub d_curve: DFactorCurve,
    pub start_freq: f64,
}

/// Cumulative `G(ω) = ∫ D dω` along the sweep direction, with D linear in ω
/// between nodes so that G is piecewise quadratic and exactly invertible.
#[derive(Debug, Clone)]
pub struct AwpIntegral {
    start: f64,
    /// +1 for sweeps up in frequency, −1 for sweeps down.
    direction: f64,
    /// Angular offsets from the start (rad/ns), increasing.
    x: Vec<f64>,
    d: Vec<f64>,
    g: Vec<f64>,
}

impl AwpIntegral {
    pub fn new(curve: &DFactorCurve, start_freq: f64) -> Result<Self> {
        let grid = &curve.grid;
        let total = bridged_total(curve);
        if grid.len() < 2 {
            return Err(Error::InvalidParameter("D curve needs at least two points".into()));
        }
        let (lo, hi) = (grid[0], grid[grid.len() - 1]);
        if !(start_freq >= lo - 1e-9 && start_freq <= hi + 1e-9) {
            return Err(Error::InvalidParameter(format!("start {start_freq} MHz outside D grid [{lo}, {hi}]")));
        }
        let direction = if hi - start_freq >= start_freq - lo { 1.0 } else { -1.0 };
        let d_at = |f: f64| -> f64 {
            let i = grid.partition_point(|&g| g <= f).clamp(1, grid.len() - 1);
            let t = (f - grid[i - 1]) / (grid[i] - grid[i - 1]);
            total[i - 1] * (1.0 - t) + total[i] * t
        };
        let mut x = vec![0.0];
        let mut d = vec![d_at(start_freq)];
        let nodes: Vec<usize> = if direction > 0.0 {
            (0..grid.len()).filter(|&i| grid[i] > start_freq + 1e-12).collect()
        } else {
            (0..grid.len()).rev().filter(|&i| grid[i] < start_freq - 1e-12).collect()
        };
        for i in nodes {
            x.push(angular((grid[i] - start_freq).abs()));
            d.push(total[i]);
        }
        if d.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::ConstraintViolation("D must be strictly positive along the sweep".into()));
        }
        if x.len() < 2 {
            return Err(Error::InvalidParameter("D grid does not extend beyond the start frequency".into()));
        }
        let mut g = vec![0.0];
        for j in 1..x.len() {
            g.push(g[j - 1] + 0.5 * (d[j - 1] + d[j]) * (x[j] - x[j - 1]));
        }
        Ok(AwpIntegral { start: start_freq, direction, x, d, g })
    }

    /// Largest reachable G (ns).
    pub fn total(&self) -> f64 {
        self.g[self.g.len() - 1]
    }

    /// Frequency (MHz) at which `G` reaches `y`.
    pub fn invert(&self, y: f64) -> Result<f64> {
        let total = self.total();
        if y > total * (1.0 + 1e-12) {
            return Err(Error::RangeExceeded { requested: y, available: total });
        }
        let y = y.clamp(0.0, total);
        let j = self.g.partition_point(|&g| g <= y).clamp(1, self.g.len() - 1) - 1;
        let h = self.x[j + 1] - self.x[j];
        let slope = (self.d[j + 1] - self.d[j]) / h;
        let r = y - self.g[j];
        let disc = (self.d[j] * self.d[j] + 2.0 * slope * r).max(0.0);
        let dx = 2.0 * r / (self.d[j] + disc.sqrt());
        Ok(self.start + self.direction * (self.x[j] + dx.min(h)) / RAD_PER_MHZ_NS)
    }

    /// D (ns²) at frequency `f` on the sweep side of the start.
    pub fn d_at(&self, f: f64) -> f64 {
        let x = angular((f - self.start) * self.direction).clamp(0.0, self.x[self.x.len() - 1]);
        let j = self.x.partition_point(|&v| v <= x).clamp(1, self.x.len() - 1) - 1;
        let t = (x - self.x[j]) / (self.x[j + 1] - self.x[j]);
        self.d[j] * (1.0 - t) + self.d[j + 1] * t
    }

    /// Largest λ for which a pulse of length `t_cz` stays on the curve.
    pub fn max_lambda(&self, t_cz: f64) -> f64 {
        self.total() * PI / t_cz
    }
}

/// `ω_c(t) = G⁻¹((λ t_cz / 2π)[1 − cos(2π t / t_cz)])` sampled on [0, t_cz].
pub fn awp_generate(spec: &AwpSpec, dt: f64) -> Result<Waveform> {
    let integral = AwpIntegral::new(&spec.d_curve, spec.start_freq)?;
    awp_from_integral(&integral, spec.t_cz, spec.lambda, dt)
}

pub fn awp_from_integral(integral: &AwpIntegral, t_cz: f64, lambda: f64, dt: f64) -> Result<Waveform> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter("lambda must be non-negative".into()));
    }
    let n = sample_count(t_cz, dt)?;
    let step = t_cz / (n - 1) as f64;
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * step;
        let y = lambda * t_cz / (2.0 * PI) * (1.0 - (2.0 * PI * t / t_cz).cos());
        samples.push(integral.invert(y)?);
    }
    samples[0] = integral.start;
    samples[n - 1] = integral.start;
    Waveform::new(samples, step, WaveUnit::CouplerMhz)
}

/// Reproducibility descriptor written next to every waveform file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PulseDescriptor {
    FourierCosine {
        t_cz: f64,
        coefficients: Vec<f64>,
        dt: f64,
        idle_flux: f64,
        amplitude: f64,
        pad_before: f64,
        pad_after: f64,
    },
    Awp {
        t_cz: f64,
        lambda: f64,
        start_freq: f64,
        dt: f64,
        pad_before: f64,
        pad_after: f64,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_samples() {
        let w = fourier_cosine(20.0, &[0.5], 0.01).unwrap();
        assert_eq!(w.samples.len(), 2001);
        assert!((w.samples[1000] - 1.0).abs() < 1e-15);
        assert_eq!(w.first(), 0.0);
        assert_eq!(w.last(), 0.0);
        let w2 = fourier_cosine(20.0, &[0.5, 0.2], 0.01).unwrap();
        assert!((w2.samples[500] - 0.9).abs() < 1e-12);
        assert!(matches!(fourier_cosine(20.0, &[0.4, 0.2], 0.01), Err(Error::ConstraintViolation(_))));
    }

    #[test]
    fn interpolation_and_padding() {
        let w = Waveform::new(vec![0.0, 1.0, 3.0], 1.0, WaveUnit::Normalized).unwrap().with_padding(2.0, 1.0);
        assert_eq!(w.duration(), 5.0);
        assert_eq!(w.value_at(0.5), 0.0);
        assert_eq!(w.value_at(3.5), 2.0);
        assert_eq!(w.value_at(4.9), 3.0);
    }

    #[test]
    fn speed_of_ramp_and_constant() {
        let ramp = Waveform::new((0..11).map(|i| 3.0 * i as f64 * 0.1).collect(), 0.1, WaveUnit::CouplerMhz).unwrap();
        assert!(slepian_like_speed_profile(&ramp).unwrap().iter().all(|v| (v - 3.0).abs() < 1e-12));
        let flat = Waveform::constant(3000.0, 5.0, 0.1, WaveUnit::CouplerMhz).unwrap();
        assert!(slepian_like_speed_profile(&flat).unwrap().iter().all(|&v| v == 0.0));
    }
}
