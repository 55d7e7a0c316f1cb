//! Repeated pulse cycles with free evolution between them, and the analysis
//! of the resulting leakage patterns.

use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::PI;

use super::{idle_point, propagate, EvolveOptions, StateSet};
use crate::device::{ControlledHamiltonian, HilbertLabel};
use crate::error::{Error, Result};
use crate::pulse::Waveform;
use crate::{Complex, RAD_PER_MHZ_NS};

#[derive(Debug, Clone)]
pub struct LeakageOptions {
    pub max_cycles: usize,
    /// Dressed state prepared before the first cycle.
    pub initial: HilbertLabel,
    /// States whose per-cycle populations are stored. Cycle averages are
    /// kept for every state.
    pub record: Vec<HilbertLabel>,
    pub evolve: EvolveOptions,
}

impl LeakageOptions {
    pub fn new(max_cycles: usize) -> Self {
        LeakageOptions {
            max_cycles,
            initial: HilbertLabel::new(1, 1, 0),
            record: vec![
                HilbertLabel::new(1, 1, 0),
                HilbertLabel::new(0, 2, 0),
                HilbertLabel::new(2, 0, 0),
                HilbertLabel::new(0, 1, 1),
                HilbertLabel::new(1, 0, 1),
            ],
            evolve: EvolveOptions::default(),
        }
    }
}

/// Dressed-state populations after `N` cycles of pulse plus delay τ.
#[derive(Debug, Clone, Serialize)]
pub struct LeakageMap {
    pub delays: Vec<f64>,
    pub max_cycles: usize,
    pub labels: Vec<HilbertLabel>,
    pub recorded: Vec<HilbertLabel>,
    /// `[delay][cycle N = 0..=max][recorded label]`.
    pub populations: Vec<Vec<Vec<f64>>>,
    /// `[delay][label]`, averaged over N = 1..=max.
    pub cycle_averaged: Vec<Vec<f64>>,
    /// Largest |Σ P − 1| over the whole map.
    pub max_sum_deviation: f64,
    /// Population left in the initial state after a single pulse.
    pub single_pulse_fidelity: f64,
}

impl LeakageMap {
    fn label_index(&self, l: HilbertLabel) -> Result<usize> {
        self.labels.iter().position(|&x| x == l).ok_or_else(|| Error::InvalidParameter(format!("no state {l}")))
    }

    /// Cycle-averaged population of `label` against delay.
    pub fn averaged_trace(&self, label: HilbertLabel) -> Result<Vec<f64>> {
        let k = self.label_index(label)?;
        Ok(self.cycle_averaged.iter().map(|row| row[k]).collect())
    }

    /// Populations of a recorded state for N = 0..=max at one delay.
    pub fn cycle_trace(&self, delay_index: usize, label: HilbertLabel) -> Result<Vec<f64>> {
        let k = self
            .recorded
            .iter()
            .position(|&x| x == label)
            .ok_or_else(|| Error::InvalidParameter(format!("state {l} not recorded", l = label)))?;
        Ok(self.populations[delay_index].iter().map(|row| row[k]).collect())
    }
}

pub fn leakage_amplification<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    pulse: &Waveform,
    delays: &[f64],
    max_cycles: usize,
) -> Result<LeakageMap> {
    leakage_amplification_with(model, pulse, delays, &LeakageOptions::new(max_cycles))
}

pub fn leakage_amplification_with<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    pulse: &Waveform,
    delays: &[f64],
    opts: &LeakageOptions,
) -> Result<LeakageMap> {
    if delays.is_empty() || opts.max_cycles == 0 {
        return Err(Error::InvalidParameter("need at least one delay and one cycle".into()));
    }
    if let Some(&d) = delays.iter().find(|&&d| !(d >= 0.0)) {
        return Err(Error::InvalidParameter(format!("negative delay {d}")));
    }
    let labels = model.labels();
    let n = labels.len();
    let find =
        |l: HilbertLabel| model.index_of(l).ok_or_else(|| Error::InvalidParameter(format!("model has no state {l}")));
    let init = find(opts.initial)?;
    let rec: Vec<usize> = opts.record.iter().map(|&l| find(l)).collect::<Result<_>>()?;

    let idle = idle_point(model, pulse)?;
    let all: Vec<usize> = (0..n).collect();
    let prop = propagate(model, pulse, &StateSet::from_real_columns(&idle.vectors, &all), &opts.evolve)?;
    // Pulse propagator in the idle dressed basis.
    let mut ud = vec![Complex::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex::new(0.0, 0.0);
            for b in 0..n {
                acc += prop.states.data[b * n + j] * idle.vectors[(b, i)];
            }
            ud[i * n + j] = acc;
        }
    }
    let single_pulse_fidelity = ud[init * n + init].norm_sqr();

    let mut populations = Vec::with_capacity(delays.len());
    let mut cycle_averaged = Vec::with_capacity(delays.len());
    let mut max_dev: f64 = 0.0;
    let mut v = vec![Complex::new(0.0, 0.0); n];
    let mut w = vec![Complex::new(0.0, 0.0); n];
    for &tau in delays {
        let free: Vec<Complex> =
            idle.energies.iter().map(|&e| Complex::from_polar(1.0, -RAD_PER_MHZ_NS * e * tau)).collect();
        v.iter_mut().for_each(|x| *x = Complex::new(0.0, 0.0));
        v[init] = Complex::new(1.0, 0.0);
        let mut per_n = Vec::with_capacity(opts.max_cycles + 1);
        per_n.push(rec.iter().map(|&k| v[k].norm_sqr()).collect::<Vec<f64>>());
        let mut avg = vec![0.0; n];
        for _ in 0..opts.max_cycles {
            for i in 0..n {
                let row = &ud[i * n..(i + 1) * n];
                let s = row.iter().zip(&v).fold(Complex::new(0.0, 0.0), |a, (u, x)| a + u * x);
                w[i] = free[i] * s;
            }
            std::mem::swap(&mut v, &mut w);
            let mut total = 0.0;
            for (a, x) in avg.iter_mut().zip(&v) {
                let p = x.norm_sqr();
                *a += p;
                total += p;
            }
            max_dev = max_dev.max((total - 1.0).abs());
            per_n.push(rec.iter().map(|&k| v[k].norm_sqr()).collect());
        }
        avg.iter_mut().for_each(|a| *a /= opts.max_cycles as f64);
        populations.push(per_n);
        cycle_averaged.push(avg);
    }
    Ok(LeakageMap {
        delays: delays.to_vec(),
        max_cycles: opts.max_cycles,
        labels,
        recorded: opts.record.clone(),
        populations,
        cycle_averaged,
        max_sum_deviation: max_dev,
        single_pulse_fidelity,
    })
}

/// Indices of local maxima whose topographic prominence is at least
/// `min_prominence`, at least `min_separation` samples apart (the taller
/// one wins).
pub fn find_peaks(y: &[f64], min_prominence: f64, min_separation: usize) -> Vec<usize> {
    let n = y.len();
    let mut cands = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            // Walk across a flat top.
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let mid = (i + j) / 2;
                if prominence(y, mid) >= min_prominence {
                    cands.push(mid);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let mut order = cands.clone();
    order.sort_by(|&a, &b| y[b].total_cmp(&y[a]));
    let mut kept: Vec<usize> = Vec::new();
    for p in order {
        if kept.iter().all(|&k| k.abs_diff(p) >= min_separation) {
            kept.push(p);
        }
    }
    kept.sort_unstable();
    kept
}

fn prominence(y: &[f64], p: usize) -> f64 {
    let h = y[p];
    let mut left = h;
    for &v in y[..p].iter().rev() {
        if v > h {
            break;
        }
        left = left.min(v);
    }
    let mut right = h;
    for &v in &y[p + 1..] {
        if v > h {
            break;
        }
        right = right.min(v);
    }
    h - left.max(right)
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakSpacing {
    pub peaks: Vec<f64>,
    /// Median spacing of adjacent peaks (ns).
    pub median: f64,
    /// Period of the strongest spectral line of the trace (ns).
    pub dominant_period: f64,
}

/// Peak spacing of a trace sampled at `delays`. Peaks need 5% of the trace
/// range in prominence and two grid steps of separation.
pub fn peak_spacing(delays: &[f64], trace: &[f64]) -> Result<PeakSpacing> {
    if delays.len() != trace.len() {
        return Err(Error::InvalidParameter("delay and trace lengths differ".into()));
    }
    let (lo, hi) = trace.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let idx = find_peaks(trace, 0.05 * (hi - lo), 2);
    if idx.len() < 3 {
        return Err(Error::InsufficientPeaks { found: idx.len() });
    }
    let peaks: Vec<f64> = idx.iter().map(|&i| delays[i]).collect();
    let mut gaps: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let m = gaps.len();
    let median = if m % 2 == 1 { gaps[m / 2] } else { 0.5 * (gaps[m / 2 - 1] + gaps[m / 2]) };
    let line = dominant_line(delays, trace)?;
    Ok(PeakSpacing { peaks, median, dominant_period: 1e3 / line.frequency })
}

/// A sinusoidal component of a delay trace. Frequency in MHz, amplitude in
/// population units.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralLine {
    pub frequency: f64,
    pub amplitude: f64,
}

struct Spectrum<'a> {
    t: &'a [f64],
    x: Vec<f64>,
    norm: f64,
}

impl<'a> Spectrum<'a> {
    fn new(delays: &'a [f64], trace: &[f64]) -> Result<Self> {
        let n = trace.len();
        if n < 8 || delays.len() != n {
            return Err(Error::InsufficientPeaks { found: 0 });
        }
        let step = (delays[n - 1] - delays[0]) / (n - 1) as f64;
        let uniform = delays.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-6 * step.abs());
        if !(step > 0.0) || !uniform {
            return Err(Error::InvalidParameter("spectral analysis needs a uniform delay grid".into()));
        }
        let mean = trace.iter().sum::<f64>() / n as f64;
        let w = |k: usize| 0.5 * (1.0 - (2.0 * PI * k as f64 / (n - 1) as f64).cos());
        let x: Vec<f64> = trace.iter().enumerate().map(|(k, &v)| (v - mean) * w(k)).collect();
        let norm = 0.5 * (0..n).map(w).sum::<f64>();
        Ok(Spectrum { t: delays, x, norm })
    }

    fn step(&self) -> f64 {
        (self.t[self.t.len() - 1] - self.t[0]) / (self.t.len() - 1) as f64
    }

    /// Sinusoid amplitude at `f` (cycles per ns).
    fn amplitude(&self, f: f64) -> f64 {
        let s =
            self.x.iter().zip(self.t).fold(Complex::new(0.0, 0.0), |a, (&x, &t)| {
                a + Complex::from_polar(x, -2.0 * PI * f * (t - self.t[0]))
            });
        s.norm() / self.norm
    }

    /// Zero-padded FFT magnitudes; bin `k` sits at `k·df`.
    fn padded(&self) -> (Vec<f64>, f64) {
        let len = (8 * self.x.len()).next_power_of_two();
        let mut buf: Vec<Complex> = self.x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(len, Complex::new(0.0, 0.0));
        FftPlanner::new().plan_fft_forward(len).process(&mut buf);
        let mags = buf[..len / 2].iter().map(|c| c.norm() / self.norm).collect();
        (mags, 1.0 / (len as f64 * self.step()))
    }

    /// Strongest line with frequency in `[f_lo, f_hi]` (cycles per ns).
    fn strongest(&self, f_lo: f64, f_hi: f64) -> Option<SpectralLine> {
        let (mags, df) = self.padded();
        let k_lo = (f_lo / df).ceil().max(1.0) as usize;
        let k_hi = ((f_hi / df).floor() as usize).min(mags.len() - 2);
        if k_lo > k_hi {
            return None;
        }
        let k = (k_lo..=k_hi).max_by(|&a, &b| mags[a].total_cmp(&mags[b]))?;
        let (a, b, c) = (mags[k - 1].max(1e-300).ln(), mags[k].max(1e-300).ln(), mags[k + 1].max(1e-300).ln());
        let den = a - 2.0 * b + c;
        let shift = if den < 0.0 { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 };
        let guess = (k as f64 + shift) * df;
        let f = golden_max(|f| self.amplitude(f), (guess - df).max(f_lo), (guess + df).min(f_hi), 1e-12);
        Some(SpectralLine { frequency: f * 1e3, amplitude: self.amplitude(f) })
    }
}

fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    0.5 * (a + b)
}

/// Strongest oscillation of `trace` on a uniform delay grid, excluding
/// lines slower than two cycles over the record.
pub fn dominant_line(delays: &[f64], trace: &[f64]) -> Result<SpectralLine> {
    let s = Spectrum::new(delays, trace)?;
    let span = delays[delays.len() - 1] - delays[0];
    s.strongest(2.0 / span, 0.5 / s.step()).ok_or(Error::InsufficientPeaks { found: 0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct DifferenceLine {
    /// Expected frequency f(target) − f(via) (MHz).
    pub expected: f64,
    pub line: SpectralLine,
    /// Line amplitude relative to the strongest line of the trace.
    pub relative_amplitude: f64,
    /// 1/f (ns).
    pub spacing: f64,
}

/// Finds the line of `target`'s trace at the difference between the
/// dominant frequencies of `target` and `via`, the signature of a
/// second-order transition through `via`. The line must lie within half
/// of `via`'s frequency of the expected value and carry at least 10% of the
/// trace's dominant amplitude.
pub fn difference_line(map: &LeakageMap, target: HilbertLabel, via: HilbertLabel) -> Result<DifferenceLine> {
    let tt = map.averaged_trace(target)?;
    let tv = map.averaged_trace(via)?;
    let d_target = dominant_line(&map.delays, &tt)?;
    let d_via = dominant_line(&map.delays, &tv)?;
    let expected = (d_target.frequency - d_via.frequency).abs();
    let half = 0.5 * d_via.frequency;
    let s = Spectrum::new(&map.delays, &tt)?;
    let span = map.delays[map.delays.len() - 1] - map.delays[0];
    let lo = ((expected - half) * 1e-3).max(2.0 / span);
    let hi = (expected + half) * 1e-3;
    let line = s.strongest(lo, hi).ok_or(Error::InsufficientPeaks { found: 0 })?;
    let relative_amplitude = line.amplitude / d_target.amplitude;
    if relative_amplitude < 0.1 {
        return Err(Error::InsufficientPeaks { found: 0 });
    }
    Ok(DifferenceLine { expected, line, relative_amplitude, spacing: 1e3 / line.frequency })
}

/// `P(N) = A + B cos(2Nμ)` fitted to per-cycle populations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LeakageOscillationModel {
    pub a: f64,
    pub b: f64,
    /// Rotation half-angle per cycle, in (0, π/2].
    pub mu: f64,
    pub residual_rms: f64,
}

impl LeakageOscillationModel {
    /// Swap angle θ when the leakage phase φ is known:
    /// `cos μ = cos(φ/2)·cos(θ/2)`.
    pub fn theta_for_phi(&self, phi: f64) -> Option<f64> {
        let c = self.mu.cos() / (0.5 * phi).cos();
        (c.abs() <= 1.0).then(|| 2.0 * c.acos())
    }

    /// Leakage phase φ for a known swap angle θ.
    pub fn phi_for_theta(&self, theta: f64) -> Option<f64> {
        let c = self.mu.cos() / (0.5 * theta).cos();
        (c.abs() <= 1.0).then(|| 2.0 * c.acos())
    }
}

fn linear_fit(cycles: &[f64], pop: &[f64], mu: f64) -> Option<(f64, f64, f64)> {
    let n = pop.len() as f64;
    let c: Vec<f64> = cycles.iter().map(|&k| (2.0 * k * mu).cos()).collect();
    let (sc, scc) = (c.iter().sum::<f64>(), c.iter().map(|x| x * x).sum::<f64>());
    let (sy, scy) = (pop.iter().sum::<f64>(), c.iter().zip(pop).map(|(a, b)| a * b).sum::<f64>());
    let det = n * scc - sc * sc;
    if det <= 1e-9 * n * n {
        return None;
    }
    let b = (n * scy - sc * sy) / det;
    let a = (sy - b * sc) / n;
    let sse = c.iter().zip(pop).map(|(ci, y)| (y - a - b * ci).powi(2)).sum();
    Some((a, b, sse))
}

/// Least-squares fit of `A + B cos(2Nμ)` over cycle numbers `cycles`.
pub fn fit_oscillation(cycles: &[usize], populations: &[f64]) -> Result<LeakageOscillationModel> {
    if cycles.len() != populations.len() || cycles.len() < 4 {
        return Err(Error::FitDegenerate);
    }
    let k: Vec<f64> = cycles.iter().map(|&c| c as f64).collect();
    let grid = 4000;
    let mu_at = |i: usize| 0.5 * PI * i as f64 / grid as f64;
    let sse = |mu: f64| linear_fit(&k, populations, mu).map_or(f64::INFINITY, |r| r.2);
    let best = (1..=grid).min_by(|&a, &b| sse(mu_at(a)).total_cmp(&sse(mu_at(b)))).expect("grid is non-empty");
    let mu = golden_max(|m| -sse(m), mu_at(best - 1).max(1e-9), mu_at((best + 1).min(grid)), 1e-13);
    let (a, b, s) = linear_fit(&k, populations, mu).ok_or(Error::FitDegenerate)?;
    let rms = (s / k.len() as f64).sqrt();
    let spread = populations.iter().fold(0.0f64, |m, &p| m.max(p)) - populations.iter().fold(1.0f64, |m, &p| m.min(p));
    if b.abs() < 1e-12 || spread < 1e-12 {
        return Err(Error::FitDegenerate);
    }
    Ok(LeakageOscillationModel { a, b, mu, residual_rms: rms })
}
