//! Closed-system time evolution under coupler pulses, conditional-phase
//! extraction and calibration, and leakage amplification.
//!
//! The propagator is piecewise constant: each solver step uses the exact
//! exponential of H at the step midpoint, built from its eigendecomposition.
//! Phases are referenced to the dressed energies at the idle point, i.e. the
//! value of the first pulse sample.

mod leakage;

pub use leakage::*;

use serde::Serialize;
use std::f64::consts::PI;

use crate::device::{ControlledHamiltonian, DeviceParams, HilbertLabel, COMPUTATIONAL};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, sym_eigen_warm};
use crate::pulse::{awp_from_integral, envelope_to_flux, waveform_flux_to_freq, AwpIntegral, WaveUnit, Waveform};
use crate::roots::{brent, brent_with_values};
use crate::spectrum::{anchor_point, continue_to, TrackOptions, TrackedPoint};
use crate::{Complex, RMatrix, RAD_PER_MHZ_NS};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvolveOptions {
    /// Solver step (ns).
    pub dt_solver: f64,
    /// Repeat with halved steps until populations agree.
    pub check: bool,
    /// Largest accepted population change under step halving.
    pub tolerance: f64,
    /// Smallest step tried before giving up (ns).
    pub dt_floor: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { dt_solver: 0.005, check: true, tolerance: 1e-6, dt_floor: 1e-4 }
    }
}

impl EvolveOptions {
    pub fn unchecked(dt_solver: f64) -> Self {
        EvolveOptions { dt_solver, check: false, ..Default::default() }
    }
}

/// A set of state vectors evolved together, stored row-major as
/// `dim × count` (column `c` is state `c`).
#[derive(Debug, Clone)]
pub struct StateSet {
    pub dim: usize,
    pub count: usize,
    pub data: Vec<Complex>,
}

impl StateSet {
    pub fn from_columns(cols: &[Vec<Complex>]) -> Self {
        let dim = cols[0].len();
        let count = cols.len();
        let mut data = vec![Complex::new(0.0, 0.0); dim * count];
        for (c, col) in cols.iter().enumerate() {
            for i in 0..dim {
                data[i * count + c] = col[i];
            }
        }
        StateSet { dim, count, data }
    }

    pub fn from_real_columns(m: &RMatrix, columns: &[usize]) -> Self {
        let cols: Vec<Vec<Complex>> =
            columns.iter().map(|&j| m.column(j).into_iter().map(|x| Complex::new(x, 0.0)).collect()).collect();
        StateSet::from_columns(&cols)
    }

    pub fn column(&self, c: usize) -> Vec<Complex> {
        (0..self.dim).map(|i| self.data[i * self.count + c]).collect()
    }

    pub fn max_norm_deviation(&self) -> f64 {
        (0..self.count)
            .map(|c| {
                let n: f64 = (0..self.dim).map(|i| self.data[i * self.count + c].norm_sqr()).sum();
                (n.sqrt() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    fn max_population_shift(&self, other: &StateSet) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).abs()).fold(0.0, f64::max)
    }

    /// Applies `V diag(e^{−iθ_k}) Vᵀ` in place.
    fn apply_phased(&mut self, v: &RMatrix, theta: &[f64], scratch: &mut Vec<Complex>) {
        let (n, m) = (self.dim, self.count);
        scratch.clear();
        scratch.resize(n * m, Complex::new(0.0, 0.0));
        for k in 0..n {
            for i in 0..n {
                let vik = v[(i, k)];
                if vik == 0.0 {
                    continue;
                }
                let row = &self.data[i * m..(i + 1) * m];
                let out = &mut scratch[k * m..(k + 1) * m];
                for c in 0..m {
                    out[c] += row[c] * vik;
                }
            }
        }
        for k in 0..n {
            let ph = Complex::from_polar(1.0, -theta[k]);
            for c in 0..m {
                scratch[k * m + c] *= ph;
            }
        }
        for x in self.data.iter_mut() {
            *x = Complex::new(0.0, 0.0);
        }
        for i in 0..n {
            for k in 0..n {
                let vik = v[(i, k)];
                if vik == 0.0 {
                    continue;
                }
                let src = &scratch[k * m..(k + 1) * m];
                let out = &mut self.data[i * m..(i + 1) * m];
                for c in 0..m {
                    out[c] += src[c] * vik;
                }
            }
        }
    }
}

/// Evolves `states` through `pulse` (MHz) with a fixed solver step.
pub fn propagate_fixed<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    pulse: &Waveform,
    states: &StateSet,
    dt_solver: f64,
) -> Result<StateSet> {
    if pulse.unit != WaveUnit::CouplerMhz {
        return Err(Error::InvalidParameter("pulse must be in coupler frequency (MHz)".into()));
    }
    if !(dt_solver > 0.0) {
        return Err(Error::InvalidParameter("solver step must be positive".into()));
    }
    let (lo, hi) = model.control_range();
    let slack = 1e-9 * hi.abs().max(1.0);
    for (index, &f) in pulse.samples.iter().enumerate() {
        if !(f >= lo - slack && f <= hi + slack) {
            return Err(Error::SampleOutOfRange { index, value: f });
        }
    }
    let total = pulse.duration();
    let mut out = states.clone();
    if total <= 0.0 {
        return Ok(out);
    }
    let steps = ((total / dt_solver) - 1e-9).ceil().max(1.0) as usize;
    let h = total / steps as f64;
    let mut scratch = Vec::new();
    let mut last: Option<(f64, RMatrix, Vec<f64>)> = None;
    for s in 0..steps {
        let f = pulse.value_at((s as f64 + 0.5) * h);
        let reuse = matches!(&last, Some((lf, _, _)) if *lf == f);
        if !reuse {
            let hm = model.hamiltonian(f)?;
            let eig = match &last {
                Some((_, v, _)) => sym_eigen_warm(&hm, v)?,
                None => sym_eigen(&hm)?,
            };
            let theta: Vec<f64> = eig.values.iter().map(|e| RAD_PER_MHZ_NS * e * h).collect();
            last = Some((f, eig.vectors, theta));
        }
        let (_, v, theta) = last.as_ref().expect("set above");
        out.apply_phased(v, theta, &mut scratch);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub states: StateSet,
    pub dt_used: f64,
    /// Largest population change between the last two step sizes.
    pub halving_shift: Option<f64>,
}

/// Evolves `states`, halving the step until populations change by less
/// than the tolerance (when the check is enabled).
pub fn propagate<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    pulse: &Waveform,
    states: &StateSet,
    opts: &EvolveOptions,
) -> Result<Propagation> {
    let mut dt = opts.dt_solver;
    let mut coarse = propagate_fixed(model, pulse, states, dt)?;
    if !opts.check {
        return Ok(Propagation { states: coarse, dt_used: dt, halving_shift: None });
    }
    loop {
        let half = 0.5 * dt;
        if half < opts.dt_floor {
            let fine = propagate_fixed(model, pulse, states, half)?;
            return Err(Error::ConvergenceFailure { dt: half, shift: fine.max_population_shift(&coarse) });
        }
        let fine = propagate_fixed(model, pulse, states, half)?;
        let shift = fine.max_population_shift(&coarse);
        if shift < opts.tolerance {
            return Ok(Propagation { states: fine, dt_used: half, halving_shift: Some(shift) });
        }
        coarse = fine;
        dt = half;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionResult {
    /// Amplitudes in the bare product basis.
    pub final_state: Vec<Complex>,
    /// |‖ψ‖ − 1| at the end.
    pub unitary_check: f64,
    /// arg⟨k̃|ψ_k(T)⟩ for the idle dressed computational states |00,0⟩,
    /// |10,0⟩, |01,0⟩, |11,0⟩ evolved on their own. Absent when the model
    /// lacks those labels.
    pub phase_per_computational_state: Option<[f64; 4]>,
    pub dt_used: f64,
    pub halving_shift: Option<f64>,
}

fn idle_point<M: ControlledHamiltonian + ?Sized>(model: &M, pulse: &Waveform) -> Result<TrackedPoint> {
    anchor_point(model, pulse.first(), &TrackOptions::default())
}

fn computational_indices<M: ControlledHamiltonian + ?Sized>(model: &M) -> Option<[usize; 4]> {
    let mut out = [0; 4];
    for (k, l) in COMPUTATIONAL.iter().enumerate() {
        out[k] = model.index_of(*l)?;
    }
    Some(out)
}

fn overlap(v: &RMatrix, col: usize, psi: &[Complex]) -> Complex {
    psi.iter().enumerate().fold(Complex::new(0.0, 0.0), |acc, (i, a)| acc + a * v[(i, col)])
}

/// Evolves `initial` (bare basis, unit norm) through `pulse`.
pub fn evolve<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    pulse: &Waveform,
    initial: &[Complex],
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    let norm: f64 = initial.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("initial state norm {norm} is not 1")));
    }
    let comp = computational_indices(model);
    let idle = if comp.is_some() { Some(idle_point(model, pulse)?) } else { None };
    let mut cols = vec![initial.to_vec()];
    if let (Some(c), Some(p)) = (comp, &idle) {
        for &k in &c {
            cols.push(p.vectors.column(k).into_iter().map(|x| Complex::new(x, 0.0)).collect());
        }
    }
    let prop = propagate(model, pulse, &StateSet::from_columns(&cols), opts)?;
    let final_state = prop.states.column(0);
    let unitary_check = prop.states.max_norm_deviation();
    let phases = match (comp, &idle) {
        (Some(c), Some(p)) => {
            let mut ph = [0.0; 4];
            for (j, &k) in c.iter().enumerate() {
                ph[j] = overlap(&p.vectors, k, &prop.states.column(j + 1)).arg();
            }
            Some(ph)
        }
        _ => None,
    };
    Ok(EvolutionResult {
        final_state,
        unitary_check,
        phase_per_computational_state: phases,
        dt_used: prop.dt_used,
        halving_shift: prop.halving_shift,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalPhase {
    /// φ₁₁ − φ₁₀ − φ₀₁ + φ₀₀ reduced to [0, 2π).
    pub phase: f64,
    /// Per-state phase beyond the idle dynamical phase, in (−π, π], for
    /// |00,0⟩, |10,0⟩, |01,0⟩, |11,0⟩.
    pub state_phases: [f64; 4],
    /// 1 − |⟨k̃|ψ_k(T)⟩|² per computational state.
    pub leakage: [f64; 4],
    /// True when any residual exceeds 1e-2.
    pub high_leakage: bool,
    pub unitary_check: f64,
    pub dt_used: f64,
    pub halving_shift: Option<f64>,
}

fn wrap_pi(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

pub fn conditional_phase<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    pulse: &Waveform,
    opts: &EvolveOptions,
) -> Result<ConditionalPhase> {
    let comp = computational_indices(model)
        .ok_or_else(|| Error::InvalidParameter("model lacks the computational states".into()))?;
    let idle = idle_point(model, pulse)?;
    let states = StateSet::from_real_columns(&idle.vectors, &comp);
    let prop = propagate(model, pulse, &states, opts)?;
    let t = pulse.duration();
    let mut state_phases = [0.0; 4];
    let mut leakage = [0.0; 4];
    for (j, &k) in comp.iter().enumerate() {
        let a = overlap(&idle.vectors, k, &prop.states.column(j));
        leakage[j] = (1.0 - a.norm_sqr()).max(0.0);
        state_phases[j] = wrap_pi(-(a.arg() + RAD_PER_MHZ_NS * idle.energies[k] * t));
    }
    let [p00, p10, p01, p11] = state_phases;
    let phase = (p11 - p10 - p01 + p00).rem_euclid(2.0 * PI);
    Ok(ConditionalPhase {
        phase,
        state_phases,
        leakage,
        high_leakage: leakage.iter().any(|&l| l > 1e-2),
        unitary_check: prop.states.max_norm_deviation(),
        dt_used: prop.dt_used,
        halving_shift: prop.halving_shift,
    })
}

/// A one-parameter pulse family for amplitude calibration.
pub trait PulseFamily {
    /// Largest scale keeping the pulse inside the coupler band.
    fn max_scale(&self) -> f64;
    /// Frequency waveform (MHz) at `scale`.
    fn waveform(&self, scale: f64) -> Result<Waveform>;
}

/// `Φ(t) = idle_flux − scale·V(t)` for a normalized envelope `V`.
pub struct FluxEnvelopeFamily<'a> {
    pub envelope: &'a Waveform,
    pub device: &'a DeviceParams,
    pub idle_flux: f64,
}

impl PulseFamily for FluxEnvelopeFamily<'_> {
    fn max_scale(&self) -> f64 {
        self.idle_flux / self.envelope.max()
    }

    fn waveform(&self, scale: f64) -> Result<Waveform> {
        waveform_flux_to_freq(&envelope_to_flux(self.envelope, self.idle_flux, scale)?, &self.device.coupler)
    }
}

/// AWP with λ as the scale.
pub struct AwpFamily<'a> {
    pub integral: &'a AwpIntegral,
    pub t_cz: f64,
    pub dt: f64,
    pub pad: (f64, f64),
}

impl PulseFamily for AwpFamily<'_> {
    fn max_scale(&self) -> f64 {
        self.integral.max_lambda(self.t_cz) * (1.0 - 1e-9)
    }

    fn waveform(&self, scale: f64) -> Result<Waveform> {
        Ok(awp_from_integral(self.integral, self.t_cz, scale, self.dt)?.with_padding(self.pad.0, self.pad.1))
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationOptions {
    pub evolve: EvolveOptions,
    /// Solver step for the bracketing scan.
    pub scan_dt: f64,
    /// Coarse steps across the full amplitude range. A step is split while
    /// the wrapped phase jumps by more than π/2.
    pub scan_points: usize,
    pub phase_tol: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { evolve: EvolveOptions::default(), scan_dt: 0.02, scan_points: 16, phase_tol: 1e-5 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub scale: f64,
    pub waveform: Waveform,
    pub result: ConditionalPhase,
    /// Largest bare coupler frequency of the calibrated pulse (MHz).
    pub max_frequency: f64,
    /// Phase was increasing across the scan up to the bracket.
    pub monotone: bool,
    pub evaluations: usize,
}

/// Finds the scale at which the conditional phase reaches `target_phase`
/// (radians, counted continuously from zero amplitude).
pub fn calibrate_amplitude<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    family: &dyn PulseFamily,
    target_phase: f64,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    let mut evaluations = 0;
    let finish = |scale: f64, evaluations: usize, monotone: bool| -> Result<Calibration> {
        let waveform = family.waveform(scale)?;
        let result = conditional_phase(model, &waveform, &opts.evolve)?;
        Ok(Calibration {
            scale,
            max_frequency: waveform.max(),
            waveform,
            result,
            monotone,
            evaluations: evaluations + 1,
        })
    };
    if target_phase == 0.0 {
        return finish(0.0, evaluations, true);
    }
    let smax = family.max_scale();
    let n = opts.scan_points.max(2);
    let coarse = EvolveOptions::unchecked(opts.scan_dt);
    let mut phase_at = |s: f64| -> Result<f64> {
        evaluations += 1;
        Ok(conditional_phase(model, &family.waveform(s)?, &coarse)?.phase)
    };
    // Walk up in amplitude, unwrapping as we go. An interval whose wrapped
    // jump exceeds π/2 is split so the unwrap stays unambiguous.
    let mut scales = vec![0.0];
    let mut unwrapped = vec![0.0];
    let mut raw = 0.0;
    let step = smax / n as f64;
    let min_step = step / 1024.0;
    let mut next = step;
    let bracket = loop {
        let (s_prev, u_prev) = (*scales.last().unwrap(), *unwrapped.last().unwrap());
        let s = next.min(smax);
        let p = phase_at(s)?;
        let jump = wrap_pi(p - raw);
        if jump.abs() > 0.5 * PI && s - s_prev > min_step {
            next = 0.5 * (s_prev + s);
            continue;
        }
        raw = p;
        scales.push(s);
        unwrapped.push(u_prev + jump);
        let i = scales.len() - 2;
        if unwrapped[i] < target_phase && target_phase <= unwrapped[i + 1] {
            break i;
        }
        if s >= smax {
            return Err(Error::Unreachable { target: target_phase, reached: unwrapped[i + 1] });
        }
        next = s + step;
    };
    let i = bracket;
    let monotone = unwrapped[..=i + 1].windows(2).all(|w| w[1] > w[0]);
    let fine = EvolveOptions::unchecked(opts.evolve.dt_solver);
    let (s0, s1) = (scales[i], scales[i + 1]);
    let (u0, u1) = (unwrapped[i], unwrapped[i + 1]);
    let mut g = |s: f64| -> Result<f64> {
        let guess = u0 + (u1 - u0) * (s - s0) / (s1 - s0);
        let p = if s == 0.0 { 0.0 } else { conditional_phase(model, &family.waveform(s)?, &fine)?.phase };
        evaluations += 1;
        Ok(guess + wrap_pi(p - guess) - target_phase)
    };
    let f0 = g(s0)?;
    let f1 = g(s1)?;
    let scale = brent_with_values(&mut g, s0, s1, f0, f1, 1e-12 * smax, opts.phase_tol, 100)?;
    finish(scale, evaluations, monotone)
}

/// Distance between two phases on the circle.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_pi(a - b).abs()
}

/// Dressed coupler frequency E(|00,1⟩) − E(|00,0⟩) at bare `fc`, with labels
/// carried from `anchor`.
pub fn dressed_coupler_frequency(device: &DeviceParams, anchor: f64, fc: f64) -> Result<f64> {
    let opts = TrackOptions::default();
    let start = anchor_point(device, anchor, &opts)?;
    let p = continue_to(device, &start, fc, &opts)?;
    let b = device.basis();
    let c = b.index(HilbertLabel::new(0, 0, 1)).expect("coupler has two levels");
    let g = b.index(HilbertLabel::new(0, 0, 0)).expect("ground state");
    Ok(p.energies[c] - p.energies[g])
}

/// How the frequencies that set up a pulse are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyConvention {
    /// Bare coupler frequency.
    Bare,
    /// Dressed coupler transition E(|00,1⟩) − E(|00,0⟩).
    Dressed,
}

/// Bare coupler frequency for a frequency given in `convention`.
pub fn to_bare_frequency(device: &DeviceParams, anchor: f64, f: f64, convention: FrequencyConvention) -> Result<f64> {
    match convention {
        FrequencyConvention::Bare => Ok(f),
        FrequencyConvention::Dressed => {
            let (lo, hi) = device.control_range();
            let target = |x: f64| dressed_coupler_frequency(device, anchor, x).map(|d| d - f);
            brent(target, lo + 1e-6, hi, 1e-9, 1e-9, 200)
        }
    }
}

/// Incoherent error `Σ_q (t/(5T₁) + 2t/(5T₂E))` for gate time `t_total` (ns)
/// and coherence times in µs.
pub fn incoherent_error(t_total: f64, t1_q1: f64, t2e_q1: f64, t1_q2: f64, t2e_q2: f64) -> f64 {
    let t = t_total * 1e-3;
    [(t1_q1, t2e_q1), (t1_q2, t2e_q2)].iter().map(|&(t1, t2)| t / (5.0 * t1) + 2.0 * t / (5.0 * t2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rabi {
        omega: f64,
    }

    impl ControlledHamiltonian for Rabi {
        fn labels(&self) -> Vec<HilbertLabel> {
            vec![HilbertLabel::new(0, 0, 0), HilbertLabel::new(0, 0, 1)]
        }
        fn hamiltonian(&self, detuning: f64) -> Result<RMatrix> {
            Ok(RMatrix::from_rows(&[vec![0.0, 0.5 * self.omega], vec![0.5 * self.omega, detuning]]))
        }
        fn control_range(&self) -> (f64, f64) {
            (-1e6, 1e6)
        }
    }

    #[test]
    fn rabi_formula() {
        let (omega, delta) = (40.0, 25.0);
        let m = Rabi { omega };
        let pulse = Waveform::constant(delta, 30.0, 0.5, WaveUnit::CouplerMhz).unwrap();
        let psi0 = vec![Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)];
        let r = evolve(&m, &pulse, &psi0, &EvolveOptions::default()).unwrap();
        let w = (omega * omega + delta * delta).sqrt();
        for t in [30.0] {
            let p1 = (omega / w).powi(2) * (0.5 * RAD_PER_MHZ_NS * w * t).sin().powi(2);
            assert!((r.final_state[1].norm_sqr() - p1).abs() < 1e-6);
        }
        assert!(r.unitary_check < 1e-9);
    }

    #[test]
    fn incoherent_error_is_linear_in_time() {
        assert_eq!(incoherent_error(0.0, 80.0, 100.0, 90.0, 120.0), 0.0);
        let a = incoherent_error(28.0, 81.4, 111.1, 91.2, 124.8);
        let b = incoherent_error(56.0, 81.4, 111.1, 91.2, 124.8);
        assert!((b - 2.0 * a).abs() < 1e-18);
    }
}
