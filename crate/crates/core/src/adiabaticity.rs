//! Adiabatic factors `D_ik = |⟨i|∂H/∂ω_c|k⟩| / (E_k − E_i)²` along a coupler
//! sweep, their per-state sums `D_k` and the total over a state set.
//!
//! Energies in the denominator are angular frequencies in rad/ns and the
//! derivative is taken with respect to the angular coupler frequency, so
//! `D` is in ns² and `D · dω_c/dt` is dimensionless.

use serde::{Deserialize, Serialize};

use crate::device::{ControlledHamiltonian, HilbertLabel, COMPUTATIONAL};
use crate::error::{Error, Result};
use crate::spectrum::{track_spectrum_with, TrackOptions, TrackedSpectrum};
use crate::{angular, RMatrix};

pub const DEFAULT_FD_STEP: f64 = 0.1;
pub const SINGULAR_GAP: f64 = 1e-6;

/// Central-difference `∂H/∂f_c` (dimensionless, both in MHz) with step
/// `h` MHz. The coupler frequency enters the diagonal and the couplings.
pub fn dh_domega_step<M: ControlledHamiltonian + ?Sized>(model: &M, fc: f64, h: f64) -> Result<RMatrix> {
    let up = model.hamiltonian(fc + h)?;
    let down = model.hamiltonian(fc - h)?;
    let n = up.dim();
    Ok(RMatrix::from_fn(n, |i, j| {
        let a = (up[(i, j)] - down[(i, j)]) / (2.0 * h);
        let b = (up[(j, i)] - down[(j, i)]) / (2.0 * h);
        0.5 * (a + b)
    }))
}

pub fn dh_domega<M: ControlledHamiltonian + ?Sized>(model: &M, fc: f64) -> Result<RMatrix> {
    dh_domega_step(model, fc, DEFAULT_FD_STEP)
}

/// Relative Frobenius change of the derivative when `h` is halved.
pub fn dh_domega_self_check<M: ControlledHamiltonian + ?Sized>(model: &M, fc: f64, h: f64) -> Result<f64> {
    let a = dh_domega_step(model, fc, h)?;
    let b = dh_domega_step(model, fc, 0.5 * h)?;
    Ok(a.sub(&b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartnerFilter {
    /// Every tracked state other than the source.
    All,
    /// Only states with the source's total excitation number.
    SameManifold,
}

#[derive(Debug, Clone, Copy)]
pub struct DFactorOptions {
    pub fd_step: f64,
    pub singular_gap: f64,
    pub partners: PartnerFilter,
    pub track: TrackOptions,
}

impl Default for DFactorOptions {
    fn default() -> Self {
        DFactorOptions {
            fd_step: DEFAULT_FD_STEP,
            singular_gap: SINGULAR_GAP,
            partners: PartnerFilter::All,
            track: TrackOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DFactorCurve {
    pub grid: Vec<f64>,
    pub labels: Vec<HilbertLabel>,
    pub sources: Vec<HilbertLabel>,
    /// `components[s][p][i]`: D for source `s`, grid point `p`, partner
    /// label index `i` (ns²). `None` for the source itself, filtered
    /// partners and singular gaps.
    pub components: Vec<Vec<Vec<Option<f64>>>>,
    /// `per_state[s][p]` = Σ_i D_ik.
    pub per_state: Vec<Vec<f64>>,
    /// Σ over sources of `per_state`.
    pub total: Vec<f64>,
    /// False where a singular gap removed the point from the curve.
    pub valid: Vec<bool>,
}

impl DFactorCurve {
    pub fn component(&self, source: HilbertLabel, partner: HilbertLabel) -> Option<Vec<Option<f64>>> {
        let s = self.sources.iter().position(|&l| l == source)?;
        let i = self.labels.iter().position(|&l| l == partner)?;
        Some(self.components[s].iter().map(|row| row[i]).collect())
    }

    pub fn per_state_curve(&self, source: HilbertLabel) -> Option<&[f64]> {
        let s = self.sources.iter().position(|&l| l == source)?;
        Some(&self.per_state[s])
    }

    /// Partner with the largest single-point D for `source`.
    pub fn dominant_partner(&self, source: HilbertLabel) -> Option<(HilbertLabel, f64, f64)> {
        let s = self.sources.iter().position(|&l| l == source)?;
        let mut best: Option<(HilbertLabel, f64, f64)> = None;
        for (p, row) in self.components[s].iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                if let Some(v) = *v {
                    if best.is_none_or(|b| v > b.1) {
                        best = Some((self.labels[i], v, self.grid[p]));
                    }
                }
            }
        }
        best
    }
}

/// D factors for `sources` from an existing tracked spectrum.
pub fn dfactor_from_spectrum<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    spectrum: &TrackedSpectrum,
    sources: &[HilbertLabel],
    opts: &DFactorOptions,
) -> Result<DFactorCurve> {
    let n = spectrum.labels.len();
    let src_idx: Vec<usize> = sources
        .iter()
        .map(|&l| spectrum.label_index(l).ok_or_else(|| Error::InvalidParameter(format!("state {l} is not tracked"))))
        .collect::<Result<_>>()?;
    let np = spectrum.grid.len();
    let mut components = vec![Vec::with_capacity(np); sources.len()];
    let mut per_state = vec![Vec::with_capacity(np); sources.len()];
    let mut total = Vec::with_capacity(np);
    let mut valid = Vec::with_capacity(np);
    for p in 0..np {
        let fc = spectrum.grid[p];
        let dh = dh_domega_step(model, fc, opts.fd_step)?;
        let v = &spectrum.vectors[p];
        let e = &spectrum.energies[p];
        let mut point_ok = true;
        let mut point_total = 0.0;
        for (s, &k) in src_idx.iter().enumerate() {
            let vk = v.column(k);
            let w = dh.matvec(&vk);
            let mut row = vec![None; n];
            let mut sum = 0.0;
            for i in 0..n {
                if i == k {
                    continue;
                }
                if opts.partners == PartnerFilter::SameManifold
                    && spectrum.labels[i].excitations() != spectrum.labels[k].excitations()
                {
                    continue;
                }
                let gap = e[k] - e[i];
                if gap.abs() < opts.singular_gap {
                    point_ok = false;
                    continue;
                }
                let m: f64 = (0..n).map(|r| v[(r, i)] * w[r]).sum();
                // ∂H/∂ω_c is the same number whether both sides are linear
                // or angular, so only the gap needs converting.
                let d = m.abs() / angular(gap).powi(2);
                row[i] = Some(d);
                sum += d;
            }
            components[s].push(row);
            per_state[s].push(sum);
            point_total += sum;
        }
        total.push(point_total);
        valid.push(point_ok);
    }
    for (p, ok) in valid.iter().enumerate() {
        if !ok {
            total[p] = f64::NAN;
            for s in per_state.iter_mut() {
                s[p] = f64::NAN;
            }
        }
    }
    if !valid.iter().any(|&v| v) {
        return Err(Error::SingularGap);
    }
    Ok(DFactorCurve {
        grid: spectrum.grid.clone(),
        labels: spectrum.labels.clone(),
        sources: sources.to_vec(),
        components,
        per_state,
        total,
        valid,
    })
}

/// D factors of a single source state on `grid`, labels anchored at `anchor`.
pub fn adiabatic_factor<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    grid: &[f64],
    source: HilbertLabel,
    anchor: f64,
) -> Result<DFactorCurve> {
    let opts = DFactorOptions::default();
    let spec = track_spectrum_with(model, grid, anchor, &opts.track)?;
    dfactor_from_spectrum(model, &spec, &[source], &opts)
}

/// Total D over `computational` (defaults to the four computational states).
pub fn total_d<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    grid: &[f64],
    anchor: f64,
    computational: Option<&[HilbertLabel]>,
) -> Result<DFactorCurve> {
    total_d_with(model, grid, anchor, computational, &DFactorOptions::default())
}

pub fn total_d_with<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    grid: &[f64],
    anchor: f64,
    computational: Option<&[HilbertLabel]>,
    opts: &DFactorOptions,
) -> Result<DFactorCurve> {
    let spec = track_spectrum_with(model, grid, anchor, &opts.track)?;
    dfactor_from_spectrum(model, &spec, computational.unwrap_or(&COMPUTATIONAL), opts)
}

/// Total D on `[lo, hi]` with the grid refined until the trapezoid integral
/// of D over angular frequency changes by less than `rel_tol`.
pub fn total_d_adaptive<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    lo: f64,
    hi: f64,
    anchor: f64,
    rel_tol: f64,
    opts: &DFactorOptions,
) -> Result<DFactorCurve> {
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!("empty range [{lo}, {hi}]")));
    }
    let n0 = 257;
    let mut grid: Vec<f64> = (0..n0).map(|i| lo + (hi - lo) * i as f64 / (n0 - 1) as f64).collect();
    let mut prev: Option<f64> = None;
    for _ in 0..10 {
        let curve = total_d_with(model, &grid, anchor, None, opts)?;
        let g = integrate_total(&curve);
        if let Some(pg) = prev {
            if (g - pg).abs() <= rel_tol * g.abs() {
                return Ok(curve);
            }
        }
        prev = Some(g);
        let d = bridged_total(&curve);
        let mut next = Vec::with_capacity(2 * grid.len());
        for i in 0..grid.len() - 1 {
            next.push(grid[i]);
            let (a, b) = (d[i], d[i + 1]);
            if (a - b).abs() > 1e-3 * a.max(b) {
                next.push(0.5 * (grid[i] + grid[i + 1]));
            }
        }
        next.push(grid[grid.len() - 1]);
        if next.len() == grid.len() {
            return Ok(curve);
        }
        grid = next;
    }
    total_d_with(model, &grid, anchor, None, opts)
}

/// Total D with singular-gap points filled by linear interpolation in log D.
pub fn bridged_total(curve: &DFactorCurve) -> Vec<f64> {
    let n = curve.total.len();
    let good: Vec<usize> = (0..n).filter(|&p| curve.valid[p] && curve.total[p] > 0.0).collect();
    let mut out = curve.total.clone();
    if good.is_empty() {
        return out;
    }
    for p in 0..n {
        if curve.valid[p] && curve.total[p] > 0.0 {
            continue;
        }
        let right = good.partition_point(|&g| g < p);
        out[p] = if right == 0 {
            curve.total[good[0]]
        } else if right == good.len() {
            curve.total[good[good.len() - 1]]
        } else {
            let (a, b) = (good[right - 1], good[right]);
            let t = (curve.grid[p] - curve.grid[a]) / (curve.grid[b] - curve.grid[a]);
            (curve.total[a].ln() * (1.0 - t) + curve.total[b].ln() * t).exp()
        };
    }
    out
}

/// `∫ D dω` over the curve's grid (trapezoid, ω in rad/ns), in ns.
pub fn integrate_total(curve: &DFactorCurve) -> f64 {
    let d = bridged_total(curve);
    curve.grid.windows(2).zip(d.windows(2)).map(|(g, v)| 0.5 * (v[0] + v[1]) * angular(g[1] - g[0])).sum()
}
