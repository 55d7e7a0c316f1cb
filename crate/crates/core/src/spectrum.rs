//! Eigenspectra over coupler-frequency sweeps with adiabatic state tracking.
//!
//! Labels are assigned at an anchor point by the largest overlap with the
//! bare product states, then carried outward by eigenvector continuity.
//! Steps where continuity is weak are bisected.

use serde::Serialize;

use crate::device::{ControlledHamiltonian, HilbertLabel, COMPUTATIONAL};
use crate::error::{Error, Result};
use crate::linalg::{herm_eigen, sym_eigen, sym_eigen_warm};
use crate::roots::brent_with_values;
use crate::{CMatrix, HermEigen, RMatrix, SymEigen};

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
pub fn diagonalize(h: &CMatrix) -> Result<HermEigen> {
    herm_eigen(h)
}

/// Real symmetric specialization of [`diagonalize`].
pub fn diagonalize_real(h: &RMatrix) -> Result<SymEigen> {
    sym_eigen(h)
}

#[derive(Debug, Clone, Copy)]
pub struct TrackOptions {
    /// Minimum overlap² between consecutive eigenvectors of one label.
    pub overlap_threshold: f64,
    /// Maximum bisection depth per grid step.
    pub max_depth: usize,
    /// Eigenvalues closer than this (MHz) are treated as degenerate.
    pub degeneracy_tol: f64,
    /// Optional bound on the energy change of a label per accepted step (MHz).
    pub max_energy_jump: Option<f64>,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions { overlap_threshold: 0.5, max_depth: 12, degeneracy_tol: 1e-9, max_energy_jump: None }
    }
}

/// Dressed states at one control value, stored in label order.
#[derive(Debug, Clone)]
pub struct TrackedPoint {
    pub control: f64,
    pub energies: Vec<f64>,
    /// Column `l` is the eigenvector carrying label `l`.
    pub vectors: RMatrix,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct TrackedSpectrum {
    pub grid: Vec<f64>,
    pub labels: Vec<HilbertLabel>,
    /// `energies[p][l]` in MHz.
    pub energies: Vec<Vec<f64>>,
    pub vectors: Vec<RMatrix>,
    pub anchor: f64,
    /// Grid points where degenerate eigenvalues forced subspace alignment.
    pub degeneracies: Vec<f64>,
    /// Number of bisection points inserted while tracking.
    pub refinements: usize,
}

impl TrackedSpectrum {
    pub fn label_index(&self, label: HilbertLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn energy_curve(&self, label: HilbertLabel) -> Option<Vec<f64>> {
        let k = self.label_index(label)?;
        Some(self.energies.iter().map(|e| e[k]).collect())
    }

    pub fn point(&self, p: usize) -> TrackedPoint {
        TrackedPoint {
            control: self.grid[p],
            energies: self.energies[p].clone(),
            vectors: self.vectors[p].clone(),
            degenerate: false,
        }
    }

    /// ζ on every grid point.
    pub fn zeta_curve(&self) -> Result<Vec<f64>> {
        let idx = computational_indices(&self.labels)?;
        Ok(self.energies.iter().map(|e| zeta_from(e, idx)).collect())
    }
}

fn computational_indices(labels: &[HilbertLabel]) -> Result<[usize; 4]> {
    let mut out = [0; 4];
    for (k, l) in COMPUTATIONAL.iter().enumerate() {
        out[k] = labels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::InvalidParameter(format!("state {l} is not tracked")))?;
    }
    Ok(out)
}

fn zeta_from(e: &[f64], [i00, i10, i01, i11]: [usize; 4]) -> f64 {
    e[i11] - e[i10] - e[i01] + e[i00]
}

/// Labels eigenstates at `control` by their dominant bare component.
pub fn anchor_point<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    control: f64,
    opts: &TrackOptions,
) -> Result<TrackedPoint> {
    let eig = sym_eigen(&model.hamiltonian(control)?)?;
    let n = eig.values.len();
    let mut vectors = RMatrix::zeros(n);
    let mut energies = vec![0.0; n];
    let mut taken = vec![false; n];
    for j in 0..n {
        let (b, w) =
            (0..n)
                .map(|b| (b, eig.vectors[(b, j)].powi(2)))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if w <= opts.overlap_threshold || taken[b] {
            return Err(Error::TrackingAmbiguous { at: control, overlap: w });
        }
        taken[b] = true;
        energies[b] = eig.values[j];
        for i in 0..n {
            vectors[(i, b)] = eig.vectors[(i, j)];
        }
    }
    Ok(TrackedPoint { control, energies, vectors, degenerate: false })
}

/// Rotates eigenvectors inside clusters of (near-)degenerate eigenvalues so
/// that they follow the previous point's vectors. Returns whether any
/// cluster was found.
fn align_degenerate(prev: &RMatrix, eig: &mut SymEigen, tol: f64) -> bool {
    let n = eig.values.len();
    let mut found = false;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig.values[end] - eig.values[end - 1] < tol {
            end += 1;
        }
        let m = end - start;
        if m > 1 {
            found = true;
            // Projection weights of every previous vector onto the cluster.
            let proj: Vec<Vec<f64>> = (0..n)
                .map(|l| (start..end).map(|j| (0..n).map(|i| eig.vectors[(i, j)] * prev[(i, l)]).sum()).collect())
                .collect();
            let mut order: Vec<usize> = (0..n).collect();
            let weight = |l: usize| proj[l].iter().map(|x: &f64| x * x).sum::<f64>();
            order.sort_by(|&a, &b| weight(b).partial_cmp(&weight(a)).unwrap().then(a.cmp(&b)));
            let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(m);
            for &l in order.iter() {
                if chosen.len() == m {
                    break;
                }
                let mut v: Vec<f64> =
                    (0..n).map(|i| (0..m).map(|c| eig.vectors[(i, start + c)] * proj[l][c]).sum()).collect();
                for u in &chosen {
                    let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    v.iter_mut().for_each(|x| *x /= norm);
                    chosen.push(v);
                }
            }
            if chosen.len() == m {
                for (c, v) in chosen.iter().enumerate() {
                    for i in 0..n {
                        eig.vectors[(i, start + c)] = v[i];
                    }
                }
            }
        }
        start = end;
    }
    found
}

enum StepOutcome {
    Accepted(TrackedPoint),
    Rejected(f64),
}

fn try_step<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    from: &TrackedPoint,
    to: f64,
    opts: &TrackOptions,
) -> Result<StepOutcome> {
    let h = model.hamiltonian(to)?;
    let mut eig = sym_eigen_warm(&h, &from.vectors)?;
    let degenerate = align_degenerate(&from.vectors, &mut eig, opts.degeneracy_tol);
    let n = eig.values.len();
    let overlaps = from.vectors.tmatmul(&eig.vectors);
    let mut vectors = RMatrix::zeros(n);
    let mut energies = vec![0.0; n];
    let mut used = vec![false; n];
    for l in 0..n {
        let (j, o) =
            (0..n)
                .map(|j| (j, overlaps[(l, j)]))
                .fold((0, 0.0_f64), |acc, x| if x.1.abs() > acc.1.abs() { x } else { acc });
        let w = o * o;
        if w <= opts.overlap_threshold || used[j] {
            return Ok(StepOutcome::Rejected(w));
        }
        if let Some(limit) = opts.max_energy_jump {
            if (eig.values[j] - from.energies[l]).abs() > limit {
                return Ok(StepOutcome::Rejected(w));
            }
        }
        used[j] = true;
        energies[l] = eig.values[j];
        let sign = if o < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, l)] = sign * eig.vectors[(i, j)];
        }
    }
    Ok(StepOutcome::Accepted(TrackedPoint { control: to, energies, vectors, degenerate }))
}

fn step_recursive<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    from: &TrackedPoint,
    to: f64,
    depth: usize,
    opts: &TrackOptions,
    refinements: &mut usize,
) -> Result<TrackedPoint> {
    match try_step(model, from, to, opts)? {
        StepOutcome::Accepted(p) => Ok(p),
        StepOutcome::Rejected(overlap) => {
            if depth >= opts.max_depth {
                if let Some(limit) = opts.max_energy_jump {
                    if overlap > opts.overlap_threshold {
                        return Err(Error::EnergyJump { at: to, jump: limit });
                    }
                }
                return Err(Error::TrackingAmbiguous { at: to, overlap });
            }
            let mid = 0.5 * (from.control + to);
            *refinements += 1;
            let m = step_recursive(model, from, mid, depth + 1, opts, refinements)?;
            step_recursive(model, &m, to, depth + 1, opts, refinements)
        }
    }
}

/// Continues the labels of `from` to `control`, bisecting as needed.
pub fn continue_to<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    from: &TrackedPoint,
    control: f64,
    opts: &TrackOptions,
) -> Result<TrackedPoint> {
    let mut refinements = 0;
    step_recursive(model, from, control, 0, opts, &mut refinements)
}

pub fn track_spectrum<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    grid: &[f64],
    anchor: f64,
) -> Result<TrackedSpectrum> {
    track_spectrum_with(model, grid, anchor, &TrackOptions::default())
}

pub fn track_spectrum_with<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    grid: &[f64],
    anchor: f64,
    opts: &TrackOptions,
) -> Result<TrackedSpectrum> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty frequency grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("frequency grid must be strictly ascending".into()));
    }
    let (g0, g1) = (grid[0], grid[grid.len() - 1]);
    if !(anchor >= g0 && anchor <= g1) {
        return Err(Error::InvalidParameter(format!("anchor {anchor} MHz outside grid [{g0}, {g1}]")));
    }
    let start = anchor_point(model, anchor, opts)?;
    let mut points: Vec<Option<TrackedPoint>> = vec![None; grid.len()];
    let mut refinements = 0;
    let split = grid.partition_point(|&x| x < anchor);
    let mut cur = start.clone();
    for (p, &f) in grid.iter().enumerate().skip(split) {
        cur = step_recursive(model, &cur, f, 0, opts, &mut refinements)?;
        points[p] = Some(cur.clone());
    }
    cur = start;
    for p in (0..split).rev() {
        cur = step_recursive(model, &cur, grid[p], 0, opts, &mut refinements)?;
        points[p] = Some(cur.clone());
    }
    let points: Vec<TrackedPoint> = points.into_iter().map(|p| p.expect("every grid point tracked")).collect();
    Ok(TrackedSpectrum {
        grid: grid.to_vec(),
        labels: model.labels(),
        degeneracies: points.iter().filter(|p| p.degenerate).map(|p| p.control).collect(),
        energies: points.iter().map(|p| p.energies.clone()).collect(),
        vectors: points.into_iter().map(|p| p.vectors).collect(),
        anchor,
        refinements,
    })
}

/// ζ (MHz) at `at`, linearly interpolated between grid points.
pub fn zeta(spectrum: &TrackedSpectrum, at: f64) -> Result<f64> {
    let curve = spectrum.zeta_curve()?;
    let g = &spectrum.grid;
    if !(at >= g[0] && at <= g[g.len() - 1]) {
        return Err(Error::InvalidParameter(format!("{at} MHz is outside the tracked grid")));
    }
    let i = g.partition_point(|&x| x <= at).saturating_sub(1).min(g.len().saturating_sub(2));
    if g.len() == 1 || at == g[i] {
        return Ok(curve[i]);
    }
    let t = (at - g[i]) / (g[i + 1] - g[i]);
    Ok(curve[i] + t * (curve[i + 1] - curve[i]))
}

/// ζ of a single tracked point.
pub fn zeta_of_point(labels: &[HilbertLabel], point: &TrackedPoint) -> Result<f64> {
    Ok(zeta_from(&point.energies, computational_indices(labels)?))
}

/// Coupler frequency in `bracket` where ζ vanishes, labels anchored at the
/// bracket midpoint.
pub fn find_zz_zero<M: ControlledHamiltonian + ?Sized>(model: &M, bracket: (f64, f64)) -> Result<f64> {
    find_zz_zero_with(model, bracket, None, &TrackOptions::default())
}

pub fn find_zz_zero_with<M: ControlledHamiltonian + ?Sized>(
    model: &M,
    bracket: (f64, f64),
    anchor: Option<f64>,
    opts: &TrackOptions,
) -> Result<f64> {
    let (lo, hi) = bracket;
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!("invalid bracket [{lo}, {hi}]")));
    }
    let n = 41;
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let spec = track_spectrum_with(model, &grid, anchor.unwrap_or(0.5 * (lo + hi)), opts)?;
    let z = spec.zeta_curve()?;
    let scale = spec.energies[0].iter().fold(0.0_f64, |m, e| m.max(e.abs())).max(1.0);
    if z.iter().all(|v| v.abs() <= 1e-12 * scale) {
        return Err(Error::DegenerateFlat);
    }
    if z[0] * z[n - 1] > 0.0 {
        return Err(Error::NoSignChange { lo, hi, zeta_lo: z[0], zeta_hi: z[n - 1] });
    }
    let i = (0..n - 1).find(|&i| z[i] * z[i + 1] <= 0.0).expect("sign change exists");
    let labels = spec.labels.clone();
    let base = spec.point(i);
    let f = |x: f64| -> Result<f64> {
        let p = continue_to(model, &base, x, opts)?;
        zeta_of_point(&labels, &p)
    };
    brent_with_values(f, grid[i], grid[i + 1], z[i], z[i + 1], 1e-9, 1e-7, 200)
}

#[derive(Debug, Clone, Serialize)]
pub struct HybridizationCurve {
    pub grid: Vec<f64>,
    pub state: HilbertLabel,
    pub bare_labels: Vec<HilbertLabel>,
    /// `weights[p][i]` = |⟨bare_i|dressed_state⟩|².
    pub weights: Vec<Vec<f64>>,
}

pub fn hybridization(spectrum: &TrackedSpectrum, state: HilbertLabel) -> Result<HybridizationCurve> {
    let k =
        spectrum.label_index(state).ok_or_else(|| Error::InvalidParameter(format!("state {state} is not tracked")))?;
    let weights = spectrum.vectors.iter().map(|v| (0..v.dim()).map(|i| v[(i, k)].powi(2)).collect()).collect();
    Ok(HybridizationCurve { grid: spectrum.grid.clone(), state, bare_labels: spectrum.labels.clone(), weights })
}
