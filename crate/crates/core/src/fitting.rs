//! Joint fit of dressed spectroscopy and ζ against coupler flux, and a
//! seeded bounded search for black-box objectives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::device::{flux_to_frequency, DeviceParams, HilbertLabel};
use crate::error::{Error, Result};
use crate::linalg::{solve, Mat};
use crate::presets::{DevicePreset, OperatingPoint};
use crate::spectrum::track_spectrum;

/// ζ residuals are multiplied by this factor in the objective.
pub const ZETA_WEIGHT: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopyPoint {
    pub flux: f64,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub fc: Option<f64>,
    pub zeta: Option<f64>,
    /// Uncertainty of the frequency observables (MHz).
    pub sigma_f: Option<f64>,
    /// Uncertainty of ζ (MHz).
    pub sigma_zeta: Option<f64>,
}

impl SpectroscopyPoint {
    pub fn new(flux: f64) -> Self {
        SpectroscopyPoint { flux, f1: None, f2: None, fc: None, zeta: None, sigma_f: None, sigma_zeta: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopyDataset {
    pub points: Vec<SpectroscopyPoint>,
}

impl SpectroscopyDataset {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidParameter("dataset has no points".into()));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !p.flux.is_finite() {
                return Err(Error::InvalidParameter(format!("row {i}: flux is not finite")));
            }
            if p.f1.is_none() && p.f2.is_none() && p.fc.is_none() && p.zeta.is_none() {
                return Err(Error::InvalidParameter(format!("row {i}: no observable")));
            }
            for s in [p.sigma_f, p.sigma_zeta].into_iter().flatten() {
                if !(s > 0.0) {
                    return Err(Error::InvalidParameter(format!("row {i}: uncertainty must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Reads `flux,f1,f2,fc,zeta` with optional `sigma_f,sigma_zeta`
    /// columns; blank cells are missing values, `#` starts a comment line.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        let col = |name: &str| header.iter().position(|h| h == name);
        let flux = col("flux").ok_or_else(|| Error::Parse("missing column `flux`".into()))?;
        for h in header.iter() {
            if !["flux", "f1", "f2", "fc", "zeta", "sigma_f", "sigma_zeta"].contains(&h) {
                return Err(Error::Parse(format!("unknown column `{h}`")));
            }
        }
        let cols = [col("f1"), col("f2"), col("fc"), col("zeta"), col("sigma_f"), col("sigma_zeta")];
        let mut points = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let cell = |c: Option<usize>| -> Result<Option<f64>> {
                match c.and_then(|c| rec.get(c)) {
                    None | Some("") => Ok(None),
                    Some(s) => {
                        s.parse().map(Some).map_err(|_| Error::Parse(format!("row {}: bad number `{s}`", i + 1)))
                    }
                }
            };
            let fl = cell(Some(flux))?.ok_or_else(|| Error::Parse(format!("row {}: missing flux", i + 1)))?;
            points.push(SpectroscopyPoint {
                flux: fl,
                f1: cell(cols[0])?,
                f2: cell(cols[1])?,
                fc: cell(cols[2])?,
                zeta: cell(cols[3])?,
                sigma_f: cell(cols[4])?,
                sigma_zeta: cell(cols[5])?,
            });
        }
        let d = SpectroscopyDataset { points };
        d.validate()?;
        Ok(d)
    }

    pub fn to_csv(&self) -> String {
        let f = |x: Option<f64>| x.map(crate::io::fmt_num).unwrap_or_default();
        let mut out = String::from("flux,f1,f2,fc,zeta,sigma_f,sigma_zeta\n");
        for p in &self.points {
            let row = [Some(p.flux), p.f1, p.f2, p.fc, p.zeta, p.sigma_f, p.sigma_zeta].map(f);
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Dressed observables at one flux point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelPoint {
    pub flux: f64,
    pub f1: f64,
    pub f2: f64,
    pub fc: f64,
    pub zeta: f64,
}

/// Dressed f₁, f₂, f_c (transition energies from the ground state) and ζ
/// at each flux, with labels anchored at the lowest coupler frequency.
pub fn model_observables(device: &DeviceParams, fluxes: &[f64]) -> Result<Vec<ModelPoint>> {
    let bare: Vec<f64> = fluxes.iter().map(|&phi| flux_to_frequency(&device.coupler, phi)).collect();
    let mut grid = bare.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let spec = track_spectrum(device, &grid, grid[0])?;
    let idx = |l| spec.label_index(l).expect("label in basis");
    let (g, q1, q2, c) = (
        idx(HilbertLabel::new(0, 0, 0)),
        idx(HilbertLabel::new(1, 0, 0)),
        idx(HilbertLabel::new(0, 1, 0)),
        idx(HilbertLabel::new(0, 0, 1)),
    );
    let z = spec.zeta_curve()?;
    Ok(fluxes
        .iter()
        .zip(&bare)
        .map(|(&flux, f)| {
            let p = grid.partition_point(|x| x < f);
            let e = &spec.energies[p];
            ModelPoint { flux, f1: e[q1] - e[g], f2: e[q2] - e[g], fc: e[c] - e[g], zeta: z[p] }
        })
        .collect())
}

/// Noise-free dataset with every observable at each flux.
pub fn synthesize_dataset(device: &DeviceParams, fluxes: &[f64]) -> Result<SpectroscopyDataset> {
    let m = model_observables(device, fluxes)?;
    Ok(SpectroscopyDataset {
        points: m
            .into_iter()
            .map(|p| SpectroscopyPoint {
                flux: p.flux,
                f1: Some(p.f1),
                f2: Some(p.f2),
                fc: Some(p.fc),
                zeta: Some(p.zeta),
                sigma_f: None,
                sigma_zeta: None,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    #[serde(rename = "rho_12")]
    Rho12,
    #[serde(rename = "rho_1c")]
    Rho1c,
    #[serde(rename = "rho_2c")]
    Rho2c,
    EjSum,
    Ec,
    JjRatio,
}

impl FitParam {
    pub const ALL: [FitParam; 6] =
        [FitParam::Rho12, FitParam::Rho1c, FitParam::Rho2c, FitParam::EjSum, FitParam::Ec, FitParam::JjRatio];

    pub fn name(&self) -> &'static str {
        match self {
            FitParam::Rho12 => "rho_12",
            FitParam::Rho1c => "rho_1c",
            FitParam::Rho2c => "rho_2c",
            FitParam::EjSum => "ej_sum",
            FitParam::Ec => "ec",
            FitParam::JjRatio => "jj_ratio",
        }
    }

    pub fn get(&self, d: &DeviceParams) -> f64 {
        match self {
            FitParam::Rho12 => d.rho_12,
            FitParam::Rho1c => d.rho_1c,
            FitParam::Rho2c => d.rho_2c,
            FitParam::EjSum => d.coupler.ej_sum,
            FitParam::Ec => d.coupler.ec,
            FitParam::JjRatio => d.coupler.jj_ratio,
        }
    }

    pub fn set(&self, d: &mut DeviceParams, v: f64) {
        match self {
            FitParam::Rho12 => d.rho_12 = v,
            FitParam::Rho1c => d.rho_1c = v,
            FitParam::Rho2c => d.rho_2c = v,
            FitParam::EjSum => d.coupler.ej_sum = v,
            FitParam::Ec => d.coupler.ec = v,
            FitParam::JjRatio => d.coupler.jj_ratio = v,
        }
    }

    /// Scale floor used when the initial value is zero.
    fn typical(&self) -> f64 {
        match self {
            FitParam::Rho12 | FitParam::Rho1c | FitParam::Rho2c => 1e-3,
            FitParam::EjSum => 1e3,
            FitParam::Ec => 10.0,
            FitParam::JjRatio => 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged when ‖Jᵀr‖ ≤ gradient_tol·(1 + S) in scaled coordinates.
    pub gradient_tol: f64,
    /// Converged when the scaled step is shorter than this.
    pub step_tol: f64,
    pub zeta_weight: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iterations: 200, gradient_tol: 1e-8, step_tol: 1e-10, zeta_weight: ZETA_WEIGHT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub reason: String,
    pub iterations: usize,
    pub residual_evaluations: usize,
    pub gradient_norm: f64,
    /// Objective after each accepted step, starting at the initial point.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    /// Fitted device in preset form.
    pub preset: DevicePreset,
    pub free: Vec<FitParam>,
    pub residuals: Vec<f64>,
    /// Sum of squared scaled residuals.
    pub objective: f64,
    pub report: ConvergenceReport,
}

impl FitResult {
    pub fn device(&self) -> DeviceParams {
        self.preset.device()
    }

    /// Turns a non-converged fit into `Error::NonConvergence`.
    pub fn require_converged(self) -> Result<FitResult> {
        if self.report.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence { iterations: self.report.iterations, objective: self.objective })
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

/// Scaled residuals: `(model − data)/σ` for frequencies and
/// `w·(model − data)/σ` for ζ, in dataset order, skipping missing values.
pub fn residuals(device: &DeviceParams, data: &SpectroscopyDataset, zeta_weight: f64) -> Result<Vec<f64>> {
    let fluxes: Vec<f64> = data.points.iter().map(|p| p.flux).collect();
    let model = model_observables(device, &fluxes)?;
    let mut r = Vec::new();
    for (p, m) in data.points.iter().zip(&model) {
        let sf = p.sigma_f.unwrap_or(1.0);
        for (obs, val) in [(p.f1, m.f1), (p.f2, m.f2), (p.fc, m.fc)] {
            if let Some(o) = obs {
                r.push((val - o) / sf);
            }
        }
        if let Some(z) = p.zeta {
            r.push(zeta_weight * (m.zeta - z) / p.sigma_zeta.unwrap_or(1.0));
        }
    }
    Ok(r)
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Levenberg-Marquardt fit of the `free` parameters. Qubit frequencies and
/// anharmonicities stay fixed. A fit that stops without meeting a
/// convergence criterion returns its best point with `converged = false`.
pub fn joint_fit(
    data: &SpectroscopyDataset,
    initial: &DeviceParams,
    free: &[FitParam],
    opts: &FitOptions,
) -> Result<FitResult> {
    data.validate()?;
    initial.validate()?;
    let scales: Vec<f64> = free.iter().map(|p| p.get(initial).abs().max(p.typical())).collect();
    let at = |x: &[f64]| {
        let mut d = *initial;
        for ((p, s), xi) in free.iter().zip(&scales).zip(x) {
            p.set(&mut d, p.get(initial) + s * xi);
        }
        d
    };
    let mut evals = 0;
    let mut eval = |x: &[f64]| -> Result<Vec<f64>> {
        evals += 1;
        let d = at(x);
        d.validate()?;
        residuals(&d, data, opts.zeta_weight)
    };
    let n = free.len();
    let mut x = vec![0.0; n];
    let mut r = eval(&x)?;
    let mut s = sum_sq(&r);
    let mut history = vec![s];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut gnorm = 0.0;
    let finish = |x: &[f64], r: Vec<f64>, s: f64, report: ConvergenceReport| FitResult {
        preset: DevicePreset::from_device("fit", &at(x), OperatingPoint::default()),
        free: free.to_vec(),
        residuals: r,
        objective: s,
        report,
    };
    if n == 0 {
        let report = ConvergenceReport {
            converged: true,
            reason: "no free parameters".into(),
            iterations: 0,
            residual_evaluations: 1,
            gradient_norm: 0.0,
            history,
        };
        return Ok(finish(&x, r, s, report));
    }
    let h = 1e-6;
    let (converged, reason) = loop {
        if iterations >= opts.max_iterations {
            break (false, format!("iteration limit {} reached", opts.max_iterations));
        }
        iterations += 1;
        let m = r.len();
        let mut jac = vec![vec![0.0; n]; m];
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let (rp, rm) = (eval(&xp)?, eval(&xm)?);
            for i in 0..m {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let jtj = Mat::from_fn(n, |a, b| (0..m).map(|i| jac[i][a] * jac[i][b]).sum::<f64>());
        let g: Vec<f64> = (0..n).map(|a| (0..m).map(|i| jac[i][a] * r[i]).sum()).collect();
        if let Some(k) = (0..n).find(|&k| jtj[(k, k)] == 0.0) {
            return Err(Error::SingularJacobian(format!("{} has no effect on the residuals", free[k].name())));
        }
        gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= opts.gradient_tol * (1.0 + s) {
            break (true, "gradient norm below tolerance".into());
        }
        let mut accepted_step = None;
        let mut tiny = false;
        while lambda < 1e12 {
            let a = Mat::from_fn(n, |i, j| jtj[(i, j)] + if i == j { lambda * jtj[(i, i)] } else { 0.0 });
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let Some(delta) = solve(&a, &neg_g) else {
                lambda *= 4.0;
                continue;
            };
            let step = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            let xn: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
            match eval(&xn).ok() {
                Some(rn) if sum_sq(&rn) < s => {
                    x = xn;
                    s = sum_sq(&rn);
                    r = rn;
                    history.push(s);
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted_step = Some(step);
                    break;
                }
                _ if step < opts.step_tol => {
                    tiny = true;
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        match accepted_step {
            Some(step) if step < opts.step_tol => break (true, "step below tolerance".into()),
            Some(_) => {}
            None if tiny => break (true, "step below tolerance".into()),
            None => break (false, "damping limit reached without a downhill step".into()),
        }
    };
    let report =
        ConvergenceReport { converged, reason, iterations, residual_evaluations: evals, gradient_norm: gnorm, history };
    Ok(finish(&x, r, s, report))
}

/// Outcome of [`parameter_search`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Every evaluated point with its objective, in evaluation order.
    pub trace: Vec<(Vec<f64>, f64)>,
}

/// The objective failed at `point`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchFailure {
    pub point: Vec<f64>,
    pub error: Error,
}

impl std::fmt::Display for SearchFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "objective failed at {:?}: {}", self.point, self.error)
    }
}

impl std::error::Error for SearchFailure {}

/// Seeded Latin-hypercube sampling over `bounds` (a quarter of the budget)
/// followed by coordinate descent with step halving from the best sample.
/// The evaluation sequence depends only on the seed.
pub fn parameter_search<F>(
    mut objective: F,
    bounds: &[(f64, f64)],
    budget: usize,
    seed: u64,
) -> std::result::Result<SearchResult, SearchFailure>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let dim = bounds.len();
    if budget == 0 || bounds.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && hi >= lo)) {
        return Err(SearchFailure {
            point: Vec::new(),
            error: Error::InvalidParameter("bounds must be finite and ordered, budget at least 1".into()),
        });
    }
    let to_real = |u: &[f64]| -> Vec<f64> { u.iter().zip(bounds).map(|(&t, &(lo, hi))| lo + t * (hi - lo)).collect() };
    let mut trace: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut best_u: Vec<f64> = Vec::new();
    let mut best_v = f64::INFINITY;
    let mut evaluate = |u: &[f64], trace: &mut Vec<(Vec<f64>, f64)>| -> std::result::Result<f64, SearchFailure> {
        let p = to_real(u);
        let v = objective(&p).map_err(|error| SearchFailure { point: p.clone(), error })?;
        trace.push((p, v));
        Ok(v)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (budget / 4).max(1);
    let mut strata: Vec<Vec<usize>> = (0..dim)
        .map(|_| {
            let mut s: Vec<usize> = (0..samples).collect();
            for i in (1..samples).rev() {
                s.swap(i, rng.random_range(0..=i));
            }
            s
        })
        .collect();
    for i in 0..samples {
        let u: Vec<f64> = strata.iter_mut().map(|s| (s[i] as f64 + rng.random::<f64>()) / samples as f64).collect();
        let v = evaluate(&u, &mut trace)?;
        if v < best_v {
            best_v = v;
            best_u = u;
        }
    }

    let mut step = 0.25;
    while trace.len() < budget && step > 1e-12 && dim > 0 {
        let mut improved = false;
        for k in 0..dim {
            for sign in [1.0, -1.0] {
                if trace.len() >= budget {
                    break;
                }
                let mut u = best_u.clone();
                u[k] = (u[k] + sign * step).clamp(0.0, 1.0);
                if u[k] == best_u[k] {
                    continue;
                }
                let v = evaluate(&u, &mut trace)?;
                if v < best_v {
                    best_v = v;
                    best_u = u;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(SearchResult { best: to_real(&best_u), best_value: best_v, trace })
}
