//! Randomized-benchmarking statistics: binomial confidence intervals,
//! maximum-likelihood fits of `P(m) = A pᵐ + B` in logit coordinates, and
//! Monte Carlo propagation to the interleaved gate error.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{solve, sym_eigen, Mat};

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Two-sided critical value `z` for confidence `level`.
pub fn z_for_level(level: f64) -> f64 {
    normal_quantile(1.0 - 0.5 * (1.0 - level))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

fn check_counts(k: u64, n: u64, level: f64) {
    assert!(n >= 1 && k <= n, "need 0 <= k <= N and N >= 1");
    assert!(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
}

/// `p̂ ± z·√(p̂(1−p̂)/N)`. The bounds may leave [0, 1].
pub fn wald_interval(k: u64, n: u64, level: f64) -> Interval {
    check_counts(k, n, level);
    let p = k as f64 / n as f64;
    let half = z_for_level(level) * (p * (1.0 - p) / n as f64).sqrt();
    Interval { lower: p - half, upper: p + half }
}

/// Wald interval clipped to [0, 1]; the flag tells whether clipping happened.
pub fn wald_interval_clamped(k: u64, n: u64, level: f64) -> (Interval, bool) {
    let w = wald_interval(k, n, level);
    let c = Interval { lower: w.lower.max(0.0), upper: w.upper.min(1.0) };
    (c, c != w)
}

/// Wilson score interval.
pub fn wilson_interval(k: u64, n: u64, level: f64) -> Interval {
    check_counts(k, n, level);
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z_for_level(level).powi(2);
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z2.sqrt() / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lower = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let upper = if k == n { 1.0 } else { (center + half).min(1.0) };
    Interval { lower, upper }
}

pub fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

pub fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// How rows that share a depth (one per random sequence seed) are read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedHandling {
    /// Counts are summed per depth.
    #[default]
    Pooled,
    /// Each row stays a separate binomial observation.
    PerSeed,
}

/// Counts per sequence depth. Depths are sorted and repeat only for
/// per-seed data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RBDataset {
    pub depths: Vec<u64>,
    pub successes: Vec<u64>,
    pub trials: Vec<u64>,
}

impl RBDataset {
    pub fn validate(&self) -> Result<()> {
        let n = self.depths.len();
        if self.successes.len() != n || self.trials.len() != n {
            return Err(Error::InvalidParameter("depth, success and trial columns differ in length".into()));
        }
        if self.depths.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("depths must be sorted".into()));
        }
        for i in 0..n {
            if self.trials[i] == 0 || self.successes[i] > self.trials[i] {
                return Err(Error::InvalidParameter(format!("depth {}: need 0 <= k <= N, N >= 1", self.depths[i])));
            }
        }
        Ok(())
    }

    pub fn success_rates(&self) -> Vec<f64> {
        self.successes.iter().zip(&self.trials).map(|(&k, &n)| k as f64 / n as f64).collect()
    }

    /// Number of different depths.
    pub fn distinct_depths(&self) -> usize {
        let mut d = self.depths.clone();
        d.dedup();
        d.len()
    }

    /// Reads `depth,successes,trials` with rows sharing a depth pooled.
    pub fn from_csv(text: &str) -> Result<Self> {
        Self::from_csv_with(text, SeedHandling::Pooled)
    }

    /// Reads `depth,successes,trials`; rows end up sorted by depth, in file
    /// order within a depth.
    pub fn from_csv_with(text: &str, seeds: SeedHandling) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> =
            rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(String::from).collect();
        if header != ["depth", "successes", "trials"] {
            return Err(Error::Parse(format!("expected header depth,successes,trials, found {}", header.join(","))));
        }
        let mut rows: Vec<(u64, u64, u64)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let num = |c: usize| -> Result<u64> {
                rec.get(c)
                    .unwrap_or("")
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: column {} is not a non-negative integer", i + 1, c + 1)))
            };
            rows.push((num(0)?, num(1)?, num(2)?));
        }
        rows.sort_by_key(|r| r.0);
        if seeds == SeedHandling::Pooled {
            rows.dedup_by(|next, kept| {
                let same = next.0 == kept.0;
                if same {
                    kept.1 += next.1;
                    kept.2 += next.2;
                }
                same
            });
        }
        let d = RBDataset {
            depths: rows.iter().map(|r| r.0).collect(),
            successes: rows.iter().map(|r| r.1).collect(),
            trials: rows.iter().map(|r| r.2).collect(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth,successes,trials\n");
        for i in 0..self.depths.len() {
            out.push_str(&format!("{},{},{}\n", self.depths[i], self.successes[i], self.trials[i]));
        }
        out
    }
}

/// Decay parameters with `0 < p, A, B < 1` and `A + B < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RBParams {
    pub p: f64,
    pub a: f64,
    pub b: f64,
}

impl RBParams {
    pub fn is_feasible(&self) -> bool {
        [self.p, self.a, self.b].iter().all(|&x| x > 0.0 && x < 1.0) && self.a + self.b < 1.0
    }

    pub fn survival(&self, m: u64) -> f64 {
        self.a * self.p.powi(m as i32) + self.b
    }

    /// `(ξ, β, γ) = (logit A, logit(B/(1−A)), logit p)`.
    pub fn to_unconstrained(&self) -> [f64; 3] {
        [logit(self.a), logit(self.b / (1.0 - self.a)), logit(self.p)]
    }

    pub fn from_unconstrained(u: [f64; 3]) -> Self {
        let a = sigmoid(u[0]);
        RBParams { a, b: sigmoid(u[1]) * (1.0 - a), p: sigmoid(u[2]) }
    }
}

pub fn log_likelihood(data: &RBDataset, params: &RBParams) -> f64 {
    (0..data.depths.len())
        .map(|i| {
            let pr = params.survival(data.depths[i]);
            let (k, n) = (data.successes[i] as f64, data.trials[i] as f64);
            let mut l = 0.0;
            if k > 0.0 {
                l += k * pr.ln();
            }
            if n > k {
                l += (n - k) * (1.0 - pr).ln();
            }
            l
        })
        .sum()
}

/// Log-likelihood and its gradient in (ξ, β, γ).
fn value_and_gradient(data: &RBDataset, u: [f64; 3]) -> (f64, [f64; 3]) {
    let q = RBParams::from_unconstrained(u);
    let c = sigmoid(u[1]);
    let mut g = [0.0; 3];
    for i in 0..data.depths.len() {
        let m = data.depths[i];
        let pm = q.p.powi(m as i32);
        let pr = q.a * pm + q.b;
        let (k, n) = (data.successes[i] as f64, data.trials[i] as f64);
        let dl = k / pr - (n - k) / (1.0 - pr);
        g[0] += dl * (pm - c) * q.a * (1.0 - q.a);
        g[1] += dl * (1.0 - q.a) * c * (1.0 - c);
        let dp = if m == 0 { 0.0 } else { q.a * m as f64 * q.p.powi(m as i32 - 1) };
        g[2] += dl * dp * q.p * (1.0 - q.p);
    }
    (log_likelihood(data, &q), g)
}

fn norm3(v: &[f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct RBFit {
    pub params: RBParams,
    /// (ξ, β, γ) at the optimum.
    pub unconstrained: [f64; 3],
    /// Inverse of the negative Hessian in (ξ, β, γ).
    pub covariance: [[f64; 3]; 3],
    pub log_likelihood: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl RBFit {
    /// Standard deviation of `p` from the covariance of γ.
    pub fn sigma_p(&self) -> f64 {
        let p = self.params.p;
        p * (1.0 - p) * self.covariance[2][2].max(0.0).sqrt()
    }

    /// Two-sided interval for `p` from a normal interval on γ.
    pub fn p_interval(&self, level: f64) -> Interval {
        let half = z_for_level(level) * self.covariance[2][2].max(0.0).sqrt();
        let g = self.unconstrained[2];
        Interval { lower: sigmoid(g - half), upper: sigmoid(g + half) }
    }
}

/// Starting point from a log-linear fit to `k/N − B₀`.
pub fn heuristic_init(data: &RBDataset) -> RBParams {
    let y = data.success_rates();
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let b0 = (lo - 0.05 * (hi - lo)).clamp(1e-3, 0.9);
    let pts: Vec<(f64, f64)> =
        data.depths.iter().zip(&y).filter(|(_, &v)| v > b0).map(|(&m, &v)| (m as f64, (v - b0).ln())).collect();
    let (mut p, mut a) = (0.99, 0.5);
    if pts.len() >= 2 {
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
        let sxx = pts.iter().map(|&(x, _)| (x - sx / n).powi(2)).sum::<f64>();
        if sxx > 0.0 {
            let slope = pts.iter().map(|&(x, y)| (x - sx / n) * (y - sy / n)).sum::<f64>() / sxx;
            p = slope.exp();
            a = (sy / n - slope * sx / n).exp();
        }
    }
    let p = p.clamp(0.5, 1.0 - 1e-6);
    let a = a.clamp(0.01, 0.98);
    let b = b0.min(0.99 * (1.0 - a));
    RBParams { p, a, b }
}

#[derive(Debug, Clone, Copy)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Converged when ‖∇l‖ / ΣN_i in (ξ, β, γ) falls below this, i.e. the
    /// gradient of the per-shot mean log-likelihood.
    pub gradient_tol: f64,
    /// Finite-difference step for the Hessian.
    pub hessian_step: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions { max_iterations: 500, gradient_tol: 1e-8, hessian_step: 1e-5 }
    }
}

fn hessian(data: &RBDataset, u: [f64; 3], h: f64) -> [[f64; 3]; 3] {
    let mut hm = [[0.0; 3]; 3];
    for j in 0..3 {
        let (mut up, mut um) = (u, u);
        up[j] += h;
        um[j] -= h;
        let (gp, gm) = (value_and_gradient(data, up).1, value_and_gradient(data, um).1);
        for i in 0..3 {
            hm[i][j] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    for i in 0..3 {
        for j in 0..i {
            let s = 0.5 * (hm[i][j] + hm[j][i]);
            hm[i][j] = s;
            hm[j][i] = s;
        }
    }
    hm
}

pub fn mle_fit(data: &RBDataset, init: Option<RBParams>) -> Result<RBFit> {
    mle_fit_with(data, init, &MleOptions::default())
}

/// Maximizes the binomial log-likelihood with BFGS and a backtracking line
/// search in (ξ, β, γ), then polishes with Newton steps.
pub fn mle_fit_with(data: &RBDataset, init: Option<RBParams>, opts: &MleOptions) -> Result<RBFit> {
    data.validate()?;
    if data.distinct_depths() < 3 {
        return Err(Error::InvalidParameter("need at least three depths".into()));
    }
    let y = data.success_rates();
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::DegenerateData);
    }
    let start = init.unwrap_or_else(|| heuristic_init(data));
    if !start.is_feasible() {
        return Err(Error::InvalidParameter("initial parameters violate 0 < p, A, B and A + B < 1".into()));
    }
    let gtol = opts.gradient_tol * data.trials.iter().sum::<u64>() as f64;
    let mut u = start.to_unconstrained();
    let (mut f, mut g) = value_and_gradient(data, u);
    // Inverse-Hessian estimate of −l.
    let mut hinv = [[0.0; 3]; 3];
    let scale = 1.0 / (1.0 + norm3(&g));
    for (i, row) in hinv.iter_mut().enumerate() {
        row[i] = scale;
    }
    let mut iterations = 0;
    while norm3(&g) > gtol && iterations < opts.max_iterations {
        iterations += 1;
        // Ascent direction d = H⁻¹ ∇l.
        let mut d = [0.0; 3];
        for i in 0..3 {
            d[i] = (0..3).map(|j| hinv[i][j] * g[j]).sum();
        }
        let mut slope: f64 = (0..3).map(|i| d[i] * g[i]).sum();
        if !(slope > 0.0) {
            hinv = [[scale, 0.0, 0.0], [0.0, scale, 0.0], [0.0, 0.0, scale]];
            d = g.map(|x| x * scale);
            slope = scale * norm3(&g).powi(2);
        }
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let un = [u[0] + t * d[0], u[1] + t * d[1], u[2] + t * d[2]];
            let (fnew, gnew) = value_and_gradient(data, un);
            if fnew.is_finite() && fnew >= f + 1e-4 * t * slope {
                next = Some((un, fnew, gnew));
                break;
            }
            t *= 0.5;
        }
        let Some((un, fnew, gnew)) = next else { break };
        let s: [f64; 3] = std::array::from_fn(|i| un[i] - u[i]);
        // Curvature pair for −l.
        let yv: [f64; 3] = std::array::from_fn(|i| g[i] - gnew[i]);
        let sy: f64 = (0..3).map(|i| s[i] * yv[i]).sum();
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| hinv[i][j] * yv[j]).sum());
            let yhy: f64 = (0..3).map(|i| yv[i] * hy[i]).sum();
            for i in 0..3 {
                for j in 0..3 {
                    hinv[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        u = un;
        f = fnew;
        g = gnew;
        if t * norm3(&d) < 1e-15 * (1.0 + norm3(&u)) {
            break;
        }
    }
    // Newton polish on the finite-difference Hessian.
    for _ in 0..20 {
        if norm3(&g) <= gtol {
            break;
        }
        let hm = hessian(data, u, opts.hessian_step);
        let neg = Mat::from_fn(3, |i, j| -hm[i][j]);
        let Some(step) = solve(&neg, &g) else { break };
        let un = [u[0] + step[0], u[1] + step[1], u[2] + step[2]];
        let (fnew, gnew) = value_and_gradient(data, un);
        if !(fnew >= f - 1e-9 * f.abs().max(1.0)) || norm3(&gnew) >= norm3(&g) {
            break;
        }
        u = un;
        f = fnew;
        g = gnew;
        iterations += 1;
    }
    let gnorm = norm3(&g);
    if gnorm > gtol {
        return Err(Error::NonConvergence { iterations, objective: -f });
    }
    let hm = hessian(data, u, opts.hessian_step);
    let neg = Mat::from_fn(3, |i, j| -hm[i][j]);
    let mut covariance = [[0.0; 3]; 3];
    for j in 0..3 {
        let e: Vec<f64> = (0..3).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
        let col =
            solve(&neg, &e).ok_or_else(|| Error::SingularJacobian("log-likelihood Hessian is singular".into()))?;
        for i in 0..3 {
            covariance[i][j] = col[i];
        }
    }
    for i in 0..3 {
        for j in 0..i {
            let s = 0.5 * (covariance[i][j] + covariance[j][i]);
            covariance[i][j] = s;
            covariance[j][i] = s;
        }
    }
    Ok(RBFit {
        params: RBParams::from_unconstrained(u),
        unconstrained: u,
        covariance,
        log_likelihood: f,
        iterations,
        gradient_norm: gnorm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateError {
    pub value: f64,
    /// False when the value lies outside [0, 1].
    pub physical: bool,
}

/// `r = ((d−1)/d)(1 − p_irb/p_rb)`.
pub fn gate_error(p_rb: f64, p_irb: f64, d: u32) -> GateError {
    assert!(d >= 2, "dimension must be at least 2");
    let df = d as f64;
    let value = (df - 1.0) / df * (1.0 - p_irb / p_rb);
    GateError { value, physical: (0.0..=1.0).contains(&value) }
}

/// First-order propagation of the fit uncertainties of `p` into `r`.
pub fn delta_method_sigma(fit_rb: &RBFit, fit_irb: &RBFit, d: u32) -> f64 {
    let k = (d as f64 - 1.0) / d as f64;
    let (pr, pi) = (fit_rb.params.p, fit_irb.params.p);
    let dr_dpi = -k / pr;
    let dr_dpr = k * pi / (pr * pr);
    ((dr_dpi * fit_irb.sigma_p()).powi(2) + (dr_dpr * fit_rb.sigma_p()).powi(2)).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct GateErrorEstimate {
    pub point_estimate: f64,
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// Standard deviation of the kept samples.
    pub sigma: f64,
    pub samples: usize,
    pub kept: usize,
    pub seed: u64,
}

/// `L` with `L Lᵀ = C` for a positive semidefinite `C`.
fn psd_factor(c: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let m = Mat::from_fn(3, |i, j| c[i][j]);
    let e = sym_eigen(&m)?;
    let scale = e.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut l = [[0.0; 3]; 3];
    for k in 0..3 {
        let v = e.values[k];
        if v < -1e-9 * scale {
            return Err(Error::InvalidParameter("covariance is not positive semidefinite".into()));
        }
        let s = v.max(0.0).sqrt();
        for i in 0..3 {
            l[i][k] = e.vectors[(i, k)] * s;
        }
    }
    Ok(l)
}

fn quantile_sorted(x: &[f64], q: f64) -> f64 {
    let pos = q * (x.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(x.len() - 1);
    x[i] + (pos - i as f64) * (x[j] - x[i])
}

/// Samples both fits' (ξ, β, γ) from their normal approximations, maps each
/// draw to `r`, drops values outside [0, 1], and reports the mean with the
/// central `level` quantile interval.
pub fn monte_carlo_ci(
    fit_rb: &RBFit,
    fit_irb: &RBFit,
    d: u32,
    samples: usize,
    level: f64,
    seed: u64,
) -> Result<GateErrorEstimate> {
    if samples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter("need samples >= 1 and level in (0, 1)".into()));
    }
    let l_rb = psd_factor(&fit_rb.covariance)?;
    let l_irb = psd_factor(&fit_irb.covariance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |fit: &RBFit, l: &[[f64; 3]; 3]| -> RBParams {
        let z: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let u: [f64; 3] = std::array::from_fn(|i| fit.unconstrained[i] + (0..3).map(|k| l[i][k] * z[k]).sum::<f64>());
        RBParams::from_unconstrained(u)
    };
    let mut kept = Vec::with_capacity(samples);
    for _ in 0..samples {
        let a = draw(fit_rb, &l_rb);
        let b = draw(fit_irb, &l_irb);
        let r = gate_error(a.p, b.p, d);
        if r.physical {
            kept.push(r.value);
        }
    }
    if 2 * kept.len() < samples {
        return Err(Error::InsufficientPhysicalSamples { kept: kept.len(), total: samples });
    }
    kept.sort_by(f64::total_cmp);
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let var = kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let alpha = 1.0 - level;
    Ok(GateErrorEstimate {
        point_estimate: gate_error(fit_rb.params.p, fit_irb.params.p, d).value,
        mean,
        median: quantile_sorted(&kept, 0.5),
        lower: quantile_sorted(&kept, 0.5 * alpha),
        upper: quantile_sorted(&kept, 1.0 - 0.5 * alpha),
        level,
        sigma: var.sqrt(),
        samples,
        kept: kept.len(),
        seed,
    })
}

/// Binomial counts `k_i ~ B(N, A pᵐ + B)` at each depth.
pub fn synthesize_rb_counts(params: &RBParams, depths: &[u64], shots: u64, seed: u64) -> Result<RBDataset> {
    if !(params.p > 0.0 && params.p <= 1.0 && params.a >= 0.0 && params.b >= 0.0 && params.a + params.b <= 1.0) {
        return Err(Error::InvalidParameter("decay parameters outside the physical region".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = Vec::with_capacity(depths.len());
    for &m in depths {
        let pr = params.survival(m).clamp(0.0, 1.0);
        let bin = Binomial::new(shots, pr).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        successes.push(bin.sample(&mut rng));
    }
    let d = RBDataset { depths: depths.to_vec(), successes, trials: vec![shots; depths.len()] };
    d.validate()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wald_half_width_at_one_half() {
        let w = wald_interval(50, 100, 0.95);
        assert!((w.lower - 0.402).abs() < 2e-4 && (w.upper - 0.598).abs() < 2e-4);
        assert_eq!(wald_interval(100, 100, 0.95), Interval { lower: 1.0, upper: 1.0 });
        assert_eq!(wald_interval(0, 100, 0.95), Interval { lower: 0.0, upper: 0.0 });
    }

    #[test]
    fn wilson_endpoints() {
        let w = wilson_interval(100, 100, 0.95);
        let z = z_for_level(0.95);
        assert_eq!(w.upper, 1.0);
        assert!((w.lower - 100.0 / (100.0 + z * z)).abs() < 1e-12);
        assert_eq!(wilson_interval(0, 10, 0.95).lower, 0.0);
    }

    #[test]
    fn quantile_matches_tabulated_values() {
        assert!((z_for_level(0.95) - 1.959963984540054).abs() < 1e-9);
        assert!((normal_quantile(0.999) - 3.090232306167813).abs() < 1e-9);
    }

    #[test]
    fn gate_error_examples() {
        assert_eq!(gate_error(0.97, 0.97, 4).value, 0.0);
        assert!((gate_error(1.0, 0.99, 4).value - 0.0075).abs() < 1e-15);
        let neg = gate_error(0.95, 0.96, 4);
        assert!(neg.value < 0.0 && !neg.physical);
    }

    #[test]
    fn flat_data_is_degenerate() {
        let d = RBDataset { depths: vec![1, 2, 3], successes: vec![50, 50, 50], trials: vec![100; 3] };
        assert_eq!(mle_fit(&d, None).unwrap_err(), Error::DegenerateData);
    }

    #[test]
    fn csv_pools_repeated_depths() {
        let d = RBDataset::from_csv("depth,successes,trials\n5,40,50\n1,49,50\n5,41,50\n10,30,50\n").unwrap();
        assert_eq!(d.depths, vec![1, 5, 10]);
        assert_eq!(d.successes, vec![49, 81, 30]);
        assert_eq!(d.trials, vec![50, 100, 50]);
    }
}
