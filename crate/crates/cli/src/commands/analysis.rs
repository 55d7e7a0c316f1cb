//! Data analysis: joint spectroscopy fit and interleaved-RB statistics.

use std::fs;
use std::path::Path;

use adiacz::fitting::{joint_fit, FitOptions, SpectroscopyDataset};
use adiacz::io::{fmt_num, Table};
use adiacz::presets::DevicePreset;
use adiacz::rbstats::{
    delta_method_sigma, gate_error, mle_fit, monte_carlo_ci, wald_interval, wilson_interval, GateError,
    GateErrorEstimate, Interval, RBDataset, RBFit,
};
use serde::Serialize;

use crate::config::StudyConfig;
use crate::output::Writer;
use crate::CliError;

fn read_input(path: Option<&Path>, what: &str) -> Result<String, CliError> {
    let path = path.ok_or_else(|| CliError::Config(format!("no {what} file given")))?;
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))
}

pub fn fit(cfg: &StudyConfig, preset: &DevicePreset, out: &mut Writer) -> Result<(), CliError> {
    let c = &cfg.fit;
    let data = SpectroscopyDataset::from_csv(&read_input(c.data.as_deref(), "fit.data")?)?;
    let opts = FitOptions { max_iterations: c.max_iterations, zeta_weight: c.zeta_weight, ..FitOptions::default() };
    let result = joint_fit(&data, &preset.device(), &c.free, &opts)?;

    let mut table = Table::new(vec!["index".into(), "residual".into()]);
    table.comments.push("scaled residuals (model - data) / sigma in dataset order".into());
    for (i, r) in result.residuals.iter().enumerate() {
        table.push_numbers(&[i as f64, *r]);
    }
    out.csv("fit_residuals.csv", table)?;
    out.json("fit.json", &result)?;
    out.raw("fitted_preset.json", &format!("{}\n", result.preset.to_json()))?;
    if c.require_converged {
        result.require_converged()?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct DecayFit {
    fit: RBFit,
    sigma_p: f64,
    p_interval: Interval,
}

#[derive(Debug, Serialize)]
struct RbReport {
    level: f64,
    dimension: u32,
    rb: DecayFit,
    irb: DecayFit,
    gate_error: GateError,
    delta_method_sigma: f64,
    monte_carlo: GateErrorEstimate,
}

fn decay_fit(data: &RBDataset, level: f64) -> Result<DecayFit, CliError> {
    let fit = mle_fit(data, None)?;
    Ok(DecayFit { sigma_p: fit.sigma_p(), p_interval: fit.p_interval(level), fit })
}

pub fn rb(cfg: &StudyConfig, out: &mut Writer) -> Result<(), CliError> {
    let c = &cfg.rb;
    if !(c.level > 0.0 && c.level < 1.0) {
        return Err(CliError::Config(format!("rb.level must lie in (0, 1), got {}", c.level)));
    }
    if c.dimension < 2 {
        return Err(CliError::Config(format!("rb.dimension must be at least 2, got {}", c.dimension)));
    }
    let rb = RBDataset::from_csv_with(&read_input(c.rb.as_deref(), "rb.rb")?, c.seeds)?;
    let irb = RBDataset::from_csv_with(&read_input(c.irb.as_deref(), "rb.irb")?, c.seeds)?;

    let mut table = Table::new(
        [
            "experiment",
            "depth",
            "successes",
            "trials",
            "rate",
            "wilson_lower",
            "wilson_upper",
            "wald_lower",
            "wald_upper",
        ]
        .map(String::from)
        .to_vec(),
    );
    table.comments.push(format!("binomial intervals at level {}", c.level));
    for (name, data) in [("rb", &rb), ("irb", &irb)] {
        for i in 0..data.depths.len() {
            let (k, n) = (data.successes[i], data.trials[i]);
            let (wi, wa) = (wilson_interval(k, n, c.level), wald_interval(k, n, c.level));
            let mut row = vec![name.to_string(), data.depths[i].to_string(), k.to_string(), n.to_string()];
            row.extend([k as f64 / n as f64, wi.lower, wi.upper, wa.lower, wa.upper].map(fmt_num));
            table.push_row(row);
        }
    }
    out.csv("rb_intervals.csv", table)?;

    let rb_fit = decay_fit(&rb, c.level)?;
    let irb_fit = decay_fit(&irb, c.level)?;
    let report = RbReport {
        level: c.level,
        dimension: c.dimension,
        gate_error: gate_error(rb_fit.fit.params.p, irb_fit.fit.params.p, c.dimension),
        delta_method_sigma: delta_method_sigma(&rb_fit.fit, &irb_fit.fit, c.dimension),
        monte_carlo: monte_carlo_ci(&rb_fit.fit, &irb_fit.fit, c.dimension, c.samples, c.level, cfg.seed)?,
        rb: rb_fit,
        irb: irb_fit,
    };
    out.json("rb.json", &report)
}
