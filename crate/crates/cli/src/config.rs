//! Study configuration: one JSON document with a section per command.
//! Every field has a default, so `{}` is a valid config. `--set a.b=v`
//! edits the document before it is deserialized; `v` is read as JSON when
//! it parses and as a string otherwise.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use adiacz::adiabaticity::PartnerFilter;
use adiacz::dynamics::FrequencyConvention;
use adiacz::fitting::FitParam;
use adiacz::presets::{builtin, DevicePreset};
use adiacz::rbstats::SeedHandling;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Builtin preset name or path to a preset JSON file.
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub dfactor: DFactorConfig,
    #[serde(default)]
    pub pulse: PulseConfig,
    #[serde(default)]
    pub leakage: LeakageConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub rb: RbConfig,
}

fn default_preset() -> String {
    "measured_device".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Evenly spaced grid. Missing ends are filled in per command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    pub points: usize,
}

impl GridSpec {
    fn with_points(points: usize) -> Self {
        GridSpec { start: None, stop: None, points }
    }

    pub fn resolve(&self, start: f64, stop: f64) -> Result<Vec<f64>, CliError> {
        let (a, b) = (self.start.unwrap_or(start), self.stop.unwrap_or(stop));
        if self.points < 2 || !a.is_finite() || !b.is_finite() || a == b {
            return Err(CliError::Config(format!(
                "grid needs at least two points and distinct finite ends (got {a}..{b}, {} points)",
                self.points
            )));
        }
        let n = self.points;
        let mut g: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
        if a > b {
            g.reverse();
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Bare coupler frequencies (MHz); defaults to the idle point up to the
    /// coupler maximum.
    pub grid: GridSpec,
    /// Labelling point (MHz); defaults to the idle point.
    pub anchor: Option<f64>,
    pub hybridization_state: String,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { grid: GridSpec::with_points(201), anchor: None, hybridization_state: "11,0".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DFactorConfig {
    pub grid: GridSpec,
    pub anchor: Option<f64>,
    pub source: String,
    pub partners: PartnerFilter,
}

impl Default for DFactorConfig {
    fn default() -> Self {
        DFactorConfig {
            grid: GridSpec::with_points(401),
            anchor: None,
            source: "11,0".into(),
            partners: PartnerFilter::SameManifold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    FourierCosine,
    Awp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub shape: PulseShape,
    /// Active pulse length (ns).
    pub t_cz: f64,
    /// Fourier coefficients a_1, a_2, ... (Fourier-cosine only).
    pub coefficients: Vec<f64>,
    /// Waveform sample spacing (ns).
    pub dt: f64,
    /// Conditional phase to calibrate to (rad).
    pub target_phase: f64,
    /// Idle bias (Φ₀); defaults to the preset's operating point.
    pub idle_flux: Option<f64>,
    pub pad_before: f64,
    pub pad_after: f64,
    /// Solver step (ns).
    pub dt_solver: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig {
            shape: PulseShape::FourierCosine,
            t_cz: 24.0,
            coefficients: vec![0.5],
            dt: 0.01,
            target_phase: PI,
            idle_flux: None,
            pad_before: 0.0,
            pad_after: 0.0,
            dt_solver: 0.005,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeakageConfig {
    pub t_cz: f64,
    /// Peak coupler frequency of the cosine flux pulse (MHz).
    pub target: f64,
    /// How `target` is read.
    pub target_convention: FrequencyConvention,
    /// Idle bare coupler frequency (MHz); defaults to the ZZ-free point when
    /// the preset gives a bracket, else to the idle bias.
    pub idle: Option<f64>,
    pub dt: f64,
    /// Delays between pulses (ns).
    pub delays: GridSpec,
    pub max_cycles: usize,
    pub record: Vec<String>,
    /// Also write every (delay, cycle) population.
    pub write_cycles: bool,
}

impl Default for LeakageConfig {
    fn default() -> Self {
        LeakageConfig {
            t_cz: 24.0,
            target: 3500.0,
            target_convention: FrequencyConvention::Bare,
            idle: None,
            dt: 0.01,
            delays: GridSpec { start: Some(0.0), stop: Some(20.0), points: 2001 },
            max_cycles: 40,
            record: ["11,0", "02,0", "20,0", "01,1", "10,1"].map(String::from).to_vec(),
            write_cycles: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSide {
    pub preset: String,
    /// End of the sweep away from the ZZ-free point (MHz). Defaults to the
    /// coupler maximum for sweeps up and 1 GHz below the lower qubit for
    /// sweeps down.
    #[serde(default)]
    pub sweep_to: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub sym: CompareSide,
    pub asym: CompareSide,
    pub points: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            sym: CompareSide { preset: "sym_comparison".into(), sweep_to: None },
            asym: CompareSide { preset: "asym_comparison".into(), sweep_to: None },
            points: 601,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Spectroscopy CSV.
    pub data: Option<PathBuf>,
    pub free: Vec<FitParam>,
    pub max_iterations: usize,
    pub zeta_weight: f64,
    /// Exit with a numerical error when the fit does not converge.
    pub require_converged: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            data: None,
            free: FitParam::ALL.to_vec(),
            max_iterations: 200,
            zeta_weight: adiacz::fitting::ZETA_WEIGHT,
            require_converged: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbConfig {
    /// Reference RB counts CSV.
    pub rb: Option<PathBuf>,
    /// Interleaved RB counts CSV.
    pub irb: Option<PathBuf>,
    /// Hilbert-space dimension of the benchmarked gate.
    pub dimension: u32,
    pub level: f64,
    pub samples: usize,
    /// `pooled` sums rows that share a depth; `per_seed` keeps them apart.
    pub seeds: SeedHandling,
}

impl Default for RbConfig {
    fn default() -> Self {
        RbConfig { rb: None, irb: None, dimension: 4, level: 0.95, samples: 100_000, seeds: SeedHandling::Pooled }
    }
}

/// Reads the config file (if any), applies overrides and deserializes.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<StudyConfig, CliError> {
    let mut doc = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("config field `{path}`: {}", e.into_inner()))
    })
}

fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects path=value, got '{assignment}'")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("--set path '{path}' has an empty component")));
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("--set path '{path}' runs through a non-object")))?;
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| CliError::Config(format!("--set path '{path}' runs through a non-object")))?
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Resolves a builtin name or a preset file.
pub fn resolve_preset(name: &str) -> Result<DevicePreset, CliError> {
    if let Some(p) = builtin(name) {
        return Ok(p);
    }
    let text = fs::read_to_string(name)
        .map_err(|e| CliError::Config(format!("preset '{name}' is neither builtin nor a readable file: {e}")))?;
    DevicePreset::from_json(&text).map_err(|e| CliError::Config(format!("preset '{name}': {e}")))
}
