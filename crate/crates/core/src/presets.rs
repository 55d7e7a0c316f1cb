//! Device presets: JSON files with a `DeviceParams` body plus optional
//! operating-point metadata. The three shipped presets are embedded.

use serde::{Deserialize, Serialize};

use crate::device::{flux_to_frequency, DeviceParams, TransmonParams, TunableCouplerParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coherence {
    pub t1_us: [f64; 2],
    pub t2e_us: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPoint {
    /// Experimental coupler bias in Φ₀.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idle_flux: Option<f64>,
    /// Bare coupler frequencies (MHz) enclosing the ZZ-free point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zz_zero_bracket: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence: Option<Coherence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DevicePreset {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub q1: TransmonParams,
    pub q2: TransmonParams,
    pub coupler: TunableCouplerParams,
    pub rho_12: f64,
    pub rho_1c: f64,
    pub rho_2c: f64,
    #[serde(default)]
    pub operating: OperatingPoint,
}

impl DevicePreset {
    pub fn device(&self) -> DeviceParams {
        DeviceParams {
            q1: self.q1,
            q2: self.q2,
            coupler: self.coupler,
            rho_12: self.rho_12,
            rho_1c: self.rho_1c,
            rho_2c: self.rho_2c,
        }
    }

    pub fn from_device(name: &str, device: &DeviceParams, operating: OperatingPoint) -> Self {
        DevicePreset {
            name: name.to_string(),
            description: String::new(),
            q1: device.q1,
            q2: device.q2,
            coupler: device.coupler,
            rho_12: device.rho_12,
            rho_1c: device.rho_1c,
            rho_2c: device.rho_2c,
            operating,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: DevicePreset = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        p.device().validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("preset serializes")
    }

    /// Bare coupler frequency at the experimental bias, if one is given.
    pub fn idle_frequency(&self) -> Option<f64> {
        self.operating.idle_flux.map(|phi| flux_to_frequency(&self.coupler, phi))
    }
}

pub const MEASURED_DEVICE_JSON: &str = include_str!("../../../presets/measured_device.json");
pub const SYM_COMPARISON_JSON: &str = include_str!("../../../presets/sym_comparison.json");
pub const ASYM_COMPARISON_JSON: &str = include_str!("../../../presets/asym_comparison.json");

pub fn measured_device() -> DevicePreset {
    DevicePreset::from_json(MEASURED_DEVICE_JSON).expect("embedded preset is valid")
}

pub fn sym_comparison() -> DevicePreset {
    DevicePreset::from_json(SYM_COMPARISON_JSON).expect("embedded preset is valid")
}

pub fn asym_comparison() -> DevicePreset {
    DevicePreset::from_json(ASYM_COMPARISON_JSON).expect("embedded preset is valid")
}

/// Embedded preset by name.
pub fn builtin(name: &str) -> Option<DevicePreset> {
    match name {
        "measured_device" => Some(measured_device()),
        "sym_comparison" => Some(sym_comparison()),
        "asym_comparison" => Some(asym_comparison()),
        _ => None,
    }
}
