mod analysis;
mod dynamics;
mod spectra;

pub use analysis::{fit, rb};
pub use dynamics::{leakage, pulse};
pub use spectra::{compare, dfactor, spectrum};

use adiacz::device::HilbertLabel;
use adiacz::presets::DevicePreset;
use adiacz::spectrum::find_zz_zero;

use crate::CliError;

fn parse_label(s: &str) -> Result<HilbertLabel, CliError> {
    s.parse().map_err(|e: adiacz::Error| CliError::Config(e.to_string()))
}

fn zz_zero(preset: &DevicePreset) -> Result<Option<f64>, CliError> {
    match preset.operating.zz_zero_bracket {
        Some([lo, hi]) => Ok(Some(find_zz_zero(&preset.device(), (lo, hi))?)),
        None => Ok(None),
    }
}

/// Idle bias when the preset gives one, else its ZZ-free point.
fn idle_frequency(preset: &DevicePreset) -> Result<f64, CliError> {
    if let Some(f) = preset.idle_frequency() {
        return Ok(f);
    }
    zz_zero(preset)?.ok_or_else(|| {
        CliError::Config(format!("preset '{}' has neither an idle bias nor a ZZ-free bracket", preset.name))
    })
}
