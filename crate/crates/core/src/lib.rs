//! Adiabatic CZ gates on two fixed-frequency transmons coupled through a
//! flux-tunable transmon coupler.
//!
//! Conventions used throughout the crate:
//! - energies and frequencies are linear frequencies in MHz;
//! - times are in ns;
//! - flux is in units of the flux quantum Φ₀;
//! - an energy `E` (MHz) accumulates phase `RAD_PER_MHZ_NS · E · t` over `t` ns;
//! - adiabatic factors use angular frequency in rad/ns, so `D` carries units
//!   of ns² and `D · dω/dt` is dimensionless.
//!
//! The linear-algebra kernel is generic over the float type; everything
//! else works in `f64` through the aliases below.

pub mod adiabaticity;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod fitting;
pub mod io;
pub mod linalg;
pub mod presets;
pub mod pulse;
pub mod rbstats;
pub mod roots;
pub mod spectrum;

pub use error::{Error, Result};

pub type Real = f64;
pub type Complex = num_complex::Complex<f64>;
pub type RMatrix = linalg::Mat<f64>;
pub type CMatrix = linalg::CMat<f64>;
pub type SymEigen = linalg::SymEigen<f64>;
pub type HermEigen = linalg::HermEigen<f64>;

/// Phase in radians accumulated per MHz per ns.
pub const RAD_PER_MHZ_NS: f64 = 2.0 * std::f64::consts::PI * 1e-3;

/// Angular frequency in rad/ns for a linear frequency in MHz.
pub fn angular(f_mhz: f64) -> f64 {
    RAD_PER_MHZ_NS * f_mhz
}
