//! Physical parameterization of two fixed transmons coupled through a
//! flux-tunable transmon, and assembly of the three-mode Hamiltonian.
//!
//! Energies are linear frequencies in MHz. The basis is ordered with the
//! first qubit's occupation most significant, then the second qubit, then the
//! coupler.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::RMatrix;

/// Largest accepted Hilbert-space dimension unless a caller raises it.
pub const DEFAULT_DIMENSION_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonParams {
    /// MHz.
    pub bare_frequency: f64,
    /// MHz, negative.
    pub anharmonicity: f64,
    pub levels: usize,
}

impl TransmonParams {
    pub fn validate(&self, name: &str) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidParameter(format!("{name}.levels must be >= 2")));
        }
        if !(self.anharmonicity < 0.0) || !self.anharmonicity.is_finite() {
            return Err(Error::InvalidParameter(format!("{name}.anharmonicity must be negative")));
        }
        if !(self.bare_frequency > 0.0) || !self.bare_frequency.is_finite() {
            return Err(Error::InvalidParameter(format!("{name}.bare_frequency must be positive")));
        }
        Ok(())
    }
}

/// Asymmetric SQUID transmon used as the coupler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunableCouplerParams {
    /// E_J1 + E_J2 in MHz.
    pub ej_sum: f64,
    /// Charging energy in MHz.
    pub ec: f64,
    /// E_J1 / E_J2, at least 1.
    pub jj_ratio: f64,
    pub levels: usize,
}

impl TunableCouplerParams {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidParameter("coupler.levels must be >= 2".into()));
        }
        if !(self.ej_sum > 0.0) || !self.ej_sum.is_finite() {
            return Err(Error::InvalidParameter("coupler.ej_sum must be positive".into()));
        }
        if !(self.ec > 0.0) || !self.ec.is_finite() {
            return Err(Error::InvalidParameter("coupler.ec must be positive".into()));
        }
        if !(self.jj_ratio >= 1.0) || !self.jj_ratio.is_finite() {
            return Err(Error::InvalidParameter("coupler.jj_ratio must be >= 1".into()));
        }
        if !(self.max_frequency() > self.min_frequency()) {
            return Err(Error::InvalidParameter(
                "coupler band is empty: maximum frequency does not exceed the minimum".into(),
            ));
        }
        Ok(())
    }

    pub fn ej1(&self) -> f64 {
        self.ej_sum * self.jj_ratio / (1.0 + self.jj_ratio)
    }

    pub fn ej2(&self) -> f64 {
        self.ej_sum / (1.0 + self.jj_ratio)
    }

    pub fn max_frequency(&self) -> f64 {
        flux_to_frequency(self, 0.0)
    }

    pub fn min_frequency(&self) -> f64 {
        flux_to_frequency(self, 0.5)
    }

    /// E_J sum that puts the maximum (zero-flux) frequency at `f_max`.
    pub fn ej_sum_for_max_frequency(f_max: f64, ec: f64) -> f64 {
        (f_max + ec).powi(2) / (8.0 * ec)
    }
}

/// Effective Josephson energy (MHz) of the SQUID at `flux` (units of Φ₀).
pub fn squid_ej(coupler: &TunableCouplerParams, flux: f64) -> f64 {
    let (a, b) = (coupler.ej1(), coupler.ej2());
    let s = a * a + b * b + 2.0 * a * b * (2.0 * PI * flux).cos();
    s.max(0.0).sqrt()
}

/// Bare coupler frequency (MHz) in the transmon approximation
/// `√(8 E_J E_C) − E_C`. Tends to `−E_C` as `E_J → 0`, which is unphysical;
/// callers stay where `8 E_J E_C > E_C²`.
pub fn flux_to_frequency(coupler: &TunableCouplerParams, flux: f64) -> f64 {
    (8.0 * squid_ej(coupler, flux) * coupler.ec).sqrt() - coupler.ec
}

/// Flux in [0, 0.5] Φ₀ giving the bare coupler frequency `target`.
pub fn frequency_to_flux(coupler: &TunableCouplerParams, target: f64) -> Result<f64> {
    let (lo, hi) = (coupler.min_frequency(), coupler.max_frequency());
    let slack = 1e-12 * hi.abs();
    if !(target >= lo - slack && target <= hi + slack) {
        return Err(Error::OutOfRange { value: target, lo, hi });
    }
    if target >= hi {
        return Ok(0.0);
    }
    if target <= lo {
        return Ok(0.5);
    }
    let ej = (target + coupler.ec).powi(2) / (8.0 * coupler.ec);
    let (a, b) = (coupler.ej1(), coupler.ej2());
    let c = ((ej * ej - a * a - b * b) / (2.0 * a * b)).clamp(-1.0, 1.0);
    Ok(c.acos() / (2.0 * PI))
}

/// Coupling strength `ρ √(f_a f_b)` in MHz.
pub fn coupling_g(rho: f64, f_a: f64, f_b: f64) -> f64 {
    rho * (f_a * f_b).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    pub q1: TransmonParams,
    pub q2: TransmonParams,
    pub coupler: TunableCouplerParams,
    pub rho_12: f64,
    pub rho_1c: f64,
    pub rho_2c: f64,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        self.q1.validate("q1")?;
        self.q2.validate("q2")?;
        self.coupler.validate()?;
        for (name, v) in [("rho_12", self.rho_12), ("rho_1c", self.rho_1c), ("rho_2c", self.rho_2c)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Soft sanity checks that do not block a computation.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let weakest = self.rho_1c.abs().min(self.rho_2c.abs());
        if self.rho_12.abs() > 0.3 * weakest {
            out.push(format!(
                "|rho_12| = {} is not small compared with the qubit-coupler couplings",
                self.rho_12.abs()
            ));
        }
        out
    }

    pub fn basis(&self) -> Basis {
        Basis { dims: [self.q1.levels, self.q2.levels, self.coupler.levels] }
    }

    /// Couplings (g_12, g_1c, g_2c) in MHz at bare coupler frequency `fc`.
    pub fn couplings(&self, fc: f64) -> (f64, f64, f64) {
        let (f1, f2) = (self.q1.bare_frequency, self.q2.bare_frequency);
        (coupling_g(self.rho_12, f1, f2), coupling_g(self.rho_1c, f1, fc), coupling_g(self.rho_2c, f2, fc))
    }

    pub fn with_zero_couplings(mut self) -> Self {
        self.rho_12 = 0.0;
        self.rho_1c = 0.0;
        self.rho_2c = 0.0;
        self
    }
}

/// Occupation numbers of qubit 1, qubit 2 and the coupler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HilbertLabel {
    pub n1: usize,
    pub n2: usize,
    pub nc: usize,
}

impl HilbertLabel {
    pub const fn new(n1: usize, n2: usize, nc: usize) -> Self {
        HilbertLabel { n1, n2, nc }
    }

    pub fn excitations(&self) -> usize {
        self.n1 + self.n2 + self.nc
    }
}

/// The states |00,0⟩, |10,0⟩, |01,0⟩, |11,0⟩.
pub const COMPUTATIONAL: [HilbertLabel; 4] =
    [HilbertLabel::new(0, 0, 0), HilbertLabel::new(1, 0, 0), HilbertLabel::new(0, 1, 0), HilbertLabel::new(1, 1, 0)];

impl fmt::Display for HilbertLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{},{}", self.n1, self.n2, self.nc)
    }
}

impl FromStr for HilbertLabel {
    type Err = Error;

    /// Parses "n1n2,nc", e.g. "11,0".
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad state label '{s}', expected e.g. \"11,0\""));
        let (q, c) = s.trim().split_once(',').ok_or_else(bad)?;
        let digits: Vec<u32> = q.chars().map(|ch| ch.to_digit(10)).collect::<Option<_>>().ok_or_else(bad)?;
        if digits.len() != 2 {
            return Err(bad());
        }
        let nc = c.trim().parse().map_err(|_| bad())?;
        Ok(HilbertLabel::new(digits[0] as usize, digits[1] as usize, nc))
    }
}

/// Product basis with fixed ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Basis {
    pub dims: [usize; 3],
}

impl Basis {
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn contains(&self, l: HilbertLabel) -> bool {
        l.n1 < self.dims[0] && l.n2 < self.dims[1] && l.nc < self.dims[2]
    }

    pub fn index(&self, l: HilbertLabel) -> Option<usize> {
        self.contains(l).then(|| (l.n1 * self.dims[1] + l.n2) * self.dims[2] + l.nc)
    }

    pub fn label(&self, index: usize) -> HilbertLabel {
        let nc = index % self.dims[2];
        let rest = index / self.dims[2];
        HilbertLabel::new(rest / self.dims[1], rest % self.dims[1], nc)
    }

    pub fn labels(&self) -> Vec<HilbertLabel> {
        (0..self.dim()).map(|i| self.label(i)).collect()
    }
}

fn ladder_energy(f: f64, eta: f64, n: usize) -> f64 {
    let n = n as f64;
    f * n + 0.5 * eta * n * (n - 1.0)
}

/// Hamiltonian (MHz) at bare coupler frequency `coupler_freq`, with the
/// default dimension cap.
pub fn build_hamiltonian(device: &DeviceParams, coupler_freq: f64) -> Result<RMatrix> {
    build_hamiltonian_capped(device, coupler_freq, DEFAULT_DIMENSION_CAP)
}

pub fn build_hamiltonian_capped(device: &DeviceParams, coupler_freq: f64, cap: usize) -> Result<RMatrix> {
    if !(coupler_freq > 0.0) || !coupler_freq.is_finite() {
        return Err(Error::InvalidParameter(format!("coupler frequency {coupler_freq} must be positive")));
    }
    let basis = device.basis();
    let dim = basis.dim();
    if dim > cap {
        return Err(Error::DimensionOverflow { dim, cap });
    }
    let (g12, g1c, g2c) = device.couplings(coupler_freq);
    let eta_c = -device.coupler.ec;
    let mut h = RMatrix::zeros(dim);
    for i in 0..dim {
        let l = basis.label(i);
        h[(i, i)] = ladder_energy(device.q1.bare_frequency, device.q1.anharmonicity, l.n1)
            + ladder_energy(device.q2.bare_frequency, device.q2.anharmonicity, l.n2)
            + ladder_energy(coupler_freq, eta_c, l.nc);
    }
    // (a + a†) ⊗ (b + b†) couples states that differ by one quantum in each
    // of the two modes. Only the upper triangle is computed, then mirrored.
    let occupations = |l: HilbertLabel| [l.n1, l.n2, l.nc];
    let pairs = [(0usize, 1usize, g12), (0, 2, g1c), (1, 2, g2c)];
    for i in 0..dim {
        let li = occupations(basis.label(i));
        for &(ma, mb, g) in &pairs {
            if g == 0.0 {
                continue;
            }
            for da in [-1i64, 1] {
                for db in [-1i64, 1] {
                    let mut lj = li;
                    let na = li[ma] as i64 + da;
                    let nb = li[mb] as i64 + db;
                    if na < 0 || nb < 0 || na as usize >= basis.dims[ma] || nb as usize >= basis.dims[mb] {
                        continue;
                    }
                    lj[ma] = na as usize;
                    lj[mb] = nb as usize;
                    let j = basis.index(HilbertLabel::new(lj[0], lj[1], lj[2])).unwrap();
                    if j <= i {
                        continue;
                    }
                    let amp_a = (li[ma].max(na as usize) as f64).sqrt();
                    let amp_b = (li[mb].max(nb as usize) as f64).sqrt();
                    let v = g * amp_a * amp_b;
                    h[(i, j)] += v;
                    h[(j, i)] += v;
                }
            }
        }
    }
    Ok(h)
}

/// A real symmetric Hamiltonian family parameterized by one control value
/// (the bare coupler frequency in MHz).
pub trait ControlledHamiltonian {
    fn labels(&self) -> Vec<HilbertLabel>;

    fn hamiltonian(&self, control: f64) -> Result<RMatrix>;

    /// Valid control range.
    fn control_range(&self) -> (f64, f64) {
        (f64::MIN_POSITIVE, f64::INFINITY)
    }

    fn dim(&self) -> usize {
        self.labels().len()
    }

    fn index_of(&self, label: HilbertLabel) -> Option<usize> {
        self.labels().iter().position(|&l| l == label)
    }
}

impl ControlledHamiltonian for DeviceParams {
    fn labels(&self) -> Vec<HilbertLabel> {
        self.basis().labels()
    }

    fn hamiltonian(&self, control: f64) -> Result<RMatrix> {
        build_hamiltonian(self, control)
    }

    fn control_range(&self) -> (f64, f64) {
        (self.coupler.min_frequency(), self.coupler.max_frequency())
    }

    fn dim(&self) -> usize {
        self.basis().dim()
    }

    fn index_of(&self, label: HilbertLabel) -> Option<usize> {
        self.basis().index(label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coupler() -> TunableCouplerParams {
        TunableCouplerParams {
            ej_sum: TunableCouplerParams::ej_sum_for_max_frequency(3622.0, 178.0),
            ec: 178.0,
            jj_ratio: 2.23,
            levels: 3,
        }
    }

    #[test]
    fn squid_limits() {
        let c = coupler();
        assert!((squid_ej(&c, 0.0) - c.ej_sum).abs() < 1e-9 * c.ej_sum);
        let half = c.ej_sum * (c.jj_ratio - 1.0) / (c.jj_ratio + 1.0);
        assert!((squid_ej(&c, 0.5) - half).abs() < 1e-9 * c.ej_sum);
    }

    #[test]
    fn squid_ratio_at_operating_flux() {
        // Equivalent closed form: E_J = E_Σ √(cos²πΦ + d² sin²πΦ), d = (r−1)/(r+1).
        let c = coupler();
        let d = (c.jj_ratio - 1.0) / (c.jj_ratio + 1.0);
        let x = PI * 0.35;
        let expected = (x.cos().powi(2) + d * d * x.sin().powi(2)).sqrt();
        let got = squid_ej(&c, 0.35) / c.ej_sum;
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.567).abs() < 1e-3);
    }

    #[test]
    fn flux_limits_round_trip() {
        let c = coupler();
        assert_eq!(frequency_to_flux(&c, c.max_frequency()).unwrap(), 0.0);
        assert!((frequency_to_flux(&c, c.min_frequency()).unwrap() - 0.5).abs() < 1e-6);
        assert!(matches!(frequency_to_flux(&c, 5000.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn label_text_round_trip() {
        let l = HilbertLabel::new(0, 2, 1);
        assert_eq!(l.to_string(), "02,1");
        assert_eq!("02,1".parse::<HilbertLabel>().unwrap(), l);
        assert!("2,1".parse::<HilbertLabel>().is_err());
    }

    #[test]
    fn basis_is_first_qubit_major() {
        let b = Basis { dims: [3, 3, 3] };
        assert_eq!(b.index(HilbertLabel::new(1, 0, 0)), Some(9));
        assert_eq!(b.index(HilbertLabel::new(0, 1, 0)), Some(3));
        assert_eq!(b.index(HilbertLabel::new(0, 0, 1)), Some(1));
        for i in 0..27 {
            assert_eq!(b.index(b.label(i)), Some(i));
        }
    }

    #[test]
    fn dimension_cap() {
        let mut d = DeviceParams {
            q1: TransmonParams { bare_frequency: 4000.0, anharmonicity: -200.0, levels: 30 },
            q2: TransmonParams { bare_frequency: 4100.0, anharmonicity: -200.0, levels: 30 },
            coupler: coupler(),
            rho_12: 0.0,
            rho_1c: 0.0,
            rho_2c: 0.0,
        };
        d.coupler.levels = 30;
        assert!(matches!(build_hamiltonian(&d, 3000.0), Err(Error::DimensionOverflow { dim: 27000, .. })));
    }
}
