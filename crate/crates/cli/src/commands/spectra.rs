//! Static studies along the coupler frequency: dressed spectrum,
//! adiabatic factors, and the symmetric/asymmetric comparison.

use adiacz::adiabaticity::{dfactor_from_spectrum, total_d_with, DFactorOptions};
use adiacz::device::{HilbertLabel, COMPUTATIONAL};
use adiacz::io::Table;
use adiacz::presets::DevicePreset;
use adiacz::spectrum::{hybridization, track_spectrum};
use serde::Serialize;

use super::{idle_frequency, parse_label, zz_zero};
use crate::config::{CompareSide, StudyConfig};
use crate::output::{column, Writer};
use crate::CliError;

pub fn spectrum(cfg: &StudyConfig, preset: &DevicePreset, out: &mut Writer) -> Result<(), CliError> {
    let c = &cfg.spectrum;
    let dev = preset.device();
    let idle = idle_frequency(preset)?;
    let grid = c.grid.resolve(idle, dev.coupler.max_frequency())?;
    let anchor = c.anchor.unwrap_or(idle);
    let state = parse_label(&c.hybridization_state)?;
    let spec = track_spectrum(&dev, &grid, anchor)?;

    let mut header = vec!["f_c_mhz".to_string()];
    header.extend(spec.labels.iter().map(|&l| format!("e_{}", column(l))));
    let mut energies = Table::new(header);
    for (p, &f) in grid.iter().enumerate() {
        let mut row = vec![f];
        row.extend(&spec.energies[p]);
        energies.push_numbers(&row);
    }
    out.csv("spectrum.csv", energies)?;

    let hyb = hybridization(&spec, state)?;
    let mut header = vec!["f_c_mhz".to_string()];
    header.extend(hyb.bare_labels.iter().map(|&l| format!("w_{}", column(l))));
    let mut weights = Table::new(header);
    weights.comments.push(format!("dressed state {state}"));
    for (p, &f) in grid.iter().enumerate() {
        let mut row = vec![f];
        row.extend(&hyb.weights[p]);
        weights.push_numbers(&row);
    }
    out.csv("hybridization.csv", weights)?;

    let z = spec.zeta_curve()?;
    let mut zeta = Table::new(vec!["f_c_mhz".into(), "zeta_mhz".into()]);
    for (&f, &v) in grid.iter().zip(&z) {
        zeta.push_numbers(&[f, v]);
    }
    out.csv("zeta.csv", zeta)
}

pub fn dfactor(cfg: &StudyConfig, preset: &DevicePreset, out: &mut Writer) -> Result<(), CliError> {
    let c = &cfg.dfactor;
    let dev = preset.device();
    let idle = idle_frequency(preset)?;
    let grid = c.grid.resolve(idle, dev.coupler.max_frequency())?;
    let anchor = c.anchor.unwrap_or(idle);
    let source = parse_label(&c.source)?;
    let opts = DFactorOptions { partners: c.partners, ..DFactorOptions::default() };
    let spec = track_spectrum(&dev, &grid, anchor)?;
    let curve = dfactor_from_spectrum(&dev, &spec, &[source], &opts)?;
    let total = dfactor_from_spectrum(&dev, &spec, &COMPUTATIONAL, &opts)?;

    let partners: Vec<HilbertLabel> = curve
        .labels
        .iter()
        .copied()
        .filter(|&l| l != source && curve.component(source, l).is_some_and(|v| v.iter().any(Option::is_some)))
        .collect();
    let mut header = vec!["f_c_mhz".to_string()];
    header.extend(partners.iter().map(|&l| format!("d_{}", column(l))));
    header.push(format!("d_state_{}", column(source)));
    header.push("d_total_computational".into());
    let mut table = Table::new(header);
    table.comments.push(format!("adiabatic factors (ns^2) for dressed state {source}; nan marks excluded gaps"));
    let comps: Vec<Vec<Option<f64>>> = partners.iter().map(|&l| curve.component(source, l).unwrap()).collect();
    let per = curve.per_state_curve(source).expect("source was requested");
    for (p, &f) in grid.iter().enumerate() {
        let mut row = vec![f];
        row.extend(comps.iter().map(|c| c[p].unwrap_or(f64::NAN)));
        row.push(per[p]);
        row.push(total.total[p]);
        table.push_numbers(&row);
    }
    out.csv("dfactor.csv", table)
}

#[derive(Debug, Serialize)]
struct CompareSummary {
    preset: String,
    zz_zero_mhz: f64,
    first_qubit_mhz: f64,
    zeta_at_first_qubit_mhz: f64,
    d_total_at_first_qubit_ns2: f64,
    d_total_max_ns2: f64,
}

#[derive(Debug, Serialize)]
struct Comparison {
    sym: CompareSummary,
    asym: CompareSummary,
    /// Asymmetric over symmetric total D at the first qubit reached.
    d_ratio_at_first_qubit: f64,
}

const DRIVEN: [HilbertLabel; 3] = [HilbertLabel::new(1, 0, 0), HilbertLabel::new(0, 1, 0), HilbertLabel::new(1, 1, 0)];

fn compare_side(side: &CompareSide, points: usize, file: &str, out: &mut Writer) -> Result<CompareSummary, CliError> {
    let preset = crate::config::resolve_preset(&side.preset)?;
    let dev = preset.device();
    let zz = zz_zero(&preset)?
        .ok_or_else(|| CliError::Config(format!("preset '{}' has no ZZ-free bracket", preset.name)))?;
    let (f1, f2) = (dev.q1.bare_frequency, dev.q2.bare_frequency);
    let up = zz < f1.min(f2);
    let first = if up { f1.min(f2) } else { f1.max(f2) };
    let stop = side.sweep_to.unwrap_or(if up { dev.coupler.max_frequency() } else { f1.min(f2) - 1000.0 });
    if (stop - zz) * (first - zz) <= 0.0 {
        return Err(CliError::Config(format!("sweep_to {stop} MHz does not move from {zz} MHz toward the qubits")));
    }
    let n = points.max(2);
    let mut grid: Vec<f64> = (0..n).map(|i| zz + (stop - zz) * i as f64 / (n - 1) as f64).collect();
    if !grid.iter().any(|&f| f == first) {
        grid.push(first);
    }
    grid.sort_by(f64::total_cmp);
    let spec = track_spectrum(&dev, &grid, zz)?;
    let d = total_d_with(&dev, &grid, zz, Some(&DRIVEN), &DFactorOptions::default())?;
    let z = spec.zeta_curve()?;
    let k = grid.iter().position(|&f| f == first).expect("first qubit is on the grid");

    let watched = [
        HilbertLabel::new(1, 1, 0),
        HilbertLabel::new(0, 0, 1),
        HilbertLabel::new(1, 0, 0),
        HilbertLabel::new(0, 1, 0),
    ];
    let idx: Vec<usize> = watched.iter().map(|&l| spec.label_index(l).expect("label tracked")).collect();
    let mut header = vec!["f_c_mhz".to_string(), "zeta_mhz".into(), "d_total_ns2".into()];
    header.extend(watched.iter().map(|&l| format!("e_{}", column(l))));
    let mut table = Table::new(header);
    table.comments.push(format!("preset {}; D summed over |10,0>, |01,0>, |11,0>", preset.name));
    for (p, &f) in grid.iter().enumerate() {
        let mut row = vec![f, z[p], d.total[p]];
        row.extend(idx.iter().map(|&i| spec.energies[p][i]));
        table.push_numbers(&row);
    }
    out.csv(file, table)?;
    Ok(CompareSummary {
        preset: preset.name.clone(),
        zz_zero_mhz: zz,
        first_qubit_mhz: first,
        zeta_at_first_qubit_mhz: z[k],
        d_total_at_first_qubit_ns2: d.total[k],
        d_total_max_ns2: d.total.iter().cloned().fold(0.0, f64::max),
    })
}

pub fn compare(cfg: &StudyConfig, out: &mut Writer) -> Result<(), CliError> {
    let c = &cfg.compare;
    let sym = compare_side(&c.sym, c.points, "compare_sym.csv", out)?;
    let asym = compare_side(&c.asym, c.points, "compare_asym.csv", out)?;
    let ratio = asym.d_total_at_first_qubit_ns2 / sym.d_total_at_first_qubit_ns2;
    out.json("compare.json", &Comparison { sym, asym, d_ratio_at_first_qubit: ratio })
}
