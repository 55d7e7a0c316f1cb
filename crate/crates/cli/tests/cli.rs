//! End-to-end runs of the `adiacz` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adiacz::fitting::{synthesize_dataset, FitParam};
use adiacz::presets::{measured_device, DevicePreset};
use adiacz::rbstats::{synthesize_rb_counts, RBParams};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adiacz")).args(args).output().expect("binary runs")
}

fn run_in(cmd: &str, out: &Path, sets: &[&str]) -> Output {
    let mut args = vec![cmd.to_string(), "--out".into(), out.display().to_string()];
    for s in sets {
        args.push("--set".into());
        args.push(s.to_string());
    }
    run(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn ok(cmd: &str, out: &Path, sets: &[&str]) {
    let o = run_in(cmd, out, sets);
    assert!(o.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// Columns of a metadata-prefixed CSV, keyed by header. Non-numeric cells
/// become NaN.
fn csv(path: &Path) -> BTreeMap<String, Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let mut cols: BTreeMap<String, Vec<f64>> = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for line in lines {
        for (h, cell) in header.iter().zip(line.split(',')) {
            cols.get_mut(h).unwrap().push(cell.parse().unwrap_or(f64::NAN));
        }
    }
    cols
}

fn result(path: &Path) -> Value {
    let doc: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    doc["result"].clone()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn write_preset(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&measured_device().to_json()).unwrap();
    v["name"] = Value::String(name.into());
    edit(&mut v);
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, v.to_string()).unwrap();
    path
}

fn zero_coupling_preset(dir: &Path) -> PathBuf {
    write_preset(dir, "uncoupled", |v| {
        for k in ["rho_12", "rho_1c", "rho_2c"] {
            v[k] = 0.0.into();
        }
        v["operating"]["zz_zero_bracket"] = Value::Null;
    })
}

// ---------------------------------------------------------------- spectrum

#[test]
fn spectrum_puts_11_0_above_the_other_two_excitation_states() {
    let tmp = TempDir::new().unwrap();
    ok("spectrum", tmp.path(), &["spectrum.grid.points=41", "spectrum.grid.stop=3400"]);
    let s = csv(&tmp.path().join("spectrum.csv"));
    for i in 0..s["f_c_mhz"].len() {
        let top = s["e_11_0"][i];
        for other in ["e_02_0", "e_20_0", "e_01_1", "e_10_1", "e_00_2"] {
            assert!(top > s[other][i], "{other} above |11,0> at {}", s["f_c_mhz"][i]);
        }
    }
    for name in ["spectrum.csv", "hybridization.csv", "zeta.csv"] {
        assert!(tmp.path().join(name).exists());
    }
}

#[test]
fn spectrum_of_an_uncoupled_device_is_the_bare_ladder() {
    let tmp = TempDir::new().unwrap();
    let preset = zero_coupling_preset(tmp.path());
    let preset_set = format!("preset={}", preset.display());
    ok("spectrum", &tmp.path().join("out"), &[&preset_set, "spectrum.grid.points=21"]);
    let p = measured_device();
    let (f1, f2) = (p.q1.bare_frequency, p.q2.bare_frequency);
    let s = csv(&tmp.path().join("out/spectrum.csv"));
    let h = csv(&tmp.path().join("out/hybridization.csv"));
    let z = csv(&tmp.path().join("out/zeta.csv"));
    for i in 0..s["f_c_mhz"].len() {
        let fc = s["f_c_mhz"][i];
        let ground = s["e_00_0"][i];
        assert!(ground.abs() < 1e-9);
        assert!((s["e_10_0"][i] - f1).abs() < 1e-6);
        assert!((s["e_01_0"][i] - f2).abs() < 1e-6);
        assert!((s["e_11_0"][i] - f1 - f2).abs() < 1e-6);
        assert!((s["e_00_1"][i] - fc).abs() < 1e-6);
        assert!((h["w_11_0"][i] - 1.0).abs() < 1e-9);
        assert!(z["zeta_mhz"][i].abs() < 1e-6);
    }
}

#[test]
fn symmetric_preset_zeta_crosses_zero_below_the_qubits() {
    let tmp = TempDir::new().unwrap();
    ok(
        "spectrum",
        tmp.path(),
        &["preset=sym_comparison", "spectrum.grid.start=2800", "spectrum.grid.stop=4600", "spectrum.grid.points=91"],
    );
    let z = csv(&tmp.path().join("zeta.csv"));
    let (f, zeta) = (&z["f_c_mhz"], &z["zeta_mhz"]);
    let crossings: Vec<f64> =
        (1..f.len()).filter(|&i| zeta[i - 1].signum() != zeta[i].signum()).map(|i| f[i]).collect();
    assert!(!crossings.is_empty());
    assert!(crossings.iter().all(|&c| c < 4200.0), "crossings {crossings:?}");
    // The preset's ZZ-free bracket holds a negative-to-positive crossing.
    assert!((1..f.len()).any(|i| f[i - 1] >= 3150.0 && f[i] <= 3400.0 && zeta[i - 1] < 0.0 && zeta[i] > 0.0));
}

// ----------------------------------------------------------------- dfactor

#[test]
fn dfactor_of_11_0_is_dominated_by_02_0() {
    let tmp = TempDir::new().unwrap();
    ok("dfactor", tmp.path(), &["dfactor.grid.points=121"]);
    let d = csv(&tmp.path().join("dfactor.csv"));
    let peak = |col: &Vec<f64>| col.iter().cloned().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let best = d
        .iter()
        .filter(|(k, _)| k.starts_with("d_") && !k.starts_with("d_state") && !k.starts_with("d_total"))
        .max_by(|a, b| peak(a.1).total_cmp(&peak(b.1)))
        .unwrap();
    assert_eq!(best.0, "d_02_0");
}

#[test]
fn dfactor_total_is_at_least_the_single_state_value() {
    let tmp = TempDir::new().unwrap();
    ok("dfactor", tmp.path(), &["dfactor.grid.points=81"]);
    let d = csv(&tmp.path().join("dfactor.csv"));
    for (s, t) in d["d_state_11_0"].iter().zip(&d["d_total_computational"]) {
        assert!(*s >= 0.0 && t + 1e-12 >= *s);
    }
}

#[test]
fn dfactor_vanishes_without_coupling() {
    let tmp = TempDir::new().unwrap();
    let preset = zero_coupling_preset(tmp.path());
    let preset_set = format!("preset={}", preset.display());
    ok("dfactor", &tmp.path().join("out"), &[&preset_set, "dfactor.grid.points=21", "dfactor.grid.stop=3400"]);
    let d = csv(&tmp.path().join("out/dfactor.csv"));
    assert!(d["d_total_computational"].iter().all(|v| v.abs() < 1e-12));
}

// ------------------------------------------------------------------- pulse

#[test]
fn twenty_ns_cosine_pi_pulse_peaks_near_3_5_ghz() {
    let tmp = TempDir::new().unwrap();
    ok("pulse", tmp.path(), &["pulse.t_cz=20"]);
    let r = result(&tmp.path().join("pulse.json"));
    assert!((num(&r["conditional_phase"]["phase"]) - std::f64::consts::PI).abs() < 1e-4);
    assert!((num(&r["max_dressed_frequency_mhz"]) - 3500.0).abs() < 50.0);
    assert_eq!(r["descriptor"]["type"], "fourier_cosine");
    let w = csv(&tmp.path().join("waveform.csv"));
    let idle = num(&r["idle_frequency_mhz"]);
    assert!((w["value"][0] - idle).abs() < 1e-6 && (w["value"].last().unwrap() - idle).abs() < 1e-6);
}

#[test]
fn awp_pulse_is_calibrated_and_returns_to_idle() {
    let tmp = TempDir::new().unwrap();
    ok("pulse", tmp.path(), &["pulse.shape=awp", "pulse.pad_before=2", "pulse.pad_after=2"]);
    let r = result(&tmp.path().join("pulse.json"));
    assert!((num(&r["conditional_phase"]["phase"]) - std::f64::consts::PI).abs() < 1e-4);
    assert_eq!(r["descriptor"]["type"], "awp");
    assert!(num(&r["descriptor"]["lambda"]) > 0.0);
    let w = csv(&tmp.path().join("waveform.csv"));
    let idle = num(&r["idle_frequency_mhz"]);
    assert!((w["value"][0] - idle).abs() < 1e-6 && (w["value"].last().unwrap() - idle).abs() < 1e-6);
    assert!((w["t_ns"].last().unwrap() - 28.0).abs() < 1e-9);
    // Incoherent error grows with the padded duration.
    assert!((num(&r["incoherent_error"]) - 28.0 / 24.0 * 2.749313557e-4).abs() < 1e-8);
}

#[test]
fn zero_target_phase_needs_no_pulse_and_too_large_a_phase_is_a_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    ok("pulse", &tmp.path().join("zero"), &["pulse.target_phase=0", "pulse.t_cz=10"]);
    let r = result(&tmp.path().join("zero/pulse.json"));
    assert_eq!(num(&r["scale"]), 0.0);
    assert!(num(&r["conditional_phase"]["phase"]).abs() < 1e-9);
    let o = run_in("pulse", &tmp.path().join("far"), &["pulse.target_phase=40", "pulse.t_cz=8"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unreachable"));
}

// ----------------------------------------------------------------- leakage

#[test]
fn leakage_into_02_0_repeats_every_8_33_ns_at_3_5_ghz() {
    let tmp = TempDir::new().unwrap();
    ok(
        "leakage",
        tmp.path(),
        &["leakage.delays.stop=100", "leakage.delays.points=10001", r#"leakage.record=["02,0"]"#],
    );
    let r = result(&tmp.path().join("peaks.json"));
    let period = 1e3 / num(&r["traces"][0]["dominant_line"]["frequency"]);
    assert!((period - 8.33).abs() < 0.05, "period {period}");
}

#[test]
fn leakage_map_conserves_population_and_writes_cycles() {
    let tmp = TempDir::new().unwrap();
    ok("leakage", tmp.path(), &["leakage.delays.points=11", "leakage.max_cycles=5", "leakage.write_cycles=true"]);
    let r = result(&tmp.path().join("peaks.json"));
    assert!(num(&r["max_sum_deviation"]) < 1e-8);
    let f = num(&r["single_pulse_fidelity"]);
    assert!(f > 0.9 && f <= 1.0);
    let c = csv(&tmp.path().join("leakage_cycles.csv"));
    assert_eq!(c["cycle"].len(), 11 * 6);
    for (n, p) in c["cycle"].iter().zip(&c["p_11_0"]) {
        if *n == 0.0 {
            assert!((p - 1.0).abs() < 1e-12);
        }
    }
    let avg = csv(&tmp.path().join("leakage_averaged.csv"));
    assert_eq!(avg["delay_ns"], (0..11).map(|i| 2.0 * i as f64).collect::<Vec<_>>());
}

#[test]
fn leakage_target_in_dressed_convention_is_converted_to_bare() {
    let tmp = TempDir::new().unwrap();
    ok(
        "leakage",
        tmp.path(),
        &[
            "leakage.delays.points=3",
            "leakage.max_cycles=2",
            "leakage.target=3484.6",
            "leakage.target_convention=dressed",
        ],
    );
    let r = result(&tmp.path().join("peaks.json"));
    assert!((num(&r["target_bare_mhz"]) - 3617.2).abs() < 1.0);
}

#[test]
fn leakage_rejects_unknown_state_labels() {
    let tmp = TempDir::new().unwrap();
    let o = run_in("leakage", tmp.path(), &[r#"leakage.record=["1,1"]"#]);
    assert_eq!(code(&o), 2);
}

// ----------------------------------------------------------------- compare

#[test]
fn compare_reports_the_zz_landscape_of_both_couplers() {
    let tmp = TempDir::new().unwrap();
    ok("compare", tmp.path(), &["compare.points=101"]);
    let r = result(&tmp.path().join("compare.json"));
    let sym_zeta = num(&r["sym"]["zeta_at_first_qubit_mhz"]);
    let asym_zeta = num(&r["asym"]["zeta_at_first_qubit_mhz"]);
    assert!((sym_zeta - 75.0).abs() <= 7.5, "sym {sym_zeta}");
    assert!((asym_zeta + 20.0).abs() <= 5.0, "asym {asym_zeta}");
    assert!(num(&r["sym"]["zz_zero_mhz"]) < num(&r["sym"]["first_qubit_mhz"]));
    assert!(num(&r["asym"]["zz_zero_mhz"]) > num(&r["asym"]["first_qubit_mhz"]));
}

#[test]
fn compare_asymmetric_total_d_exceeds_symmetric() {
    let tmp = TempDir::new().unwrap();
    ok("compare", tmp.path(), &["compare.points=101"]);
    let r = result(&tmp.path().join("compare.json"));
    let ratio = num(&r["d_ratio_at_first_qubit"]);
    assert!(ratio > 1.0);
    assert!(
        (ratio - num(&r["asym"]["d_total_at_first_qubit_ns2"]) / num(&r["sym"]["d_total_at_first_qubit_ns2"])).abs()
            < 1e-12
    );
}

#[test]
fn compare_symmetric_zeta_is_monotone_above_the_zz_zero() {
    let tmp = TempDir::new().unwrap();
    ok("compare", tmp.path(), &["compare.points=61", "compare.sym.preset=sym_comparison", "compare.sym.sweep_to=4200"]);
    let s = csv(&tmp.path().join("compare_sym.csv"));
    assert!(s["zeta_mhz"][0].abs() < 1e-6);
    assert!(s["zeta_mhz"].windows(2).all(|w| w[1] > w[0]));
    let o =
        run_in("compare", &tmp.path().join("bad"), &["compare.sym.preset=sym_comparison", "compare.sym.sweep_to=2000"]);
    assert_eq!(code(&o), 2);
}

// --------------------------------------------------------------------- fit

fn spectroscopy_csv(dir: &Path) -> PathBuf {
    let fluxes: Vec<f64> = (0..16).map(|i| 0.03 * i as f64).collect();
    let data = synthesize_dataset(&measured_device().device(), &fluxes).unwrap();
    let path = dir.join("spectroscopy.csv");
    fs::write(&path, data.to_csv()).unwrap();
    path
}

fn perturbed_preset(dir: &Path) -> PathBuf {
    write_preset(dir, "start", |v| {
        for (k, f) in [("rho_12", 1.03), ("rho_1c", 0.98), ("rho_2c", 1.02)] {
            v[k] = (v[k].as_f64().unwrap() * f).into();
        }
        for (k, f) in [("ej_sum", 1.01), ("ec", 0.99), ("jj_ratio", 1.02)] {
            v["coupler"][k] = (v["coupler"][k].as_f64().unwrap() * f).into();
        }
    })
}

#[test]
fn fit_recovers_noiseless_spectroscopy() {
    let tmp = TempDir::new().unwrap();
    let data = format!("fit.data={}", spectroscopy_csv(tmp.path()).display());
    let preset = format!("preset={}", perturbed_preset(tmp.path()).display());
    ok("fit", &tmp.path().join("out"), &[&data, &preset]);
    let fitted =
        DevicePreset::from_json(&fs::read_to_string(tmp.path().join("out/fitted_preset.json")).unwrap()).unwrap();
    let truth = measured_device().device();
    for p in FitParam::ALL {
        let rel = ((p.get(&fitted.device()) - p.get(&truth)) / p.get(&truth)).abs();
        assert!(rel < 1e-3, "{} off by {rel}", p.name());
    }
    let r = result(&tmp.path().join("out/fit.json"));
    assert_eq!(r["report"]["converged"], true);
}

#[test]
fn fit_with_fixed_parameters_keeps_them() {
    let tmp = TempDir::new().unwrap();
    let data = format!("fit.data={}", spectroscopy_csv(tmp.path()).display());
    let preset = format!("preset={}", perturbed_preset(tmp.path()).display());
    ok("fit", &tmp.path().join("out"), &[&data, &preset, r#"fit.free=["rho_12"]"#]);
    let fitted =
        DevicePreset::from_json(&fs::read_to_string(tmp.path().join("out/fitted_preset.json")).unwrap()).unwrap();
    let start = DevicePreset::from_json(&fs::read_to_string(tmp.path().join("start.json")).unwrap()).unwrap();
    assert_eq!(fitted.coupler, start.coupler);
    assert_eq!(fitted.device().rho_1c, start.device().rho_1c);
    let res = csv(&tmp.path().join("out/fit_residuals.csv"));
    assert!(!res["residual"].is_empty());
}

#[test]
fn fit_failures_map_to_exit_codes() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run_in("fit", tmp.path(), &[])), 2);
    let data = format!("fit.data={}", spectroscopy_csv(tmp.path()).display());
    let preset = format!("preset={}", perturbed_preset(tmp.path()).display());
    let o =
        run_in("fit", &tmp.path().join("out"), &[&data, &preset, "fit.max_iterations=1", "fit.require_converged=true"]);
    assert_eq!(code(&o), 3);
    // Results are still written for inspection.
    assert!(tmp.path().join("out/fit.json").exists());
}

// ---------------------------------------------------------------------- rb

const DEPTHS: [u64; 10] = [1, 5, 10, 20, 40, 60, 80, 100, 150, 200];

fn rb_files(dir: &Path, shots: u64) -> (String, String) {
    let mut sets = Vec::new();
    for (name, p, seed) in [("rb", 0.99, 7), ("irb", 0.98893, 8)] {
        let data = synthesize_rb_counts(&RBParams { p, a: 0.7, b: 0.25 }, &DEPTHS, shots, seed).unwrap();
        let path = dir.join(format!("{name}.csv"));
        fs::write(&path, data.to_csv()).unwrap();
        sets.push(format!("rb.{name}={}", path.display()));
    }
    (sets.remove(0), sets.remove(0))
}

#[test]
fn rb_gate_error_matches_its_error_propagation() {
    let tmp = TempDir::new().unwrap();
    let (rb, irb) = rb_files(tmp.path(), 100_000);
    ok("rb", &tmp.path().join("out"), &[&rb, &irb, "rb.samples=200000"]);
    let r = result(&tmp.path().join("out/rb.json"));
    let mc = &r["monte_carlo"];
    let (sigma, delta) = (num(&mc["sigma"]), num(&r["delta_method_sigma"]));
    assert!((sigma - delta).abs() < 0.05 * delta);
    assert!(num(&mc["lower"]) <= num(&mc["point_estimate"]) && num(&mc["point_estimate"]) <= num(&mc["upper"]));
    let r_true = 0.75 * (1.0 - 0.98893 / 0.99);
    assert!((num(&r["gate_error"]["value"]) - r_true).abs() < 4.0 * delta);
}

#[test]
fn rb_intervals_bracket_the_observed_rates() {
    let tmp = TempDir::new().unwrap();
    let (rb, irb) = rb_files(tmp.path(), 500);
    ok("rb", &tmp.path().join("out"), &[&rb, &irb, "rb.samples=1000", "rb.level=0.9"]);
    let t = csv(&tmp.path().join("out/rb_intervals.csv"));
    assert_eq!(t["rate"].len(), 2 * DEPTHS.len());
    for i in 0..t["rate"].len() {
        let (lo, hi, rate) = (t["wilson_lower"][i], t["wilson_upper"][i], t["rate"][i]);
        assert!(0.0 <= lo && lo <= rate && rate <= hi && hi <= 1.0);
    }
}

#[test]
fn rb_per_seed_rows_match_pooled_counts() {
    let tmp = TempDir::new().unwrap();
    let split = |name: &str| {
        let data = synthesize_rb_counts(&RBParams { p: 0.99, a: 0.7, b: 0.25 }, &DEPTHS, 1000, 3).unwrap();
        let mut text = String::from("depth,successes,trials\n");
        for i in 0..DEPTHS.len() {
            let k = data.successes[i];
            text.push_str(&format!("{},{},500\n{},{},500\n", DEPTHS[i], k / 2, DEPTHS[i], k - k / 2));
        }
        let path = tmp.path().join(name);
        fs::write(&path, text).unwrap();
        path
    };
    let (a, b) = (split("a.csv"), split("b.csv"));
    let sets = [format!("rb.rb={}", a.display()), format!("rb.irb={}", b.display()), "rb.samples=1000".into()];
    let gate = |mode: &str, out: &str| {
        let mut s: Vec<&str> = sets.iter().map(String::as_str).collect();
        let m = format!("rb.seeds={mode}");
        s.push(&m);
        ok("rb", &tmp.path().join(out), &s);
        let r = result(&tmp.path().join(out).join("rb.json"));
        (num(&r["rb"]["fit"]["params"]["p"]), csv(&tmp.path().join(out).join("rb_intervals.csv"))["rate"].len())
    };
    let (p_pooled, rows_pooled) = gate("pooled", "pooled");
    let (p_seed, rows_seed) = gate("per_seed", "seed");
    assert_eq!((rows_pooled, rows_seed), (20, 40));
    assert!((p_pooled - p_seed).abs() < 1e-6);
}

#[test]
fn rb_input_problems_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run_in("rb", tmp.path(), &[])), 2);
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "depth,successes,trials\n1,20,10\n").unwrap();
    let set = format!("rb.rb={}", bad.display());
    let set2 = format!("rb.irb={}", bad.display());
    assert_eq!(code(&run_in("rb", tmp.path(), &[&set, &set2])), 2);
    assert_eq!(code(&run_in("rb", tmp.path(), &["rb.level=1.5"])), 2);
}

// ------------------------------------------------------------ conventions

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (rb, irb) = rb_files(tmp.path(), 2000);
    for (cmd, sets) in [
        ("spectrum", vec!["spectrum.grid.points=11".to_string()]),
        ("leakage", vec!["leakage.delays.points=5".into(), "leakage.max_cycles=3".into()]),
        ("rb", vec![rb.clone(), irb.clone(), "rb.samples=5000".into(), "seed=42".into()]),
    ] {
        let s: Vec<&str> = sets.iter().map(String::as_str).collect();
        let (a, b) = (tmp.path().join(format!("{cmd}_a")), tmp.path().join(format!("{cmd}_b")));
        ok(cmd, &a, &s);
        ok(cmd, &b, &s);
        assert_eq!(snapshot(&a), snapshot(&b), "{cmd} output differs between runs");
    }
    let other = tmp.path().join("rb_c");
    ok("rb", &other, &[&rb, &irb, "rb.samples=5000", "seed=43"]);
    assert_ne!(snapshot(&tmp.path().join("rb_a"))["rb.json"], snapshot(&other)["rb.json"]);
}

#[test]
fn every_output_carries_the_metadata_header() {
    let tmp = TempDir::new().unwrap();
    ok("spectrum", tmp.path(), &["spectrum.grid.points=5", "seed=9"]);
    let hash: String =
        Sha256::digest(measured_device().to_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    for name in ["spectrum.csv", "hybridization.csv", "zeta.csv"] {
        let text = fs::read_to_string(tmp.path().join(name)).unwrap();
        assert!(text.starts_with(&format!("# adiacz {}\n# command spectrum\n", env!("CARGO_PKG_VERSION"))));
        assert!(text.contains("# seed 9\n"));
        assert!(text.contains(&format!("# preset_sha256 {hash}\n")));
        assert!(!text.contains('\r'));
    }
    let (rb, irb) = rb_files(tmp.path(), 500);
    ok("rb", &tmp.path().join("rb"), &[&rb, &irb, "rb.samples=100"]);
    let doc: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("rb/rb.json")).unwrap()).unwrap();
    assert_eq!(doc["metadata"]["tool"], "adiacz");
    assert_eq!(doc["metadata"]["seed"], 0);
    assert_eq!(doc["metadata"]["preset_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn config_problems_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    let bad_json = tmp.path().join("bad.json");
    fs::write(&bad_json, "{ not json").unwrap();
    let o = run(&["spectrum", "--config", bad_json.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run_in("spectrum", tmp.path(), &["spectrum.grid.poinst=5"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("spectrum.grid.poinst"));
    assert_eq!(code(&run_in("spectrum", tmp.path(), &["preset=no_such_preset"])), 2);
    assert_eq!(code(&run_in("spectrum", tmp.path(), &["spectrum.grid.points=1"])), 2);
    assert_eq!(code(&run_in("spectrum", tmp.path(), &["spectrum.hybridization_state=xyz"])), 2);
}

#[test]
fn config_file_and_overrides_combine() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("study.json");
    fs::write(&cfg, r#"{"seed": 5, "spectrum": {"grid": {"points": 7}}}"#).unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "spectrum.grid.points=9",
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("zeta.csv")).unwrap();
    assert!(text.contains("# seed 5\n"));
    assert_eq!(csv(&out.join("zeta.csv"))["f_c_mhz"].len(), 9);
    let printed = String::from_utf8(o.stdout).unwrap();
    assert_eq!(printed.lines().count(), 3);
}
