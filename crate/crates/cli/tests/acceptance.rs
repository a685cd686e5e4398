//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use kspace_core::encoder::{
    encode_multi, encode_schedule, fit_winding, prepare_single_pps, project, subspace_profile, EncoderOptions,
};
use kspace_core::ensemble::{broadcast, spatial_average, SpatialGrid};
use kspace_core::ledger::{
    ledger_run, post_decay_rate, prep_attenuation, single_pps_schedule, AttenuationModel, DiffusionTiming,
    EncodingSchedule, WeightConvention,
};
use kspace_core::molecule::alanine;
use kspace_core::pulse::{compile_cnot, compile_selective_gradient, overlap_up_to_diagonal_phase, sequence_unitary};
use kspace_core::readout::{scan_leakage, ScanPlan};
use kspace_core::spin::{cnot, CMatrix, DeviationState, Sign, SpinSystem};
use kspace_core::{Bits, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn kspace(args: &[&str]) -> (i32, String, String, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_kspace")).args(args).output().expect("run kspace");
    let elapsed = start.elapsed();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        elapsed,
    )
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("read report")).expect("parse report")
}

/// Rows of the ledger JSON as (subspace, windings).
fn ledger_rows(v: &Value) -> Vec<(String, Vec<i64>)> {
    v["table"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            let w = r["windings"].as_array().unwrap().iter().map(|x| x.as_i64().unwrap()).collect();
            (r["subspace"].as_str().unwrap().to_string(), w)
        })
        .collect()
}

fn ledger_against(
    schedule: &str,
    want: &[[i64; 8]],
    cols: usize,
) -> Result<(Vec<(String, Vec<i64>)>, Duration), String> {
    let (code, stdout, stderr, t) =
        kspace(&["ledger", "--n", "3", "--schedule", schedule, "--check-paper", "--format", "json"]);
    ensure(code == 0, format!("exit {code}: {stderr}"))?;
    let rows = ledger_rows(&serde_json::from_str(&stdout).map_err(|e| e.to_string())?);
    ensure(rows.len() == 8, format!("{} rows", rows.len()))?;
    for (i, (alpha, w)) in rows.iter().enumerate() {
        ensure(*alpha == format!("{i:03b}"), format!("row {i} is {alpha}"))?;
        ensure(w[..] == want[i][..cols], format!("row {alpha}: {w:?} vs {:?}", &want[i][..cols]))?;
    }
    ensure(t < Duration::from_secs(1), format!("took {t:?}"))?;
    Ok((rows, t))
}

fn c1_uniform_table() -> Outcome {
    let want = [
        [1, 1, 2, 2, 3, 3, 0, 0],
        [1, 1, 2, 2, 3, -3, -6, 0],
        [1, 1, 2, -2, -1, -1, -4, 0],
        [1, 1, 2, -2, -1, 1, -2, 0],
        [1, -1, 0, 0, 1, 1, -2, 0],
        [1, -1, 0, 0, 1, -1, -4, 0],
        [1, -1, 0, 0, 1, 1, -2, 0],
        [1, -1, 0, 0, 1, -1, -4, 0],
    ];
    let (_, t) = ledger_against("uniform", &want, 7)?;
    Ok(format!("8 x 7 exact, {t:?}"))
}

fn c2_alternating_table() -> Outcome {
    let want = [
        [1, 1, -1, -1, 3, 3, 0, 0],
        [1, 1, -1, -1, 3, -3, 0, 0],
        [1, 1, -1, 1, 5, 5, 0, 0],
        [1, 1, -1, 1, 5, -5, 0, 0],
        [1, -1, -3, -3, 1, 1, 0, 0],
        [1, -1, -3, -3, 1, -1, 0, 0],
        [1, -1, -3, 3, 7, 7, 0, 0],
        [1, -1, -3, 3, 7, -7, 0, 0],
    ];
    let (rows, t) = ledger_against("alternating", &want, 6)?;
    let mut labels: Vec<i64> = rows.iter().map(|(_, w)| *w.last().unwrap()).collect();
    labels.sort();
    labels.dedup();
    ensure(labels.len() == 8, format!("labels not distinct: {labels:?}"))?;
    ensure(labels.windows(2).all(|p| p[1] - p[0] == 2), format!("spacing: {labels:?}"))?;
    Ok(format!("8 x 6 exact, labels {labels:?}, {t:?}"))
}

/// Hand recursion: add k, negate when the controlling bit is set.
fn recursion_winding(alpha: &Bits, ks: &[i64], selection: Option<i64>) -> i64 {
    let mut w = 0;
    for (n, k) in ks.iter().enumerate() {
        w += k;
        if alpha.bit(n + 1) == 1 {
            w = -w;
        }
    }
    w + selection.unwrap_or(0)
}

fn c3_cross_backend() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for n in 1..=3 {
        let keep: Vec<usize> = (1..=n).collect();
        let sys = alanine().restrict_data(&keep).unwrap();
        for target in Bits::all(n) {
            let schedule = single_pps_schedule(&target, 1).unwrap();
            let ks: Vec<i64> = schedule.steps().iter().map(|s| s.k).collect();
            for demo in [true, false] {
                let opts = EncoderOptions { demo_sigma_za: demo, ..Default::default() };
                let mut ledger = ledger_run(&schedule);
                let conv = if demo { WeightConvention::Unit } else { WeightConvention::Exact };
                ledger.assign_weights(&sys, conv).unwrap();
                let e = encode_schedule(&sys, &schedule, &opts).unwrap();
                for term in &ledger.terms {
                    ensure(
                        term.winding == recursion_winding(&term.alpha, &ks, schedule.selection()),
                        format!("ledger winding of {}", term.alpha),
                    )?;
                    let fit = fit_winding(&subspace_profile(&e, &sys, &term.alpha).unwrap(), opts.grid);
                    if term.coeff.abs() < 1e-12 {
                        ensure(fit.amplitude.norm() < 1e-10, format!("{} should vanish", term.alpha))?;
                    } else {
                        ensure(
                            fit.windings == term.winding as f64,
                            format!("N={n} {target} {}: winding {}", term.alpha, fit.windings),
                        )?;
                        ensure(
                            (fit.amplitude - Complex64::new(term.coeff, 0.0)).norm() < 1e-10,
                            format!("N={n} {target} {}: coeff {} vs {}", term.alpha, fit.amplitude, term.coeff),
                        )?;
                    }
                    checked += 1;
                }
            }
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(30), format!("took {t:?}"))?;
    Ok(format!("{checked} subspace terms, {t:?}"))
}

/// `sigma_x^a |alpha><alpha|` written out entry by entry; the ancilla is spin 0.
fn sigma_x_pattern(sys: &SpinSystem, alpha: &Bits) -> CMatrix {
    let dim = sys.dim();
    let half = dim / 2;
    let mut m = CMatrix::zeros(dim, dim);
    let r = alpha.index();
    m[(r, half + r)] = Complex64::new(1.0, 0.0);
    m[(half + r, r)] = Complex64::new(1.0, 0.0);
    m
}

fn c4_single_pps() -> Outcome {
    let sys = alanine();
    assert_eq!(sys.ancilla(), 0);
    let opts = EncoderOptions { demo_sigma_za: true, ..Default::default() };
    let mut worst = 0.0f64;
    for target in Bits::all(3) {
        let rep = prepare_single_pps(&sys, &target, &opts).map_err(|e| e.to_string())?;
        let r = (rep.transverse_state.matrix() - sigma_x_pattern(&sys, &target)).norm();
        ensure(r < 1e-9, format!("{target}: residual {r:e}"))?;
        worst = worst.max(r);
    }
    Ok(format!("max residual {worst:.1e}"))
}

/// Local maxima of the magnitude column above 0.2 of the tallest, merged within 2 Hz.
fn count_csv_peaks(path: &Path) -> usize {
    let text = std::fs::read_to_string(path).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('f'))
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[0], v[3])
        })
        .collect();
    let max = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut last: Option<f64> = None;
    let mut count = 0;
    for k in 1..rows.len() - 1 {
        let (f, a) = rows[k];
        if a >= 0.2 * max && a > rows[k - 1].1 && a >= rows[k + 1].1 {
            if last.is_none_or(|l| f - l > 2.0) {
                count += 1;
            }
            last = Some(f);
        }
    }
    count
}

fn c5_peak_counts() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("prep");
    let (code, _, stderr, t) =
        kspace(&["prepare", "--target", "000", "--demo-sigma-za", "--check-paper", "--out", out.to_str().unwrap()]);
    ensure(code == 0, format!("exit {code}: {stderr}"))?;
    let counts: Vec<usize> = (0..4).map(|m| count_csv_peaks(&out.join(format!("step_{m}.csv")))).collect();
    ensure(counts == [8, 4, 2, 1], format!("counts {counts:?}"))?;
    let report = read_json(&out.join("report.json"));
    ensure(report["residual_norm"].as_f64().unwrap() < 1e-9, "report residual")?;
    ensure(t < Duration::from_secs(10), format!("took {t:?}"))?;
    Ok(format!("peaks {counts:?}, {t:?}"))
}

fn c6_echo_train() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("echo");
    let (code, _, stderr, _) = kspace(&[
        "encode-decode",
        "--data",
        "C',Cb",
        "--mode",
        "echo",
        "--demo-sigma-za",
        "--g-enc",
        "2.5",
        "--delta-enc",
        "1.5e-3",
        "--g-read",
        "0.15",
        "--check-paper",
        "--out",
        out.to_str().unwrap(),
    ]);
    ensure(code == 0, format!("exit {code}: {stderr}"))?;
    let rep = read_json(&out.join("echoes.json"));
    let dwell = rep["dwell_s"].as_f64().unwrap();
    let found = rep["found"].as_array().unwrap();
    let want = [(0.025, "10"), (0.075, "00"), (0.125, "01"), (0.175, "11")];
    ensure(found.len() == 4, format!("{} echoes", found.len()))?;
    let mut times = Vec::new();
    for (f, (t, label)) in found.iter().zip(want) {
        let got = f["time_s"].as_f64().unwrap();
        ensure(((got / dwell).round() - (t / dwell).round()).abs() <= 1.0, format!("echo at {got} vs {t}"))?;
        ensure(f["subspace"].as_str() == Some(label), format!("echo at {got} assigned {}", f["subspace"]))?;
        times.push(format!("{:.1}", got * 1e3));
    }
    Ok(format!("echoes at {} ms, dwell {:.2} ms", times.join("/"), dwell * 1e3))
}

fn c7_scan_decode() -> Outcome {
    let sys = alanine().restrict_data(&[1, 3]).unwrap();
    let enc = encode_multi(&sys, &EncoderOptions { demo_sigma_za: true, ..Default::default() }).unwrap();
    // Window j reads label 2j + 1 = k_1 P_1 - 2 P_2 + 4.
    let label = |a: &Bits| {
        let p2 = if a.bit(2) == 1 { -1 } else { 1 };
        let p1 = p2 * if a.bit(1) == 1 { -1 } else { 1 };
        p1 - 2 * p2 + 4
    };
    let energy = scan_leakage(&enc.state, &sys, 1, &ScanPlan::for_subspaces(2)).unwrap();
    let mut worst = 0.0f64;
    for (j, row) in energy.iter().enumerate() {
        let principal = Bits::all(2).find(|a| label(a) == 2 * j as i64 + 1).unwrap();
        let total: f64 = row.iter().sum();
        let leak = 1.0 - row[principal.index()] / total;
        ensure(leak < 1e-6, format!("window {j} ({principal}) leaks {leak:e}"))?;
        worst = worst.max(leak);
    }
    Ok(format!("4 windows, max leakage {worst:.1e}"))
}

fn c8_diffusion_closed_form() -> Outcome {
    let (d, k0, gate, grad) = (2.3e-5, 25.2, 7.0e-3, 1.5e-3);
    let mut worst = 0.0f64;
    for n in 1..=3usize {
        let s = single_pps_schedule(&Bits::zeros(n), 1).unwrap();
        let att =
            prep_attenuation(&s, d, k0, &DiffusionTiming::constant(n, gate, grad), AttenuationModel::StepEndpoint)
                .unwrap();
        let nf = n as f64;
        let want = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 6.0 * k0 * k0 * (gate + grad / 3.0) * d;
        let got = att.iter().find(|a| a.alpha == Bits::zeros(n)).unwrap().log_attenuation;
        let rel = (got - want).abs() / want;
        ensure(rel < 1e-6, format!("N={n}: {got} vs {want}"))?;
        worst = worst.max(rel);
    }
    let l = ledger_run(&EncodingSchedule::uniform(3, 1).unwrap().with_selection(Some(-3)));
    let mut rates: Vec<i64> = l
        .terms
        .iter()
        .filter(|t| t.winding != 0)
        .map(|t| (post_decay_rate(t, d, k0) / (k0 * k0 * d)).round() as i64)
        .collect();
    rates.sort();
    rates.dedup();
    ensure(rates == [4, 16, 36], format!("rates {rates:?}"))?;
    Ok(format!("max rel error {worst:.1e}, decay rates {rates:?} k_0^2 D"))
}

fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> DeviationState {
    let mut m = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in r..dim {
            let v = Complex64::new(rng.random_range(-1.0..1.0), if r == c { 0.0 } else { rng.random_range(-1.0..1.0) });
            m[(r, c)] = v;
            m[(c, r)] = v.conj();
        }
    }
    let tr = m.trace() / dim as f64;
    for i in 0..dim {
        m[(i, i)] -= tr;
    }
    DeviationState::new(m).unwrap()
}

fn c9_projection_idempotence() -> Outcome {
    let sys = alanine().restrict_data(&[1, 3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20261019);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let rho = random_hermitian(&mut rng, sys.dim());
        let i = 1 + k % 2;
        let sign = if k % 4 < 2 { Sign::Plus } else { Sign::Minus };
        let e = broadcast(&rho, SpatialGrid::new(16).unwrap());
        let once = project(&e, &sys, i, sign, 1.0).unwrap();
        let twice = project(&once, &sys, i, sign, 1.0).unwrap();
        let (a, b) = (spatial_average(&once), spatial_average(&twice));
        let rel = a.frobenius_distance(&b) / a.norm();
        ensure(rel < 1e-9, format!("state {k}: {rel:e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("100 states, max rel change {worst:.1e}"))
}

fn c10_pulse_compiler() -> Outcome {
    let sys = alanine();
    let mut min_overlap = 1.0f64;
    for d in 1..=3 {
        let ideal = cnot(d, 0, &sys).unwrap();
        for z in [-0.4, 0.0, 0.3] {
            let u = sequence_unitary(&compile_cnot(d, 0, &sys).unwrap(), z).unwrap();
            let (ov, _) = overlap_up_to_diagonal_phase(&ideal, &u).unwrap();
            ensure(ov >= 1.0 - 1e-9, format!("coupling to spin {d}: overlap {ov}"))?;
            min_overlap = min_overlap.min(ov);
        }
    }
    // Net winding of a spin: phase difference between rows differing only in
    // its bit, as a function of position.
    let n = sys.n_total();
    let mut worst = 0.0f64;
    for s in 0..n {
        for z in [-0.45, -0.1, 0.2, 0.45] {
            let u = sequence_unitary(&compile_selective_gradient(s, 1.5, 1e-3, &sys).unwrap(), z).unwrap();
            for other in (0..n).filter(|&o| o != s) {
                let bit = 1 << (n - 1 - other);
                for r in (0..sys.dim()).filter(|r| r & bit == 0) {
                    let rel = u.matrix()[(r | bit, r | bit)] / u.matrix()[(r, r)];
                    let err = rel.arg().abs();
                    ensure(err < 1e-12, format!("gradient on {s} winds {other} by {err:e} at z={z}"))?;
                    worst = worst.max(err);
                }
            }
        }
    }
    Ok(format!("min overlap 1-{:.1e}, max stray phase {worst:.1e}", 1.0 - min_overlap))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("uniform ledger table", c1_uniform_table),
        ("alternating ledger table", c2_alternating_table),
        ("dense vs symbolic backends", c3_cross_backend),
        ("single pseudo-pure states", c4_single_pps),
        ("peak count collapse", c5_peak_counts),
        ("echo train", c6_echo_train),
        ("k-space scan decode", c7_scan_decode),
        ("diffusion closed form", c8_diffusion_closed_form),
        ("projection idempotence", c9_projection_idempotence),
        ("pulse compiler fidelity", c10_pulse_compiler),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
