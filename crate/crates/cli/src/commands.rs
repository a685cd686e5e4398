use std::fs;

use serde::Serialize;
use serde_json::json;

use kspace_core::encoder::{encode_multi, mask_subspace, monitor_steps, prepare_single_pps, EncoderOptions, Fidelity};
use kspace_core::ensemble::{broadcast, EnsembleState, SpatialGrid};
use kspace_core::ledger::{
    degeneracy_map, ledger_run, multi_schedule, post_decay_rate, prep_attenuation, single_pps_schedule,
    uniform_closed_form, AttenuationModel, DiffusionTiming, EncodingSchedule, Ledger, SubspaceAttenuation,
};
use kspace_core::molecule::{MoleculeConfig, ALANINE_TOML};
use kspace_core::readout::{
    detect_peaks, echo_time_prediction, find_echoes, kspace_scan_decode, monitoring_pulse, readout_rate, scan_leakage,
    simulate_fid, spectrum, Acquisition, Peak, ScanPlan, TimeTrace, DEFAULT_ECHO_SAMPLES, DEFAULT_LB, DEFAULT_SAMPLES,
    DEFAULT_SPECTRAL_WIDTH, DEFAULT_THRESHOLD,
};
use kspace_core::spin::{DeviationState, SpinSystem};
use kspace_core::Bits;

use crate::fixtures;
use crate::output::OutDir;
use crate::{CliError, EncodeArgs, Format, LedgerArgs, Mode, MoleculeArgs, PrepareArgs};

/// 13C gyromagnetic ratio, rad s^-1 G^-1. Molecule gamma ratios are relative to it.
const GAMMA_13C: f64 = 6728.284;

const MAX_LEDGER_QUBITS: usize = 10;

fn load_molecule(source: &str) -> Result<(String, MoleculeConfig), CliError> {
    let text = match source {
        "alanine" => ALANINE_TOML.to_string(),
        path => fs::read_to_string(path).map_err(|e| CliError::io(path.as_ref(), e))?,
    };
    let cfg = MoleculeConfig::parse(&text)?;
    Ok((text, cfg))
}

fn parse_schedule(n: usize, spec: &str, k0: i64) -> Result<EncodingSchedule, CliError> {
    if !(1..=MAX_LEDGER_QUBITS).contains(&n) {
        return Err(
            kspace_core::Error::InvalidParameter(format!("n must be in 1..={MAX_LEDGER_QUBITS}, got {n}")).into()
        );
    }
    let s = match spec {
        "uniform" => EncodingSchedule::uniform(n, k0)?.with_selection(Some(-(n as i64))),
        "alternating" => EncodingSchedule::alternating(n, k0)?,
        "multi" => multi_schedule(n, k0)?,
        other => match other.strip_prefix("target=") {
            Some(bits) => {
                let target: Bits = bits.parse()?;
                target.expect_len(n)?;
                single_pps_schedule(&target, k0)?
            }
            None => {
                return Err(CliError::Config(format!(
                    "unknown schedule {other:?}; expected uniform, alternating, multi or target=<bits>"
                )))
            }
        },
    };
    Ok(s)
}

/// Reference comparison for the three-qubit uniform and alternating tables.
pub fn check_ledger(ledger: &Ledger, schedule: &str) -> Result<(), CliError> {
    let n = ledger.schedule.n_data();
    let reference = match (n, schedule) {
        (3, "uniform") => fixtures::UNIFORM_N3,
        (3, "alternating") => fixtures::ALTERNATING_N3,
        _ => return Err(CliError::Config(format!("no reference table for n={n}, schedule {schedule}"))),
    };
    let mut problems = fixtures::compare_table(&ledger.table_export(), &fixtures::parse_table(reference));
    if schedule == "alternating" {
        let labels: Vec<i64> = degeneracy_map(ledger).keys().copied().collect();
        if labels.len() != 1 << n {
            problems.push(format!("final labels are not distinct: {labels:?}"));
        }
        if !labels.windows(2).all(|w| w[1] - w[0] == 2) {
            problems.push(format!("final labels are not spaced by 2k_0: {labels:?}"));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Mismatch(problems))
    }
}

pub fn ledger(a: &LedgerArgs) -> Result<(), CliError> {
    let schedule = parse_schedule(a.n, &a.schedule, a.k0)?;
    let ledger = ledger_run(&schedule);
    if a.check_paper {
        check_ledger(&ledger, &a.schedule)?;
        eprintln!("reference table matches");
    }
    let text = match a.format {
        Format::Text => format!("# windings in units of k_0\n{}", ledger.table_text()),
        Format::Json => {
            let finals: Vec<_> =
                ledger.terms.iter().map(|t| json!({ "subspace": t.alpha, "winding": t.winding })).collect();
            let v = json!({ "schedule": schedule, "table": ledger.table_export(), "final": finals });
            serde_json::to_string_pretty(&v).expect("serializable ledger") + "\n"
        }
    };
    match &a.out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn matrix_dump(s: &DeviationState) -> serde_json::Value {
    let m = s.matrix();
    let part = |f: fn(&kspace_core::Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| f(&m[(r, c)])).collect()).collect()
    };
    json!({
        "basis": "computational, spin 0 most significant, bit 0 = up",
        "dim": m.nrows(),
        "re": part(|z| z.re),
        "im": part(|z| z.im),
    })
}

fn ancilla_spectrum_peaks(
    state: &DeviationState,
    sys: &SpinSystem,
) -> Result<(kspace_core::readout::SpectrumTrace, Vec<Peak>), CliError> {
    let e = broadcast(state, SpatialGrid::new(1)?);
    let acq = Acquisition::new(DEFAULT_SAMPLES, 1.0 / DEFAULT_SPECTRAL_WIDTH);
    let spec = spectrum(&simulate_fid(&e, sys, sys.ancilla(), &acq)?);
    let peaks = detect_peaks(&spec, DEFAULT_THRESHOLD, 2.0 * DEFAULT_LB)?;
    Ok((spec, peaks))
}

#[derive(Serialize)]
struct PrepareReport<'a> {
    units: &'static str,
    data_spins: Vec<&'a str>,
    target: Bits,
    demo_sigma_za: bool,
    fidelity: Fidelity,
    schedule: &'a EncodingSchedule,
    ledger: kspace_core::ledger::TableExport,
    target_weight: f64,
    paper_weight: Option<f64>,
    residual_norm: f64,
    transverse_residual: f64,
    step_peak_counts: Vec<usize>,
    step_peaks: Vec<Vec<Peak>>,
}

fn data_names(sys: &SpinSystem) -> Vec<&str> {
    sys.data_spins().iter().map(|&s| sys.spins()[s].name.as_str()).collect()
}

pub fn prepare(a: &PrepareArgs) -> Result<(), CliError> {
    let (text, cfg) = load_molecule(&a.molecule)?;
    let sys = cfg.system()?;
    let target: Bits = a.target.parse()?;
    target.expect_len(sys.n_data())?;
    if a.check_paper && !(a.demo_sigma_za && sys.n_data() == 3) {
        return Err(CliError::Config("peak count reference needs three data spins and --demo-sigma-za".into()));
    }
    let opts = EncoderOptions {
        grid: SpatialGrid::new(a.slices)?,
        k0_windings: a.k0,
        demo_sigma_za: a.demo_sigma_za,
        fidelity: if a.pulse_level { Fidelity::Pulse } else { Fidelity::Gate },
        diffusion: None,
    };
    let rep = prepare_single_pps(&sys, &target, &opts)?;
    let steps = monitor_steps(&sys, &target, &opts)?;

    let mut out = OutDir::create(&a.out, "prepare")?;
    out.molecule(&a.molecule, &text);
    out.param("target", &target);
    out.param("demo_sigma_za", a.demo_sigma_za);
    out.param("slices", a.slices);
    out.param("k0_windings", a.k0);
    out.param("fidelity", opts.fidelity);
    out.param("schedule", &rep.schedule);

    let mut step_peaks = Vec::new();
    for (m, s) in steps.iter().enumerate() {
        let (spec, peaks) = ancilla_spectrum_peaks(s, &sys)?;
        out.write(&format!("step_{m}.csv"), spec.to_csv().as_bytes())?;
        step_peaks.push(peaks);
    }
    let counts: Vec<usize> = step_peaks.iter().map(Vec::len).collect();
    let report = PrepareReport {
        units: "windings in k_0, frequencies in Hz",
        data_spins: data_names(&sys),
        target: target.clone(),
        demo_sigma_za: a.demo_sigma_za,
        fidelity: opts.fidelity,
        schedule: &rep.schedule,
        ledger: rep.ledger.table_export(),
        target_weight: rep.target_weight,
        paper_weight: rep.paper_weight,
        residual_norm: rep.residual_norm,
        transverse_residual: rep.transverse_residual,
        step_peak_counts: counts.clone(),
        step_peaks,
    };
    out.write_json("report.json", &report)?;
    out.write_json("state.json", &matrix_dump(&rep.averaged_state))?;
    out.finish()?;

    if a.check_paper {
        let want = fixtures::peak_counts();
        if counts != want {
            return Err(CliError::Mismatch(vec![format!("peak counts {counts:?} != {want:?}")]));
        }
        eprintln!("peak counts match");
    }
    Ok(())
}

fn select_data(sys: &SpinSystem, a: &EncodeArgs) -> Result<SpinSystem, CliError> {
    let keep: Vec<usize> = match (&a.n_data, &a.data) {
        (Some(n), _) => (1..=*n).collect(),
        (None, Some(names)) => names
            .split(',')
            .map(|name| {
                let name = name.trim();
                sys.data_spins()
                    .iter()
                    .position(|&s| sys.spins()[s].name == name)
                    .map(|p| p + 1)
                    .ok_or_else(|| CliError::Config(format!("{name:?} is not a data spin")))
            })
            .collect::<Result<_, _>>()?,
        (None, None) => (1..=sys.n_data()).collect(),
    };
    if keep.is_empty() {
        return Err(CliError::Config("need at least one data spin".into()));
    }
    Ok(sys.restrict_data(&keep)?)
}

fn strongest_time(t: &TimeTrace) -> f64 {
    let best = t.samples.iter().enumerate().max_by(|x, y| x.1.norm().total_cmp(&y.1.norm())).map_or(0, |b| b.0);
    t.time(best)
}

#[derive(Serialize)]
struct PredictedEcho {
    subspace: Bits,
    winding: i64,
    predicted_s: f64,
    masked_peak_s: f64,
}

#[derive(Serialize)]
struct FoundEcho {
    n: usize,
    time_s: f64,
    magnitude: f64,
    subspace: Option<Bits>,
}

#[derive(Serialize)]
struct EchoReport {
    units: &'static str,
    data_spins: Vec<String>,
    readout_rate: f64,
    dwell_s: f64,
    predicted: Vec<PredictedEcho>,
    found: Vec<FoundEcho>,
}

fn same_sample(t: f64, want: f64, dwell: f64) -> bool {
    ((t / dwell).round() - (want / dwell).round()).abs() <= 1.0
}

fn run_echo(
    a: &EncodeArgs,
    sys: &SpinSystem,
    state: &EnsembleState,
    ledger: &Ledger,
    out: &mut OutDir,
) -> Result<EchoReport, CliError> {
    let rate = readout_rate(a.k0, a.g_enc, a.delta_enc, a.g_read)?;
    let acq = Acquisition {
        readout_rate: Some(rate),
        ..Acquisition::new(a.samples.unwrap_or(DEFAULT_ECHO_SAMPLES), 1.0 / DEFAULT_SPECTRAL_WIDTH)
    };
    out.param("readout_rate", rate);
    out.param("acquisition", acq);
    let read = |e: &EnsembleState| -> Result<TimeTrace, CliError> {
        Ok(simulate_fid(&monitoring_pulse(e, sys)?, sys, sys.ancilla(), &acq)?)
    };
    let trace = read(state)?;
    out.write("trace.csv", trace.to_csv().as_bytes())?;

    let mut predicted = ledger
        .terms
        .iter()
        .map(|t| {
            Ok(PredictedEcho {
                subspace: t.alpha.clone(),
                winding: t.winding,
                predicted_s: echo_time_prediction(t.winding as f64, a.g_enc, a.delta_enc, a.g_read)?,
                masked_peak_s: strongest_time(&read(&mask_subspace(state, sys, &t.alpha)?)?),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    predicted.sort_by_key(|p| p.winding);
    let found = find_echoes(&trace, 0.5, 1.0 / rate)
        .into_iter()
        .enumerate()
        .map(|(n, e)| FoundEcho {
            n,
            time_s: e.time,
            magnitude: e.magnitude,
            subspace: predicted
                .iter()
                .filter(|p| same_sample(p.masked_peak_s, e.time, trace.dwell))
                .min_by(|x, y| (x.masked_peak_s - e.time).abs().total_cmp(&(y.masked_peak_s - e.time).abs()))
                .map(|p| p.subspace.clone()),
        })
        .collect();
    Ok(EchoReport {
        units: "times in s, windings in k_0, readout rate in gradient windings per s",
        data_spins: data_names(sys).into_iter().map(String::from).collect(),
        readout_rate: rate,
        dwell_s: trace.dwell,
        predicted,
        found,
    })
}

fn check_echoes(rep: &EchoReport) -> Vec<String> {
    let want = fixtures::echo_times();
    let mut problems = Vec::new();
    if rep.found.len() != want.len() {
        problems.push(format!("{} echoes found, expected {}", rep.found.len(), want.len()));
    }
    for w in &want {
        match rep.found.get(w.n) {
            Some(f) if same_sample(f.time_s, w.time, rep.dwell_s) => {}
            Some(f) => problems.push(format!("echo {} at {} s, expected {} s", w.n, f.time_s, w.time)),
            None => problems.push(format!("echo {} missing", w.n)),
        }
        match rep.predicted.iter().find(|p| p.subspace == w.subspace) {
            Some(p) if same_sample(p.masked_peak_s, w.time, rep.dwell_s) => {}
            Some(p) => {
                problems.push(format!("subspace {} peaks at {} s, expected {} s", w.subspace, p.masked_peak_s, w.time))
            }
            None => problems.push(format!("subspace {} not encoded", w.subspace)),
        }
    }
    problems
}

#[derive(Serialize)]
struct ScanWindow {
    window: usize,
    winding: i64,
    t0_s: f64,
    principal_subspace: Bits,
    principal_fraction: f64,
    peaks: Vec<Peak>,
}

fn run_scan(
    a: &EncodeArgs,
    sys: &SpinSystem,
    state: &EnsembleState,
    out: &mut OutDir,
) -> Result<Vec<ScanWindow>, CliError> {
    let mut plan = ScanPlan::for_subspaces(sys.n_data());
    if let Some(s) = a.samples {
        plan.samples_per_window = s;
    }
    out.param("scan_plan", plan);
    let spectra = kspace_scan_decode(state, sys, a.k0, &plan)?;
    let energy = scan_leakage(state, sys, a.k0, &plan)?;
    let span = plan.samples_per_window as f64 * plan.dwell;
    spectra
        .iter()
        .enumerate()
        .map(|(j, s)| {
            out.write(&format!("window_{j}.csv"), s.to_csv().as_bytes())?;
            let total: f64 = energy[j].iter().sum();
            let (best, e) = energy[j].iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).expect("nonempty");
            Ok(ScanWindow {
                window: j,
                winding: plan.winding(j),
                t0_s: j as f64 * span,
                principal_subspace: Bits::from_index(best, sys.n_data()),
                principal_fraction: if total > 0.0 { e / total } else { 0.0 },
                peaks: detect_peaks(s, DEFAULT_THRESHOLD, 2.0 * DEFAULT_LB)?,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct AttenuationRow {
    subspace: Bits,
    final_winding: i64,
    exact_ramp: SubspaceAttenuation,
    step_endpoint: SubspaceAttenuation,
    post_decay_rate_per_s: f64,
}

fn attenuation_rows(
    s: &EncodingSchedule,
    d: f64,
    k0: f64,
    timing: &DiffusionTiming,
) -> Result<Vec<AttenuationRow>, CliError> {
    let ramp = prep_attenuation(s, d, k0, timing, AttenuationModel::ExactRamp)?;
    let step = prep_attenuation(s, d, k0, timing, AttenuationModel::StepEndpoint)?;
    let ledger = ledger_run(s);
    Ok(ledger
        .terms
        .iter()
        .zip(ramp.into_iter().zip(step))
        .map(|(t, (exact_ramp, step_endpoint))| AttenuationRow {
            subspace: t.alpha.clone(),
            final_winding: t.winding,
            exact_ramp,
            step_endpoint,
            post_decay_rate_per_s: post_decay_rate(t, d, k0),
        })
        .collect())
}

fn attenuation_report(
    a: &EncodeArgs,
    sys: &SpinSystem,
    d: f64,
    out: &mut OutDir,
) -> Result<serde_json::Value, CliError> {
    let n = sys.n_data();
    let delta = a.delta.unwrap_or(a.delta_enc);
    let gamma = GAMMA_13C * sys.spins()[sys.ancilla()].gamma_ratio;
    let k0 = a.k0_phys.unwrap_or(gamma * a.g_enc * a.delta_enc);
    let timing = match a.gate_time {
        Some(g) => DiffusionTiming::constant(n, g, delta),
        None => DiffusionTiming::from_couplings(sys, delta)?,
    };
    out.param("diffusion", json!({ "d": d, "k0_phys": k0, "timing": timing }));
    let multi = attenuation_rows(&multi_schedule(n, a.k0)?, d, k0, &timing)?;
    let uniform = single_pps_schedule(&Bits::zeros(n), a.k0)?;
    let closed = a.gate_time.map(|g| uniform_closed_form(n, g, delta) * d * k0 * k0);
    Ok(json!({
        "units": "D in cm^2/s, k0 in rad/cm, times in s, integrals in k_0^2 s, rates in 1/s",
        "d": d,
        "k0_phys": k0,
        "timing": timing,
        "multi": multi,
        "uniform_single_pps": {
            "schedule": uniform,
            "rows": attenuation_rows(&uniform, d, k0, &timing)?,
            "closed_form_log_attenuation": closed,
        },
    }))
}

pub fn encode_decode(a: &EncodeArgs) -> Result<(), CliError> {
    let (text, cfg) = load_molecule(&a.molecule)?;
    let sys = select_data(&cfg.system()?, a)?;
    let defaults = a.g_enc == 2.5 && a.delta_enc == 1.5e-3 && a.g_read == 0.15;
    if a.check_paper && !(a.mode == Mode::Echo && sys.n_data() == 2 && a.demo_sigma_za && defaults) {
        return Err(CliError::Config(
            "echo reference needs echo mode, two data spins, --demo-sigma-za and the default gradients".into(),
        ));
    }
    let opts = EncoderOptions {
        grid: SpatialGrid::new(a.slices)?,
        k0_windings: a.k0,
        demo_sigma_za: a.demo_sigma_za,
        ..Default::default()
    };
    let enc = encode_multi(&sys, &opts)?;

    let mut out = OutDir::create(&a.out, "encode-decode")?;
    out.molecule(&a.molecule, &text);
    out.param("data_spins", data_names(&sys));
    out.param("demo_sigma_za", a.demo_sigma_za);
    out.param("slices", a.slices);
    out.param("k0_windings", a.k0);
    out.param("schedule", &enc.schedule);
    out.param("gradients", json!({ "g_enc": a.g_enc, "delta_enc": a.delta_enc, "g_read": a.g_read }));
    out.write("ledger.txt", format!("# windings in units of k_0\n{}", enc.ledger.table_text()).as_bytes())?;

    let mut problems = Vec::new();
    match a.mode {
        Mode::Echo => {
            let rep = run_echo(a, &sys, &enc.state, &enc.ledger, &mut out)?;
            if a.check_paper {
                problems = check_echoes(&rep);
            }
            out.write_json("echoes.json", &rep)?;
        }
        Mode::Scan => {
            let windows = run_scan(a, &sys, &enc.state, &mut out)?;
            out.write_json(
                "scan.json",
                &json!({ "units": "times in s, windings in k_0, frequencies in Hz", "windows": windows }),
            )?;
        }
    }
    if let Some(d) = a.diffusion_d {
        let rep = attenuation_report(a, &sys, d, &mut out)?;
        out.write_json("attenuation.json", &rep)?;
    }
    out.finish()?;
    if a.check_paper {
        if !problems.is_empty() {
            return Err(CliError::Mismatch(problems));
        }
        eprintln!("echo times and assignments match");
    }
    Ok(())
}

pub fn molecule(a: &MoleculeArgs) -> Result<(), CliError> {
    let (_, cfg) = load_molecule(&a.molecule)?;
    cfg.system()?;
    let text = cfg.to_toml()?;
    match &a.out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
