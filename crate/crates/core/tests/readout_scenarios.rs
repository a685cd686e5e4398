use kspace_core::encoder::{encode_multi, mask_subspace, monitor_steps, prepare_single_pps, EncoderOptions};
use kspace_core::ensemble::{broadcast, SpatialGrid};
use kspace_core::molecule::alanine;
use kspace_core::readout::{
    detect_peaks, echo_time_prediction, find_echoes, kspace_scan_decode, monitoring_pulse, readout_rate, scan_leakage,
    simulate_fid, spectrum, Acquisition, ScanPlan, DEFAULT_ECHO_SAMPLES, DEFAULT_LB, DEFAULT_SAMPLES,
    DEFAULT_SPECTRAL_WIDTH, DEFAULT_THRESHOLD,
};
use kspace_core::spin::SpinSystem;
use kspace_core::Bits;

fn demo() -> EncoderOptions {
    EncoderOptions { demo_sigma_za: true, ..Default::default() }
}

/// The two carbons C' and Cb as data.
fn two_data() -> SpinSystem {
    alanine().restrict_data(&[1, 3]).unwrap()
}

#[test]
fn peak_count_halves_each_step() {
    let sys = alanine();
    let states = monitor_steps(&sys, &Bits::zeros(3), &demo()).unwrap();
    let acq = Acquisition::new(DEFAULT_SAMPLES, 1.0 / DEFAULT_SPECTRAL_WIDTH);
    let counts: Vec<usize> = states
        .iter()
        .map(|s| {
            let e = broadcast(s, SpatialGrid::new(4).unwrap());
            let spec = spectrum(&simulate_fid(&e, &sys, sys.ancilla(), &acq).unwrap());
            detect_peaks(&spec, DEFAULT_THRESHOLD, 2.0 * DEFAULT_LB).unwrap().len()
        })
        .collect();
    assert_eq!(counts, [8, 4, 2, 1]);
}

#[test]
fn eight_peak_positions() {
    let sys = alanine();
    let states = monitor_steps(&sys, &Bits::zeros(3), &demo()).unwrap();
    let acq = Acquisition::new(DEFAULT_SAMPLES, 1.0 / DEFAULT_SPECTRAL_WIDTH);
    let spec = spectrum(&simulate_fid(&broadcast(&states[0], SpatialGrid::new(4).unwrap()), &sys, 0, &acq).unwrap());
    let peaks = detect_peaks(&spec, DEFAULT_THRESHOLD, 2.0 * DEFAULT_LB).unwrap();
    let mut want = Vec::new();
    for a in [-1.0, 1.0] {
        for b in [-1.0, 1.0] {
            for c in [-1.0, 1.0] {
                want.push((a * 143.0 + b * 54.2 + c * 35.1) / 2.0);
            }
        }
    }
    want.sort_by(f64::total_cmp);
    let df = DEFAULT_SPECTRAL_WIDTH / DEFAULT_SAMPLES as f64;
    for (p, w) in peaks.iter().zip(&want) {
        assert!((p.freq - w).abs() <= df, "{} vs {w}", p.freq);
    }
}

#[test]
fn single_pps_spectrum_has_one_line_at_target() {
    let sys = alanine();
    for target in Bits::all(3) {
        let rep = prepare_single_pps(&sys, &target, &demo()).unwrap();
        let e = monitoring_pulse(&broadcast(&rep.averaged_state, SpatialGrid::new(4).unwrap()), &sys).unwrap();
        let acq = Acquisition::new(DEFAULT_SAMPLES, 1.0 / DEFAULT_SPECTRAL_WIDTH);
        let spec = spectrum(&simulate_fid(&e, &sys, 0, &acq).unwrap());
        let peaks = detect_peaks(&spec, DEFAULT_THRESHOLD, 2.0 * DEFAULT_LB).unwrap();
        assert_eq!(peaks.len(), 1, "{target}");
        // Line of the ancilla with data in |target>: sum_n J_n s_n / 2, s_n = +1 for bit 0.
        let j = [35.1, 143.0, 54.2];
        let f: f64 = (1..=3).map(|n| if target.bit(n) == 0 { j[n - 1] / 2.0 } else { -j[n - 1] / 2.0 }).sum();
        assert!((peaks[0].freq - f).abs() < 0.2, "{target}: {} vs {f}", peaks[0].freq);
    }
}

/// Sample index distance of at most one.
fn within_one_dwell(t: f64, want: f64, dwell: f64) -> bool {
    ((t / dwell).round() - (want / dwell).round()).abs() <= 1.0
}

fn echo_signal(
    sys: &SpinSystem,
    e: &kspace_core::ensemble::EnsembleState,
    rate: f64,
) -> kspace_core::readout::TimeTrace {
    let acq = Acquisition {
        readout_rate: Some(rate),
        ..Acquisition::new(DEFAULT_ECHO_SAMPLES, 1.0 / DEFAULT_SPECTRAL_WIDTH)
    };
    simulate_fid(&monitoring_pulse(e, sys).unwrap(), sys, sys.ancilla(), &acq).unwrap()
}

#[test]
fn echo_train_two_qubits() {
    let sys = two_data();
    let enc = encode_multi(&sys, &demo()).unwrap();
    let rate = readout_rate(1, 2.5, 1.5e-3, 0.15).unwrap();
    let trace = echo_signal(&sys, &enc.state, rate);
    // Neighbouring echoes are two k_0 apart; ripples from their tails are not.
    let echoes = find_echoes(&trace, 0.5, 1.0 / rate);
    let want: Vec<f64> =
        [1.0, 3.0, 5.0, 7.0].iter().map(|&w| echo_time_prediction(w, 2.5, 1.5e-3, 0.15).unwrap()).collect();
    assert_eq!(echoes.len(), 4);
    for (e, w) in echoes.iter().zip(&want) {
        assert!(within_one_dwell(e.time, *w, trace.dwell), "{} vs {w}", e.time);
    }
    // Assignment by masking: strongest sample of each subspace alone.
    let order = ["10", "00", "01", "11"];
    for (w, label) in want.iter().zip(order) {
        let alpha: Bits = label.parse().unwrap();
        let t = echo_signal(&sys, &mask_subspace(&enc.state, &sys, &alpha).unwrap(), rate);
        let best = t.samples.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
        assert!(within_one_dwell(t.time(best), *w, t.dwell), "{label}");
    }
}

#[test]
fn echo_times_follow_prediction_three_qubits() {
    let sys = alanine();
    let enc = encode_multi(&sys, &demo()).unwrap();
    let rate = 40.0;
    let acq = Acquisition { readout_rate: Some(rate), lb: 0.0, ..Acquisition::new(250, 1.0 / DEFAULT_SPECTRAL_WIDTH) };
    for term in &enc.ledger.terms {
        let masked = monitoring_pulse(&mask_subspace(&enc.state, &sys, &term.alpha).unwrap(), &sys).unwrap();
        let t = simulate_fid(&masked, &sys, 0, &acq).unwrap();
        let best = t.samples.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
        let want = term.winding as f64 / rate;
        assert!(within_one_dwell(t.time(best), want, t.dwell), "{} {} {}", term.alpha, t.time(best), want);
    }
}

#[test]
fn scan_windows_are_orthogonal() {
    let sys = two_data();
    let enc = encode_multi(&sys, &demo()).unwrap();
    let plan = ScanPlan::for_subspaces(2);
    let energy = scan_leakage(&enc.state, &sys, 1, &plan).unwrap();
    let order = ["10", "00", "01", "11"];
    for (j, label) in order.iter().enumerate() {
        let principal = label.parse::<Bits>().unwrap().index();
        let total: f64 = energy[j].iter().sum();
        assert!(energy[j][principal] >= (1.0 - 1e-6) * total, "window {j}: {:?}", energy[j]);
    }
    let spectra = kspace_scan_decode(&enc.state, &sys, 1, &plan).unwrap();
    assert_eq!(spectra.len(), 4);
    for s in &spectra {
        assert_eq!(detect_peaks(s, DEFAULT_THRESHOLD, 2.0 * DEFAULT_LB).unwrap().len(), 1);
    }
}

#[test]
fn scan_amplitude_is_half_of_single_pps() {
    let sys = two_data();
    let enc = encode_multi(&sys, &demo()).unwrap();
    let plan = ScanPlan { lb: 0.0, ..ScanPlan::for_subspaces(2) };
    let spectra = kspace_scan_decode(&enc.state, &sys, 1, &plan).unwrap();
    // Window 1 holds |00>; compare with the single PPS of |00> read the same way.
    let rep = prepare_single_pps(&sys, &Bits::zeros(2), &demo()).unwrap();
    let single = kspace_scan_decode(
        &broadcast(&rep.averaged_state, enc.state.grid()),
        &sys,
        1,
        &ScanPlan { first: 0, windows: 1, ..plan },
    )
    .unwrap();
    let ratio = (spectra[1].energy() / single[0].energy()).sqrt();
    assert!((ratio - 0.5).abs() < 1e-9, "{ratio}");
}
