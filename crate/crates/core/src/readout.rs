//! Detection: FIDs under the internal Hamiltonian with an optional weak
//! readout gradient, spectra, peak picking, echo trains and the discrete
//! k-space scan.
//!
//! The observed signal is `s(t) = avg_z tr(rho(z, t) sigma_+) / 2^(n-1)`, so a
//! bare `sigma_x` of the observed spin gives `s(0) = 1`. A readout gradient of
//! rate `r` gradient windings per second acts on the observed spin only; a
//! subspace encoded at winding `W` refocuses at `r t = W`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::encoder::mask_subspace;
use crate::ensemble::{apply_uniform, EnsembleState};
use crate::error::{Error, Result};
use crate::spin::{hamiltonian_diagonal, pseudo_hadamard, spin_mask, Sign, SpinSystem};
use crate::Complex64 as C64;

pub const DEFAULT_SPECTRAL_WIDTH: f64 = 600.0;
pub const DEFAULT_SAMPLES: usize = 4096;
pub const DEFAULT_LB: f64 = 1.0;
pub const DEFAULT_THRESHOLD: f64 = 0.2;
pub const DEFAULT_ECHO_SAMPLES: usize = 150;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub samples: Vec<C64>,
    pub dwell: f64,
    pub t0: f64,
}

impl TimeTrace {
    pub fn new(samples: Vec<C64>, dwell: f64, t0: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidParameter(format!("trace needs at least 2 samples, got {}", samples.len())));
        }
        if !(dwell > 0.0) || !dwell.is_finite() || !t0.is_finite() {
            return Err(Error::InvalidParameter(format!("bad sampling dwell={dwell} t0={t0}")));
        }
        Ok(Self { samples, dwell, t0 })
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dwell
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("# t in s; signal relative to a bare transverse ancilla\nt,re,im\n");
        for (j, s) in self.samples.iter().enumerate() {
            writeln!(out, "{:?},{:?},{:?}", self.time(j), s.re, s.im).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    /// Unnormalized DFT, reordered to ascending frequency.
    pub amplitudes: Vec<C64>,
    /// Hz, ascending.
    pub freq_axis: Vec<f64>,
    pub dwell: f64,
    pub t0: f64,
}

impl SpectrumTrace {
    /// `sum |X|^2 / n`, equal to the source trace energy.
    pub fn energy(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() / self.amplitudes.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("# f_hz in Hz; unnormalized DFT amplitude\nf_hz,re,im,abs\n");
        for (f, a) in self.freq_axis.iter().zip(&self.amplitudes) {
            writeln!(out, "{f:?},{:?},{:?},{:?}", a.re, a.im, a.norm()).unwrap();
        }
        out
    }
}

/// DFT with the zero frequency moved to the middle.
pub fn spectrum(t: &TimeTrace) -> SpectrumTrace {
    let n = t.samples.len();
    let mut buf = t.samples.clone();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let shift = n / 2;
    let amplitudes: Vec<C64> = (0..n).map(|k| buf[(k + n - shift) % n]).collect();
    let df = 1.0 / (n as f64 * t.dwell);
    let freq_axis = (0..n).map(|k| (k as f64 - shift as f64) * df).collect();
    SpectrumTrace { amplitudes, freq_axis, dwell: t.dwell, t0: t.t0 }
}

pub fn inverse_spectrum(s: &SpectrumTrace) -> Result<TimeTrace> {
    let n = s.amplitudes.len();
    let shift = n / 2;
    let mut buf: Vec<C64> = (0..n).map(|k| s.amplitudes[(k + shift) % n]).collect();
    FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut buf);
    for v in &mut buf {
        *v /= n as f64;
    }
    TimeTrace::new(buf, s.dwell, s.t0)
}

/// Transverse pairs `(row with observe = 1, column with observe = 0)` and
/// their precession frequency in rad/s.
fn transverse_pairs(system: &SpinSystem, observe: usize) -> Vec<(usize, usize, f64)> {
    let n = system.n_total();
    let mask = spin_mask(observe, n);
    let energy = hamiltonian_diagonal(system);
    (0..system.dim())
        .filter(|c| c & mask == 0)
        .map(|c| {
            let r = c | mask;
            (r, c, -(energy[r] - energy[c]))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    pub samples: usize,
    pub dwell: f64,
    /// Start time of the first sample, s.
    pub t0: f64,
    /// Readout gradient, gradient windings per second on the observed spin.
    pub readout_rate: Option<f64>,
    pub lb: f64,
}

impl Acquisition {
    pub fn new(samples: usize, dwell: f64) -> Self {
        Self { samples, dwell, t0: 0.0, readout_rate: None, lb: DEFAULT_LB }
    }
}

/// Signal of `observe` with the winding `offset` (gradient windings) already
/// applied to it, sampled per `acq`.
fn acquire(
    e: &EnsembleState,
    system: &SpinSystem,
    observe: usize,
    offset: f64,
    acq: &Acquisition,
) -> Result<TimeTrace> {
    system.check_spin(observe)?;
    if e.dim() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), actual: e.dim() });
    }
    if !(acq.lb >= 0.0) || acq.readout_rate.is_some_and(|r| !r.is_finite()) {
        return Err(Error::InvalidParameter("line broadening must be >= 0 and the readout rate finite".into()));
    }
    let rate = acq.readout_rate.unwrap_or(0.0);
    let pairs = transverse_pairs(system, observe);
    let norm = pairs.len() as f64;
    let z: Vec<f64> = e.grid().positions().collect();
    let m = z.len() as f64;
    let samples = (0..acq.samples)
        .map(|j| {
            let t = acq.t0 + j as f64 * acq.dwell;
            // Spatial factor shared by every pair at this instant.
            let spatial: Vec<C64> =
                z.iter().map(|&zz| C64::from_polar(1.0, 4.0 * PI * (offset + rate * t) * zz)).collect();
            let mut s = C64::new(0.0, 0.0);
            for &(r, c, w) in &pairs {
                let avg: C64 = e.slices().iter().zip(&spatial).map(|(sl, f)| sl.matrix()[(r, c)] * f).sum::<C64>() / m;
                s += avg * C64::from_polar(1.0, w * t);
            }
            s / norm * (-PI * acq.lb * t).exp()
        })
        .collect();
    TimeTrace::new(samples, acq.dwell, acq.t0)
}

pub fn simulate_fid(e: &EnsembleState, system: &SpinSystem, observe: usize, acq: &Acquisition) -> Result<TimeTrace> {
    acquire(e, system, observe, 0.0, acq)
}

/// Time of the echo of a subspace at `winding` (multiples of `k_0`) when
/// `k_0` is written by `g_enc` (G/cm) for `delta_enc` (s) and read by
/// `g_read` (G/cm). The gyromagnetic ratio cancels.
pub fn echo_time_prediction(winding: f64, g_enc: f64, delta_enc: f64, g_read: f64) -> Result<f64> {
    if !(g_read > 0.0) {
        return Err(Error::InvalidParameter(format!("read gradient must be positive, got {g_read}")));
    }
    Ok(winding * g_enc * delta_enc / g_read)
}

/// Readout rate (gradient windings per second) that moves the ancilla by
/// one `k_0` of `k0_windings` in `g_enc * delta_enc / g_read` seconds.
pub fn readout_rate(k0_windings: i64, g_enc: f64, delta_enc: f64, g_read: f64) -> Result<f64> {
    let t1 = echo_time_prediction(1.0, g_enc, delta_enc, g_read)?;
    if !(t1 > 0.0) || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "encoding gradient area must be positive, got {}",
            g_enc * delta_enc
        )));
    }
    Ok(k0_windings as f64 / t1)
}

/// Selective `(pi/2)_y` on the ancilla.
pub fn monitoring_pulse(e: &EnsembleState, system: &SpinSystem) -> Result<EnsembleState> {
    apply_uniform(e, &pseudo_hadamard(system.ancilla(), Sign::Plus, system)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub freq: f64,
    pub amplitude: f64,
}

/// Local maxima of `|X|` above `threshold_rel * max`, merged within
/// `merge_hz` (the larger one survives).
pub fn detect_peaks(s: &SpectrumTrace, threshold_rel: f64, merge_hz: f64) -> Result<Vec<Peak>> {
    if !(threshold_rel > 0.0 && threshold_rel < 1.0) {
        return Err(Error::InvalidParameter(format!("threshold must be in (0, 1), got {threshold_rel}")));
    }
    let mag: Vec<f64> = s.amplitudes.iter().map(|a| a.norm()).collect();
    let max = mag.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(Vec::new());
    }
    let n = mag.len();
    let mut found: Vec<Peak> = Vec::new();
    for k in 0..n {
        let left = if k > 0 { mag[k - 1] } else { f64::NEG_INFINITY };
        let right = if k + 1 < n { mag[k + 1] } else { f64::NEG_INFINITY };
        if mag[k] >= threshold_rel * max && mag[k] > left && mag[k] >= right {
            let p = Peak { freq: s.freq_axis[k], amplitude: mag[k] };
            match found.last_mut() {
                Some(last) if p.freq - last.freq <= merge_hz => {
                    if p.amplitude > last.amplitude {
                        *last = p;
                    }
                }
                _ => found.push(p),
            }
        }
    }
    Ok(found)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Echo {
    pub time: f64,
    pub magnitude: f64,
}

/// Local maxima of `|s(t)|` above `threshold_rel * max`, strongest first
/// within any `min_separation` seconds, returned in time order.
pub fn find_echoes(t: &TimeTrace, threshold_rel: f64, min_separation: f64) -> Vec<Echo> {
    let mag: Vec<f64> = t.samples.iter().map(|s| s.norm()).collect();
    let max = mag.iter().cloned().fold(0.0, f64::max);
    let n = mag.len();
    let mut cand: Vec<Echo> = (0..n)
        .filter(|&k| {
            let left = if k > 0 { mag[k - 1] } else { f64::NEG_INFINITY };
            let right = if k + 1 < n { mag[k + 1] } else { f64::NEG_INFINITY };
            max > 0.0 && mag[k] >= threshold_rel * max && mag[k] > left && mag[k] >= right
        })
        .map(|k| Echo { time: t.time(k), magnitude: mag[k] })
        .collect();
    cand.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.time.total_cmp(&b.time)));
    let mut kept: Vec<Echo> = Vec::new();
    for c in cand {
        if kept.iter().all(|k| (k.time - c.time).abs() >= min_separation) {
            kept.push(c);
        }
    }
    kept.sort_by(|a, b| a.time.total_cmp(&b.time));
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    /// Winding applied before the first window, in `k_0`.
    pub first: i64,
    /// Blip between windows, in `k_0`; the ramping condition needs 2.
    pub step: i64,
    pub windows: usize,
    pub samples_per_window: usize,
    pub dwell: f64,
    pub lb: f64,
}

impl ScanPlan {
    /// One window per subspace of `n_data` qubits.
    pub fn for_subspaces(n_data: usize) -> Self {
        Self {
            first: 1,
            step: 2,
            windows: 1 << n_data,
            samples_per_window: 256,
            dwell: 1.0 / DEFAULT_SPECTRAL_WIDTH,
            lb: DEFAULT_LB,
        }
    }

    pub fn winding(&self, j: usize) -> i64 {
        self.first + self.step * j as i64
    }
}

/// Monitoring `(pi/2)_y` on the ancilla, then `windows` acquisition windows
/// separated by instantaneous gradient blips. Window `j` sees the ancilla
/// unwound by `(first + step j) k_0` and returns its spectrum.
pub fn kspace_scan_decode(
    e: &EnsembleState,
    system: &SpinSystem,
    k0_windings: i64,
    plan: &ScanPlan,
) -> Result<Vec<SpectrumTrace>> {
    if plan.step != 2 {
        return Err(Error::InvalidParameter(format!(
            "blips must advance by 2 k_0 to step between encoded labels, got {}",
            plan.step
        )));
    }
    if plan.windows == 0 || plan.samples_per_window < 2 {
        return Err(Error::InvalidParameter("scan needs at least one window of 2 samples".into()));
    }
    let a = system.ancilla();
    let monitored = monitoring_pulse(e, system)?;
    let span = plan.samples_per_window as f64 * plan.dwell;
    (0..plan.windows)
        .map(|j| {
            let acq = Acquisition {
                samples: plan.samples_per_window,
                dwell: plan.dwell,
                t0: j as f64 * span,
                readout_rate: None,
                lb: plan.lb,
            };
            let w = (plan.winding(j) * k0_windings) as f64;
            Ok(spectrum(&acquire(&monitored, system, a, w, &acq)?))
        })
        .collect()
}

/// `energy[j][alpha]`: spectral energy of window `j` when only subspace
/// `alpha` is kept in the ensemble.
pub fn scan_leakage(
    e: &EnsembleState,
    system: &SpinSystem,
    k0_windings: i64,
    plan: &ScanPlan,
) -> Result<Vec<Vec<f64>>> {
    let per_alpha = Bits::all(system.n_data())
        .map(|alpha| {
            let masked = mask_subspace(e, system, &alpha)?;
            Ok(kspace_scan_decode(&masked, system, k0_windings, plan)?.iter().map(|s| s.energy()).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..plan.windows).map(|j| per_alpha.iter().map(|v| v[j]).collect()).collect())
}
