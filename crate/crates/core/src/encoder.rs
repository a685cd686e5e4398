//! Conditional phase shifts, projection and the preparation pipelines on the
//! dense ensemble.
//!
//! Windings passed to gradients are ancilla-referenced gradient windings
//! `w`; the ancilla coherence of a subspace then turns `2w` times across the
//! sample. Ledger windings are in units of `k_0`, with one `k_0` equal to
//! `k0_windings` gradient windings.

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::ensemble::{
    apply_gradient, apply_uniform, broadcast, crusher, decohere_wound, diffuse, spatial_average, EnsembleState,
    GradientPulse, SpatialGrid,
};
use crate::error::{Error, Result};
use crate::ledger::{
    epsilon, k_label, ledger_run, multi_schedule, single_pps_schedule, EncodingSchedule, Ledger, WeightConvention,
};
use crate::pulse::{compile_cnot, compile_selective_gradient, sequence_unitary, GateOrder};
use crate::spin::{
    cnot, cnot_matrix, equilibrium_state, pauli, pseudo_hadamard, pseudo_pure_pattern, spin_bit, spin_mask, Axis,
    DeviationState, Operator, OperatorKind, Sign, SpinSystem,
};
use crate::Complex64 as C64;

/// Gate-level applies ideal gates; pulse-level runs compiled pulse programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    #[default]
    Gate,
    Pulse,
}

/// Diffusion during the conditional NOT delays. Gradients stay
/// instantaneous: a partially wound coherence is not periodic on the grid, so
/// the ramp contribution is left to the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseDiffusion {
    /// Normalized sample lengths squared per second.
    pub d: f64,
    pub gate_durations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOptions {
    pub grid: SpatialGrid,
    pub k0_windings: i64,
    /// Start from `sigma_z^a` alone, data spins already crushed.
    pub demo_sigma_za: bool,
    pub fidelity: Fidelity,
    pub diffusion: Option<DenseDiffusion>,
}

impl Default for EncoderOptions {
    fn default() -> Self {
        Self {
            grid: SpatialGrid::default(),
            k0_windings: 1,
            demo_sigma_za: false,
            fidelity: Fidelity::Gate,
            diffusion: None,
        }
    }
}

struct Runner<'a> {
    system: &'a SpinSystem,
    opts: &'a EncoderOptions,
}

impl Runner<'_> {
    fn ancilla_gradient(&self, e: &EnsembleState, w: f64) -> Result<EnsembleState> {
        let a = self.system.ancilla();
        match self.opts.fidelity {
            Fidelity::Gate => apply_gradient(e, &GradientPulse::new(a, w)),
            Fidelity::Pulse => {
                let seq = compile_selective_gradient(a, w, 0.0, self.system)?;
                e.apply_per_slice(|z| sequence_unitary(&seq, z))
            }
        }
    }

    fn cnot(&self, e: &EnsembleState, control: usize, target: usize) -> Result<EnsembleState> {
        match self.opts.fidelity {
            Fidelity::Gate => apply_uniform(e, &cnot(control, target, self.system)?),
            Fidelity::Pulse => {
                let seq = compile_cnot(control, target, self.system)?;
                apply_uniform(e, &sequence_unitary(&seq, 0.0)?)
            }
        }
    }

    /// Encoding conditional NOT of step `n`, followed by its delay diffusion.
    fn encoding_cnot(&self, e: &EnsembleState, n: usize) -> Result<EnsembleState> {
        let out = self.cnot(e, self.system.data_spin(n)?, self.system.ancilla())?;
        match &self.opts.diffusion {
            Some(d) => {
                let dt = *d
                    .gate_durations
                    .get(n - 1)
                    .ok_or(Error::DimensionMismatch { expected: n, actual: d.gate_durations.len() })?;
                diffuse(&out, d.d, dt)
            }
            None => Ok(out),
        }
    }

    fn hadamard(&self, e: &EnsembleState, sign: Sign) -> Result<EnsembleState> {
        apply_uniform(e, &pseudo_hadamard(self.system.ancilla(), sign, self.system)?)
    }

    fn initial(&self) -> Result<EnsembleState> {
        let sys = self.system;
        let start = if self.opts.demo_sigma_za {
            DeviationState::from_operator(&pauli(Axis::Z, sys.ancilla(), sys)?)?
        } else {
            equilibrium_state(sys)
        };
        let e = broadcast(&start, self.opts.grid);
        if self.opts.demo_sigma_za {
            Ok(e)
        } else {
            let mut out = e;
            for &d in sys.data_spins() {
                out = self.cnot(&out, sys.ancilla(), d)?;
            }
            Ok(out)
        }
    }

    /// Reduced conditional phases of every step plus the selection gradient.
    fn run_schedule(&self, e: &EnsembleState, s: &EncodingSchedule) -> Result<EnsembleState> {
        let w0 = s.k0_windings() as f64;
        let mut out = e.clone();
        for step in s.steps() {
            out = self.ancilla_gradient(&out, step.k as f64 * w0)?;
            out = self.encoding_cnot(&out, step.target)?;
        }
        if let Some(ks) = s.selection() {
            out = self.ancilla_gradient(&out, ks as f64 * w0)?;
        }
        Ok(out)
    }
}

fn check_grid(opts: &EncoderOptions, ledger: &Ledger) -> Result<()> {
    opts.grid.check_winding(ledger.max_abs_winding() * opts.k0_windings)
}

/// Applies `cNOT(a -> i)` for every data spin, correlating data polarization
/// with the ancilla.
pub fn correlate_ancilla(e: &EnsembleState, system: &SpinSystem) -> Result<EnsembleState> {
    let mut out = e.clone();
    for &d in system.data_spins() {
        out = apply_uniform(&out, &cnot(system.ancilla(), d, system)?)?;
    }
    Ok(out)
}

/// Conditional phase shift on the ancilla conditioned on data qubit `i`
/// (1-based): net winding `k2 - k1` on `E_-^i` and `k2 + k1` on `E_+^i`.
pub fn conditional_phase_full(
    e: &EnsembleState,
    system: &SpinSystem,
    i: usize,
    k1: f64,
    k2: f64,
    order: GateOrder,
) -> Result<EnsembleState> {
    let a = system.ancilla();
    let c = cnot(system.data_spin(i)?, a, system)?;
    let g = |e: &EnsembleState, w: f64| apply_gradient(e, &GradientPulse::new(a, w));
    match order {
        GateOrder::CnotFirst => {
            let out = apply_uniform(e, &c)?;
            let out = g(&out, k1)?;
            let out = apply_uniform(&out, &c)?;
            g(&out, k2)
        }
        GateOrder::GradientFirst => {
            let out = g(e, k1)?;
            let out = apply_uniform(&out, &c)?;
            let out = g(&out, k2)?;
            apply_uniform(&out, &c)
        }
    }
}

/// True when every slice is block diagonal in the data register.
pub fn data_part_diagonal(e: &EnsembleState, system: &SpinSystem, tol: f64) -> bool {
    let n = system.n_total();
    let data_mask: usize = system.data_spins().iter().map(|&s| spin_mask(s, n)).sum();
    e.slices().iter().all(|s| {
        let m = s.matrix();
        (0..m.nrows()).all(|r| (0..m.ncols()).all(|c| (r ^ c) & data_mask == 0 || m[(r, c)].norm() <= tol))
    })
}

/// Gradient `k` on the ancilla then `cNOT(i -> a)`. The simplification is
/// only valid for a data-diagonal state; otherwise a warning is returned with
/// the (still computed) result.
pub fn conditional_phase_reduced(
    e: &EnsembleState,
    system: &SpinSystem,
    i: usize,
    k: f64,
) -> Result<(EnsembleState, Option<String>)> {
    let warning = (!data_part_diagonal(e, system, 1e-12))
        .then(|| format!("reduced phase on data qubit {i}: data part of the state is not diagonal"));
    let a = system.ancilla();
    let out = apply_gradient(e, &GradientPulse::new(a, k))?;
    let out = apply_uniform(&out, &cnot(system.data_spin(i)?, a, system)?)?;
    Ok((out, warning))
}

fn condition_spins(system: &SpinSystem, condition: &[(usize, u8)]) -> Result<Vec<(usize, u8)>> {
    if condition.is_empty() {
        return Err(Error::InvalidParameter("empty condition".into()));
    }
    condition
        .iter()
        .map(|&(n, b)| {
            if b > 1 {
                return Err(Error::InvalidBits(format!("bit value {b}")));
            }
            Ok((system.data_spin(n)?, b))
        })
        .collect()
}

/// `G_k2 . C^w NOT . G_k1 . C^w NOT` with a multi-controlled NOT firing on
/// the data pattern `condition` (pairs of 1-based data qubit and bit).
pub fn conditional_phase_generalized_full(
    e: &EnsembleState,
    system: &SpinSystem,
    condition: &[(usize, u8)],
    k1: f64,
    k2: f64,
) -> Result<EnsembleState> {
    let cond = condition_spins(system, condition)?;
    let a = system.ancilla();
    let c = Operator::new(cnot_matrix(&cond, a, system.n_total()), OperatorKind::Unitary)?;
    let out = apply_uniform(e, &c)?;
    let out = apply_gradient(&out, &GradientPulse::new(a, k1))?;
    let out = apply_uniform(&out, &c)?;
    apply_gradient(&out, &GradientPulse::new(a, k2))
}

/// Winds the ancilla by `k` only in the subspace matching `condition`.
pub fn conditional_phase_generalized(
    e: &EnsembleState,
    system: &SpinSystem,
    condition: &[(usize, u8)],
    k: f64,
) -> Result<EnsembleState> {
    conditional_phase_generalized_full(e, system, condition, -k / 2.0, k / 2.0)
}

/// Keeps only the ancilla coherence of the subspace matching `condition`:
/// everything else is wound by `2k` and averaged away.
pub fn select_pattern(
    e: &EnsembleState,
    system: &SpinSystem,
    condition: &[(usize, u8)],
    k: f64,
) -> Result<EnsembleState> {
    Ok(decohere_wound(&conditional_phase_generalized_full(e, system, condition, k, k)?))
}

/// Projects the ancilla coherence onto `E_sign^i`: the complement is wound
/// by `2k` and averaged away.
pub fn project(e: &EnsembleState, system: &SpinSystem, i: usize, sign: Sign, k: f64) -> Result<EnsembleState> {
    let (k1, k2) = match sign {
        Sign::Plus => (k, -k),
        Sign::Minus => (k, k),
    };
    Ok(decohere_wound(&conditional_phase_full(e, system, i, k1, k2, GateOrder::CnotFirst)?))
}

/// Row index of ancilla bit `a` with data bits `alpha`.
pub fn basis_row(system: &SpinSystem, ancilla_bit: u8, alpha: &Bits) -> Result<usize> {
    alpha.expect_len(system.n_data())?;
    let n = system.n_total();
    let mut row = if ancilla_bit == 1 { spin_mask(system.ancilla(), n) } else { 0 };
    for (k, &s) in system.data_spins().iter().enumerate() {
        if alpha.bit(k + 1) == 1 {
            row |= spin_mask(s, n);
        }
    }
    Ok(row)
}

/// Ancilla coherence `rho[(0 alpha), (1 alpha)]` slice by slice.
pub fn subspace_profile(e: &EnsembleState, system: &SpinSystem, alpha: &Bits) -> Result<Vec<C64>> {
    let r = basis_row(system, 0, alpha)?;
    let c = basis_row(system, 1, alpha)?;
    Ok(e.slices().iter().map(|s| s.matrix()[(r, c)]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingFit {
    /// Gradient windings; the profile turns twice this many times.
    pub windings: f64,
    pub amplitude: C64,
    /// Norm of what the single winding does not explain, relative to the profile norm.
    pub residual: f64,
}

/// Fits `profile(z) = A exp(-i 4 pi w z)` by picking the strongest spatial
/// frequency below Nyquist.
pub fn fit_winding(profile: &[C64], grid: SpatialGrid) -> WindingFit {
    let m = grid.slices();
    let z: Vec<f64> = grid.positions().collect();
    let half = (m as i64 - 1) / 2;
    let coeff = |f: i64| -> C64 {
        profile
            .iter()
            .zip(&z)
            .map(|(&p, &zz)| p * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * f as f64 * zz))
            .sum::<C64>()
            / m as f64
    };
    let (f, a) = (-half..=half)
        .map(|f| (f, coeff(f)))
        .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
        .expect("grid has at least one slice");
    let norm: f64 = profile.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt();
    let resid: f64 = profile
        .iter()
        .zip(&z)
        .map(|(&p, &zz)| (p - a * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * f as f64 * zz)).norm_sqr())
        .sum::<f64>()
        .sqrt();
    WindingFit { windings: f as f64 / 2.0, amplitude: a, residual: if norm > 0.0 { resid / norm } else { 0.0 } }
}

/// Transverse ensemble (after the first pseudo-Hadamard) run through every
/// step of `schedule`, before any averaging.
pub fn encode_schedule(
    system: &SpinSystem,
    schedule: &EncodingSchedule,
    opts: &EncoderOptions,
) -> Result<EnsembleState> {
    if schedule.n_data() != system.n_data() {
        return Err(Error::BitLength { expected: system.n_data(), actual: schedule.n_data() });
    }
    if schedule.k0_windings() != opts.k0_windings {
        return Err(Error::InvalidParameter("schedule and options disagree on k0".into()));
    }
    check_grid(opts, &ledger_run(schedule))?;
    let run = Runner { system, opts };
    let e = run.hadamard(&run.initial()?, Sign::Plus)?;
    run.run_schedule(&e, schedule)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparationReport {
    pub requested_target: Bits,
    /// Longitudinal result `~ sigma_z^a |target><target|`.
    pub averaged_state: DeviationState,
    /// Transverse state before the final rotation, `~ sigma_x^a |target><target|`.
    pub transverse_state: DeviationState,
    /// Exact weight: 1 in demo mode, `1 + eps` otherwise.
    pub target_weight: f64,
    /// `eps` of the target, the weight of the published expansion.
    pub paper_weight: Option<f64>,
    pub residual_norm: f64,
    pub transverse_residual: f64,
    pub schedule: EncodingSchedule,
    pub ledger: Ledger,
}

pub fn prepare_single_pps(system: &SpinSystem, target: &Bits, opts: &EncoderOptions) -> Result<PreparationReport> {
    target.expect_len(system.n_data())?;
    let schedule = single_pps_schedule(target, opts.k0_windings)?;
    let mut ledger = ledger_run(&schedule);
    let convention = if opts.demo_sigma_za { WeightConvention::Unit } else { WeightConvention::Exact };
    ledger.assign_weights(system, convention)?;

    let wound = encode_schedule(system, &schedule, opts)?;
    let run = Runner { system, opts };
    let transverse = decohere_wound(&wound);
    let longitudinal = run.hadamard(&transverse, Sign::Minus)?;

    let (target_weight, paper_weight) = if opts.demo_sigma_za {
        (1.0, None)
    } else {
        let eps = epsilon(target, system)?;
        (1.0 + eps, Some(eps))
    };
    let averaged_state = spatial_average(&longitudinal);
    let transverse_state = spatial_average(&transverse);
    let residual_norm =
        averaged_state.frobenius_distance(&pseudo_pure_pattern(Axis::Z, target, target_weight, system)?);
    let transverse_residual =
        transverse_state.frobenius_distance(&pseudo_pure_pattern(Axis::X, target, target_weight, system)?);
    Ok(PreparationReport {
        requested_target: target.clone(),
        averaged_state,
        transverse_state,
        target_weight,
        paper_weight,
        residual_norm,
        transverse_residual,
        schedule,
        ledger,
    })
}

/// Monitoring states of a single-PPS run: for `m = 0..=N`, the transverse
/// state after `m` steps, a rephasing gradient undoing the target's partial
/// winding, and averaging. Step `m` leaves `sigma_x^a` restricted to the
/// target's first `m` bits.
pub fn monitor_steps(system: &SpinSystem, target: &Bits, opts: &EncoderOptions) -> Result<Vec<DeviationState>> {
    target.expect_len(system.n_data())?;
    let full = single_pps_schedule(target, opts.k0_windings)?;
    check_grid(opts, &ledger_run(&full))?;
    let run = Runner { system, opts };
    let w0 = opts.k0_windings as f64;
    let mut e = run.hadamard(&run.initial()?, Sign::Plus)?;
    let mut out = vec![spatial_average(&e)];
    for (m, step) in full.steps().iter().enumerate() {
        e = run.ancilla_gradient(&e, step.k as f64 * w0)?;
        e = run.encoding_cnot(&e, step.target)?;
        let partial = full.truncated(m + 1)?;
        let prefix = Bits::new(target.as_slice()[..=m].to_vec())?;
        let label = k_label(&prefix, &partial)?;
        let rephased = run.ancilla_gradient(&e, -(label as f64) * w0)?;
        out.push(spatial_average(&rephased));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiEncoding {
    pub schedule: EncodingSchedule,
    pub ledger: Ledger,
    /// After the second pseudo-Hadamard, before the crusher.
    pub pre_crusher: EnsembleState,
    /// `sigma_z^a sum_alpha c_alpha cos(4 pi W_alpha z) |alpha><alpha|` per slice.
    pub state: EnsembleState,
}

/// Encodes all `2^N` subspaces at distinct odd windings `W_alpha k_0`.
pub fn encode_multi(system: &SpinSystem, opts: &EncoderOptions) -> Result<MultiEncoding> {
    let schedule = multi_schedule(system.n_data(), opts.k0_windings)?;
    let mut ledger = ledger_run(&schedule);
    let convention = if opts.demo_sigma_za { WeightConvention::Unit } else { WeightConvention::Exact };
    ledger.assign_weights(system, convention)?;
    let wound = encode_schedule(system, &schedule, opts)?;
    let run = Runner { system, opts };
    let pre_crusher = run.hadamard(&wound, Sign::Minus)?;
    let state = crusher(&pre_crusher, system.ancilla())?;
    Ok(MultiEncoding { schedule, ledger, pre_crusher, state })
}

/// Keeps only entries whose row and column both lie in data subspace `alpha`.
pub fn mask_subspace(e: &EnsembleState, system: &SpinSystem, alpha: &Bits) -> Result<EnsembleState> {
    alpha.expect_len(system.n_data())?;
    let n = system.n_total();
    let inside = |row: usize| {
        system.data_spins().iter().enumerate().all(|(k, &s)| spin_bit(row, s, n) == alpha.bit(k + 1) as usize)
    };
    let slices = e
        .slices()
        .iter()
        .map(|s| {
            let mut m = s.matrix().clone();
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    if !(inside(r) && inside(c)) {
                        m[(r, c)] = C64::new(0.0, 0.0);
                    }
                }
            }
            DeviationState::trusted(m)
        })
        .collect();
    EnsembleState::from_slices(e.grid(), slices)
}
