//! Symbolic k-space bookkeeping.
//!
//! Each data subspace `|alpha>` carries the phase winding of the ancilla
//! coherence in integer multiples of `k_0`. A gradient step adds `k_n` to
//! every subspace; the conditional NOT controlled by data qubit `n` negates
//! the winding of every subspace with `b_n = 1`. The closed form after all
//! steps is `k_alpha = sum_n k_n P_n(alpha)` with the parity
//! `P_n(alpha) = prod_{i >= n} (-1)^{b_i}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::spin::SpinSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingStep {
    /// Gradient of this step, in units of `k_0`.
    pub k: i64,
    /// Data qubit controlling the conditional NOT, 1-based.
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingSchedule {
    n_data: usize,
    steps: Vec<EncodingStep>,
    selection: Option<i64>,
    k0_windings: i64,
}

impl EncodingSchedule {
    /// One step per data qubit, `ks[n-1]` being the gradient of step `n`.
    pub fn new(ks: Vec<i64>, selection: Option<i64>, k0_windings: i64) -> Result<Self> {
        if ks.is_empty() {
            return Err(Error::InvalidParameter("schedule needs at least one data qubit".into()));
        }
        if k0_windings <= 0 {
            return Err(Error::InvalidParameter(format!("k0 must be a positive winding count, got {k0_windings}")));
        }
        let steps = ks.into_iter().enumerate().map(|(i, k)| EncodingStep { k, target: i + 1 }).collect::<Vec<_>>();
        Ok(Self { n_data: steps.len(), steps, selection, k0_windings })
    }

    /// `k_n = k_0` for every step, no selection gradient.
    pub fn uniform(n: usize, k0_windings: i64) -> Result<Self> {
        Self::new(vec![1; n], None, k0_windings)
    }

    /// `k_n = (-2)^(n-1) k_0`, no shift.
    pub fn alternating(n: usize, k0_windings: i64) -> Result<Self> {
        Self::new(alternating_ks(n)?, None, k0_windings)
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn steps(&self) -> &[EncodingStep] {
        &self.steps
    }

    pub fn selection(&self) -> Option<i64> {
        self.selection
    }

    pub fn k0_windings(&self) -> i64 {
        self.k0_windings
    }

    pub fn with_selection(mut self, selection: Option<i64>) -> Self {
        self.selection = selection;
        self
    }

    /// The first `m` steps only, without selection.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n_data {
            return Err(Error::StepIndex { n: m, len: self.n_data });
        }
        Self::new(self.steps[..m].iter().map(|s| s.k).collect(), None, self.k0_windings)
    }
}

fn alternating_ks(n: usize) -> Result<Vec<i64>> {
    if n == 0 || n > 40 {
        return Err(Error::InvalidParameter(format!("alternating schedule needs 1 <= N <= 40, got {n}")));
    }
    Ok((0..n).map(|i| (-2i64).pow(i as u32)).collect())
}

/// `P_n(alpha) = prod_{i=n}^{N} (-1)^{b_i}`.
pub fn parity(n: usize, alpha: &Bits) -> Result<i64> {
    if n == 0 || n > alpha.len() {
        return Err(Error::StepIndex { n, len: alpha.len() });
    }
    let ones = alpha.as_slice()[n - 1..].iter().filter(|&&b| b == 1).count();
    Ok(if ones % 2 == 0 { 1 } else { -1 })
}

/// Closed-form label `k_alpha = sum_n k_n P_n(alpha)` (selection excluded).
pub fn k_label(alpha: &Bits, s: &EncodingSchedule) -> Result<i64> {
    alpha.expect_len(s.n_data)?;
    s.steps.iter().enumerate().try_fold(0, |acc, (i, step)| Ok(acc + step.k * parity(i + 1, alpha)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTerm {
    pub alpha: Bits,
    /// Final winding (`k_alpha + k_s`) in units of `k_0`.
    pub winding: i64,
    pub coeff: f64,
    /// Accumulated `int k(t)^2 dt` in units of `k_0^2 s`.
    pub diff_integral: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Gradient { step: usize, k: i64 },
    Cnot { step: usize },
    Selection { k: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub kind: ColumnKind,
    /// Winding of every subspace after this event, indexed by subspace.
    pub windings: Vec<i64>,
}

impl Column {
    pub fn header(&self) -> String {
        match self.kind {
            ColumnKind::Gradient { step, k } => format!("k_{step} = {}", format_k(k)),
            ColumnKind::Cnot { step } => format!("CNOT_{{{step}a}}"),
            ColumnKind::Selection { k } => format!("k_s = {}", format_k(k)),
        }
    }
}

/// `0`, `k_0`, `-k_0`, `3k_0`, ...
pub fn format_k(v: i64) -> String {
    match v {
        0 => "0".into(),
        1 => "k_0".into(),
        -1 => "-k_0".into(),
        v => format!("{v}k_0"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub schedule: EncodingSchedule,
    pub terms: Vec<LabeledTerm>,
    pub history: Vec<Column>,
}

/// Runs the step recursion over every subspace.
pub fn ledger_run(s: &EncodingSchedule) -> Ledger {
    let n = s.n_data;
    let alphas: Vec<Bits> = Bits::all(n).collect();
    let mut w = vec![0i64; alphas.len()];
    let mut history = Vec::with_capacity(2 * n + 1);
    for (i, step) in s.steps.iter().enumerate() {
        for v in w.iter_mut() {
            *v += step.k;
        }
        history.push(Column { kind: ColumnKind::Gradient { step: i + 1, k: step.k }, windings: w.clone() });
        for (v, a) in w.iter_mut().zip(&alphas) {
            if a.bit(step.target) == 1 {
                *v = -*v;
            }
        }
        history.push(Column { kind: ColumnKind::Cnot { step: i + 1 }, windings: w.clone() });
    }
    if let Some(ks) = s.selection {
        for v in w.iter_mut() {
            *v += ks;
        }
        history.push(Column { kind: ColumnKind::Selection { k: ks }, windings: w.clone() });
    }
    let terms = alphas
        .into_iter()
        .zip(w)
        .map(|(alpha, winding)| LabeledTerm { alpha, winding, coeff: 1.0, diff_integral: 0.0 })
        .collect();
    Ledger { schedule: s.clone(), terms, history }
}

/// `k_n = k_0 P_n(target)`, selection `-N k_0`: rephases only `target`.
pub fn single_pps_schedule(target: &Bits, k0_windings: i64) -> Result<EncodingSchedule> {
    if target.is_empty() {
        return Err(Error::InvalidBits(String::new()));
    }
    let n = target.len();
    let ks = (1..=n).map(|i| parity(i, target)).collect::<Result<Vec<_>>>()?;
    EncodingSchedule::new(ks, Some(-(n as i64)), k0_windings)
}

/// `k_n = (-2)^(n-1) k_0` with the shift `k_s = 2^N k_0` that makes every
/// label a distinct positive odd multiple of `k_0`.
pub fn multi_schedule(n: usize, k0_windings: i64) -> Result<EncodingSchedule> {
    let ks = alternating_ks(n)?;
    EncodingSchedule::new(ks, Some(1i64 << n), k0_windings)
}

/// Groups subspaces by final winding.
pub fn degeneracy_map(l: &Ledger) -> BTreeMap<i64, Vec<Bits>> {
    let mut map: BTreeMap<i64, Vec<Bits>> = BTreeMap::new();
    for t in &l.terms {
        map.entry(t.winding).or_default().push(t.alpha.clone());
    }
    map
}

/// Relative energy `eps_alpha = sum_i (gamma_i/gamma_a) (-1)^{b_i}`.
pub fn epsilon(alpha: &Bits, system: &SpinSystem) -> Result<f64> {
    alpha.expect_len(system.n_data())?;
    let mut e = 0.0;
    for n in 1..=alpha.len() {
        let r = system.spin(system.data_spin(n)?)?.gamma_ratio;
        e += if alpha.bit(n) == 0 { r } else { -r };
    }
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightConvention {
    /// `1 + eps_alpha`, what exact conjugation of the correlated state gives.
    Exact,
    /// `eps_alpha`, the weight written in the published expansion.
    Published,
    /// All ones, the ancilla-only starting state.
    Unit,
}

impl Ledger {
    pub fn assign_weights(&mut self, system: &SpinSystem, convention: WeightConvention) -> Result<()> {
        for t in &mut self.terms {
            t.coeff = match convention {
                WeightConvention::Exact => 1.0 + epsilon(&t.alpha, system)?,
                WeightConvention::Published => epsilon(&t.alpha, system)?,
                WeightConvention::Unit => 1.0,
            };
        }
        Ok(())
    }

    pub fn term(&self, alpha: &Bits) -> Option<&LabeledTerm> {
        self.terms.get(alpha.index()).filter(|t| &t.alpha == alpha)
    }

    /// Largest winding magnitude reached at any point, in `k_0` units.
    pub fn max_abs_winding(&self) -> i64 {
        self.history.iter().flat_map(|c| c.windings.iter()).map(|w| w.abs()).max().unwrap_or(0)
    }

    pub fn table_text(&self) -> String {
        let mut headers = vec!["Subspace".to_string()];
        headers.extend(self.history.iter().map(Column::header));
        let rows: Vec<Vec<String>> = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut row = vec![format!("{:?}", t.alpha)];
                row.extend(self.history.iter().map(|c| format_k(c.windings[i])));
                row
            })
            .collect();
        let widths: Vec<usize> = (0..headers.len())
            .map(|c| rows.iter().map(|r| r[c].len()).chain([headers[c].len()]).max().unwrap())
            .collect();
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&headers, &mut out);
        for r in &rows {
            line(r, &mut out);
        }
        out
    }

    pub fn table_export(&self) -> TableExport {
        TableExport {
            units: "windings in units of k_0".into(),
            headers: self.history.iter().map(Column::header).collect(),
            rows: self
                .terms
                .iter()
                .enumerate()
                .map(|(i, t)| TableRow {
                    subspace: t.alpha.clone(),
                    windings: self.history.iter().map(|c| c.windings[i]).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableExport {
    pub units: String,
    pub headers: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub subspace: Bits,
    pub windings: Vec<i64>,
}

/// How the diffusion integral is accumulated along the winding history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttenuationModel {
    /// Piecewise exact: linear ramp of `k` across each gradient pulse
    /// (`int (w0 + dw t/delta)^2 dt`), constant winding across each gate,
    /// selection ramp included.
    ExactRamp,
    /// Step `n` contributes `(winding after step n)^2 (Delta_n + delta/3)`;
    /// the selection gradient is not counted.
    StepEndpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionTiming {
    /// Conditional-NOT durations `Delta_n`, seconds.
    pub gate_durations: Vec<f64>,
    /// Gradient pulse length `delta`, seconds.
    pub grad_duration: f64,
}

impl DiffusionTiming {
    pub fn constant(n: usize, gate: f64, grad: f64) -> Self {
        Self { gate_durations: vec![gate; n], grad_duration: grad }
    }

    /// `Delta_n = 1 / (2 J_{a,n})` from the couplings to the ancilla.
    pub fn from_couplings(system: &SpinSystem, grad: f64) -> Result<Self> {
        let a = system.ancilla();
        let mut gates = Vec::with_capacity(system.n_data());
        for n in 1..=system.n_data() {
            let s = system.data_spin(n)?;
            let j = system.j_hz(a, s);
            if j == 0.0 {
                return Err(Error::ZeroCoupling(system.spins()[a].name.clone(), system.spins()[s].name.clone()));
            }
            gates.push(1.0 / (2.0 * j.abs()));
        }
        Ok(Self { gate_durations: gates, grad_duration: grad })
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.gate_durations.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: self.gate_durations.len() });
        }
        if self.gate_durations.iter().chain([&self.grad_duration]).any(|&t| !(t >= 0.0)) {
            return Err(Error::InvalidParameter("durations must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceAttenuation {
    pub alpha: Bits,
    /// `int k^2 dt` in units of `k_0^2 s`.
    pub integral: f64,
    /// `D k_0^2 * integral`.
    pub log_attenuation: f64,
    pub factor: f64,
}

/// `int_0^delta (a + b t/delta)^2 dt`.
fn ramp_integral(start: f64, step: f64, delta: f64) -> f64 {
    delta * (start * start + start * step + step * step / 3.0)
}

/// Diffusion integral of each subspace's winding path during preparation.
pub fn diffusion_integrals(
    s: &EncodingSchedule,
    timing: &DiffusionTiming,
    model: AttenuationModel,
) -> Result<Vec<f64>> {
    timing.validate(s.n_data)?;
    let delta = timing.grad_duration;
    let out = Bits::all(s.n_data)
        .map(|alpha| {
            let mut w = 0.0f64;
            let mut acc = 0.0;
            for (i, step) in s.steps.iter().enumerate() {
                let k = step.k as f64;
                let gate = timing.gate_durations[i];
                match model {
                    AttenuationModel::ExactRamp => {
                        acc += ramp_integral(w, k, delta);
                        w += k;
                        acc += w * w * gate;
                    }
                    AttenuationModel::StepEndpoint => {
                        w += k;
                        acc += w * w * (gate + delta / 3.0);
                    }
                }
                if alpha.bit(step.target) == 1 {
                    w = -w;
                }
            }
            if let (AttenuationModel::ExactRamp, Some(ks)) = (model, s.selection) {
                acc += ramp_integral(w, ks as f64, delta);
            }
            acc
        })
        .collect();
    Ok(out)
}

/// Per-subspace attenuation `exp(-D int k^2 dt)` accumulated while the
/// schedule runs. `k0` is the physical wave number of one `k_0` unit.
pub fn prep_attenuation(
    s: &EncodingSchedule,
    d: f64,
    k0: f64,
    timing: &DiffusionTiming,
    model: AttenuationModel,
) -> Result<Vec<SubspaceAttenuation>> {
    if !(d >= 0.0) || !k0.is_finite() {
        return Err(Error::InvalidParameter(format!("need D >= 0 and finite k0, got D={d}, k0={k0}")));
    }
    let integrals = diffusion_integrals(s, timing, model)?;
    Ok(Bits::all(s.n_data)
        .zip(integrals)
        .map(|(alpha, integral)| {
            let log = d * k0 * k0 * integral;
            SubspaceAttenuation { alpha, integral, log_attenuation: log, factor: (-log).exp() }
        })
        .collect())
}

/// `N(N+1)(2N+1)/6 (Delta + delta/3)`, the stepwise total for the `|0...0>`
/// path of a uniform schedule with constant gate time, in `k_0^2 s`.
pub fn uniform_closed_form(n: usize, gate: f64, grad: f64) -> f64 {
    let n = n as f64;
    n * (n + 1.0) * (2.0 * n + 1.0) / 6.0 * (gate + grad / 3.0)
}

/// Decay rate `(k_alpha + k_s)^2 k_0^2 D` once encoding is finished.
pub fn post_decay_rate(term: &LabeledTerm, d: f64, k0: f64) -> f64 {
    (term.winding as f64 * k0).powi(2) * d
}

impl Ledger {
    /// Fills each term's `diff_integral`.
    pub fn with_diffusion(mut self, timing: &DiffusionTiming, model: AttenuationModel) -> Result<Ledger> {
        let ints = diffusion_integrals(&self.schedule, timing, model)?;
        for (t, v) in self.terms.iter_mut().zip(ints) {
            t.diff_integral = v;
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> Bits {
        s.parse().unwrap()
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity(1, &b("010")).unwrap(), -1);
        assert_eq!(parity(2, &b("010")).unwrap(), -1);
        assert_eq!(parity(3, &b("010")).unwrap(), 1);
        assert_eq!(parity(3, &b("111")).unwrap(), -1);
        for n in 1..=4 {
            assert_eq!(parity(n, &b("0000")).unwrap(), 1);
        }
        assert!(parity(0, &b("01")).is_err());
        assert!(parity(3, &b("01")).is_err());
    }

    #[test]
    fn k_labels_uniform_and_alternating() {
        let u = EncodingSchedule::uniform(3, 1).unwrap();
        let labels: Vec<i64> = Bits::all(3).map(|a| k_label(&a, &u).unwrap()).collect();
        assert_eq!(labels, vec![3, -3, -1, 1, 1, -1, 1, -1]);
        let alt = EncodingSchedule::alternating(3, 1).unwrap();
        let labels: Vec<i64> = Bits::all(3).map(|a| k_label(&a, &alt).unwrap()).collect();
        assert_eq!(labels, vec![3, -3, 5, -5, 1, -1, 7, -7]);
        let one = EncodingSchedule::uniform(1, 1).unwrap();
        assert_eq!(k_label(&b("0"), &one).unwrap(), 1);
        assert_eq!(k_label(&b("1"), &one).unwrap(), -1);
        assert!(k_label(&b("01"), &one).is_err());
    }

    #[test]
    fn single_pps_final_column() {
        let s = single_pps_schedule(&b("000"), 1).unwrap();
        let l = ledger_run(&s);
        let w: Vec<i64> = l.terms.iter().map(|t| t.winding).collect();
        assert_eq!(w, vec![0, -6, -4, -2, -2, -4, -2, -4]);
        assert_eq!(l.history.len(), 7);
    }

    #[test]
    fn one_qubit_hand_recursion() {
        let s = EncodingSchedule::new(vec![1], Some(-1), 1).unwrap();
        let w: Vec<i64> = ledger_run(&s).terms.iter().map(|t| t.winding).collect();
        assert_eq!(w, vec![0, -2]);
    }

    #[test]
    fn single_pps_worked_target() {
        let s = single_pps_schedule(&b("010"), 1).unwrap();
        let ks: Vec<i64> = s.steps().iter().map(|st| st.k).collect();
        assert_eq!(ks, vec![-1, -1, 1]);
        assert_eq!(s.selection(), Some(-3));
    }

    #[test]
    fn every_target_uniquely_rephased() {
        for n in 1..=3 {
            for target in Bits::all(n) {
                let l = ledger_run(&single_pps_schedule(&target, 1).unwrap());
                for t in &l.terms {
                    if t.alpha == target {
                        assert_eq!(t.winding, 0);
                    } else {
                        assert!(t.winding.abs() >= 2, "{target:?} {:?}", t.alpha);
                    }
                }
            }
        }
    }

    #[test]
    fn multi_schedule_labels() {
        let l = ledger_run(&multi_schedule(2, 1).unwrap());
        let w: Vec<i64> = l.terms.iter().map(|t| t.winding).collect();
        assert_eq!(w, vec![3, 5, 1, 7]);
        let l3 = ledger_run(&multi_schedule(3, 1).unwrap());
        let mut w: Vec<i64> = l3.terms.iter().map(|t| t.winding).collect();
        w.sort();
        assert_eq!(w, vec![1, 3, 5, 7, 9, 11, 13, 15]);
        let alt = EncodingSchedule::alternating(3, 1).unwrap();
        let pre: Vec<i64> = Bits::all(3).map(|a| k_label(&a, &alt).unwrap()).collect();
        assert_eq!(pre.iter().min(), Some(&-7));
        assert_eq!(pre.iter().max(), Some(&7));
    }

    #[test]
    fn degeneracies() {
        let l = ledger_run(&single_pps_schedule(&b("000"), 1).unwrap());
        let map = degeneracy_map(&l);
        assert_eq!(map[&-2], vec![b("011"), b("100"), b("110")]);
        assert_eq!(map[&-4], vec![b("010"), b("101"), b("111")]);
        let m = degeneracy_map(&ledger_run(&multi_schedule(3, 1).unwrap()));
        assert!(m.values().all(|v| v.len() == 1));
        let one = degeneracy_map(&ledger_run(&EncodingSchedule::uniform(1, 1).unwrap()));
        assert!(one.values().all(|v| v.len() == 1));
    }

    #[test]
    fn headers_follow_published_layout() {
        let l = ledger_run(&single_pps_schedule(&b("000"), 1).unwrap());
        let h: Vec<String> = l.history.iter().map(Column::header).collect();
        assert_eq!(h[0], "k_1 = k_0");
        assert_eq!(h[1], "CNOT_{1a}");
        assert_eq!(h[6], "k_s = -3k_0");
        let alt = ledger_run(&EncodingSchedule::alternating(3, 1).unwrap());
        assert_eq!(alt.history[2].header(), "k_2 = -2k_0");
        assert!(l.table_text().lines().nth(1).unwrap().contains("|000>"));
    }

    #[test]
    fn stepwise_model_closed_form() {
        for n in 1..=5 {
            let s = single_pps_schedule(&Bits::zeros(n), 1).unwrap();
            let (gate, grad) = (0.0035, 0.0015);
            let ints =
                diffusion_integrals(&s, &DiffusionTiming::constant(n, gate, grad), AttenuationModel::StepEndpoint)
                    .unwrap();
            let closed = uniform_closed_form(n, gate, grad);
            assert!((ints[0] - closed).abs() <= 1e-12 * closed);
        }
        assert_eq!(uniform_closed_form(3, 1.0, 0.0), 14.0);
    }

    #[test]
    fn multi_top_state_path() {
        // |111> visits -1, 3, -7 after each step.
        let s = multi_schedule(3, 1).unwrap();
        let timing = DiffusionTiming { gate_durations: vec![1.0, 10.0, 100.0], grad_duration: 0.0 };
        let ints = diffusion_integrals(&s, &timing, AttenuationModel::StepEndpoint).unwrap();
        assert_eq!(ints[7], 1.0 + 9.0 * 10.0 + 49.0 * 100.0);
        // |000> visits 1, -1, 3
        assert_eq!(ints[0], 1.0 + 10.0 + 900.0);
    }

    #[test]
    fn models_agree_without_gradient_time() {
        let s = multi_schedule(3, 1).unwrap();
        let t = DiffusionTiming { gate_durations: vec![0.1, 0.2, 0.3], grad_duration: 0.0 };
        let a = diffusion_integrals(&s, &t, AttenuationModel::ExactRamp).unwrap();
        let b = diffusion_integrals(&s, &t, AttenuationModel::StepEndpoint).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn attenuation_zero_diffusion() {
        let s = single_pps_schedule(&b("101"), 1).unwrap();
        let att =
            prep_attenuation(&s, 0.0, 3.0, &DiffusionTiming::constant(3, 0.01, 0.001), AttenuationModel::ExactRamp)
                .unwrap();
        assert!(att.iter().all(|a| a.factor == 1.0));
        assert!(prep_attenuation(
            &s,
            -1.0,
            1.0,
            &DiffusionTiming::constant(3, 0.01, 0.001),
            AttenuationModel::ExactRamp
        )
        .is_err());
        assert!(prep_attenuation(
            &s,
            1.0,
            1.0,
            &DiffusionTiming::constant(3, -0.01, 0.001),
            AttenuationModel::ExactRamp
        )
        .is_err());
        assert!(prep_attenuation(
            &s,
            1.0,
            1.0,
            &DiffusionTiming::constant(2, 0.01, 0.001),
            AttenuationModel::ExactRamp
        )
        .is_err());
    }

    #[test]
    fn decay_rates() {
        let l = ledger_run(&single_pps_schedule(&b("000"), 1).unwrap());
        let mut rates: Vec<i64> = l.terms.iter().map(|t| post_decay_rate(t, 1.0, 1.0) as i64).collect();
        rates.sort();
        rates.dedup();
        assert_eq!(rates, vec![0, 4, 16, 36]);
    }

    #[test]
    fn epsilon_signs() {
        let spins =
            (0..3).map(|i| crate::spin::Spin { name: format!("s{i}"), gamma_ratio: 1.0, offset_hz: 0.0 }).collect();
        let sys = SpinSystem::new(spins, 0, &[]).unwrap();
        assert_eq!(epsilon(&b("01"), &sys).unwrap(), 0.0);
        assert_eq!(epsilon(&b("11"), &sys).unwrap(), -epsilon(&b("00"), &sys).unwrap());
        assert!(epsilon(&b("0"), &sys).is_err());
    }
}
