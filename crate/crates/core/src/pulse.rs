//! Ideal pulse programs for the logical gates.
//!
//! RF pulses are instantaneous selective rotations, delays evolve only the
//! declared `(pi/2) J sigma_z sigma_z` term, and gradients wind spins by a
//! real number of turns across the normalized sample. A non-selective
//! gradient of `w` windings (ancilla-referenced) winds spin `j` by
//! `w * gamma_j / gamma_a`.
//!
//! Text form, one event per line:
//!
//! ```text
//! RF spin=Ca axis=-x angle=1.5707963267948966
//! DELAY t=0.0034965034965034965 J=Ca,H
//! GRAD w=0.5 d=0.00075 sel=all
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{rotation, z_eigen, Axis, CMatrix, Operator, OperatorKind, SpinSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RfAxis {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

impl RfAxis {
    fn parts(self) -> (Axis, f64) {
        match self {
            RfAxis::PlusX => (Axis::X, 1.0),
            RfAxis::MinusX => (Axis::X, -1.0),
            RfAxis::PlusY => (Axis::Y, 1.0),
            RfAxis::MinusY => (Axis::Y, -1.0),
        }
    }
}

impl fmt::Display for RfAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RfAxis::PlusX => "+x",
            RfAxis::MinusX => "-x",
            RfAxis::PlusY => "+y",
            RfAxis::MinusY => "-y",
        })
    }
}

impl FromStr for RfAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+x" | "x" => Ok(RfAxis::PlusX),
            "-x" => Ok(RfAxis::MinusX),
            "+y" | "y" => Ok(RfAxis::PlusY),
            "-y" => Ok(RfAxis::MinusY),
            _ => Err(Error::Sequence(format!("unknown RF axis {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PulseEvent {
    Rf {
        spin: usize,
        axis: RfAxis,
        angle: f64,
    },
    /// Free evolution under the coupling of one spin pair (or nothing).
    Delay {
        seconds: f64,
        coupling: Option<(usize, usize)>,
    },
    /// `selective: None` acts on every spin, scaled by its gamma ratio.
    Gradient {
        windings: f64,
        duration: f64,
        selective: Option<usize>,
    },
}

impl PulseEvent {
    /// +1 / -1 / 0 for gradients, `None` otherwise.
    pub fn polarity(&self) -> Option<i8> {
        match self {
            PulseEvent::Gradient { windings, .. } => Some(if *windings > 0.0 {
                1
            } else if *windings < 0.0 {
                -1
            } else {
                0
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    system: SpinSystem,
    events: Vec<PulseEvent>,
}

impl PulseSequence {
    pub fn new(system: &SpinSystem, events: Vec<PulseEvent>) -> Result<Self> {
        let n = system.n_total();
        for ev in &events {
            match *ev {
                PulseEvent::Rf { spin, angle, .. } => {
                    if spin >= n || !angle.is_finite() {
                        return Err(Error::Sequence(format!("bad RF event {ev:?}")));
                    }
                }
                PulseEvent::Delay { seconds, coupling } => {
                    if !(seconds >= 0.0) || !seconds.is_finite() {
                        return Err(Error::Sequence(format!("negative or non-finite delay {seconds}")));
                    }
                    if let Some((a, b)) = coupling {
                        if a >= n || b >= n || a == b {
                            return Err(Error::Sequence(format!("bad coupling pair ({a}, {b})")));
                        }
                    }
                }
                PulseEvent::Gradient { windings, duration, selective } => {
                    if !windings.is_finite() || !(duration >= 0.0) {
                        return Err(Error::Sequence(format!("bad gradient event {ev:?}")));
                    }
                    if selective.is_some_and(|s| s >= n) {
                        return Err(Error::Sequence(format!("bad gradient target {ev:?}")));
                    }
                }
            }
        }
        Ok(Self { system: system.clone(), events })
    }

    pub fn events(&self) -> &[PulseEvent] {
        &self.events
    }

    pub fn system(&self) -> &SpinSystem {
        &self.system
    }

    /// Appends another sequence on the same system.
    pub fn then(mut self, other: &PulseSequence) -> PulseSequence {
        self.events.extend(other.events.iter().cloned());
        self
    }

    pub fn to_text(&self) -> String {
        let name = |i: usize| self.system.spins()[i].name.as_str();
        let mut out = String::new();
        for ev in &self.events {
            let line = match ev {
                PulseEvent::Rf { spin, axis, angle } => format!("RF spin={} axis={axis} angle={angle:?}", name(*spin)),
                PulseEvent::Delay { seconds, coupling: Some((a, b)) } => {
                    format!("DELAY t={seconds:?} J={},{}", name(*a), name(*b))
                }
                PulseEvent::Delay { seconds, coupling: None } => format!("DELAY t={seconds:?} J=none"),
                PulseEvent::Gradient { windings, duration, selective } => {
                    format!("GRAD w={windings:?} d={duration:?} sel={}", selective.map_or("all", name))
                }
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Parses the text form; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, system: &SpinSystem) -> Result<Self> {
        let spin = |s: &str| system.index_of(s).ok_or_else(|| Error::Sequence(format!("unknown spin {s:?}")));
        let num =
            |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|_| Error::Sequence(format!("bad number {s:?}"))) };
        let mut events = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut words = line.split_whitespace();
            let op = words.next().unwrap();
            let mut fields = std::collections::BTreeMap::new();
            for w in words {
                let (k, v) = w
                    .split_once('=')
                    .ok_or_else(|| Error::Sequence(format!("line {}: expected key=value, got {w:?}", lineno + 1)))?;
                if fields.insert(k, v).is_some() {
                    return Err(Error::Sequence(format!("line {}: duplicate key {k}", lineno + 1)));
                }
            }
            let mut take =
                |k: &str| fields.remove(k).ok_or_else(|| Error::Sequence(format!("line {}: missing {k}", lineno + 1)));
            let ev = match op {
                "RF" => PulseEvent::Rf {
                    spin: spin(take("spin")?)?,
                    axis: take("axis")?.parse()?,
                    angle: num(take("angle")?)?,
                },
                "DELAY" => {
                    let seconds = num(take("t")?)?;
                    let coupling = match take("J")? {
                        "none" => None,
                        pair => {
                            let (a, b) = pair
                                .split_once(',')
                                .ok_or_else(|| Error::Sequence(format!("bad coupling {pair:?}")))?;
                            Some((spin(a)?, spin(b)?))
                        }
                    };
                    PulseEvent::Delay { seconds, coupling }
                }
                "GRAD" => {
                    let windings = num(take("w")?)?;
                    let duration = num(take("d")?)?;
                    let selective = match take("sel")? {
                        "all" => None,
                        s => Some(spin(s)?),
                    };
                    PulseEvent::Gradient { windings, duration, selective }
                }
                _ => return Err(Error::Sequence(format!("line {}: unknown event {op:?}", lineno + 1))),
            };
            if let Some(k) = fields.keys().next() {
                return Err(Error::Sequence(format!("line {}: unexpected key {k}", lineno + 1)));
            }
            events.push(ev);
        }
        PulseSequence::new(system, events)
    }
}

/// Conditional NOT flipping `target` when `control` is `|1>`, as
/// `(pi/2)_{-x} - (pi/2)_{-y} - 1/(2J) - (pi/2)_{y}` on the target. The result
/// equals the ideal gate up to a z-phase on the control.
pub fn compile_cnot(control: usize, target: usize, system: &SpinSystem) -> Result<PulseSequence> {
    system.check_spin(control)?;
    system.check_spin(target)?;
    if control == target {
        return Err(Error::SameSpin(control));
    }
    let j = system.j_hz(control, target);
    if j == 0.0 {
        return Err(Error::ZeroCoupling(system.spins()[control].name.clone(), system.spins()[target].name.clone()));
    }
    // A negative coupling reverses the sense of the delay rotation.
    let first = if j > 0.0 { RfAxis::MinusX } else { RfAxis::PlusX };
    let half = PI / 2.0;
    PulseSequence::new(
        system,
        vec![
            PulseEvent::Rf { spin: target, axis: first, angle: half },
            PulseEvent::Rf { spin: target, axis: RfAxis::MinusY, angle: half },
            PulseEvent::Delay { seconds: 1.0 / (2.0 * j.abs()), coupling: Some((target, control)) },
            PulseEvent::Rf { spin: target, axis: RfAxis::PlusY, angle: half },
        ],
    )
}

/// Winds only `spin` by `w` turns using two non-selective gradient lobes of
/// opposite polarity around selective refocusing pi pulses. Every other
/// spin sees zero net winding.
pub fn compile_selective_gradient(spin: usize, w: f64, duration: f64, system: &SpinSystem) -> Result<PulseSequence> {
    let ratio = system.spin(spin)?.gamma_ratio;
    if ratio == 0.0 {
        return Err(Error::InvalidParameter(format!("spin {spin} has zero gamma ratio")));
    }
    let lobe = w / (2.0 * ratio);
    PulseSequence::new(
        system,
        vec![
            PulseEvent::Gradient { windings: lobe, duration: duration / 2.0, selective: None },
            PulseEvent::Rf { spin, axis: RfAxis::PlusY, angle: PI },
            PulseEvent::Gradient { windings: -lobe, duration: duration / 2.0, selective: None },
            PulseEvent::Rf { spin, axis: RfAxis::PlusY, angle: PI },
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateOrder {
    /// cNOT, G_k1, cNOT, G_k2 in time.
    #[default]
    CnotFirst,
    /// G_k1, cNOT, G_k2, cNOT in time.
    GradientFirst,
}

/// Conditional phase shift on the ancilla conditioned on data qubit `i`
/// (1-based), with compiled conditional NOTs and selective gradients.
pub fn compile_conditional_phase(
    system: &SpinSystem,
    i: usize,
    k1: f64,
    k2: f64,
    order: GateOrder,
) -> Result<PulseSequence> {
    let a = system.ancilla();
    let d = system.data_spin(i)?;
    let c = compile_cnot(d, a, system)?;
    let g1 = compile_selective_gradient(a, k1, 0.0, system)?;
    let g2 = compile_selective_gradient(a, k2, 0.0, system)?;
    let seq = match order {
        GateOrder::CnotFirst => c.clone().then(&g1).then(&c).then(&g2),
        GateOrder::GradientFirst => g1.then(&c).then(&g2).then(&c),
    };
    Ok(seq)
}

/// Unitary of the whole program at position `z`.
pub fn sequence_unitary(seq: &PulseSequence, z: f64) -> Result<Operator> {
    let sys = &seq.system;
    let n = sys.n_total();
    let dim = sys.dim();
    let mut u = CMatrix::identity(dim, dim);
    for ev in &seq.events {
        match *ev {
            PulseEvent::Rf { spin, axis, angle } => {
                let (ax, sign) = axis.parts();
                let r = rotation(ax, sign * angle, spin, sys)?;
                u = r.matrix() * u;
            }
            PulseEvent::Delay { seconds, coupling } => {
                if let Some((a, b)) = coupling {
                    let j = sys.j_hz(a, b);
                    let phase: Vec<f64> =
                        (0..dim).map(|r| PI / 2.0 * j * seconds * z_eigen(r, a, n) * z_eigen(r, b, n)).collect();
                    scale_rows(&mut u, &phase);
                }
            }
            PulseEvent::Gradient { windings, selective, .. } => {
                let phase: Vec<f64> = (0..dim)
                    .map(|r| {
                        let weight = match selective {
                            Some(s) => z_eigen(r, s, n),
                            None => {
                                sys.spins().iter().enumerate().map(|(j, sp)| sp.gamma_ratio * z_eigen(r, j, n)).sum()
                            }
                        };
                        2.0 * PI * windings * z * weight
                    })
                    .collect();
                scale_rows(&mut u, &phase);
            }
        }
    }
    Ok(Operator::trusted(u, OperatorKind::Unitary))
}

/// Left-multiplies by `diag(exp(-i phase))`.
fn scale_rows(u: &mut CMatrix, phase: &[f64]) {
    for (r, &p) in phase.iter().enumerate() {
        let f = C64::from_polar(1.0, -p);
        for c in 0..u.ncols() {
            u[(r, c)] *= f;
        }
    }
}

/// Overlap `|tr(U_ideal^dag U Phi)| / dim` maximized over diagonal phase
/// corrections `Phi`, with the optimal `Phi` (as phases, radians).
pub fn overlap_up_to_diagonal_phase(ideal: &Operator, compiled: &Operator) -> Result<(f64, Vec<f64>)> {
    if ideal.dim() != compiled.dim() {
        return Err(Error::DimensionMismatch { expected: ideal.dim(), actual: compiled.dim() });
    }
    let m = ideal.matrix().adjoint() * compiled.matrix();
    let dim = m.nrows();
    let overlap = (0..dim).map(|j| m[(j, j)].norm()).sum::<f64>() / dim as f64;
    let phases = (0..dim).map(|j| -m[(j, j)].arg()).collect();
    Ok((overlap, phases))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhtReport {
    pub winding_minus: f64,
    pub winding_plus: f64,
    pub expected_minus: f64,
    pub expected_plus: f64,
    pub max_deviation: f64,
    pub conforms: bool,
}

/// Extracts the ancilla winding in the `E_-` and `E_+` subspaces of data
/// qubit `i` from the sampled unitary and compares with `k2 - k1` and
/// `k2 + k1`.
pub fn aht_check(seq: &PulseSequence, k1: f64, k2: f64, i: usize) -> Result<AhtReport> {
    let sys = &seq.system;
    let n = sys.n_total();
    let a = sys.ancilla();
    let d = sys.data_spin(i)?;
    let amask = 1usize << (n - 1 - a);
    let dmask = 1usize << (n - 1 - d);
    let dz = 1.0 / (8.0 * (k1.abs() + k2.abs() + 1.0));
    let probe: Vec<f64> = (0..16).map(|m| (m as f64 + 0.5) / 16.0 - 0.5).collect();
    let tol = 1e-9;

    let winding_in = |data_row: usize| -> Result<(f64, f64)> {
        let r0 = data_row;
        let r1 = data_row | amask;
        let ratio = |z: f64| -> Result<C64> {
            let u = sequence_unitary(seq, z)?;
            let m = u.matrix();
            let leak = m[(r0, r1)].norm() + m[(r1, r0)].norm();
            if leak > tol || m[(r1, r1)].norm() < 1.0 - tol {
                return Err(Error::Sequence("sequence does not act diagonally on the ancilla".into()));
            }
            Ok(m[(r0, r0)] / m[(r1, r1)])
        };
        let base = ratio(0.0)?;
        let w = -(ratio(dz)? / base).arg() / (4.0 * PI * dz);
        let mut dev: f64 = 0.0;
        for &z in &probe {
            let pred = base * C64::from_polar(1.0, -4.0 * PI * w * z);
            dev = dev.max((ratio(z)? - pred).norm());
        }
        Ok((w, dev))
    };

    let (wm, dm) = winding_in(dmask)?;
    let (wp, dp) = winding_in(0)?;
    let (em, ep) = (k2 - k1, k2 + k1);
    let max_deviation = dm.max(dp).max((wm - em).abs()).max((wp - ep).abs());
    Ok(AhtReport {
        winding_minus: wm,
        winding_plus: wp,
        expected_minus: em,
        expected_plus: ep,
        max_deviation,
        conforms: max_deviation < 1e-8,
    })
}
