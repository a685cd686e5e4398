//! Dense operator algebra for an ancilla plus N data spins.
//!
//! Spin `s` of an `n`-spin system is tensor factor `s` counted from the left,
//! i.e. bit `n - 1 - s` of a row index. Bit value 0 is spin-up, so
//! `E_+ = |0><0|`. States are deviation density matrices: traceless, unitless,
//! with the common Boltzmann factor dropped.
//!
//! Hamiltonians are in rad/s. Configuration inputs (offsets, couplings) are
//! in Hz and converted here.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;

pub(crate) const UNITARY_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spin {
    pub name: String,
    /// gamma_i / gamma_ancilla
    pub gamma_ratio: f64,
    pub offset_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    spins: Vec<Spin>,
    ancilla: usize,
    j_hz: Vec<Vec<f64>>,
    data: Vec<usize>,
}

impl SpinSystem {
    /// Builds a system from spins, the ancilla index and a list of
    /// `(i, j, J_hz)` couplings. Unlisted pairs are uncoupled.
    pub fn new(spins: Vec<Spin>, ancilla: usize, couplings: &[(usize, usize, f64)]) -> Result<Self> {
        let n = spins.len();
        if ancilla >= n {
            return Err(Error::SpinIndex { index: ancilla, n_spins: n });
        }
        if n < 2 {
            return Err(Error::Config("need an ancilla and at least one data spin".into()));
        }
        if spins[ancilla].gamma_ratio != 1.0 {
            return Err(Error::Config(format!(
                "ancilla {} must have gamma_ratio exactly 1, got {}",
                spins[ancilla].name, spins[ancilla].gamma_ratio
            )));
        }
        for (i, s) in spins.iter().enumerate() {
            if !s.gamma_ratio.is_finite() || !s.offset_hz.is_finite() {
                return Err(Error::Config(format!("spin {} has non-finite parameters", s.name)));
            }
            if spins[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::Config(format!("duplicate spin name {}", s.name)));
            }
        }
        let mut j_hz = vec![vec![0.0; n]; n];
        for &(a, b, j) in couplings {
            if a >= n || b >= n {
                return Err(Error::SpinIndex { index: a.max(b), n_spins: n });
            }
            if a == b {
                return Err(Error::Config(format!("self coupling on spin {}", spins[a].name)));
            }
            if !j.is_finite() {
                return Err(Error::Config("non-finite J coupling".into()));
            }
            j_hz[a][b] = j;
            j_hz[b][a] = j;
        }
        let data = (0..n).filter(|&i| i != ancilla).collect();
        Ok(Self { spins, ancilla, j_hz, data })
    }

    pub fn n_total(&self) -> usize {
        self.spins.len()
    }

    pub fn n_data(&self) -> usize {
        self.data.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_total()
    }

    pub fn ancilla(&self) -> usize {
        self.ancilla
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn spin(&self, i: usize) -> Result<&Spin> {
        self.spins.get(i).ok_or(Error::SpinIndex { index: i, n_spins: self.n_total() })
    }

    /// Spin index of data qubit `n` (1-based, in the order the data spins
    /// appear in the system).
    pub fn data_spin(&self, n: usize) -> Result<usize> {
        if n == 0 || n > self.n_data() {
            return Err(Error::DataIndex { index: n, n_data: self.n_data() });
        }
        Ok(self.data[n - 1])
    }

    pub fn data_spins(&self) -> &[usize] {
        &self.data
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.spins.iter().position(|s| s.name == name)
    }

    pub fn j_hz(&self, a: usize, b: usize) -> f64 {
        self.j_hz[a][b]
    }

    pub fn couplings(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_total();
        let mut out = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if self.j_hz[a][b] != 0.0 {
                    out.push((a, b, self.j_hz[a][b]));
                }
            }
        }
        out
    }

    pub fn check_spin(&self, i: usize) -> Result<()> {
        if i >= self.n_total() {
            return Err(Error::SpinIndex { index: i, n_spins: self.n_total() });
        }
        Ok(())
    }

    /// Keeps the ancilla and the listed data qubits (1-based), dropping the
    /// rest together with their couplings.
    pub fn restrict_data(&self, keep: &[usize]) -> Result<SpinSystem> {
        let mut idx = vec![self.ancilla];
        for &n in keep {
            let s = self.data_spin(n)?;
            if idx.contains(&s) {
                return Err(Error::Config(format!("data qubit {n} listed twice")));
            }
            idx.push(s);
        }
        idx.sort_unstable();
        let spins = idx.iter().map(|&i| self.spins[i].clone()).collect();
        let ancilla = idx.iter().position(|&i| i == self.ancilla).unwrap();
        let mut couplings = Vec::new();
        for (na, &a) in idx.iter().enumerate() {
            for (nb, &b) in idx.iter().enumerate().skip(na + 1) {
                if self.j_hz[a][b] != 0.0 {
                    couplings.push((na, nb, self.j_hz[a][b]));
                }
            }
        }
        SpinSystem::new(spins, ancilla, &couplings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Unitary,
    Hermitian,
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    kind: OperatorKind,
}

impl Operator {
    /// Wraps a matrix, checking the claimed kind.
    pub fn new(matrix: CMatrix, kind: OperatorKind) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() || !n.is_power_of_two() {
            return Err(Error::DimensionMismatch { expected: n.next_power_of_two(), actual: matrix.ncols() });
        }
        match kind {
            OperatorKind::Unitary => {
                let dev = unitarity_defect(&matrix);
                if dev > UNITARY_TOL {
                    return Err(Error::NotUnitary(dev));
                }
            }
            OperatorKind::Hermitian => {
                let dev = hermiticity_defect(&matrix);
                if dev > HERMITIAN_TOL {
                    return Err(Error::NotHermitian(dev));
                }
            }
            OperatorKind::General => {}
        }
        Ok(Self { matrix, kind })
    }

    pub(crate) fn trusted(matrix: CMatrix, kind: OperatorKind) -> Self {
        Self { matrix, kind }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: CMatrix::identity(dim, dim), kind: OperatorKind::Unitary }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Operator {
        Operator { matrix: self.matrix.adjoint(), kind: self.kind }
    }

    /// Product `self * rhs`; the kind is kept only when both factors agree
    /// on unitarity.
    pub fn compose(&self, rhs: &Operator) -> Operator {
        let kind = if self.kind == OperatorKind::Unitary && rhs.kind == OperatorKind::Unitary {
            OperatorKind::Unitary
        } else {
            OperatorKind::General
        };
        Operator { matrix: &self.matrix * &rhs.matrix, kind }
    }

    pub fn is_diagonal(&self) -> bool {
        is_diagonal(&self.matrix)
    }
}

pub(crate) fn is_diagonal(m: &CMatrix) -> bool {
    (0..m.nrows()).all(|r| (0..m.ncols()).all(|c| r == c || m[(r, c)] == C64::new(0.0, 0.0)))
}

pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let prod = m * m.adjoint();
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((prod[(r, c)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// A traceless Hermitian density-matrix deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationState {
    matrix: CMatrix,
}

impl DeviationState {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() || !n.is_power_of_two() || n < 2 {
            return Err(Error::DimensionMismatch { expected: n.next_power_of_two().max(2), actual: matrix.ncols() });
        }
        let scale = matrix.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
        let herm = hermiticity_defect(&matrix);
        if herm > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(herm));
        }
        let tr = matrix.trace().norm();
        if tr > HERMITIAN_TOL * scale * n as f64 {
            return Err(Error::NotTraceless(tr));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn trusted(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn zero(dim: usize) -> Self {
        Self { matrix: CMatrix::zeros(dim, dim) }
    }

    pub fn from_operator(op: &Operator) -> Result<Self> {
        Self::new(op.matrix().clone())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn frobenius_distance(&self, other: &DeviationState) -> f64 {
        (&self.matrix - &other.matrix).norm()
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn scaled(&self, s: f64) -> DeviationState {
        DeviationState { matrix: &self.matrix * C64::new(s, 0.0) }
    }

    pub fn add(&self, other: &DeviationState) -> DeviationState {
        DeviationState { matrix: &self.matrix + &other.matrix }
    }

    /// Expectation coefficient `tr(rho * op) / dim`.
    pub fn component(&self, op: &Operator) -> C64 {
        (&self.matrix * op.matrix()).trace() / self.dim() as f64
    }

    /// True when the state commutes with every `sigma_z` of an `n_total`-spin
    /// register, i.e. it is diagonal in the computational basis.
    pub fn is_longitudinal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|r| (0..n).all(|c| r == c || self.matrix[(r, c)].norm() <= tol))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// Population bit selected by `E_sign`.
    pub fn bit(self) -> u8 {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }
}

pub(crate) fn spin_bit(row: usize, spin: usize, n_total: usize) -> usize {
    (row >> (n_total - 1 - spin)) & 1
}

pub(crate) fn spin_mask(spin: usize, n_total: usize) -> usize {
    1 << (n_total - 1 - spin)
}

/// `sigma_z` eigenvalue (+1 / -1) of `spin` in basis row `row`.
pub(crate) fn z_eigen(row: usize, spin: usize, n_total: usize) -> f64 {
    if spin_bit(row, spin, n_total) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn pauli2(axis: Axis) -> Matrix2<C64> {
    match axis {
        Axis::X => Matrix2::new(c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)),
        Axis::Y => Matrix2::new(c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)),
        Axis::Z => Matrix2::new(c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)),
    }
}

/// Embeds a single-spin 2x2 operator at `spin` of an `n_total`-spin register.
pub fn embed_single(m: &Matrix2<C64>, spin: usize, n_total: usize) -> CMatrix {
    let dim = 1 << n_total;
    let mask = spin_mask(spin, n_total);
    let mut out = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        let br = spin_bit(r, spin, n_total);
        for bc in 0..2 {
            let col = (r & !mask) | if bc == 1 { mask } else { 0 };
            out[(r, col)] = m[(br, bc)];
        }
    }
    out
}

pub fn pauli(axis: Axis, spin: usize, system: &SpinSystem) -> Result<Operator> {
    system.check_spin(spin)?;
    Ok(Operator::trusted(embed_single(&pauli2(axis), spin, system.n_total()), OperatorKind::Hermitian))
}

/// Population projector `E_sign = (1 +/- sigma_z) / 2` on `spin`.
pub fn idempotent(sign: Sign, spin: usize, system: &SpinSystem) -> Result<Operator> {
    system.check_spin(spin)?;
    let n = system.n_total();
    let dim = system.dim();
    let want = sign.bit() as usize;
    let mut m = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        if spin_bit(r, spin, n) == want {
            m[(r, r)] = c(1., 0.);
        }
    }
    Ok(Operator::trusted(m, OperatorKind::Hermitian))
}

/// Controlled-NOT: flips `target` when `control` is `|1>`.
pub fn cnot(control: usize, target: usize, system: &SpinSystem) -> Result<Operator> {
    system.check_spin(control)?;
    system.check_spin(target)?;
    if control == target {
        return Err(Error::SameSpin(control));
    }
    Ok(Operator::trusted(cnot_matrix(&[(control, 1)], target, system.n_total()), OperatorKind::Unitary))
}

/// Multi-controlled NOT on `target`, firing when every `(spin, bit)` in
/// `condition` matches.
pub(crate) fn cnot_matrix(condition: &[(usize, u8)], target: usize, n_total: usize) -> CMatrix {
    let dim = 1 << n_total;
    let tmask = spin_mask(target, n_total);
    let mut m = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        let fires = condition.iter().all(|&(s, b)| spin_bit(r, s, n_total) == b as usize);
        let col = if fires { r ^ tmask } else { r };
        m[(r, col)] = c(1., 0.);
    }
    m
}

/// Single-spin rotation `exp(-i angle/2 sigma_axis)`.
pub fn rotation(axis: Axis, angle: f64, spin: usize, system: &SpinSystem) -> Result<Operator> {
    system.check_spin(spin)?;
    Ok(Operator::trusted(embed_single(&rotation2(axis, angle), spin, system.n_total()), OperatorKind::Unitary))
}

pub(crate) fn rotation2(axis: Axis, angle: f64) -> Matrix2<C64> {
    let (s, co) = (angle / 2.0).sin_cos();
    let id = Matrix2::identity();
    id * c(co, 0.) - pauli2(axis) * c(0., s)
}

/// `(pi/2)_{+y}` for `Sign::Plus` (maps `sigma_z -> sigma_x`) and
/// `(pi/2)_{-y}` for `Sign::Minus` (maps `sigma_x -> sigma_z`).
pub fn pseudo_hadamard(spin: usize, sign: Sign, system: &SpinSystem) -> Result<Operator> {
    rotation(Axis::Y, sign.value() * PI / 2.0, spin, system)
}

/// True Hadamard `(sigma_x + sigma_z)/sqrt 2`. Not used by the preparation
/// pipelines.
pub fn hadamard(spin: usize, system: &SpinSystem) -> Result<Operator> {
    system.check_spin(spin)?;
    let h = (pauli2(Axis::X) + pauli2(Axis::Z)) * c(FRAC_1_SQRT_2, 0.);
    Ok(Operator::trusted(embed_single(&h, spin, system.n_total()), OperatorKind::Unitary))
}

/// High-temperature equilibrium deviation `sigma_z^a + sum_i (gamma_i/gamma_a) sigma_z^i`.
pub fn equilibrium_state(system: &SpinSystem) -> DeviationState {
    let n = system.n_total();
    let dim = system.dim();
    let mut m = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        let v: f64 = system.spins().iter().enumerate().map(|(s, spin)| spin.gamma_ratio * z_eigen(r, s, n)).sum();
        m[(r, r)] = c(v, 0.);
    }
    DeviationState::trusted(m)
}

/// Diagonal of the weak-coupling Hamiltonian in rad/s.
pub fn hamiltonian_diagonal(system: &SpinSystem) -> Vec<f64> {
    let n = system.n_total();
    (0..system.dim())
        .map(|r| {
            let mut e = 0.0;
            for (s, spin) in system.spins().iter().enumerate() {
                e += PI * spin.offset_hz * z_eigen(r, s, n);
            }
            for (a, b, j) in system.couplings() {
                e += PI / 2.0 * j * z_eigen(r, a, n) * z_eigen(r, b, n);
            }
            e
        })
        .collect()
}

/// `H = sum_i pi nu_i sigma_z^i + sum_{i<j} (pi/2) J_ij sigma_z^i sigma_z^j`.
pub fn internal_hamiltonian(system: &SpinSystem) -> Operator {
    let diag = hamiltonian_diagonal(system);
    let m = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(diag.len(), diag.iter().map(|&e| c(e, 0.))));
    Operator::trusted(m, OperatorKind::Hermitian)
}

/// Conjugation `U rho U^dagger`.
pub fn evolve(state: &DeviationState, u: &Operator) -> Result<DeviationState> {
    if u.dim() != state.dim() {
        return Err(Error::DimensionMismatch { expected: state.dim(), actual: u.dim() });
    }
    if u.kind() != OperatorKind::Unitary {
        let dev = unitarity_defect(u.matrix());
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
    }
    Ok(DeviationState::trusted(conjugate(state.matrix(), u.matrix())))
}

pub(crate) fn conjugate(rho: &CMatrix, u: &CMatrix) -> CMatrix {
    if is_diagonal(u) {
        let n = rho.nrows();
        let mut out = rho.clone();
        for r in 0..n {
            for col in 0..n {
                out[(r, col)] = u[(r, r)] * rho[(r, col)] * u[(col, col)].conj();
            }
        }
        out
    } else {
        u * rho * u.adjoint()
    }
}

/// Projector `|alpha><alpha|` on the data register (identity on the ancilla).
pub fn basis_projector(alpha: &Bits, system: &SpinSystem) -> Result<Operator> {
    alpha.expect_len(system.n_data())?;
    let n = system.n_total();
    let dim = system.dim();
    let mut m = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        let hit = (1..=alpha.len()).all(|k| spin_bit(r, system.data[k - 1], n) == alpha.bit(k) as usize);
        if hit {
            m[(r, r)] = c(1., 0.);
        }
    }
    Ok(Operator::trusted(m, OperatorKind::Hermitian))
}

/// `weight * sigma_axis^a |alpha><alpha|`, the pseudo-pure pattern.
pub fn pseudo_pure_pattern(axis: Axis, alpha: &Bits, weight: f64, system: &SpinSystem) -> Result<DeviationState> {
    let s = pauli(axis, system.ancilla(), system)?;
    let p = basis_projector(alpha, system)?;
    Ok(DeviationState::trusted(s.matrix() * p.matrix() * c(weight, 0.)))
}
