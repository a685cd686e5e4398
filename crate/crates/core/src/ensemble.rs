//! Spatially discretized ensemble along z.
//!
//! The sample has normalized length 1 with periodic boundaries, sliced into
//! `M` equal pieces centred at `z_m = (m + 1/2)/M - 1/2`. A gradient of `w`
//! windings conjugates slice `m` by `exp(-i 2 pi w z_m sigma_z)`. Since the
//! `sigma_z` eigenvalues are +/-1, the transverse coherence of the wound spin
//! turns `2w` times across the sample.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{conjugate, spin_bit, z_eigen, CMatrix, DeviationState, Operator};

pub const DEFAULT_SLICES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialGrid {
    slices: usize,
}

impl SpatialGrid {
    pub fn new(slices: usize) -> Result<Self> {
        if slices == 0 {
            return Err(Error::InvalidParameter("grid needs at least one slice".into()));
        }
        Ok(Self { slices })
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn position(&self, m: usize) -> f64 {
        (m as f64 + 0.5) / self.slices as f64 - 0.5
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.slices).map(|m| self.position(m))
    }

    /// Anti-aliasing rule `M >= 4 |w_max|`.
    pub fn check_winding(&self, w_max: i64) -> Result<()> {
        let required = 4 * w_max.unsigned_abs() as usize;
        if self.slices < required {
            return Err(Error::GridTooCoarse { slices: self.slices, winding: w_max, required });
        }
        Ok(())
    }
}

impl Default for SpatialGrid {
    fn default() -> Self {
        Self { slices: DEFAULT_SLICES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientPulse {
    /// Spin the gradient acts on selectively.
    pub spin: usize,
    pub windings: f64,
    /// Seconds; bookkeeping only.
    pub duration: f64,
    /// G/cm; bookkeeping only.
    pub strength: f64,
}

impl GradientPulse {
    pub fn new(spin: usize, windings: f64) -> Self {
        Self { spin, windings, duration: 0.0, strength: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    grid: SpatialGrid,
    slices: Vec<DeviationState>,
}

impl EnsembleState {
    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn slices(&self) -> &[DeviationState] {
        &self.slices
    }

    pub fn slice(&self, m: usize) -> &DeviationState {
        &self.slices[m]
    }

    pub fn dim(&self) -> usize {
        self.slices[0].dim()
    }

    pub(crate) fn n_total(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn from_slices(grid: SpatialGrid, slices: Vec<DeviationState>) -> Result<Self> {
        if slices.len() != grid.slices() {
            return Err(Error::DimensionMismatch { expected: grid.slices(), actual: slices.len() });
        }
        let dim = slices[0].dim();
        if let Some(bad) = slices.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: bad.dim() });
        }
        Ok(Self { grid, slices })
    }

    fn map_slices(&self, mut f: impl FnMut(usize, f64, &CMatrix) -> CMatrix) -> EnsembleState {
        let slices = self
            .slices
            .iter()
            .enumerate()
            .map(|(m, s)| DeviationState::trusted(f(m, self.grid.position(m), s.matrix())))
            .collect();
        EnsembleState { grid: self.grid, slices }
    }

    /// Sum of squared Frobenius norms over all slices.
    pub fn energy(&self) -> f64 {
        self.slices.iter().map(|s| s.norm().powi(2)).sum()
    }

    /// Applies a z-dependent diagonal phase: entry `(r, c)` of slice `z` is
    /// multiplied by `exp(-i (phase(r, z) - phase(c, z)))`.
    pub fn apply_diagonal_phase(&self, phase: impl Fn(usize, f64) -> f64) -> EnsembleState {
        let dim = self.dim();
        self.map_slices(|_, z, rho| {
            let th: Vec<f64> = (0..dim).map(|r| phase(r, z)).collect();
            let mut out = rho.clone();
            for r in 0..dim {
                for c in 0..dim {
                    if out[(r, c)] != C64::new(0.0, 0.0) {
                        out[(r, c)] *= C64::from_polar(1.0, -(th[r] - th[c]));
                    }
                }
            }
            out
        })
    }

    /// Conjugates each slice by a position-dependent unitary.
    pub fn apply_per_slice(&self, unitary_at: impl Fn(f64) -> Result<Operator>) -> Result<EnsembleState> {
        let mut slices = Vec::with_capacity(self.slices.len());
        for (m, s) in self.slices.iter().enumerate() {
            let u = unitary_at(self.grid.position(m))?;
            slices.push(crate::spin::evolve(s, &u)?);
        }
        Ok(EnsembleState { grid: self.grid, slices })
    }
}

/// Every slice holds a copy of `state`.
pub fn broadcast(state: &DeviationState, grid: SpatialGrid) -> EnsembleState {
    EnsembleState { grid, slices: vec![state.clone(); grid.slices()] }
}

/// Conjugates slice `m` by `exp(-i 2 pi w z_m sigma_z^spin)`.
pub fn apply_gradient(e: &EnsembleState, g: &GradientPulse) -> Result<EnsembleState> {
    let n = e.n_total();
    if g.spin >= n {
        return Err(Error::SpinIndex { index: g.spin, n_spins: n });
    }
    let w = g.windings;
    let spin = g.spin;
    Ok(e.apply_diagonal_phase(|r, z| 2.0 * PI * w * z * z_eigen(r, spin, n)))
}

/// Same RF unitary on every slice.
pub fn apply_uniform(e: &EnsembleState, u: &Operator) -> Result<EnsembleState> {
    if u.dim() != e.dim() {
        return Err(Error::DimensionMismatch { expected: e.dim(), actual: u.dim() });
    }
    if u.kind() != crate::spin::OperatorKind::Unitary {
        let dev = crate::spin::unitarity_defect(u.matrix());
        if dev > crate::spin::UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
    }
    Ok(e.map_slices(|_, _, rho| conjugate(rho, u.matrix())))
}

/// Arithmetic mean over slices, summed in slice order.
pub fn spatial_average(e: &EnsembleState) -> DeviationState {
    if e.slices.iter().all(|s| s == &e.slices[0]) {
        return e.slices[0].clone();
    }
    let dim = e.dim();
    let mut acc = CMatrix::zeros(dim, dim);
    for s in &e.slices {
        acc += s.matrix();
    }
    DeviationState::trusted(acc / C64::new(e.slices.len() as f64, 0.0))
}

/// Idealized crusher: removes every component transverse to `spin`.
pub fn crusher(e: &EnsembleState, spin: usize) -> Result<EnsembleState> {
    let n = e.n_total();
    if spin >= n {
        return Err(Error::SpinIndex { index: spin, n_spins: n });
    }
    let dim = e.dim();
    Ok(e.map_slices(|_, _, rho| {
        let mut out = rho.clone();
        for r in 0..dim {
            for c in 0..dim {
                if spin_bit(r, spin, n) != spin_bit(c, spin, n) {
                    out[(r, c)] = C64::new(0.0, 0.0);
                }
            }
        }
        out
    }))
}

/// Diffusion over `dt` seconds with coefficient `d` (normalized length^2/s):
/// the spatial Fourier mode of `f` cycles per sample length is damped by
/// `exp(-(2 pi f)^2 d dt)`.
pub fn diffuse(e: &EnsembleState, d: f64, dt: f64) -> Result<EnsembleState> {
    if !(d >= 0.0) || !(dt >= 0.0) {
        return Err(Error::InvalidParameter(format!("diffusion needs D >= 0 and dt >= 0, got D={d}, dt={dt}")));
    }
    if d == 0.0 || dt == 0.0 {
        return Ok(e.clone());
    }
    let m = e.grid.slices();
    let dim = e.dim();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let damp: Vec<f64> = (0..m)
        .map(|f| {
            let fs = if f <= m / 2 { f as f64 } else { f as f64 - m as f64 };
            (-(2.0 * PI * fs).powi(2) * d * dt).exp() / m as f64
        })
        .collect();

    let mut out: Vec<CMatrix> = e.slices.iter().map(|s| s.matrix().clone()).collect();
    let mut buf = vec![C64::new(0.0, 0.0); m];
    for r in 0..dim {
        for c in 0..dim {
            if e.slices.iter().all(|s| s.matrix()[(r, c)] == C64::new(0.0, 0.0)) {
                continue;
            }
            for (k, s) in e.slices.iter().enumerate() {
                buf[k] = s.matrix()[(r, c)];
            }
            fwd.process(&mut buf);
            for (v, a) in buf.iter_mut().zip(&damp) {
                *v *= a;
            }
            inv.process(&mut buf);
            for (k, o) in out.iter_mut().enumerate() {
                o[(r, c)] = buf[k];
            }
        }
    }
    Ok(EnsembleState { grid: e.grid, slices: out.into_iter().map(DeviationState::trusted).collect() })
}

/// Infinite-diffusion limit: only the uniform (w = 0) component survives.
pub fn decohere_wound(e: &EnsembleState) -> EnsembleState {
    broadcast(&spatial_average(e), e.grid)
}
