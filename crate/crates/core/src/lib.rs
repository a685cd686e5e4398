//! Spatially encoded pseudo-pure state preparation for coupled spin
//! ensembles.
//!
//! Two backends cross-check each other:
//!
//! - a dense backend ([`spin`], [`ensemble`], [`encoder`]) that carries a
//!   deviation density matrix per z-slice through RF gates, selective
//!   gradients, averaging and diffusion;
//! - a symbolic backend ([`ledger`]) that tracks the ancilla phase winding
//!   of every data subspace in integer units of `k_0`.
//!
//! [`pulse`] compiles logical gates into ideal pulse programs and
//! [`readout`] turns ensembles into FIDs, echo trains and spectra.

pub mod bits;
pub mod encoder;
pub mod ensemble;
pub mod error;
pub mod ledger;
pub mod molecule;
pub mod pulse;
pub mod readout;
pub mod spin;

pub use bits::Bits;
pub use error::{Error, ErrorClass, Result};
pub use num_complex::Complex64;
