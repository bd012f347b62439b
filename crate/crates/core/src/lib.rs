//! Spectrum of the half-flux Aharonov–Bohm operator on the unit disk as the
//! pole slides along a diameter.
//!
//! The magnetic problem is never discretised directly. With the pole at
//! `(t, 0)` its eigenvalues are the union of two real mixed problems on the
//! upper half-disk (Dirichlet/Neumann split at the pole), and with the pole
//! at the centre they are the odd-sector eigenvalues of a weighted Laplacian
//! on the unit disk. Both reductions are discretised with P1 finite
//! elements and cross-checked against Bessel-zero closed forms.

// NaN-rejecting `!(x > 0.0)` guards and index loops over coupled arrays are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod eigensolve;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod specfun;
pub mod spectra;
pub mod verify;

pub use error::{Error, Result};
