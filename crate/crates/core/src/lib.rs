//! Numerical laboratory for smooth Alpert wavelets, frame pseudoprojections,
//! modulated coefficient channels, grid-averaged exponential sums and the
//! Fourier extension operator on the paraboloid `(x, |x|^2)`.
//!
//! Every module is usable on its own; `cli` wires them into reproducible
//! experiments that emit CSV rows and a JSON summary.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values, and
// index loops over small fixed-dimension arrays read better than zips.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cheb;
pub mod cli;
pub mod cutoff;
pub mod error;
pub mod extension;
pub mod field;
pub mod fit;
pub mod frame;
pub mod grid;
pub mod modulation;
pub mod oscillab;
pub mod poly;
pub mod quad;
pub mod wavelet;

pub use error::{LabError, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Largest ambient parameter dimension supported (`d - 1 <= 3`).
pub const MAX_DIM: usize = 3;

/// Integer lattice index; entries past the active dimension are zero.
pub type Idx = [i64; MAX_DIM];
