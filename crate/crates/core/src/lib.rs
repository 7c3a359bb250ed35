//! Interface-modified 1D Schrödinger operators `-h²Δ_θ + V` with a compactly
//! supported barrier: Jost solutions, Green's functions, Krein interface
//! corrections, generalized Fourier transforms, stationary wave operators
//! and propagators, plus an independent finite-difference oracle.

// Negated comparisons are deliberate: they reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod greenfun;
pub mod jost;
pub mod krein;
pub mod linalg;
pub mod ode;
pub mod oracle;
pub mod potential;
pub mod spectral;
pub mod waveop;

pub use error::{Error, Result};

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;
