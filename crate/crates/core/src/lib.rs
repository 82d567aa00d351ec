//! Quantum Fourier transform and period finding on a simulated liquid-state
//! NMR spin system.
//!
//! - [`qstate`]: state vectors, density matrices, spin operators.
//! - [`circuits`]: gate-level QFT and its measurement-conditioned variant.
//! - [`period`]: period finding with a sampled oracle and classical post-processing.
//! - [`pulse`]: RF pulse / coupling / delay programs, compilation and simplification.
//! - [`spin`]: molecule parameters and pulse-program simulation on density matrices.
//! - [`readout`]: spectra, tomography, and readout decoding.

pub mod circuits;
pub mod period;
pub mod pulse;
pub mod qstate;
pub mod readout;
pub mod spin;
