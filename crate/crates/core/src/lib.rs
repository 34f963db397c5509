//! Wave equations u_tt - a(t)²Δu + 2b(t)u_t + m(t)²u = 0 through their Fourier modes:
//! coefficient families, an adaptive mode integrator, Floquet charts, Plancherel energies,
//! decay-rate fits and diffusion profiles. See `examples/` for one program per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod coeffs;
pub mod error;
pub mod floquet;
pub mod modeode;
pub mod quad;
pub mod rates;
pub mod spectral;
