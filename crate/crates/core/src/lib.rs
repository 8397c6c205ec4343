//! Spectral Galerkin simulation of incompressible, heat-conducting power-law
//! fluids with dissipative heating, together with auditors for the energy,
//! entropy and corrected total energy inequalities and for exponential decay
//! toward the steady state `(0, θ̂)`.

pub mod constitutive;
pub mod correction;
pub mod diagnostics;
pub mod harness;
pub mod error;
pub mod galerkin;
pub mod lyapunov;
pub mod quadrature;
pub mod steady;
pub mod timestepper;

pub use error::{Error, Result};
