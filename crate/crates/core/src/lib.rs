//! Numerical laboratory for one-dimensional ergodic Schrödinger operators
//! `H = Δ + V_ω`, `V_ω(n) = v(Tⁿω)`.

pub mod cocycle;
pub mod config;
pub mod construction;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod measures;
pub mod operator;
pub mod quadrature;
pub mod sampler;
pub mod thouless;

pub use error::{LabError, Result};
