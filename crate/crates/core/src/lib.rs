//! Transport of a quantum particle in a moving tanh² well.
//!
//! The crate simulates the moving-frame Schrödinger equation with a
//! split-operator scheme, extracts adiabatic tunneling rates Γ(a) from
//! constant-acceleration runs, fits the endpoint disturbance coefficients
//! B_n, and evaluates the closed-form survival estimate
//! p(t) ≈ (1 − d_ini)(1 − d(t)) exp(−∫Γ(|a|) dt). The moving harmonic trap,
//! which is exactly solvable, serves as an analytic check.

pub mod disturbance;
pub mod error;
pub mod fingerprint;
pub mod grid;
pub mod ground;
pub mod harmonic;
pub mod params;
pub mod potential;
pub mod predictor;
pub mod propagator;
pub mod protocols;
mod split;
pub mod sweep;
pub mod tunneling;
pub mod wavefunction;

pub use error::{Error, Result};
pub use grid::{build_grid, Grid, GridSpec};
pub use params::PhysicalParams;
pub use propagator::{RunSettings, Simulator, SurvivalSeries};
pub use protocols::{Endpoint, Family, Protocol};
pub use wavefunction::{inner_product, Wavefunction};
