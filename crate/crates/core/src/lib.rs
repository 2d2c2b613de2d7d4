//! Split-sideband spectroscopy for slowly modulated optomechanical systems.
//!
//! The crate covers the linearized model and its susceptibilities
//! ([`model`]), an exact truncated frequency-comb solver ([`floquet`]) with a
//! perturbative cross-check ([`perturbative`]), a nonlinear stochastic
//! simulator of a particle in a hybrid electro-optical trap ([`langevin`]),
//! the fast-cavity line-spectrum ansatz ([`fast_cavity`]) and the spectral
//! diagnostics built on top of them ([`spectral`]).

pub mod bessel;
pub mod config;
pub mod error;
pub mod fast_cavity;
pub mod floquet;
pub mod langevin;
pub mod linalg;
pub mod model;
pub mod perturbative;
pub mod presets;
pub mod spectral;
pub mod spectrum;
pub mod trajectory_io;
pub mod units;

pub use error::{Error, Result, Warning};
pub use floquet::{
    decompose_output, psd, solve_transfer, Modulation, NoiseChannel, NoiseTransfer, OutputId, SolverOptions,
};
pub use model::{SystemParams, TrapParams};
pub use spectrum::SpectrumGrid;

/// Version of this library.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
