//! Coupled-mode theory of a magnon and a microwave cavity that talk to each
//! other through the traveling waves of a shared waveguide.
//!
//! The waveguide may carry one or several propagation modes. Each engine
//! assembles a 2x2 dynamical matrix, a drive vector and an output functional
//! for given propagation phases; [`system::Network`] evaluates S21 from them
//! in the frequency domain or by direct time integration.

pub mod analysis;
pub mod error;
pub mod fitting;
pub mod io;
pub mod model;
pub mod multi;
pub mod oracle;
pub mod single;
pub mod solver;
pub mod system;

pub use error::{Error, Result};
pub use model::{
    linspace, preset_config, validate, CriticalVariant, DetuningMap, Loading, ModeCoupling,
    OscillatorParams, Scenario, Spectrum, SystemConfig, ValidatedConfig, WaveguideMode,
};
pub use num_complex::Complex64;
pub use system::{CavitySystem, CoupledSystem, Network, OutputFunctional};
